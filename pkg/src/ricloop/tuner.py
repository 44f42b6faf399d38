"""Training-free adaptive tuner: sign-test driven, bounded edits to soft fields.

On a slow cadence the tuner inspects recent KPI windows, the action-outcome
log, and parameter history, and proposes at most one small edit per field.
Every edit passes the same clamp/rate-limit path as any other publication and
is audited with old value, new value, source, and reason. Hard guardrails,
budgets, clamps, and platform-lineage fields are never touched.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .orchestrator import GuardState
from .policy import (AGENT_ENERGY, AGENT_LOAD, AGENT_QOE, PolicyStore, SOURCE_TUNER,
                     TUNER_EDITABLE, values_from_dict)
from .telemetry import TelemetryStore


class TunerError(Exception):
    pass


@dataclass(frozen=True)
class TunerRule:
    name: str
    agent: str
    target_field: str
    direction: int          # +1 increase, -1 decrease
    step: float = 0.5       # fraction of the field's max_step_per_edit

    def __post_init__(self):
        if self.target_field not in TUNER_EDITABLE:
            raise TunerError(f"{self.target_field} is not a tuner-editable field")
        if not 0.0 < self.step <= 1.0:
            raise TunerError("step fraction must be in (0,1]")


@dataclass(frozen=True)
class TunerEdit:
    field: str
    agent: str
    old: float
    new: float
    reason: str
    t: float
    ttl_s: Optional[float]
    ema_applied: bool


def ema_smooth(old: float, proposed: float, alpha: float) -> float:
    if not 0.0 < alpha <= 1.0:
        raise TunerError("alpha must be in (0,1]")
    return old + alpha * (proposed - old)


def rule_set() -> list[TunerRule]:
    """The default rule catalog; triggers are evaluated in this order."""
    return [
        TunerRule("qoe_shortfall_headroom_down", AGENT_QOE, "headroom_min", -1),
        TunerRule("pingpong_dwell_up", AGENT_QOE, "min_dwell_s", +1),
        TunerRule("overload_cio_up", AGENT_LOAD, "cio_step_db", +1),
        TunerRule("churn_cool_relax", AGENT_LOAD, "cool_prb", -1),
        TunerRule("sleep_revert_idle_tighten", AGENT_ENERGY, "idle_prb_max", -1),
        TunerRule("idle_tail_prb_down", AGENT_ENERGY, "idle_prb_max", -1),
    ]


@dataclass(frozen=True)
class TunerConfig:
    cadence_s: float = 45.0
    ema_alpha: float = 0.3
    use_ema: bool = True
    persistent_windows: int = 3
    shortfall_ue_fraction: float = 0.25
    min_pingpong_events: int = 2
    churn_spike_factor: float = 2.0
    min_churn_events: int = 3
    min_reversions: int = 2


class PolicyTuner:
    def __init__(self, store: PolicyStore, telemetry: TelemetryStore,
                 guard_state: GuardState, config: Optional[TunerConfig] = None,
                 on_event: Optional[Callable[[str, dict], None]] = None):
        self.store = store
        self.telemetry = telemetry
        self.guard_state = guard_state
        self.config = config or TunerConfig()
        self.rules = rule_set()
        self._on_event = on_event or (lambda kind, payload: None)
        self._last_cycle_t: Optional[float] = None
        self.edits: list[TunerEdit] = []

    # -- window predicates -----------------------------------------------------------

    def _consecutive_windows(self, now: float, window_s: float,
                             predicate: Callable[[float, float], bool]) -> bool:
        n = self.config.persistent_windows
        return all(predicate(now - (i + 1) * window_s, now - i * window_s)
                   for i in range(n))

    def _dl_shortfall(self, lo: float, hi: float, dl_target: float) -> bool:
        totals: dict[int, list[float]] = {}
        for ue_id in self.telemetry.ue_ids():
            vals = [s.pdcp_dl_mbps for s in self.telemetry.ue_samples(ue_id, lo, hi)]
            if vals:
                totals[ue_id] = vals
        if not totals:
            return False
        short = sum(1 for vals in totals.values()
                    if sum(vals) / len(vals) < dl_target)
        return short / len(totals) >= self.config.shortfall_ue_fraction

    def _cell_hot(self, cell: int, lo: float, hi: float, hot_prb: float) -> bool:
        rows = self.telemetry.cell_samples(cell, lo, hi)
        return bool(rows) and (sum(s.prb_dl for s in rows) / len(rows)) > hot_prb

    def _pingpong_count(self, lo: float, hi: float, within_s: float) -> int:
        events = self.telemetry.ho_events(-1e18, hi)
        count = 0
        for i, e in enumerate(events):
            if not lo < e.t <= hi:
                continue
            for prior in reversed(events[:i]):
                if prior.ue_id != e.ue_id:
                    continue
                if e.t - prior.t <= within_s and e.to_cell == prior.from_cell:
                    count += 1
                break
        return count

    # -- triggers (one per rule, in rule order) ------------------------------------------

    def _trigger(self, rule: TunerRule, now: float) -> Optional[str]:
        cfg = self.config
        tele = self.telemetry
        qoe = self.store.snapshot(AGENT_QOE).values
        load = self.store.snapshot(AGENT_LOAD).values
        energy = self.store.snapshot(AGENT_ENERGY).values
        qoe_w = tele.windows[AGENT_QOE]
        load_w = tele.windows[AGENT_LOAD]
        idle_w = energy.idle_window_min * 60.0

        if rule.name == "qoe_shortfall_headroom_down":
            if not self._consecutive_windows(
                    now, qoe_w, lambda lo, hi: self._dl_shortfall(lo, hi, qoe.dl_target_mbps)):
                return None
            history = tele.param_history("headroom_min")
            if not history or history[-1].new <= history[-1].old:
                return None
            t_edit = history[-1].t
            span = now - t_edit
            if span <= 0:
                return None
            rescues_after = sum(1 for o in tele.outcomes()
                                if o.kind == "ho" and t_edit < o.t_action <= now)
            rescues_before = sum(1 for o in tele.outcomes()
                                 if o.kind == "ho" and t_edit - span < o.t_action <= t_edit)
            if rescues_after >= rescues_before:
                return None
            improved = any(o.kind == "ho" and o.t_action > t_edit
                           and o.effect_sign.get("ue_pdcp_dl") == "improved"
                           for o in tele.outcomes())
            if improved:
                return None
            return f"persistent shortfall; headroom raise at t={t_edit:.0f} cut rescues with no tail gain"

        if rule.name == "pingpong_dwell_up":
            within = 2.0 * qoe.min_dwell_s
            recent = self._pingpong_count(now - load_w, now, within)
            trailing = self._pingpong_count(now - 2 * load_w, now - load_w, within)
            if recent >= cfg.min_pingpong_events and recent > trailing:
                return f"ping-pong rising: {trailing}->{recent} in {load_w:.0f}s"
            return None

        if rule.name == "overload_cio_up":
            for cell in sorted(self.guard_state.cell_active):
                if not self._consecutive_windows(
                        now, load_w, lambda lo, hi, c=cell: self._cell_hot(c, lo, hi, load.hot_prb)):
                    continue
                span_lo = now - cfg.persistent_windows * load_w
                steps = sum(1 for t in self.guard_state.offset_dispatch_t.get(cell, ())
                            if span_lo < t <= now)
                if steps >= 2:
                    return f"cell {cell} hot for {cfg.persistent_windows} windows despite {steps} offset steps"
            return None

        if rule.name == "churn_cool_relax":
            recent = len(tele.ho_events(now - load_w, now))
            trailing_events = len(tele.ho_events(now - 4 * load_w, now - load_w))
            trailing_mean = trailing_events / 3.0
            if recent >= cfg.min_churn_events and recent > cfg.churn_spike_factor * trailing_mean:
                return f"HO churn spike: {recent} vs trailing mean {trailing_mean:.1f}"
            return None

        if rule.name == "sleep_revert_idle_tighten":
            transitions = self.guard_state.state_transitions
            reversions = 0
            sleep_at: dict[int, float] = {}
            for t, cell, active in transitions:
                if not active:
                    sleep_at[cell] = t
                elif cell in sleep_at:
                    if t - sleep_at[cell] <= 0.5 * idle_w and now - t <= 2.0 * idle_w:
                        reversions += 1
                    del sleep_at[cell]
            if reversions >= cfg.min_reversions:
                return f"{reversions} sleep->wake reversions inside {2 * idle_w:.0f}s"
            return None

        if rule.name == "idle_tail_prb_down":
            lo = now - 2.0 * idle_w
            if tele.first_sample_t() > lo:
                return None
            slept = {cell for t, cell, active in self.guard_state.state_transitions
                     if not active and t > lo}
            for cell in sorted(self.guard_state.cell_active):
                if not self.guard_state.cell_active[cell] or cell in slept:
                    continue
                rows = tele.cell_samples(cell, lo, now)
                if rows and max(s.prb_dl for s in rows) <= energy.idle_prb_max:
                    return f"cell {cell} idle-tailed for {2 * idle_w:.0f}s yet never slept"
            return None

        return None

    # -- the cycle ----------------------------------------------------------------------------

    def cycle(self, now: float, phase: str, phase_end_s: float) -> list[TunerEdit]:
        """Evaluate the rule catalog; at most one edit per field per cycle."""
        if self._last_cycle_t is not None and now - self._last_cycle_t < self.config.cadence_s:
            return []
        self._last_cycle_t = now
        edited_fields: set[str] = set()
        out: list[TunerEdit] = []
        for rule in self.rules:
            if rule.target_field in edited_fields:
                continue
            evidence = self._trigger(rule, now)
            if evidence is None:
                continue
            snapshot = self.store.snapshot(rule.agent)
            values = snapshot.values_dict()
            old = values[rule.target_field]
            bound = self.store.spec.fields[rule.target_field]
            proposed = old + rule.direction * rule.step * bound.max_step_per_edit
            ema_applied = False
            if self.config.use_ema:
                proposed = ema_smooth(old, proposed, self.config.ema_alpha)
                ema_applied = True
            candidate = dict(values)
            candidate[rule.target_field] = proposed
            clamped = self.store.clamp_against_current(rule.agent, candidate, now)
            new = clamped[rule.target_field]
            if new == old:
                continue
            ttl = (phase_end_s - now) if phase == "emergency" and phase_end_s > now else None
            reason = f"{rule.name}: {evidence}"
            self.store.publish(rule.agent, values_from_dict(rule.agent, clamped),
                               SOURCE_TUNER, now, ttl_s=ttl)
            self.telemetry.record_param_edit(rule.target_field, now, old, new,
                                             SOURCE_TUNER, reason)
            edit = TunerEdit(field=rule.target_field, agent=rule.agent, old=old, new=new,
                             reason=reason, t=now, ttl_s=ttl, ema_applied=ema_applied)
            self.edits.append(edit)
            edited_fields.add(rule.target_field)
            self._on_event("apt_edit", {
                "field": edit.field, "agent": edit.agent, "old": edit.old, "new": edit.new,
                "reason": edit.reason, "ttl_s": edit.ttl_s, "ema": edit.ema_applied,
            })
            out.append(edit)
        return out
