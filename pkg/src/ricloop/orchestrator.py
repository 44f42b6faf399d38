"""Non-RT orchestrator: play selection, intent translation, merge, guarded dispatch.

Tick sequence (1 Hz): process TTL reverts, build per-agent views, pick the
active play for the phase, obtain objective weights (provider under deadline,
deterministic heuristic on timeout/invalid), translate weights into policy
values, clamp/rate-limit against the published instance, publish on change,
run the xApps, merge their proposals under the fixed Energy > QoE > Load
priority, enforce guards, and hand the batch to the dispatcher.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

from .actions import (KIND_HO, KIND_OFFSET, KIND_SLEEP, KIND_WAKE, SOURCE_PRIORITY,
                      ActionProposal, Decision, DispatchBatch)
from .policy import (AGENT_ENERGY, AGENT_LOAD, AGENT_QOE, AGENTS, GuardrailSpec,
                     PolicyStore, SOURCE_INTENT, values_from_dict)
from .provider import KIND_L2_BLEND, PromptRequest, heuristic_blend
from .telemetry import KpiView, TelemetryStore

REPUBLISH_DEADBAND_FRACTION = 0.01


@dataclass(frozen=True)
class Intent:
    text: str = "keep the network balanced; protect vulnerable users during incidents"
    protected_ues: tuple[int, ...] = ()
    prb_ceiling: float = 0.85
    phase_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.prb_ceiling <= 1.0:
            raise ValueError("prb_ceiling must be in (0, 1]")


@dataclass(frozen=True)
class IntentWeights:
    w_qoe: float
    w_load: float
    w_energy: float

    def __post_init__(self):
        for name in ("w_qoe", "w_load", "w_energy"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0,1]")


# Per-field (conservative, aggressive) endpoints; the matching agent weight
# interpolates linearly between them. The first two rows are fixed contract
# endpoints; the rest are configuration defaults.
DEFAULT_PRESETS: dict[str, dict[str, tuple[float, float]]] = {
    AGENT_QOE: {
        "dl_target_mbps": (0.3, 0.8),
        "sinr_target_db": (-3.0, 1.0),
        "headroom_min": (0.20, 0.10),
        "min_dwell_s": (5.0, 2.0),
        "ue_ban_s": (30.0, 20.0),
    },
    AGENT_LOAD: {
        "hot_prb": (0.90, 0.80),
        "cool_prb": (0.40, 0.55),
        "cio_step_db": (0.5, 1.5),
        "mcs_min": (6.0, 3.0),
    },
    AGENT_ENERGY: {
        "idle_window_min": (2.5, 1.0),
        "idle_prb_max": (0.03, 0.08),
        "idle_sched_mbps_max": (0.2, 0.5),
        "idle_ue_max": (0.0, 1.0),
        "wake_ue_min": (3.0, 2.0),
        "wake_sched_mbps_min": (2.5, 1.5),
        "ho_arrival_max_hz": (0.05, 0.2),
    },
}

PLAY_QOE_FIRST = "qoe_first"
PLAY_LOAD_FIRST = "load_first"
PLAY_ENERGY_FIRST = "energy_first"

# Weights each play uses for its startup defaults.
_PLAY_WEIGHTS = {
    PLAY_QOE_FIRST: IntentWeights(0.9, 0.5, 0.1),
    PLAY_LOAD_FIRST: IntentWeights(0.5, 0.9, 0.3),
    PLAY_ENERGY_FIRST: IntentWeights(0.3, 0.3, 0.9),
}


@dataclass(frozen=True)
class Play:
    name: str
    defaults: dict[str, dict[str, float]]
    # During the emergency play the load balancer holds its bias; all other
    # plays step stray offsets back toward zero once nothing is hot.
    load_unwind: bool = True


def translate_intent(weights: IntentWeights,
                     presets: Optional[dict[str, dict[str, tuple[float, float]]]] = None,
                     intent: Optional[Intent] = None,
                     platform: Optional[dict[str, float]] = None) -> dict[str, dict[str, float]]:
    """Interpolate every tunable between its conservative and aggressive endpoint.

    Platform-lineage fields (ul_p95_dbm_max) are copied from platform config,
    never interpolated. A prb ceiling in the intent caps hot_prb.
    """
    presets = presets or DEFAULT_PRESETS
    platform = platform or {"ul_p95_dbm_max": -75.0}
    w = {AGENT_QOE: weights.w_qoe, AGENT_LOAD: weights.w_load, AGENT_ENERGY: weights.w_energy}
    out: dict[str, dict[str, float]] = {}
    for agent in AGENTS:
        vals = {}
        for name, (cons, aggr) in presets[agent].items():
            vals[name] = cons + w[agent] * (aggr - cons)
        out[agent] = vals
    if intent is not None and intent.prb_ceiling:
        out[AGENT_LOAD]["hot_prb"] = min(out[AGENT_LOAD]["hot_prb"], intent.prb_ceiling)
    out[AGENT_LOAD]["ul_p95_dbm_max"] = platform["ul_p95_dbm_max"]
    shared_ban = out[AGENT_QOE]["ue_ban_s"]  # one shared value for both HO guards
    out[AGENT_LOAD]["ue_ban_s"] = shared_ban
    return out


def make_play(name: str, presets=None, intent=None, platform=None) -> Play:
    defaults = translate_intent(_PLAY_WEIGHTS[name], presets, intent, platform)
    return Play(name=name, defaults=defaults, load_unwind=name != PLAY_QOE_FIRST)


def select_play(phase: str, cell_prbs: dict[int, float], hot_prb: float,
                overrides: Optional[dict] = None,
                presets=None, intent=None, platform=None) -> Play:
    """Deterministic Level-1 play selection keyed on phase and coarse load."""
    if overrides and phase in overrides:
        return make_play(overrides[phase], presets, intent, platform)
    if phase == "emergency":
        name = PLAY_QOE_FIRST
    elif phase == "recovery":
        name = PLAY_ENERGY_FIRST
    else:
        prbs = list(cell_prbs.values())
        quiet = bool(prbs) and all(p < 0.3 for p in prbs)
        name = PLAY_ENERGY_FIRST if quiet else PLAY_LOAD_FIRST
    return make_play(name, presets, intent, platform)


def merge(proposals: list[ActionProposal]) -> tuple[list[ActionProposal], list[Decision]]:
    """Deduplicate by subject under the fixed priority; permutation invariant.

    Within one subject the highest-priority source wins; remaining ties break
    on earliest t_proposed, then on the params tuple for totality. Output is
    sorted by (priority desc, subject) so downstream guard evaluation is
    reproducible.
    """
    groups: dict[tuple, list[ActionProposal]] = {}
    for p in proposals:
        groups.setdefault(p.subject, []).append(p)
    accepted: list[ActionProposal] = []
    rejected: list[Decision] = []
    for subject in groups:
        ranked = sorted(groups[subject],
                        key=lambda p: (-SOURCE_PRIORITY[p.source], p.t_proposed, p.params, p.kind))
        accepted.append(ranked[0])
        rejected.extend(Decision(p, False, "deduped") for p in ranked[1:])
    accepted.sort(key=lambda p: (-SOURCE_PRIORITY[p.source], p.subject))
    return accepted, rejected


@dataclass
class GuardState:
    """Actuation-side bookkeeping the guards consult and the dispatcher updates."""
    cell_active: dict[int, bool]
    site_of: dict[int, int]
    offsets: dict[tuple[int, int], float] = field(default_factory=dict)
    last_offset_t: dict[tuple[int, int], float] = field(default_factory=dict)
    offset_dispatch_t: dict[int, list[float]] = field(default_factory=dict)
    last_ho_t: dict[int, float] = field(default_factory=dict)        # any cause
    last_wake_t: dict[int, float] = field(default_factory=dict)
    state_transitions: list[tuple[float, int, bool]] = field(default_factory=list)

    def note_ho(self, ue_id: int, t: float) -> None:
        self.last_ho_t[ue_id] = max(t, self.last_ho_t.get(ue_id, -math.inf))

    def note_offset(self, cell: int, neighbor: int, new_value: float, t: float) -> None:
        self.offsets[(cell, neighbor)] = new_value
        self.last_offset_t[(cell, neighbor)] = t
        self.offset_dispatch_t.setdefault(cell, []).append(t)

    def note_cell_state(self, cell: int, active: bool, t: float) -> None:
        self.cell_active[cell] = active
        self.state_transitions.append((t, cell, active))
        if active:
            self.last_wake_t[cell] = t


def enforce_guards(accepted: list[ActionProposal], state: GuardState,
                   spec: GuardrailSpec, view: KpiView,
                   min_dwell_s: float, ue_ban_s: float, now: float) -> DispatchBatch:
    """Apply clamp, cooldown, budget, dwell/ban, and min-active guards in order.

    Evaluation is sequential over the merged list with a state overlay, so an
    accepted sleep makes a later HO toward that cell fail target-sleeping.
    """
    active = dict(state.cell_active)
    budget_used = {c: sum(1 for t in ts if now - t < spec.budget_window_s)
                   for c, ts in state.offset_dispatch_t.items()}
    overlay_offsets = dict(state.offsets)
    decisions: list[Decision] = []
    e2: list[ActionProposal] = []
    o1: list[ActionProposal] = []
    dwell_floor = max(min_dwell_s, spec.global_dwell_floor_s)

    def reject(p: ActionProposal, why: str) -> None:
        decisions.append(Decision(p, False, why))

    def accept(p: ActionProposal) -> None:
        decisions.append(Decision(p, True, "accepted"))
        (e2 if p.kind in (KIND_HO, KIND_OFFSET) else o1).append(p)

    for p in accepted:
        if p.kind == KIND_HO:
            ue_id = p.subject[1]
            target = p.param("target")
            ue = view.ues.get(ue_id)
            if ue is None or not ue.has_data:
                reject(p, "unknown")
                continue
            if not active.get(target, False):
                reject(p, "target-sleeping")
                continue
            if ue.serving_cell == target:
                reject(p, "no-op")
                continue
            if ue.dwell_s < dwell_floor:
                reject(p, "dwell")
                continue
            if now - state.last_ho_t.get(ue_id, -math.inf) < ue_ban_s:
                reject(p, "ue-ban")
                continue
            accept(p)
        elif p.kind == KIND_OFFSET:
            cell, neighbor = p.subject[1], p.subject[2]
            lo, hi = spec.offset_clamp_db
            cur = overlay_offsets.get((cell, neighbor), 0.0)
            effective = min(max(cur + p.param("step_db"), lo), hi) - cur
            if effective == 0.0:
                reject(p, "offset-saturated")
                continue
            if now - state.last_offset_t.get((cell, neighbor), -math.inf) < spec.offset_cooldown_s:
                reject(p, "pair-cooldown")
                continue
            if budget_used.get(cell, 0) >= spec.budget_offset_steps:
                reject(p, "budget")
                continue
            budget_used[cell] = budget_used.get(cell, 0) + 1
            overlay_offsets[(cell, neighbor)] = cur + effective
            adjusted = ActionProposal(source=p.source, kind=p.kind, subject=p.subject,
                                      params=(("step_db", effective),),
                                      reason=p.reason, t_proposed=p.t_proposed)
            accept(adjusted)
        elif p.kind == KIND_SLEEP:
            cell = p.subject[1]
            if not active.get(cell, False):
                reject(p, "no-op")
                continue
            site = state.site_of[cell]
            remaining = sum(1 for c, a in active.items()
                            if state.site_of[c] == site and a and c != cell)
            if remaining < spec.min_active_cells_per_site:
                reject(p, "min-active")
                continue
            active[cell] = False
            accept(p)
        elif p.kind == KIND_WAKE:
            cell = p.subject[1]
            if active.get(cell, False):
                reject(p, "no-op")
                continue
            active[cell] = True
            accept(p)
        else:
            reject(p, "unknown")
    return DispatchBatch(tick_t=now, e2_actions=tuple(e2), o1_actions=tuple(o1),
                         decisions=tuple(decisions))


class Orchestrator:
    def __init__(self, store: PolicyStore, telemetry: TelemetryStore, provider,
                 intent: Intent, guard_state: GuardState,
                 tau_llm_ms: float = 500.0,
                 presets: Optional[dict] = None,
                 platform: Optional[dict[str, float]] = None,
                 phase_overrides: Optional[dict] = None,
                 seed: int = 0,
                 on_event: Optional[Callable[[str, dict], None]] = None):
        self.store = store
        self.telemetry = telemetry
        self.provider = provider
        self.intent = intent
        self.guard_state = guard_state
        self.tau_llm_ms = tau_llm_ms
        self.presets = presets or DEFAULT_PRESETS
        self.platform = platform or {"ul_p95_dbm_max": -75.0}
        self.phase_overrides = dict(phase_overrides or intent.phase_overrides or {})
        self.seed = seed
        self._on_event = on_event or (lambda kind, payload: None)
        self.active_play: Optional[Play] = None
        self._last_translation: dict[str, dict[str, float]] = {}
        self._tuner_overrides: dict[str, dict[str, tuple[float, float]]] = {}

    # -- level 2: weights -------------------------------------------------------

    def _blend_weights(self, phase: str, cell_prbs: dict[int, float],
                       hot_prb: float, play: Play) -> IntentWeights:
        base = heuristic_blend(phase, cell_prbs, hot_prb)
        context = {
            "goal": self.intent.text,
            "phase": phase,
            "playbook": play.name,
            "cell_prb": {str(c): round(v, 3) for c, v in sorted(cell_prbs.items())},
            "base_weights": base,
        }
        req = PromptRequest(kind=KIND_L2_BLEND, context=context,
                            deadline_ms=self.tau_llm_ms, seed=self.seed)
        resp = self.provider.prompt(req) if self.provider is not None else None
        if resp is not None and resp.valid:
            try:
                return IntentWeights(w_qoe=float(resp.payload["w_qoe"]),
                                     w_load=float(resp.payload["w_load"]),
                                     w_energy=float(resp.payload["w_energy"]))
            except (KeyError, TypeError, ValueError):
                pass
        return IntentWeights(**base)

    # -- publication --------------------------------------------------------------

    def publish_defaults(self, play: Play, now: float) -> None:
        for agent in AGENTS:
            if self.store.snapshot(agent) is None:
                self.store.publish(agent, values_from_dict(agent, play.defaults[agent]),
                                   source="default", now=now)

    def _field_width(self, name: str) -> float:
        bound = self.store.spec.fields[name]
        return max(bound.max - bound.min, 1e-12)

    def note_tuner_edit(self, agent: str, field: str, new_value: float) -> None:
        """A tuner edit becomes the field's target until the intent translation
        genuinely moves, at which point the translation re-takes ownership."""
        translation = self._last_translation.get(agent, {}).get(field, new_value)
        self._tuner_overrides.setdefault(agent, {})[field] = (new_value, translation)

    def _target_values(self, agent: str, translation: dict[str, float]) -> dict[str, float]:
        overrides = self._tuner_overrides.get(agent, {})
        target = dict(translation)
        for field, (value, translation_at_edit) in list(overrides.items()):
            moved = abs(translation[field] - translation_at_edit) \
                > REPUBLISH_DEADBAND_FRACTION * self._field_width(field)
            if moved:
                del overrides[field]
            else:
                target[field] = value
        return target

    def _publish_if_changed(self, agent: str, translation: dict[str, float], now: float) -> bool:
        """Step the published instance toward the current target, dead-banded.

        The target is the intent translation overlaid with live tuner edits;
        publication happens only when some field is further than the dead-band
        from its target, which keeps version counters meaningful.
        """
        self._last_translation[agent] = dict(translation)
        target = self._target_values(agent, translation)
        current = self.store.snapshot(agent).values_dict()
        changed = any(
            abs(target[name] - current[name])
            > REPUBLISH_DEADBAND_FRACTION * self._field_width(name)
            for name in target
        )
        if not changed:
            return False
        clamped = self.store.clamp_against_current(agent, target, now)
        if clamped == current:
            return False
        self.store.publish(agent, values_from_dict(agent, clamped), SOURCE_INTENT, now)
        return True

    # -- the 1 Hz tick -----------------------------------------------------------------

    def tick(self, now: float, phase: str,
             proposals_fn: Callable[[KpiView, KpiView, KpiView, Play], list[ActionProposal]]
             ) -> DispatchBatch:
        self.store.process_ttl(now)
        view_qoe = self.telemetry.view(AGENT_QOE, now)
        view_load = self.telemetry.view(AGENT_LOAD, now)
        view_energy = self.telemetry.view(AGENT_ENERGY, now)

        cell_prbs = {c: agg.prb_mean for c, agg in view_load.cells.items() if agg.has_data}
        hot_prb_now = self.store.snapshot(AGENT_LOAD).values.hot_prb \
            if self.store.snapshot(AGENT_LOAD) else 0.85
        play = select_play(phase, cell_prbs, hot_prb_now, self.phase_overrides,
                           self.presets, self.intent, self.platform)
        self.active_play = play

        weights = self._blend_weights(phase, cell_prbs, hot_prb_now, play)
        translated = translate_intent(weights, self.presets, self.intent, self.platform)
        for agent in AGENTS:
            self._publish_if_changed(agent, translated[agent], now)

        proposals = proposals_fn(view_qoe, view_load, view_energy, play)
        for p in proposals:
            self._on_event("propose", p.to_payload())
        accepted, dedup_rejects = merge(proposals)
        qoe_values = self.store.snapshot(AGENT_QOE).values
        batch = enforce_guards(accepted, self.guard_state, self.store.spec, view_qoe,
                               min_dwell_s=qoe_values.min_dwell_s,
                               ue_ban_s=qoe_values.ue_ban_s, now=now)
        all_decisions = tuple(dedup_rejects) + batch.decisions
        batch = DispatchBatch(tick_t=now, e2_actions=batch.e2_actions,
                              o1_actions=batch.o1_actions, decisions=all_decisions)
        for d in all_decisions:
            payload = d.proposal.to_payload()
            payload["proposal_reason"] = payload.pop("reason")
            payload["accepted"] = d.accepted
            payload["reason"] = d.reason
            self._on_event("merge_decision", payload)
        self._on_event("dispatch", {
            "tick_t": now,
            "e2": [a.to_payload() for a in batch.e2_actions],
            "o1": [a.to_payload() for a in batch.o1_actions],
        })
        return batch
