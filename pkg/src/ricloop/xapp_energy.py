"""Energy saver xApp: windowed idle detection and wake-condition monitoring.

Sleep intents require every idle test (PRB, scheduled DL, UE count, HO
arrivals) to hold over a fully observed window; wake intents fire on pending
demand. Both travel on the O1 plane and are still subject to the merger's
min-active and cooldown guards downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .actions import KIND_SLEEP, KIND_WAKE, ActionProposal
from .policy import EnergyPolicy
from .provider import KIND_ENERGY_HINT, PromptRequest
from .telemetry import KpiView, TelemetryStore

CLUSTER_PRB_HIGH = 0.7
SLEEP_COOLDOWN_S = 60.0


@dataclass(frozen=True)
class IdleAssessment:
    cell: int
    window_s: float
    observed: bool
    prb_ok: bool = False
    sched_ok: bool = False
    ue_ok: bool = False
    ho_ok: bool = False

    @property
    def idle(self) -> bool:
        return self.observed and self.prb_ok and self.sched_ok and self.ue_ok and self.ho_ok


def assess_idle(cell: int, store: TelemetryStore, policy: EnergyPolicy,
                now: float, first_sample_t: float) -> IdleAssessment:
    """Windowed max-based idle tests; an incompletely observed window is never idle."""
    window_s = policy.idle_window_min * 60.0
    lo = now - window_s
    if first_sample_t > lo:
        return IdleAssessment(cell=cell, window_s=window_s, observed=False)
    rows = store.cell_samples(cell, lo, now)
    if not rows or rows[0].t > lo + 1.5:  # gap at the window head: history was pruned
        return IdleAssessment(cell=cell, window_s=window_s, observed=False)
    ho_in = sum(1 for e in store.ho_events(lo, now) if e.to_cell == cell)
    return IdleAssessment(
        cell=cell, window_s=window_s, observed=True,
        prb_ok=max(s.prb_dl for s in rows) <= policy.idle_prb_max,
        sched_ok=max(s.sched_dl_mbps for s in rows) <= policy.idle_sched_mbps_max,
        ue_ok=max(s.attached_ue_count for s in rows) <= policy.idle_ue_max,
        ho_ok=(ho_in / window_s) <= policy.ho_arrival_max_hz,
    )


def pending_ues(view: KpiView, cell: int) -> list[int]:
    """UEs whose strongest measured cell would be this one if it were awake."""
    out = []
    for ue_id in sorted(view.ues):
        ue = view.ues[ue_id]
        if ue.has_data and ue.meas and ue.meas[0].cell_id == cell:
            out.append(ue_id)
    return out


class EnergyXapp:
    agent = "energy"

    def __init__(self, provider=None, deadline_ms: float = 100.0, seed: int = 0,
                 site_of: Optional[dict[int, int]] = None,
                 cluster_prb_high: float = CLUSTER_PRB_HIGH,
                 sleep_cooldown_s: float = SLEEP_COOLDOWN_S):
        self.provider = provider
        self.deadline_ms = deadline_ms
        self.seed = seed
        self.site_of = site_of or {}
        self.cluster_prb_high = cluster_prb_high
        self.sleep_cooldown_s = sleep_cooldown_s
        self.tick_count = 0

    def _cluster_prb(self, view: KpiView, cell: int) -> float:
        site = self.site_of.get(cell)
        peers = [c for c in view.cells if self.site_of.get(c) == site and c != cell]
        vals = [view.cells[c].prb_mean for c in peers if view.cells[c].has_data]
        return sum(vals) / len(vals) if vals else 0.0

    def _hint(self, idle_verdicts: dict[int, bool], wake_verdicts: dict[int, bool]) -> Optional[dict]:
        if self.provider is None:
            return None
        req = PromptRequest(
            kind=KIND_ENERGY_HINT,
            context={"idle_verdicts": {str(c): v for c, v in sorted(idle_verdicts.items())},
                     "wake_verdicts": {str(c): v for c, v in sorted(wake_verdicts.items())}},
            deadline_ms=self.deadline_ms, seed=self.seed,
        )
        resp = self.provider.prompt(req)
        if resp is None or not resp.valid:
            return None
        return resp.payload

    def tick(self, view: KpiView, policy: EnergyPolicy, store: TelemetryStore,
             cell_states: dict[int, bool], last_wake_t: dict[int, float],
             first_sample_t: float) -> list[ActionProposal]:
        self.tick_count += 1
        now = view.now
        idle_verdicts: dict[int, bool] = {}
        wake_verdicts: dict[int, bool] = {}
        wake_reasons: dict[int, str] = {}
        for cell in sorted(cell_states):
            if cell_states[cell]:
                a = assess_idle(cell, store, policy, now, first_sample_t)
                under_cooldown = now - last_wake_t.get(cell, -1e9) < self.sleep_cooldown_s
                idle_verdicts[cell] = a.idle and not under_cooldown
            else:
                pending = pending_ues(view, cell)
                offered = sum(view.ues[u].pdcp_dl_mean for u in pending)
                cond = (len(pending) >= policy.wake_ue_min
                        or offered >= policy.wake_sched_mbps_min
                        or self._cluster_prb(view, cell) > self.cluster_prb_high)
                wake_verdicts[cell] = cond
                wake_reasons[cell] = (f"pending={len(pending)} offered={offered:.2f} "
                                      f"cluster={self._cluster_prb(view, cell):.2f}")
        hint = self._hint(idle_verdicts, wake_verdicts)
        proposals: list[ActionProposal] = []
        for cell, idle in sorted(idle_verdicts.items()):
            hinted = bool(hint and hint.get("sleep", {}).get(str(cell)))
            if idle or hinted:
                proposals.append(ActionProposal.make(
                    source=self.agent, kind=KIND_SLEEP, subject=("cell", cell), params={},
                    reason="idle-window" if idle else "provider-hint",
                    t_proposed=now,
                ))
        for cell, cond in sorted(wake_verdicts.items()):
            hinted = bool(hint and hint.get("wake", {}).get(str(cell)))
            if cond or hinted:
                proposals.append(ActionProposal.make(
                    source=self.agent, kind=KIND_WAKE, subject=("cell", cell), params={},
                    reason=wake_reasons[cell] if cond else "provider-hint",
                    t_proposed=now,
                ))
        return proposals
