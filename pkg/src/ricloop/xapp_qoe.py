"""QoE firefighter xApp: per-UE threshold checks producing targeted HO proposals.

Runs at 1 Hz on the latest policy snapshot. A UE qualifies for rescue when its
mean DL throughput or median SINR sits below target; the destination is the
best neighbor with enough free-PRB headroom, optionally overridden by a
provider hint that names a cell already in the candidate set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .actions import KIND_HO, ActionProposal
from .policy import QoePolicy
from .provider import KIND_QOE_HINT, PromptRequest
from .telemetry import KpiView

CANDIDATE_TOP_K = 6  # candidate cells come from the UE's top-k RSRP list
MIN_CANDIDATE_SINR_DB = -2.3  # candidate must at least clear the bottom MCS step
MIN_CANDIDATE_RSRQ_DB = -5.0  # stay above the native A2 arm point after the move
A2_ARM_RSRQ_DB = -5.5
SINR_IMPROVE_MARGIN_DB = 1.0  # radio-triggered rescues must actually improve radio


@dataclass(frozen=True)
class Candidate:
    cell_id: int
    sinr_db: float
    free_prb: float


@dataclass(frozen=True)
class QoeCandidate:
    ue_id: int
    candidates: tuple[Candidate, ...]
    n_base: Optional[int]
    n_star: Optional[int]


def build_candidates(view: KpiView, ue_id: int, policy: QoePolicy,
                     sinr_floor_db: float = MIN_CANDIDATE_SINR_DB) -> tuple[Candidate, ...]:
    ue = view.ues[ue_id]
    serving_rsrq = next((m.rsrq_db for m in ue.meas if m.cell_id == ue.serving_cell), 0.0)
    # a UE already below the native arm point has nothing to lose radio-wise;
    # for everyone else a move must not drop it into the arm zone
    rsrq_floor = -1e9 if serving_rsrq <= A2_ARM_RSRQ_DB else MIN_CANDIDATE_RSRQ_DB
    out = []
    for m in ue.meas[:CANDIDATE_TOP_K]:
        if m.cell_id == ue.serving_cell or not m.active:
            continue
        cell = view.cells.get(m.cell_id)
        if cell is None or not cell.has_data:
            continue
        free = 1.0 - cell.prb_mean
        if free >= policy.headroom_min and m.sinr_db >= sinr_floor_db \
                and m.rsrq_db >= rsrq_floor:
            out.append(Candidate(cell_id=m.cell_id, sinr_db=m.sinr_db, free_prb=free))
    return tuple(out)


def base_choice(candidates: tuple[Candidate, ...]) -> Optional[int]:
    """Best by SINR, then free PRB, then lowest cell id."""
    if not candidates:
        return None
    best = sorted(candidates, key=lambda c: (-c.sinr_db, -c.free_prb, c.cell_id))[0]
    return best.cell_id


class QoeXapp:
    agent = "qoe"

    def __init__(self, provider=None, deadline_ms: float = 100.0, seed: int = 0,
                 protected_ues: tuple[int, ...] = ()):
        self.provider = provider
        self.deadline_ms = deadline_ms
        self.seed = seed
        self.protected_ues = tuple(protected_ues)
        self.tick_count = 0

    def _hint(self, ue_id: int, candidates: tuple[Candidate, ...]) -> Optional[int]:
        if self.provider is None or not candidates:
            return None
        req = PromptRequest(
            kind=KIND_QOE_HINT,
            context={"ue": ue_id, "candidates": [
                {"cell_id": c.cell_id, "sinr_db": round(c.sinr_db, 3), "free_prb": round(c.free_prb, 4)}
                for c in candidates]},
            deadline_ms=self.deadline_ms, seed=self.seed,
        )
        resp = self.provider.prompt(req)
        if resp is None or not resp.valid:
            return None
        return resp.payload.get("preferred_neighbor")

    def tick(self, view: KpiView, policy: QoePolicy) -> list[ActionProposal]:
        self.tick_count += 1
        proposals: list[ActionProposal] = []
        ordering = sorted(view.ues, key=lambda u: (u not in self.protected_ues, u))
        for ue_id in ordering:
            ue = view.ues[ue_id]
            if not ue.has_data:
                continue
            dl_low = ue.pdcp_dl_mean < policy.dl_target_mbps
            sinr_low = ue.sinr_median < policy.sinr_target_db
            if not (dl_low or sinr_low) or ue.dwell_s < policy.min_dwell_s:
                continue
            candidates = build_candidates(view, ue_id, policy)
            if sinr_low and not dl_low:
                # purely radio-triggered: only moves that improve radio make sense
                candidates = tuple(c for c in candidates
                                   if c.sinr_db >= ue.sinr_median + SINR_IMPROVE_MARGIN_DB)
            n_base = base_choice(candidates)
            hint = self._hint(ue_id, candidates)
            n_star = hint if hint in {c.cell_id for c in candidates} else n_base
            if n_star is None:
                continue
            proposals.append(ActionProposal.make(
                source=self.agent, kind=KIND_HO, subject=("ue", ue_id),
                params={"target": n_star},
                reason=f"dl={ue.pdcp_dl_mean:.3f}<{policy.dl_target_mbps:.3f}"
                       if ue.pdcp_dl_mean < policy.dl_target_mbps
                       else f"sinr={ue.sinr_median:.2f}<{policy.sinr_target_db:.2f}",
                t_proposed=view.now,
            ))
        return proposals
