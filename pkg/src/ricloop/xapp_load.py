"""Load balancer xApp: hot/cool pair detection, offset stepping, elephant HO.

Pairs a hot cell with a cool adjacent cell, steps the hot cell's handover
offset toward the cool one, and moves the heaviest eligible UE when the
target passes its health guards. When nothing is hot it unwinds previously
applied offsets one step at a time to avoid lingering bias.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .actions import KIND_HO, KIND_OFFSET, ActionProposal
from .policy import LoadPolicy
from .provider import KIND_LOAD_HINT, PromptRequest
from .ransim import mcs_from_sinr_db, peak_rate_mbps
from .telemetry import KpiView


@dataclass(frozen=True)
class HotCoolPair:
    hot: int
    cool: int
    prb_gap: float

    def key(self) -> tuple[int, int]:
        return (self.hot, self.cool)


def find_pairs(view: KpiView, policy: LoadPolicy,
               adjacency: Optional[dict[int, tuple[int, ...]]] = None) -> list[HotCoolPair]:
    """All (hot, cool) adjacent pairs, widest PRB gap first."""
    pairs = []
    for a, cell_a in view.cells.items():
        if not cell_a.has_data or cell_a.prb_mean < policy.hot_prb:
            continue
        neighbors = adjacency.get(a) if adjacency else None
        for b, cell_b in view.cells.items():
            if b == a or (neighbors is not None and b not in neighbors):
                continue
            if not cell_b.has_data or cell_b.prb_mean > policy.cool_prb:
                continue
            pairs.append(HotCoolPair(hot=a, cool=b, prb_gap=cell_a.prb_mean - cell_b.prb_mean))
    pairs.sort(key=lambda p: (-p.prb_gap, p.hot, p.cool))
    return pairs


def stable_merge_order(pairs: list[HotCoolPair],
                       hint_order: Optional[list[tuple[int, int]]]) -> list[HotCoolPair]:
    """Promote hint-named pairs to the front in the hint's relative order.

    Unmentioned pairs keep their incoming relative order. A hint naming an
    unknown pair, or naming a pair twice, is invalid and leaves the input
    unchanged.
    """
    if not hint_order:
        return list(pairs)
    known = {p.key(): p for p in pairs}
    named = [tuple(k) for k in hint_order]
    if len(set(named)) != len(named) or any(k not in known for k in named):
        return list(pairs)
    promoted = [known[k] for k in named]
    rest = [p for p in pairs if p.key() not in set(named)]
    return promoted + rest


def ue_airtime_share(pdcp_dl_mbps: float, sinr_db: float, capacity_mbps: float) -> float:
    """Flow-level stand-in for per-UE PRB consumption: served rate over own peak rate."""
    peak = peak_rate_mbps(mcs_from_sinr_db(sinr_db), capacity_mbps)
    return pdcp_dl_mbps / peak if peak > 0 else 0.0


class LoadXapp:
    agent = "load"

    # Offsets act immediately; moving a UE is reserved for pairs that stay hot.
    ELEPHANT_PATIENCE_TICKS = 10
    ELEPHANT_COOLDOWN_S = 30.0

    def __init__(self, provider=None, deadline_ms: float = 100.0, seed: int = 0,
                 capacity_mbps: float = 30.0, top_k: int = 1,
                 adjacency: Optional[dict[int, tuple[int, ...]]] = None):
        self.provider = provider
        self.deadline_ms = deadline_ms
        self.seed = seed
        self.capacity_mbps = capacity_mbps
        self.top_k = top_k
        self.adjacency = adjacency
        self.tick_count = 0
        self._hot_streak: dict[int, int] = {}
        self._last_elephant_t: dict[int, float] = {}

    # keep handed-over elephants above the native A2 arm point on the target
    MIN_TARGET_RSRQ_DB = -5.0

    def _target_radio_ok(self, view: KpiView, ue_id: int, target: int) -> bool:
        ue = view.ues.get(ue_id)
        if ue is None or not ue.meas:
            return True  # no measurement available: fall through to cell-level guards
        for m in ue.meas:
            if m.cell_id == target:
                return m.rsrq_db >= self.MIN_TARGET_RSRQ_DB
        return False

    def _base_elephant(self, view: KpiView, hot: int) -> Optional[int]:
        """Heaviest airtime consumer on the hot cell with median SINR >= 0 dB."""
        best, best_share = None, -1.0
        for ue_id in sorted(view.ues):
            ue = view.ues[ue_id]
            if not ue.has_data or ue.serving_cell != hot or ue.sinr_median < 0.0:
                continue
            share = ue_airtime_share(ue.pdcp_dl_mean, ue.sinr_median, self.capacity_mbps)
            if share > best_share:
                best, best_share = ue_id, share
        return best

    def _pair_reachable(self, view: KpiView, pair: HotCoolPair) -> bool:
        """Whether any UE on the hot cell measures the cool cell well enough to use it."""
        for ue_id in sorted(view.ues):
            ue = view.ues[ue_id]
            if not ue.has_data or ue.serving_cell != pair.hot:
                continue
            for m in ue.meas:
                if m.cell_id == pair.cool and m.rsrq_db >= self.MIN_TARGET_RSRQ_DB:
                    return True
        return False

    def _hint(self, pairs: list[HotCoolPair], view: KpiView) -> Optional[dict]:
        if self.provider is None or not pairs:
            return None
        base_elephants = {}
        for p in pairs:
            e = self._base_elephant(view, p.hot)
            if e is not None:
                base_elephants[str(p.hot)] = e
        req = PromptRequest(
            kind=KIND_LOAD_HINT,
            context={"pairs": [list(p.key()) for p in pairs],
                     "base_elephants": base_elephants},
            deadline_ms=self.deadline_ms, seed=self.seed,
        )
        resp = self.provider.prompt(req)
        if resp is None or not resp.valid:
            return None
        return resp.payload

    def tick(self, view: KpiView, policy: LoadPolicy,
             offsets: dict[tuple[int, int], float],
             unwind_enabled: bool = True) -> list[ActionProposal]:
        self.tick_count += 1
        hot_now = {p.hot for p in find_pairs(view, policy, self.adjacency)}
        for cell in list(self._hot_streak):
            if cell not in hot_now:
                del self._hot_streak[cell]
        for cell in hot_now:
            self._hot_streak[cell] = self._hot_streak.get(cell, 0) + 1
        pairs = find_pairs(view, policy, self.adjacency)
        if not pairs:
            return self._unwind(view, policy, offsets) if unwind_enabled else []
        hint = self._hint(pairs, view)
        ordered = stable_merge_order(pairs, hint.get("pair_order") if hint else None)
        proposals: list[ActionProposal] = []
        for pair in ordered[: self.top_k]:
            proposals.append(ActionProposal.make(
                source=self.agent, kind=KIND_OFFSET,
                subject=("pair", pair.hot, pair.cool),
                params={"step_db": policy.cio_step_db},
                reason=f"prb_gap={pair.prb_gap:.3f}", t_proposed=view.now,
            ))
            elephant = None
            if hint:
                hinted = hint.get("elephant", {}).get(str(pair.hot))
                ue = view.ues.get(hinted)
                if ue is not None and ue.has_data and ue.serving_cell == pair.hot \
                        and ue.sinr_median >= 0.0:
                    elephant = hinted
            if elephant is None:
                elephant = self._base_elephant(view, pair.hot)
            if elephant is None:
                continue
            patient = self._hot_streak.get(pair.hot, 0) >= self.ELEPHANT_PATIENCE_TICKS
            cooled = view.now - self._last_elephant_t.get(pair.hot, -1e9) >= self.ELEPHANT_COOLDOWN_S
            if not (patient and cooled):
                continue
            target = view.cells[pair.cool]
            mcs_ok = target.mcs_p50 is None or target.mcs_p50 >= policy.mcs_min
            ul_ok = target.ul_p95_dbm is not None and target.ul_p95_dbm <= policy.ul_p95_dbm_max
            radio_ok = self._target_radio_ok(view, elephant, pair.cool)
            if mcs_ok and ul_ok and radio_ok:
                self._last_elephant_t[pair.hot] = view.now
                proposals.append(ActionProposal.make(
                    source=self.agent, kind=KIND_HO, subject=("ue", elephant),
                    params={"target": pair.cool},
                    reason=f"elephant off cell {pair.hot}", t_proposed=view.now,
                ))
        return proposals

    def _unwind(self, view: KpiView, policy: LoadPolicy,
                offsets: dict[tuple[int, int], float]) -> list[ActionProposal]:
        """One step back toward 0 per tick; residue below one step is left alone.

        Offsets are maintained as mirrored pairs, so only the positive edge of
        each pair is proposed; the dispatcher moves both edges together.
        """
        out = []
        for (cell, neighbor), value in sorted(offsets.items()):
            if value < policy.cio_step_db:
                continue
            out.append(ActionProposal.make(
                source=self.agent, kind=KIND_OFFSET, subject=("pair", cell, neighbor),
                params={"step_db": -policy.cio_step_db},
                reason=f"unwind offset {value:+.2f}", t_proposed=view.now,
            ))
            if len(out) >= self.top_k:
                break
        return out
