"""KPI collection: per-tick samples, rolling per-agent views, action outcomes.

Samples arrive from the simulator once per second (derived from its 100 ms
radio step) and are kept in per-stream ring buffers bounded by the largest
configured window. Views are pure functions of the ingested state.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

VIEW_WINDOWS_S = {"qoe": 5.0, "load": 30.0, "energy": 300.0}
MAX_WINDOW_S = 600.0

OUTCOME_LAG_S = 10.0
OUTCOME_DEADBAND = 0.05  # relative dead-band for sign tests


class TelemetryError(Exception):
    pass


@dataclass(frozen=True)
class HoEvent:
    t: float
    ue_id: int
    from_cell: int
    to_cell: int
    cause: str  # "native" | "xapp" | "reattach"


@dataclass(frozen=True)
class CellMeas:
    """Per-UE radio measurement of one cell (hypothetical SINR if it served the UE)."""
    cell_id: int
    rsrp_dbm: float
    rsrq_db: float
    sinr_db: float
    active: bool


@dataclass(frozen=True)
class KpiSample:
    t: float
    phase: str
    cell_id: int
    ue_id: Optional[int] = None
    prb_dl: float = 0.0
    pdcp_dl_mbps: float = 0.0
    pdcp_ul_mbps: float = 0.0
    sched_dl_mbps: float = 0.0
    sinr_db: float = 0.0
    rsrp_dbm: float = 0.0
    rsrq_db: float = 0.0
    mcs: int = 0
    ul_interf_dbm: float = 0.0
    attached_ue_count: int = 0


@dataclass(frozen=True)
class CellAgg:
    cell_id: int
    has_data: bool
    prb_mean: float = 0.0
    sched_dl_mean: float = 0.0
    ue_count: int = 0
    ho_arrival_hz: float = 0.0
    mcs_p50: Optional[float] = None
    ul_p95_dbm: Optional[float] = None


@dataclass(frozen=True)
class UeAgg:
    ue_id: int
    has_data: bool
    pdcp_dl_mean: float = 0.0
    sinr_median: float = 0.0
    dwell_s: float = 0.0
    last_ho_t: Optional[float] = None
    serving_cell: Optional[int] = None
    meas: tuple[CellMeas, ...] = ()


@dataclass(frozen=True)
class KpiView:
    agent: str
    window_s: float
    now: float
    cells: dict[int, CellAgg]
    ues: dict[int, UeAgg]


@dataclass(frozen=True)
class ActionOutcomeEntry:
    action_key: str
    kind: str
    subject: tuple
    t_action: float
    t_post: float
    pre: dict[str, float]
    post: dict[str, float]
    effect_sign: dict[str, str]  # metric -> improved | worsened | neutral


@dataclass
class ParamEdit:
    t: float
    old: float
    new: float
    source: str
    reason: str


def percentile(values: list[float], q: float) -> float:
    """Nearest-rank percentile: sort ascending, take element ceil(q*n), 1-based."""
    if not values:
        raise TelemetryError("percentile of empty list")
    if not 0.0 <= q <= 1.0:
        raise TelemetryError(f"q={q} outside [0,1]")
    ordered = sorted(values)
    rank = max(1, min(len(ordered), math.ceil(q * len(ordered))))
    return ordered[rank - 1]


@dataclass
class _PendingOutcome:
    action_key: str
    kind: str
    subject: tuple
    t_action: float
    pre: dict[str, float]


class TelemetryStore:
    def __init__(self, max_window_s: float = MAX_WINDOW_S,
                 windows: Optional[dict[str, float]] = None):
        self.max_window_s = max_window_s
        self.windows = dict(windows or VIEW_WINDOWS_S)
        self._cell_rows: dict[int, deque[KpiSample]] = {}
        self._ue_rows: dict[int, deque[KpiSample]] = {}
        self._ho_events: deque[HoEvent] = deque()
        self._meas: dict[int, tuple[float, tuple[CellMeas, ...]]] = {}
        self._first_seen_t: dict[int, float] = {}
        self._last_t: dict[tuple, float] = {}
        self._pending: dict[str, _PendingOutcome] = {}
        self._outcomes: list[ActionOutcomeEntry] = []
        self._param_history: dict[str, list[ParamEdit]] = {}
        self._now = 0.0

    # -- ingestion -------------------------------------------------------------

    def ingest(self, sample: KpiSample) -> None:
        key = ("ue", sample.ue_id) if sample.ue_id is not None else ("cell", sample.cell_id)
        last = self._last_t.get(key)
        if last is not None and sample.t < last:
            raise TelemetryError(f"time regression on stream {key}: {sample.t} < {last}")
        if not 0.0 <= sample.prb_dl <= 1.0:
            raise TelemetryError(f"prb_dl {sample.prb_dl} outside [0,1]")
        if not 0 <= sample.mcs <= 28:
            raise TelemetryError(f"mcs {sample.mcs} outside [0,28]")
        self._last_t[key] = sample.t
        self._now = max(self._now, sample.t)
        if sample.ue_id is not None:
            self._ue_rows.setdefault(sample.ue_id, deque()).append(sample)
            self._first_seen_t.setdefault(sample.ue_id, sample.t)
        else:
            self._cell_rows.setdefault(sample.cell_id, deque()).append(sample)
        self._prune()

    def ingest_ho_event(self, event: HoEvent) -> None:
        self._ho_events.append(event)
        self._now = max(self._now, event.t)

    def ingest_meas(self, ue_id: int, t: float, meas: tuple[CellMeas, ...]) -> None:
        self._meas[ue_id] = (t, meas)

    def _prune(self) -> None:
        horizon = self._now - self.max_window_s
        for rows in self._cell_rows.values():
            while rows and rows[0].t <= horizon:
                rows.popleft()
        for rows in self._ue_rows.values():
            while rows and rows[0].t <= horizon:
                rows.popleft()
        while self._ho_events and self._ho_events[0].t <= horizon:
            self._ho_events.popleft()

    def sample_count(self) -> int:
        return (sum(len(r) for r in self._cell_rows.values())
                + sum(len(r) for r in self._ue_rows.values()))

    def has_data(self) -> bool:
        return bool(self._cell_rows or self._ue_rows)

    # -- views -------------------------------------------------------------------

    def view(self, agent: str, now: float) -> KpiView:
        if not self.has_data():
            raise TelemetryError("view requested before any sample was ingested")
        w = self.windows[agent]
        lo = now - w
        cells: dict[int, CellAgg] = {}
        for cell_id in sorted(self._cell_rows):
            rows = [s for s in self._cell_rows[cell_id] if lo < s.t <= now]
            ho_in = sum(1 for e in self._ho_events if lo < e.t <= now and e.to_cell == cell_id)
            ue_mcs = [s.mcs for rows_u in self._ue_rows.values()
                      for s in rows_u if lo < s.t <= now and s.cell_id == cell_id]
            if not rows:
                cells[cell_id] = CellAgg(cell_id=cell_id, has_data=False,
                                         ho_arrival_hz=ho_in / w)
                continue
            cells[cell_id] = CellAgg(
                cell_id=cell_id,
                has_data=True,
                prb_mean=sum(s.prb_dl for s in rows) / len(rows),
                sched_dl_mean=sum(s.sched_dl_mbps for s in rows) / len(rows),
                ue_count=rows[-1].attached_ue_count,
                ho_arrival_hz=ho_in / w,
                mcs_p50=percentile([float(m) for m in ue_mcs], 0.5) if ue_mcs else None,
                ul_p95_dbm=percentile([s.ul_interf_dbm for s in rows], 0.95),
            )
        ues: dict[int, UeAgg] = {}
        for ue_id in sorted(self._ue_rows):
            rows = [s for s in self._ue_rows[ue_id] if lo < s.t <= now]
            if not rows:
                ues[ue_id] = UeAgg(ue_id=ue_id, has_data=False)
                continue
            last_ho = max((e.t for e in self._ho_events if e.ue_id == ue_id and e.t <= now),
                          default=None)
            anchor = last_ho if last_ho is not None else self._first_seen_t[ue_id] - 1.0
            meas = self._meas.get(ue_id)
            ues[ue_id] = UeAgg(
                ue_id=ue_id,
                has_data=True,
                pdcp_dl_mean=sum(s.pdcp_dl_mbps for s in rows) / len(rows),
                sinr_median=percentile([s.sinr_db for s in rows], 0.5),
                dwell_s=now - anchor,
                last_ho_t=last_ho,
                serving_cell=rows[-1].cell_id,
                meas=meas[1] if meas is not None and lo < meas[0] <= now else (),
            )
        return KpiView(agent=agent, window_s=w, now=now, cells=cells, ues=ues)

    def ho_events(self, since: float = -math.inf, until: float = math.inf) -> list[HoEvent]:
        return [e for e in self._ho_events if since < e.t <= until]

    def cell_samples(self, cell_id: int, since: float = -math.inf,
                     until: float = math.inf) -> list[KpiSample]:
        return [s for s in self._cell_rows.get(cell_id, ()) if since < s.t <= until]

    def ue_samples(self, ue_id: int, since: float = -math.inf,
                   until: float = math.inf) -> list[KpiSample]:
        return [s for s in self._ue_rows.get(ue_id, ()) if since < s.t <= until]

    def ue_ids(self) -> list[int]:
        return sorted(self._ue_rows)

    def first_sample_t(self) -> float:
        firsts = [r[0].t for r in self._cell_rows.values() if r]
        firsts += [r[0].t for r in self._ue_rows.values() if r]
        return min(firsts) if firsts else math.inf

    # -- action -> outcome log -----------------------------------------------------

    def register_action(self, action_key: str, kind: str, subject: tuple,
                        t_action: float, pre: dict[str, float]) -> None:
        self._pending[action_key] = _PendingOutcome(action_key, kind, subject, t_action, pre)

    def log_outcome(self, action_key: str, lag_s: float, now: float,
                    post: dict[str, float],
                    reverted: bool = False) -> ActionOutcomeEntry:
        pending = self._pending.pop(action_key, None)
        if pending is None:
            raise TelemetryError(f"unknown action {action_key!r}")
        if now < pending.t_action + lag_s:
            raise TelemetryError("outcome lag has not elapsed")
        signs: dict[str, str] = {}
        for metric, pre_v in pending.pre.items():
            post_v = post.get(metric, pre_v)
            band = OUTCOME_DEADBAND * max(abs(pre_v), 1e-9)
            if abs(post_v - pre_v) <= band:
                signs[metric] = "neutral"
            elif post_v > pre_v:
                signs[metric] = "improved"
            else:
                signs[metric] = "worsened"
        if reverted:
            # e.g. a sleep that was woken again inside the lag window
            signs["reverted"] = "worsened"
        entry = ActionOutcomeEntry(
            action_key=pending.action_key, kind=pending.kind, subject=pending.subject,
            t_action=pending.t_action, t_post=now, pre=dict(pending.pre), post=dict(post),
            effect_sign=signs,
        )
        self._outcomes.append(entry)
        return entry

    def pending_actions(self) -> list[_PendingOutcome]:
        return sorted(self._pending.values(), key=lambda p: (p.t_action, p.action_key))

    def outcomes(self, since: float = -math.inf) -> list[ActionOutcomeEntry]:
        return [o for o in self._outcomes if o.t_post > since]

    # -- parameter history -----------------------------------------------------------

    def record_param_edit(self, field_name: str, t: float, old: float, new: float,
                          source: str, reason: str) -> None:
        self._param_history.setdefault(field_name, []).append(
            ParamEdit(t=t, old=old, new=new, source=source, reason=reason))

    def param_history(self, field_name: str) -> list[ParamEdit]:
        return list(self._param_history.get(field_name, []))
