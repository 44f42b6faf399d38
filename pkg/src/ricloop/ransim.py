"""Deterministic flow-level RAN simulator.

Nine sectorized cells on three sites, twenty UEs with mixed mobility and
traffic, a log-distance radio abstraction with fixed per-(cell,UE) shadowing,
demand-proportional capacity sharing capped by an MCS-derived per-UE rate,
and native A2/A4 RSRQ handover. Everything is driven by a 100 ms step on a
logical clock; KPI samples are emitted at 1 s boundaries.

Determinism contract: (seed, config, applied action sequence) fully
determines every emitted sample. All randomness is drawn from per-purpose
seeded streams on a schedule that does not depend on control actions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .telemetry import CellMeas, HoEvent, KpiSample

STEP_DT = 0.1
STEPS_PER_SAMPLE = 10

# RSRQ index conventions for the native A2/A4 baseline:
# rsrq_db = -19.5 + 0.5 * index, so ServingCellThreshold=28 -> -5.5 dB and
# neighborCellOffset=1 -> 0.5 dB.
A2_THRESHOLD_DB = -19.5 + 0.5 * 28
A4_HYSTERESIS_DB = 0.5
A2_PERIOD_S = 0.24
A4_PERIOD_S = 0.48

PHASE_NORMAL = "normal"
PHASE_EMERGENCY = "emergency"
PHASE_RECOVERY = "recovery"


class SimError(Exception):
    pass


@dataclass(frozen=True)
class PhaseSpan:
    name: str
    start_s: float
    end_s: float


@dataclass(frozen=True)
class RadioModel:
    pathloss_exponent: float = 3.5
    shadowing_sigma_db: float = 6.0
    noise_floor_dbm: float = -100.0
    ref_loss_db: float = 32.0          # loss at 1 m
    min_distance_m: float = 10.0
    sector_width_deg: float = 90.0     # 3 dB beamwidth
    sector_backlobe_db: float = 15.0
    sinr_cap_db: float = 30.0          # MCS 28 point of the quantized map
    # a cell interferes in proportion to how busy it is; idle cells still leak
    # reference signals, hence the floor
    activity_floor: float = 0.3


@dataclass(frozen=True)
class TrafficModel:
    # eMBB: a continuous per-UE base rate with on/off bursts riding on top.
    embb_base_mbps: tuple[float, float] = (1.0, 2.5)
    embb_on_s: tuple[float, float] = (8.0, 20.0)
    embb_off_s: tuple[float, float] = (2.0, 8.0)
    embb_burst_mbps: tuple[float, float] = (1.5, 5.0)
    urllc_dl_mbps: float = 0.05
    v2x_ul_mbps: float = 0.2
    mmtc_on_s: tuple[float, float] = (1.0, 2.0)
    mmtc_off_s: tuple[float, float] = (20.0, 60.0)
    mmtc_ul_mbps: float = 0.05


@dataclass(frozen=True)
class SimConfig:
    seed: int = 1
    duration_s: float = 300.0
    phases: tuple[PhaseSpan, ...] = (
        PhaseSpan(PHASE_NORMAL, 0.0, 100.0),
        PhaseSpan(PHASE_EMERGENCY, 100.0, 200.0),
        PhaseSpan(PHASE_RECOVERY, 200.0, 300.0),
    )
    n_sites: int = 3
    sectors_per_site: int = 3
    isd_m: float = 500.0
    area_m: tuple[float, float] = (1500.0, 1500.0)
    tx_power_dbm: float = 46.0
    capacity_mbps: float = 60.0
    n_ues: int = 20
    pedestrian_speed_mps: float = 3.0
    vehicular_speed_mps: float = 15.0
    vehicular_reversal_s: float = 60.0
    turn_interval_s: tuple[float, float] = (10.0, 30.0)
    incident_cells: tuple[int, ...] = (1, 3, 9)
    surge_multiplier: float = 4.0
    min_active_cells_per_site: int = 1
    radio: RadioModel = field(default_factory=RadioModel)
    traffic: TrafficModel = field(default_factory=TrafficModel)

    def __post_init__(self):
        if self.surge_multiplier < 1:
            raise SimError("surge_multiplier must be >= 1")
        spans = sorted(self.phases, key=lambda p: p.start_s)
        t = 0.0
        for span in spans:
            if not math.isclose(span.start_s, t):
                raise SimError("phases must partition [0, duration]")
            if span.end_s <= span.start_s:
                raise SimError("empty phase span")
            t = span.end_s
        if not math.isclose(t, self.duration_s):
            raise SimError("phases must cover the full duration")


@dataclass
class _UeState:
    ue_id: int
    pos: np.ndarray
    heading: float
    speed: float
    vehicular: bool
    turn_left_s: float
    embb_base: float
    embb_on: bool
    embb_left_s: float
    embb_burst: float
    mmtc_on: bool
    mmtc_left_s: float
    serving: int = 0
    dwell_s: float = 0.0
    a2_armed: bool = False
    demand_dl: float = 0.0
    demand_ul: float = 0.0


@dataclass(frozen=True)
class TickOutput:
    t: float
    phase: str
    samples: tuple[KpiSample, ...]
    ho_events: tuple[HoEvent, ...]
    meas: dict[int, tuple[CellMeas, ...]]


def _rng(seed: int, *tag: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, *tag))))


MCS_SINR_FLOOR_DB = -3.0


def mcs_from_sinr_db(sinr_db: float, cap_db: float = 30.0) -> int:
    """SINR quantized onto the 0..28 MCS grid, linear in dB between the floor
    (MCS 0) and the cap (MCS 28)."""
    span = cap_db - MCS_SINR_FLOOR_DB
    return int(np.clip(round(28.0 * (sinr_db - MCS_SINR_FLOOR_DB) / span), 0, 28))


def peak_rate_mbps(mcs: int, capacity_mbps: float) -> float:
    # MCS 0 keeps a small nonzero rate; deep-edge UEs starve only under load.
    return capacity_mbps * max(mcs, 0.02) / 28.0


def share_cell_capacity(demands: list[float], peaks: list[float]) -> tuple[list[float], float]:
    """Flow-level PF surrogate: demand capped by the UE's own peak rate, then
    airtime scaled down proportionally when the cell is overloaded.

    Returns (served rates, prb utilization); utilization is the summed airtime
    each UE needs at its own rate, saturated at 1.
    """
    wanted = [min(d, p) for d, p in zip(demands, peaks)]
    airtime = [w / p if p > 0 else 0.0 for w, p in zip(wanted, peaks)]
    total = sum(airtime)
    if total <= 1.0:
        return wanted, total
    scale = 1.0 / total
    return [w * scale for w in wanted], 1.0


class Simulator:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.t = 0.0
        self._step_idx = 0
        self.n_cells = cfg.n_sites * cfg.sectors_per_site
        self.cell_ids = list(range(1, self.n_cells + 1))
        self._build_topology()
        self._shadow = _rng(cfg.seed, 1).normal(0.0, cfg.radio.shadowing_sigma_db,
                                                size=(self.n_cells, cfg.n_ues))
        self._build_ues()
        self.offsets: dict[int, dict[int, float]] = {c: {} for c in self.cell_ids}
        self.active: dict[int, bool] = {c: True for c in self.cell_ids}
        self._activity = np.full(self.n_cells, 0.5)
        self._pending_events: list[HoEvent] = []
        self._update_radio()
        for ue in self._ues:
            ue.serving = int(np.argmax(self._rsrp[:, ue.ue_id - 1])) + 1
        self._reset_accumulators()

    # -- topology / population ----------------------------------------------------

    def _build_topology(self):
        cx, cy = self.cfg.area_m[0] / 2.0, self.cfg.area_m[1] / 2.0
        r = self.cfg.isd_m / math.sqrt(3.0)
        sites = [
            (cx - self.cfg.isd_m / 2.0, cy - r / 2.0),
            (cx + self.cfg.isd_m / 2.0, cy - r / 2.0),
            (cx, cy + r),
        ][: self.cfg.n_sites]
        pos, azi, site_of = [], [], {}
        for s_idx, (sx, sy) in enumerate(sites):
            for sector in range(self.cfg.sectors_per_site):
                cell_id = s_idx * self.cfg.sectors_per_site + sector + 1
                pos.append((sx, sy))
                azi.append(sector * (360.0 / self.cfg.sectors_per_site))
                site_of[cell_id] = s_idx + 1
        self._cell_pos = np.array(pos)
        self._cell_azi = np.array(azi)
        self.site_of = site_of

    def _build_ues(self):
        cfg = self.cfg
        init = _rng(cfg.seed, 2)
        n_vehicular = cfg.n_ues - round(cfg.n_ues * 2 / 3)
        self._ues: list[_UeState] = []
        for ue_id in range(1, cfg.n_ues + 1):
            vehicular = ue_id > cfg.n_ues - n_vehicular
            pos = np.array([init.uniform(0, cfg.area_m[0]), init.uniform(0, cfg.area_m[1])])
            heading = init.uniform(0, 2 * math.pi)
            tr = cfg.traffic
            embb_on = bool(init.uniform() < 0.5)
            self._ues.append(_UeState(
                ue_id=ue_id, pos=pos, heading=heading,
                speed=cfg.vehicular_speed_mps if vehicular else cfg.pedestrian_speed_mps,
                vehicular=vehicular,
                turn_left_s=init.uniform(*cfg.turn_interval_s),
                embb_base=init.uniform(*tr.embb_base_mbps),
                embb_on=embb_on,
                embb_left_s=init.uniform(*(tr.embb_on_s if embb_on else tr.embb_off_s)),
                embb_burst=init.uniform(*tr.embb_burst_mbps),
                mmtc_on=False,
                mmtc_left_s=init.uniform(*tr.mmtc_off_s),
            ))
        self._mob_rng = {u.ue_id: _rng(cfg.seed, 3, u.ue_id) for u in self._ues}
        self._tr_rng = {u.ue_id: _rng(cfg.seed, 4, u.ue_id) for u in self._ues}

    # -- phases ------------------------------------------------------------------

    def phase_at(self, t: float) -> str:
        if t < 0 or t > self.cfg.duration_s:
            raise SimError(f"t={t} outside [0, {self.cfg.duration_s}]")
        for span in self.cfg.phases:
            if span.start_s <= t < span.end_s:
                return span.name
        return self.cfg.phases[-1].name  # t == duration

    # -- radio -----------------------------------------------------------------------

    def _update_radio(self):
        rm = self.cfg.radio
        ue_pos = np.array([u.pos for u in self._ues])          # (n_ues, 2)
        diff = ue_pos[None, :, :] - self._cell_pos[:, None, :]  # (cells, ues, 2)
        dist = np.maximum(np.hypot(diff[..., 0], diff[..., 1]), rm.min_distance_m)
        bearing = np.degrees(np.arctan2(diff[..., 1], diff[..., 0]))
        off = (bearing - self._cell_azi[:, None] + 180.0) % 360.0 - 180.0
        gain = -np.minimum(12.0 * (off / rm.sector_width_deg) ** 2, rm.sector_backlobe_db)
        pl = rm.ref_loss_db + 10.0 * rm.pathloss_exponent * np.log10(dist)
        self._rsrp = self.cfg.tx_power_dbm + gain - pl - self._shadow
        lin = 10.0 ** (self._rsrp / 10.0)
        active_mask = np.array([self.active[c] for c in self.cell_ids], dtype=float)
        noise = 10.0 ** (rm.noise_floor_dbm / 10.0)
        weight = (active_mask * self._activity)[:, None]
        weighted_total = (lin * weight).sum(axis=0)               # per UE
        interf = weighted_total[None, :] - lin * weight
        self._sinr_db = 10.0 * np.log10(lin / (interf + noise))
        rssi = weighted_total[None, :] + lin * (1.0 - active_mask[:, None]) + noise
        self._rsrq_db = 10.0 * np.log10(lin / rssi)

    def _serving_idx(self, ue: _UeState) -> int:
        return ue.serving - 1

    def ue_sinr_db(self, ue_id: int) -> float:
        ue = self._ues[ue_id - 1]
        return float(self._sinr_db[self._serving_idx(ue), ue_id - 1])

    def measurement_report(self, ue_id: int) -> tuple[CellMeas, ...]:
        """All-cell radio snapshot for one UE, strongest RSRP first.

        Sleeping cells are reported with their would-be values so the control
        stack can reason about wake decisions.
        """
        col = ue_id - 1
        order = sorted(self.cell_ids,
                       key=lambda c: (-self._rsrp[c - 1, col], c))
        return tuple(CellMeas(
            cell_id=c,
            rsrp_dbm=float(self._rsrp[c - 1, col]),
            rsrq_db=float(self._rsrq_db[c - 1, col]),
            sinr_db=float(self._sinr_db[c - 1, col]),
            active=self.active[c],
        ) for c in order)

    def geometric_best_cell(self, ue_id: int) -> int:
        """Strongest cell by pure geometry, ignoring sleep state (incident-zone test)."""
        return int(np.argmax(self._rsrp[:, ue_id - 1])) + 1

    # -- mobility / traffic -----------------------------------------------------------

    def _move(self, ue: _UeState, dt: float):
        cfg = self.cfg
        if ue.vehicular:
            period = cfg.vehicular_reversal_s
            if period > 0 and (self.t % period) + dt >= period:
                ue.heading = (ue.heading + math.pi) % (2 * math.pi)
        else:
            ue.turn_left_s -= dt
            if ue.turn_left_s <= 0:
                rng = self._mob_rng[ue.ue_id]
                ue.heading = rng.uniform(0, 2 * math.pi)
                ue.turn_left_s = rng.uniform(*cfg.turn_interval_s)
        nxt = ue.pos + ue.speed * dt * np.array([math.cos(ue.heading), math.sin(ue.heading)])
        for axis, bound in enumerate(cfg.area_m):
            if nxt[axis] < 0 or nxt[axis] > bound:
                nxt[axis] = min(max(nxt[axis], 0.0), bound)
                ue.heading = (math.pi - ue.heading) if axis == 0 else -ue.heading
                ue.heading %= 2 * math.pi
        ue.pos = nxt

    def _update_traffic(self, ue: _UeState, dt: float, phase: str):
        tr = self.cfg.traffic
        rng = self._tr_rng[ue.ue_id]
        ue.embb_left_s -= dt
        if ue.embb_left_s <= 0:
            ue.embb_on = not ue.embb_on
            ue.embb_left_s = rng.uniform(*(tr.embb_on_s if ue.embb_on else tr.embb_off_s))
            if ue.embb_on:
                ue.embb_burst = rng.uniform(*tr.embb_burst_mbps)
        ue.mmtc_left_s -= dt
        if ue.mmtc_left_s <= 0:
            ue.mmtc_on = not ue.mmtc_on
            ue.mmtc_left_s = rng.uniform(*(tr.mmtc_on_s if ue.mmtc_on else tr.mmtc_off_s))
        dl = ue.embb_base + (ue.embb_burst if ue.embb_on else 0.0) + tr.urllc_dl_mbps
        if phase == PHASE_EMERGENCY and self.geometric_best_cell(ue.ue_id) in self.cfg.incident_cells:
            dl *= self.cfg.surge_multiplier
        ue.demand_dl = dl
        ue.demand_ul = (tr.v2x_ul_mbps if ue.vehicular else 0.0) + \
                       (tr.mmtc_ul_mbps if ue.mmtc_on else 0.0)

    # -- native A2/A4 handover ----------------------------------------------------------

    def _cadence_fires(self, period: float, dt: float) -> bool:
        return math.floor((self.t + dt) / period) > math.floor(self.t / period)

    def native_ho_check(self, ue_id: int) -> Optional[tuple[int, int]]:
        """Evaluate the A4 decision for an armed UE. Returns (from, to) or None."""
        ue = self._ues[ue_id - 1]
        if not ue.a2_armed:
            return None
        col = ue_id - 1
        serving_rsrq = float(self._rsrq_db[self._serving_idx(ue), col])
        best, best_score = None, -math.inf
        for c in self.cell_ids:
            if c == ue.serving or not self.active[c]:
                continue
            score = float(self._rsrq_db[c - 1, col]) + self.offsets[ue.serving].get(c, 0.0)
            if score > best_score or (score == best_score and (best is None or c < best)):
                best, best_score = c, score
        if best is not None and best_score > serving_rsrq + A4_HYSTERESIS_DB:
            return (ue.serving, best)
        return None

    def _run_native_ho(self, dt: float):
        a2 = self._cadence_fires(A2_PERIOD_S, dt)
        a4 = self._cadence_fires(A4_PERIOD_S, dt)
        if not a2 and not a4:
            return
        for ue in self._ues:
            col = ue.ue_id - 1
            if a2:
                ue.a2_armed = float(self._rsrq_db[self._serving_idx(ue), col]) < A2_THRESHOLD_DB
            if a4:
                decision = self.native_ho_check(ue.ue_id)
                if decision is not None:
                    frm, to = decision
                    self._attach(ue, to, cause="native", frm=frm)

    def _attach(self, ue: _UeState, target: int, cause: str, frm: int):
        ue.serving = target
        ue.dwell_s = 0.0
        ue.a2_armed = False
        self._pending_events.append(HoEvent(t=round(self.t, 6), ue_id=ue.ue_id,
                                            from_cell=frm, to_cell=target, cause=cause))

    # -- actuation surface (dispatcher-only entry points) ------------------------------------

    def apply_ho(self, ue_id: int, target_cell: int) -> tuple[bool, str]:
        if not 1 <= ue_id <= self.cfg.n_ues:
            return False, "unknown-ue"
        if target_cell not in self.active:
            return False, "unknown-cell"
        if not self.active[target_cell]:
            return False, "target-sleeping"
        ue = self._ues[ue_id - 1]
        if ue.serving == target_cell:
            return False, "no-op"
        self._attach(ue, target_cell, cause="xapp", frm=ue.serving)
        return True, "applied"

    def apply_offset(self, cell: int, neighbor: int, step_db: float) -> float:
        lo, hi = -6.0, 6.0
        cur = self.offsets[cell].get(neighbor, 0.0)
        new = min(max(cur + step_db, lo), hi)
        self.offsets[cell][neighbor] = new
        return new

    def set_cell_state(self, cell: int, state: str) -> tuple[bool, str]:
        if cell not in self.active:
            return False, "unknown-cell"
        if state == "sleep":
            if not self.active[cell]:
                return False, "no-op"
            site = self.site_of[cell]
            remaining = sum(1 for c in self.cell_ids
                            if self.site_of[c] == site and self.active[c] and c != cell)
            if remaining < self.cfg.min_active_cells_per_site:
                return False, "min-active"
            self.active[cell] = False
            self._update_radio()
            for ue in self._ues:
                if ue.serving == cell:
                    col = ue.ue_id - 1
                    order = sorted((c for c in self.cell_ids if self.active[c]),
                                   key=lambda c: (-self._rsrp[c - 1, col], c))
                    self._attach(ue, order[0], cause="reattach", frm=cell)
            return True, "applied"
        if state == "wake":
            if self.active[cell]:
                return False, "no-op"
            self.active[cell] = True
            self._update_radio()
            return True, "applied"
        return False, "unknown-state"

    def attached_ues(self, cell: int) -> list[int]:
        return [u.ue_id for u in self._ues if u.serving == cell]

    def ue_serving(self, ue_id: int) -> int:
        return self._ues[ue_id - 1].serving

    def ue_dwell(self, ue_id: int) -> float:
        return self._ues[ue_id - 1].dwell_s

    # -- stepping -------------------------------------------------------------------------

    def _reset_accumulators(self):
        self._acc = {
            "cell_prb": {c: 0.0 for c in self.cell_ids},
            "cell_sched": {c: 0.0 for c in self.cell_ids},
            "cell_ul_interf": {c: 0.0 for c in self.cell_ids},
            "ue_dl": {u.ue_id: 0.0 for u in self._ues},
            "ue_ul": {u.ue_id: 0.0 for u in self._ues},
            "steps": 0,
        }

    def step(self) -> Optional[TickOutput]:
        """Advance 100 ms; at 1 s boundaries return the emitted samples."""
        dt = STEP_DT
        phase = self.phase_at(min(self.t, self.cfg.duration_s))
        for ue in self._ues:
            self._move(ue, dt)
            self._update_traffic(ue, dt, phase)
        self._update_radio()
        self._run_native_ho(dt)

        served_dl: dict[int, float] = {}
        prb: dict[int, float] = {}
        sched: dict[int, float] = {}
        for c in self.cell_ids:
            ues = [u for u in self._ues if u.serving == c]
            if not self.active[c] or not ues:
                prb[c], sched[c] = 0.0, 0.0
                for u in ues:
                    served_dl[u.ue_id] = 0.0
                continue
            demands = [u.demand_dl for u in ues]
            peaks = [peak_rate_mbps(mcs_from_sinr_db(
                float(self._sinr_db[c - 1, u.ue_id - 1]), self.cfg.radio.sinr_cap_db),
                self.cfg.capacity_mbps) for u in ues]
            rates, util = share_cell_capacity(demands, peaks)
            prb[c] = util
            sched[c] = sum(rates)
            for u, r in zip(ues, rates):
                served_dl[u.ue_id] = r
        ul_interf = self._ul_interference()

        floor = self.cfg.radio.activity_floor
        for c in self.cell_ids:
            self._activity[c - 1] = floor + (1.0 - floor) * prb[c]

        acc = self._acc
        for c in self.cell_ids:
            acc["cell_prb"][c] += prb[c]
            acc["cell_sched"][c] += sched[c]
            acc["cell_ul_interf"][c] += ul_interf[c]
        for ue in self._ues:
            acc["ue_dl"][ue.ue_id] += served_dl.get(ue.ue_id, 0.0)
            acc["ue_ul"][ue.ue_id] += ue.demand_ul
            ue.dwell_s += dt
        acc["steps"] += 1

        self.t = round(self.t + dt, 6)
        self._step_idx += 1
        if self._step_idx % STEPS_PER_SAMPLE == 0:
            return self._emit(phase_at_boundary=self.phase_at(min(self.t, self.cfg.duration_s)))
        return None

    def _ul_interference(self) -> dict[int, float]:
        rm = self.cfg.radio
        noise = 10.0 ** (rm.noise_floor_dbm / 10.0)
        out = {}
        for c in self.cell_ids:
            total = noise
            for ue in self._ues:
                if ue.serving == c or ue.demand_ul <= 0:
                    continue
                d = max(float(np.hypot(*(ue.pos - self._cell_pos[c - 1]))), rm.min_distance_m)
                pl = rm.ref_loss_db + 10.0 * rm.pathloss_exponent * math.log10(d)
                rx = 23.0 - pl - self._shadow[c - 1, ue.ue_id - 1]
                total += min(1.0, ue.demand_ul) * 10.0 ** (rx / 10.0)
            out[c] = 10.0 * math.log10(total)
        return out

    def _emit(self, phase_at_boundary: str) -> TickOutput:
        acc = self._acc
        n = acc["steps"]
        t = self.t
        samples: list[KpiSample] = []
        for c in self.cell_ids:
            samples.append(KpiSample(
                t=t, phase=phase_at_boundary, cell_id=c,
                prb_dl=acc["cell_prb"][c] / n,
                sched_dl_mbps=acc["cell_sched"][c] / n,
                ul_interf_dbm=acc["cell_ul_interf"][c] / n,
                attached_ue_count=len(self.attached_ues(c)),
            ))
        meas: dict[int, tuple[CellMeas, ...]] = {}
        for ue in self._ues:
            col = ue.ue_id - 1
            row = self._serving_idx(ue)
            sinr = float(self._sinr_db[row, col])
            samples.append(KpiSample(
                t=t, phase=phase_at_boundary, cell_id=ue.serving, ue_id=ue.ue_id,
                pdcp_dl_mbps=acc["ue_dl"][ue.ue_id] / n,
                pdcp_ul_mbps=acc["ue_ul"][ue.ue_id] / n,
                sinr_db=sinr,
                rsrp_dbm=float(self._rsrp[row, col]),
                rsrq_db=float(self._rsrq_db[row, col]),
                mcs=mcs_from_sinr_db(sinr, self.cfg.radio.sinr_cap_db),
            ))
            meas[ue.ue_id] = self.measurement_report(ue.ue_id)
        events = tuple(self._pending_events)
        self._pending_events = []
        self._reset_accumulators()
        return TickOutput(t=t, phase=phase_at_boundary, samples=tuple(samples),
                          ho_events=events, meas=meas)
