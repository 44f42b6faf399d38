"""Co-scheduled experiment loop and audit-driven replay.

One run: the simulator advances in 100 ms steps; at every 1 s boundary it
emits KPI samples which are ingested into telemetry, then (agentic runs only)
the orchestrator ticks, the dispatcher actuates the guarded batch, and the
tuner gets a chance on its cadence. Baseline runs keep native A2/A4 handover
only. All artifacts land in one output directory: kpi.csv, summary.csv,
audit.log, config.snapshot.yaml.

Replay re-drives the simulator from the audit log with the controllers
bypassed, re-applying recorded dispatcher actions at their recorded ticks;
the resulting kpi.csv is byte-identical to the original run's.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

from . import audit as audit_mod
from .actions import KIND_HO, KIND_OFFSET, KIND_SLEEP, KIND_WAKE, ActionProposal, DispatchBatch
from .audit import AuditError, AuditLog
from .config import RunConfig
from .metrics import KPI_HEADER, compute_summary, write_summary_csv
from .orchestrator import GuardState, Orchestrator
from .policy import (AGENT_ENERGY, AGENT_LOAD, AGENT_QOE, AGENTS, PolicyStore,
                     descriptors_for)
from .provider import InvalidProvider, ProviderDeadlines, RemoteProvider, StubProvider, TimeoutProvider
from .ransim import Simulator
from .telemetry import KpiSample, TelemetryStore
from .tuner import PolicyTuner, TunerConfig
from .xapp_energy import EnergyXapp
from .xapp_load import LoadXapp
from .xapp_qoe import QoeXapp

ARTIFACT_VERSION = 1


class RunnerError(Exception):
    pass


@dataclass
class RunResult:
    out_dir: str
    kpi_path: str
    summary_path: str
    audit_path: str
    snapshot_path: str
    rows: list[dict]
    summary: dict[str, dict[str, float]]
    xapp_tick_counts: dict[str, int]
    tuner_edits: int


def make_provider(cfg: RunConfig):
    kind = cfg.provider.kind
    if kind == "stub":
        return StubProvider(seed=cfg.provider.seed, latency_ms=cfg.provider.latency_ms)
    if kind == "timeout":
        return TimeoutProvider()
    if kind == "invalid":
        return InvalidProvider()
    if kind == "remote":
        return RemoteProvider()
    raise RunnerError(f"unknown provider kind {kind!r}")


def _fmt(value, decimals: int = 6) -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return f"{value:.{decimals}f}"


def _sample_row(s: KpiSample) -> dict:
    if s.ue_id is None:
        return {
            "record": "cell", "t": s.t, "phase": s.phase, "cell_id": s.cell_id,
            "ue_id": None, "prb_dl": s.prb_dl, "pdcp_dl_mbps": None,
            "pdcp_ul_mbps": None, "sched_dl_mbps": s.sched_dl_mbps, "sinr_db": None,
            "rsrp_dbm": None, "rsrq_db": None, "mcs": None,
            "ul_interf_dbm": s.ul_interf_dbm, "attached_ue_count": s.attached_ue_count,
            "ho_from": None, "ho_to": None,
        }
    return {
        "record": "ue", "t": s.t, "phase": s.phase, "cell_id": s.cell_id,
        "ue_id": s.ue_id, "prb_dl": None, "pdcp_dl_mbps": s.pdcp_dl_mbps,
        "pdcp_ul_mbps": s.pdcp_ul_mbps, "sched_dl_mbps": None, "sinr_db": s.sinr_db,
        "rsrp_dbm": s.rsrp_dbm, "rsrq_db": s.rsrq_db, "mcs": s.mcs,
        "ul_interf_dbm": None, "attached_ue_count": None, "ho_from": None, "ho_to": None,
    }


def write_kpi_csv(path: str, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(KPI_HEADER) + "\n")
        for r in rows:
            cols = []
            for key in KPI_HEADER:
                v = r.get(key)
                if key in ("record", "phase"):
                    cols.append(v or "")
                elif key == "t":
                    cols.append(f"{v:.1f}")
                elif key in ("cell_id", "ue_id", "mcs", "attached_ue_count", "ho_from", "ho_to"):
                    cols.append("" if v is None else str(int(v)))
                else:
                    cols.append(_fmt(v))
            fh.write(",".join(cols) + "\n")


class Dispatcher:
    """Applies a guarded batch to the simulator, auditing every actuation."""

    def __init__(self, sim: Simulator, guard_state: GuardState,
                 telemetry: TelemetryStore, log: AuditLog, outcome_lag_s: float):
        self.sim = sim
        self.guard_state = guard_state
        self.telemetry = telemetry
        self.log = log
        self.outcome_lag_s = outcome_lag_s

    def apply(self, batch: DispatchBatch) -> None:
        now = batch.tick_t
        for action in batch.accepted:
            applied, why = self._actuate(action, now)
            self.log.append(now, "dispatcher", "actuation", {
                **action.to_payload(), "result": "applied" if applied else "refused",
                "why": why,
            })

    def _actuate(self, action: ActionProposal, now: float) -> tuple[bool, str]:
        if action.kind == KIND_HO:
            ue_id = action.subject[1]
            applied, why = self.sim.apply_ho(ue_id, action.param("target"))
            if applied:
                self.guard_state.note_ho(ue_id, now)
                view = self.telemetry.view(AGENT_QOE, now)
                pre = {"ue_pdcp_dl": view.ues[ue_id].pdcp_dl_mean,
                       "ue_sinr": view.ues[ue_id].sinr_median}
                self._register(action, now, pre)
            return applied, why
        if action.kind == KIND_OFFSET:
            # CIO-style pair update: biasing A toward B also biases B away from A,
            # so steered UEs do not bounce straight back on the next A4 evaluation.
            cell, neighbor = action.subject[1], action.subject[2]
            step = action.param("step_db")
            new = self.sim.apply_offset(cell, neighbor, step)
            reverse = self.sim.apply_offset(neighbor, cell, -step)
            self.guard_state.note_offset(cell, neighbor, new, now)
            self.guard_state.note_offset(neighbor, cell, reverse, now)
            view = self.telemetry.view(AGENT_LOAD, now)
            agg = view.cells.get(cell)
            pre = {"hot_free_prb": (1.0 - agg.prb_mean) if agg and agg.has_data else 0.0}
            self._register(action, now, pre)
            return True, f"offset={new:+.2f}/{reverse:+.2f}"
        if action.kind in (KIND_SLEEP, KIND_WAKE):
            cell = action.subject[1]
            state = "sleep" if action.kind == KIND_SLEEP else "wake"
            applied, why = self.sim.set_cell_state(cell, state)
            if applied:
                self.guard_state.note_cell_state(cell, action.kind == KIND_WAKE, now)
                self._register(action, now, pre={})
            return applied, why
        return False, "unknown-kind"

    def _register(self, action: ActionProposal, now: float, pre: dict[str, float]) -> None:
        key = f"{action.kind}:{':'.join(str(x) for x in action.subject)}:{now:.0f}"
        self.telemetry.register_action(key, action.kind, action.subject, now, pre)

    def resolve_outcomes(self, now: float) -> None:
        for pending in self.telemetry.pending_actions():
            if now < pending.t_action + self.outcome_lag_s:
                continue
            post: dict[str, float] = {}
            reverted = False
            if pending.kind == KIND_HO:
                ue_id = pending.subject[1]
                view = self.telemetry.view(AGENT_QOE, now)
                ue = view.ues.get(ue_id)
                if ue is not None and ue.has_data:
                    post = {"ue_pdcp_dl": ue.pdcp_dl_mean, "ue_sinr": ue.sinr_median}
            elif pending.kind == KIND_OFFSET:
                cell = pending.subject[1]
                view = self.telemetry.view(AGENT_LOAD, now)
                agg = view.cells.get(cell)
                post = {"hot_free_prb": (1.0 - agg.prb_mean) if agg and agg.has_data else 0.0}
            elif pending.kind == KIND_SLEEP:
                cell = pending.subject[1]
                reverted = any(t > pending.t_action and c == cell and active
                               for t, c, active in self.guard_state.state_transitions)
            elif pending.kind == KIND_WAKE:
                cell = pending.subject[1]
                view = self.telemetry.view(AGENT_LOAD, now)
                agg = view.cells.get(cell)
                post = {"cell_served": agg.sched_dl_mean if agg and agg.has_data else 0.0}
            self.telemetry.log_outcome(pending.action_key, self.outcome_lag_s, now,
                                       post, reverted=reverted)


def _prepare_out_dir(out_dir: str, seed: int, force: bool) -> None:
    os.makedirs(out_dir, exist_ok=True)
    marker = os.path.join(out_dir, "kpi.csv")
    if os.path.exists(marker) and not force:
        raise RunnerError(f"output directory {out_dir} already holds a run; use force to overwrite")


def run_scenario(cfg: RunConfig, out_dir: str, force: bool = False,
                 provider=None,
                 tuner_enabled: Optional[bool] = None,
                 freeze_publication: Optional[tuple[float, float]] = None,
                 replay_actions: Optional[dict[float, list[dict]]] = None) -> RunResult:
    """Execute one full run (or a replay when replay_actions is given)."""
    sim_cfg = cfg.sim
    _prepare_out_dir(out_dir, sim_cfg.seed, force)
    kpi_path = os.path.join(out_dir, "kpi.csv")
    summary_path = os.path.join(out_dir, "summary.csv")
    audit_path = os.path.join(out_dir, "audit.log")
    snapshot_path = os.path.join(out_dir, "config.snapshot.yaml")

    from .config import write_snapshot
    write_snapshot(snapshot_path, cfg)

    sim = Simulator(sim_cfg)
    telemetry = TelemetryStore(windows={
        AGENT_QOE: cfg.windows_s["qoe"], AGENT_LOAD: cfg.windows_s["load"],
        AGENT_ENERGY: cfg.windows_s["energy"]})
    log = AuditLog.open(audit_path)
    controller = "replay" if replay_actions is not None else cfg.controller
    log.append(0.0, "rapp", "run_meta", {
        "seed": sim_cfg.seed, "controller": controller,
        "fingerprint": cfg.fingerprint(), "artifact_version": ARTIFACT_VERSION,
    })

    agentic = controller == "agentic"
    guard_state = GuardState(cell_active={c: True for c in sim.cell_ids},
                             site_of=dict(sim.site_of))
    dispatcher = Dispatcher(sim, guard_state, telemetry, log, cfg.outcome_lag_s)
    orch = None
    tuner = None
    xapps = {}
    if agentic:
        if provider is None:
            provider = make_provider(cfg)
        deadlines = ProviderDeadlines(tau_llm_ms=cfg.provider.tau_llm_ms,
                                      tau_xapp_ms=cfg.provider.tau_xapp_ms)
        store = PolicyStore(cfg.guardrails,
                            on_event=lambda kind, payload: log.append(
                                sim.t, "rapp", kind, payload))
        for agent in AGENTS:
            store.register_schema(agent, descriptors_for(agent))
        adjacency = None  # dense 9-cell grid: every other cell is a neighbor
        xapps = {
            AGENT_QOE: QoeXapp(provider=provider, deadline_ms=deadlines.tau_xapp_ms,
                               seed=cfg.provider.seed,
                               protected_ues=cfg.intent.protected_ues),
            AGENT_LOAD: LoadXapp(provider=provider, deadline_ms=deadlines.tau_xapp_ms,
                                 seed=cfg.provider.seed, capacity_mbps=sim_cfg.capacity_mbps,
                                 top_k=cfg.xapps.load_top_k, adjacency=adjacency),
            AGENT_ENERGY: EnergyXapp(provider=provider, deadline_ms=deadlines.tau_xapp_ms,
                                     seed=cfg.provider.seed, site_of=dict(sim.site_of),
                                     cluster_prb_high=cfg.xapps.cluster_prb_high,
                                     sleep_cooldown_s=cfg.xapps.sleep_cooldown_s),
        }
        orch = Orchestrator(store, telemetry, provider, cfg.intent, guard_state,
                            tau_llm_ms=deadlines.tau_llm_ms,
                            phase_overrides=cfg.intent.phase_overrides,
                            seed=cfg.provider.seed,
                            on_event=lambda kind, payload: log.append(
                                sim.t, "rapp", kind, payload))
        orch.publish_defaults(orch_play_for_start(orch), now=0.0)
        use_tuner = cfg.tuner.enabled if tuner_enabled is None else tuner_enabled
        if use_tuner:
            tuner = PolicyTuner(store, telemetry, guard_state,
                                TunerConfig(cadence_s=cfg.tuner.cadence_s,
                                            ema_alpha=cfg.tuner.ema_alpha,
                                            use_ema=cfg.tuner.use_ema),
                                on_event=lambda kind, payload: log.append(
                                    sim.t, "apt", kind, payload))

    def proposals_fn(view_qoe, view_load, view_energy, play):
        store_ = orch.store
        offsets = dict(guard_state.offsets)
        out = []
        out += xapps[AGENT_QOE].tick(view_qoe, store_.snapshot(AGENT_QOE).values)
        out += xapps[AGENT_LOAD].tick(view_load, store_.snapshot(AGENT_LOAD).values,
                                      offsets, unwind_enabled=play.load_unwind)
        out += xapps[AGENT_ENERGY].tick(view_energy, store_.snapshot(AGENT_ENERGY).values,
                                        telemetry, dict(guard_state.cell_active),
                                        dict(guard_state.last_wake_t),
                                        telemetry.first_sample_t())
        return out

    rows: list[dict] = []
    n_steps = int(round(sim_cfg.duration_s / 0.1))
    for _ in range(n_steps):
        tick = sim.step()
        if tick is None:
            continue
        now = tick.t
        for ev in tick.ho_events:
            telemetry.ingest_ho_event(ev)
            guard_state.note_ho(ev.ue_id, ev.t)
            log.append(ev.t, "sim", "actuation", {
                "kind": "ho", "ue": ev.ue_id, "from": ev.from_cell, "to": ev.to_cell,
                "cause": ev.cause, "result": "applied",
            })
            rows.append({
                "record": "ho", "t": ev.t, "phase": sim.phase_at(min(ev.t, sim_cfg.duration_s)),
                "cell_id": ev.to_cell,
                "ue_id": ev.ue_id, "prb_dl": None, "pdcp_dl_mbps": None,
                "pdcp_ul_mbps": None, "sched_dl_mbps": None, "sinr_db": None,
                "rsrp_dbm": None, "rsrq_db": None, "mcs": None, "ul_interf_dbm": None,
                "attached_ue_count": None, "ho_from": ev.from_cell, "ho_to": ev.to_cell,
            })
        for s in tick.samples:
            telemetry.ingest(s)
            rows.append(_sample_row(s))
        for ue_id, meas in tick.meas.items():
            telemetry.ingest_meas(ue_id, now, meas)

        if replay_actions is not None:
            for payload in replay_actions.get(round(now, 3), []):
                _apply_recorded(sim, payload)
            continue
        if not agentic:
            continue
        if freeze_publication is not None:
            lo, hi = freeze_publication
            orch.store.frozen = lo <= now < hi
        dispatcher.resolve_outcomes(now)
        phase = sim.phase_at(min(now, sim_cfg.duration_s))
        batch = orch.tick(now, phase, proposals_fn)
        dispatcher.apply(batch)
        if tuner is not None:
            phase_end = next(p.end_s for p in sim_cfg.phases if p.name == phase
                             and p.start_s <= now <= p.end_s)
            for edit in tuner.cycle(now, phase, phase_end):
                orch.note_tuner_edit(edit.agent, edit.field, edit.new)

    write_kpi_csv(kpi_path, rows)
    summary = compute_summary(rows, sim_cfg.incident_cells)
    write_summary_csv(summary_path, summary)
    log.close()
    return RunResult(
        out_dir=out_dir, kpi_path=kpi_path, summary_path=summary_path,
        audit_path=audit_path, snapshot_path=snapshot_path, rows=rows, summary=summary,
        xapp_tick_counts={name: app.tick_count for name, app in xapps.items()},
        tuner_edits=len(tuner.edits) if tuner is not None else 0,
    )


def orch_play_for_start(orch: Orchestrator):
    from .orchestrator import select_play
    return select_play("normal", {}, 0.85, orch.phase_overrides,
                       orch.presets, orch.intent, orch.platform)


def _apply_recorded(sim: Simulator, payload: dict) -> None:
    kind = payload["kind"]
    subject = payload["subject"]
    if kind == KIND_HO:
        sim.apply_ho(subject[1], payload["params"]["target"])
    elif kind == KIND_OFFSET:
        step = payload["params"]["step_db"]
        sim.apply_offset(subject[1], subject[2], step)
        sim.apply_offset(subject[2], subject[1], -step)
    elif kind == KIND_SLEEP:
        sim.set_cell_state(subject[1], "sleep")
    elif kind == KIND_WAKE:
        sim.set_cell_state(subject[1], "wake")


def replay_run(audit_path: str, cfg: RunConfig, out_dir: str, force: bool = False) -> RunResult:
    """Re-drive the simulator from a recorded audit log, bypassing all controllers."""
    records = audit_mod.load_log(audit_path)
    meta = audit_mod.run_meta(records)
    if meta["seed"] != cfg.sim.seed:
        raise AuditError(f"log seed {meta['seed']} != config seed {cfg.sim.seed}")
    if meta["fingerprint"] != cfg.fingerprint():
        raise AuditError("log fingerprint does not match this scenario configuration")
    actions: dict[float, list[dict]] = {}
    for r in records:
        if r.kind == "actuation" and r.source == "dispatcher" \
                and r.payload.get("result") == "applied":
            actions.setdefault(round(r.t, 3), []).append(r.payload)
    return run_scenario(cfg, out_dir, force=force, replay_actions=actions)
