"""Scenario configuration: YAML file with a published JSON-schema.

Guardrail and policy keys use the catalog field names (lower snake case).
Unknown keys are rejected by the schema so typos fail loudly. Every run
writes the fully resolved configuration back out as its snapshot, and the
snapshot (minus seed/controller) is fingerprinted for replay/compare checks.
"""

from __future__ import annotations

import hashlib
import importlib.resources
import json
from dataclasses import dataclass, field

import jsonschema
import yaml

from .orchestrator import Intent
from .policy import FieldBound, GuardrailSpec, default_guardrails
from .ransim import PhaseSpan, RadioModel, SimConfig, TrafficModel


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class ProviderConfig:
    kind: str = "stub"        # stub | timeout | invalid | remote
    seed: int = 7
    latency_ms: float = 0.0
    tau_llm_ms: float = 500.0
    tau_xapp_ms: float = 100.0


@dataclass(frozen=True)
class TunerSettings:
    enabled: bool = True
    cadence_s: float = 45.0
    ema_alpha: float = 0.3
    use_ema: bool = True


@dataclass(frozen=True)
class XappSettings:
    load_top_k: int = 1
    cluster_prb_high: float = 0.7
    sleep_cooldown_s: float = 60.0


@dataclass(frozen=True)
class RunConfig:
    sim: SimConfig
    guardrails: GuardrailSpec
    intent: Intent
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    tuner: TunerSettings = field(default_factory=TunerSettings)
    xapps: XappSettings = field(default_factory=XappSettings)
    windows_s: dict = field(default_factory=lambda: {"qoe": 5.0, "load": 30.0, "energy": 300.0})
    outcome_lag_s: float = 10.0
    controller: str = "agentic"

    def resolved_dict(self) -> dict:
        sim = self.sim
        return {
            "scenario": {
                "seed": sim.seed,
                "duration_s": sim.duration_s,
                "controller": self.controller,
                "phases": [{"name": p.name, "start_s": p.start_s, "end_s": p.end_s}
                           for p in sim.phases],
                "incident_cells": list(sim.incident_cells),
                "surge_multiplier": sim.surge_multiplier,
            },
            "topology": {
                "n_sites": sim.n_sites, "sectors_per_site": sim.sectors_per_site,
                "isd_m": sim.isd_m, "area_m": list(sim.area_m),
                "tx_power_dbm": sim.tx_power_dbm, "capacity_mbps": sim.capacity_mbps,
            },
            "ues": {
                "count": sim.n_ues,
                "pedestrian_speed_mps": sim.pedestrian_speed_mps,
                "vehicular_speed_mps": sim.vehicular_speed_mps,
                "vehicular_reversal_s": sim.vehicular_reversal_s,
            },
            "radio": {
                "pathloss_exponent": sim.radio.pathloss_exponent,
                "shadowing_sigma_db": sim.radio.shadowing_sigma_db,
                "noise_floor_dbm": sim.radio.noise_floor_dbm,
            },
            "traffic": {
                "embb_on_s": list(sim.traffic.embb_on_s),
                "embb_off_s": list(sim.traffic.embb_off_s),
                "embb_base_mbps": list(sim.traffic.embb_base_mbps),
                "embb_burst_mbps": list(sim.traffic.embb_burst_mbps),
                "urllc_dl_mbps": sim.traffic.urllc_dl_mbps,
                "v2x_ul_mbps": sim.traffic.v2x_ul_mbps,
                "mmtc_ul_mbps": sim.traffic.mmtc_ul_mbps,
            },
            "intent": {
                "text": self.intent.text,
                "protected_ues": list(self.intent.protected_ues),
                "prb_ceiling": self.intent.prb_ceiling,
                "phase_overrides": dict(self.intent.phase_overrides),
            },
            "guardrails": {
                "min_active_cells_per_site": self.guardrails.min_active_cells_per_site,
                "budget_offset_steps": self.guardrails.budget_offset_steps,
                "budget_window_s": self.guardrails.budget_window_s,
                "offset_cooldown_s": self.guardrails.offset_cooldown_s,
                "global_dwell_floor_s": self.guardrails.global_dwell_floor_s,
                "offset_clamp_db": list(self.guardrails.offset_clamp_db),
                "fields": {
                    name: {"min": b.min, "max": b.max,
                           "max_step_per_edit": b.max_step_per_edit,
                           "edit_cooldown_s": b.edit_cooldown_s}
                    for name, b in sorted(self.guardrails.fields.items())
                },
            },
            "provider": {
                "kind": self.provider.kind, "seed": self.provider.seed,
                "latency_ms": self.provider.latency_ms,
                "tau_llm_ms": self.provider.tau_llm_ms,
                "tau_xapp_ms": self.provider.tau_xapp_ms,
            },
            "tuner": {
                "enabled": self.tuner.enabled, "cadence_s": self.tuner.cadence_s,
                "ema_alpha": self.tuner.ema_alpha, "use_ema": self.tuner.use_ema,
            },
            "xapps": {
                "load_top_k": self.xapps.load_top_k,
                "cluster_prb_high": self.xapps.cluster_prb_high,
                "sleep_cooldown_s": self.xapps.sleep_cooldown_s,
            },
            "telemetry": {
                "windows_s": dict(self.windows_s),
                "outcome_lag_s": self.outcome_lag_s,
            },
        }

    def fingerprint(self) -> str:
        """Scenario identity for compare/replay checks, independent of seed/controller."""
        doc = self.resolved_dict()
        doc["scenario"].pop("seed")
        doc["scenario"].pop("controller")
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]

    def with_seed(self, seed: int) -> "RunConfig":
        from dataclasses import replace
        return replace(self, sim=replace(self.sim, seed=seed))

    def with_controller(self, controller: str) -> "RunConfig":
        from dataclasses import replace
        if controller not in ("baseline", "agentic"):
            raise ConfigError(f"unknown controller {controller!r}")
        return replace(self, controller=controller)


def _schema() -> dict:
    text = importlib.resources.files("ricloop").joinpath("data/config_schema.json").read_text()
    return json.loads(text)


def default_config() -> RunConfig:
    return RunConfig(sim=SimConfig(), guardrails=default_guardrails(),
                     intent=Intent(protected_ues=(1,)))


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"scenario parse failure: {exc}") from exc
    try:
        jsonschema.validate(doc, _schema())
    except jsonschema.ValidationError as exc:
        path_str = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"scenario invalid at {path_str}: {exc.message}") from exc
    return _from_dict(doc)


def _from_dict(doc: dict) -> RunConfig:
    base = default_config()
    scen = doc.get("scenario", {})
    topo = doc.get("topology", {})
    ues = doc.get("ues", {})
    radio_doc = doc.get("radio", {})
    traffic_doc = doc.get("traffic", {})

    radio = RadioModel(
        pathloss_exponent=radio_doc.get("pathloss_exponent", base.sim.radio.pathloss_exponent),
        shadowing_sigma_db=radio_doc.get("shadowing_sigma_db", base.sim.radio.shadowing_sigma_db),
        noise_floor_dbm=radio_doc.get("noise_floor_dbm", base.sim.radio.noise_floor_dbm),
    )
    tr = base.sim.traffic
    traffic = TrafficModel(
        embb_on_s=tuple(traffic_doc.get("embb_on_s", tr.embb_on_s)),
        embb_off_s=tuple(traffic_doc.get("embb_off_s", tr.embb_off_s)),
        embb_base_mbps=tuple(traffic_doc.get("embb_base_mbps", tr.embb_base_mbps)),
        embb_burst_mbps=tuple(traffic_doc.get("embb_burst_mbps", tr.embb_burst_mbps)),
        urllc_dl_mbps=traffic_doc.get("urllc_dl_mbps", tr.urllc_dl_mbps),
        v2x_ul_mbps=traffic_doc.get("v2x_ul_mbps", tr.v2x_ul_mbps),
        mmtc_ul_mbps=traffic_doc.get("mmtc_ul_mbps", tr.mmtc_ul_mbps),
    )
    phases = tuple(PhaseSpan(p["name"], float(p["start_s"]), float(p["end_s"]))
                   for p in scen.get("phases", [])) or base.sim.phases
    guard_doc = doc.get("guardrails", {})
    sim = SimConfig(
        seed=scen.get("seed", base.sim.seed),
        duration_s=scen.get("duration_s", base.sim.duration_s),
        phases=phases,
        n_sites=topo.get("n_sites", base.sim.n_sites),
        sectors_per_site=topo.get("sectors_per_site", base.sim.sectors_per_site),
        isd_m=topo.get("isd_m", base.sim.isd_m),
        area_m=tuple(topo.get("area_m", base.sim.area_m)),
        tx_power_dbm=topo.get("tx_power_dbm", base.sim.tx_power_dbm),
        capacity_mbps=topo.get("capacity_mbps", base.sim.capacity_mbps),
        n_ues=ues.get("count", base.sim.n_ues),
        pedestrian_speed_mps=ues.get("pedestrian_speed_mps", base.sim.pedestrian_speed_mps),
        vehicular_speed_mps=ues.get("vehicular_speed_mps", base.sim.vehicular_speed_mps),
        vehicular_reversal_s=ues.get("vehicular_reversal_s", base.sim.vehicular_reversal_s),
        incident_cells=tuple(scen.get("incident_cells", base.sim.incident_cells)),
        surge_multiplier=scen.get("surge_multiplier", base.sim.surge_multiplier),
        min_active_cells_per_site=guard_doc.get("min_active_cells_per_site",
                                                base.guardrails.min_active_cells_per_site),
        radio=radio,
        traffic=traffic,
    )

    fields = dict(base.guardrails.fields)
    for name, spec in guard_doc.get("fields", {}).items():
        cur = fields[name]
        fields[name] = FieldBound(
            min=spec.get("min", cur.min), max=spec.get("max", cur.max),
            max_step_per_edit=spec.get("max_step_per_edit", cur.max_step_per_edit),
            edit_cooldown_s=spec.get("edit_cooldown_s", cur.edit_cooldown_s),
        )
    guardrails = GuardrailSpec(
        fields=fields,
        offset_clamp_db=tuple(guard_doc.get("offset_clamp_db", base.guardrails.offset_clamp_db)),
        budget_offset_steps=guard_doc.get("budget_offset_steps", base.guardrails.budget_offset_steps),
        budget_window_s=guard_doc.get("budget_window_s", base.guardrails.budget_window_s),
        offset_cooldown_s=guard_doc.get("offset_cooldown_s", base.guardrails.offset_cooldown_s),
        min_active_cells_per_site=guard_doc.get("min_active_cells_per_site",
                                                base.guardrails.min_active_cells_per_site),
        global_dwell_floor_s=guard_doc.get("global_dwell_floor_s",
                                           base.guardrails.global_dwell_floor_s),
    )

    intent_doc = doc.get("intent", {})
    intent = Intent(
        text=intent_doc.get("text", base.intent.text),
        protected_ues=tuple(intent_doc.get("protected_ues", base.intent.protected_ues)),
        prb_ceiling=intent_doc.get("prb_ceiling", base.intent.prb_ceiling),
        phase_overrides=dict(intent_doc.get("phase_overrides", {})),
    )

    prov_doc = doc.get("provider", {})
    provider = ProviderConfig(
        kind=prov_doc.get("kind", "stub"), seed=prov_doc.get("seed", 7),
        latency_ms=prov_doc.get("latency_ms", 0.0),
        tau_llm_ms=prov_doc.get("tau_llm_ms", 500.0),
        tau_xapp_ms=prov_doc.get("tau_xapp_ms", 100.0),
    )
    tuner_doc = doc.get("tuner", {})
    tuner = TunerSettings(
        enabled=tuner_doc.get("enabled", True), cadence_s=tuner_doc.get("cadence_s", 45.0),
        ema_alpha=tuner_doc.get("ema_alpha", 0.3), use_ema=tuner_doc.get("use_ema", True),
    )
    xapp_doc = doc.get("xapps", {})
    xapps = XappSettings(
        load_top_k=xapp_doc.get("load_top_k", 1),
        cluster_prb_high=xapp_doc.get("cluster_prb_high", 0.7),
        sleep_cooldown_s=xapp_doc.get("sleep_cooldown_s", 60.0),
    )
    tele_doc = doc.get("telemetry", {})
    windows = dict(base.windows_s)
    windows.update(tele_doc.get("windows_s", {}))

    return RunConfig(sim=sim, guardrails=guardrails, intent=intent, provider=provider,
                     tuner=tuner, xapps=xapps, windows_s=windows,
                     outcome_lag_s=tele_doc.get("outcome_lag_s", 10.0),
                     controller=scen.get("controller", "agentic"))


def write_snapshot(path: str, cfg: RunConfig) -> None:
    doc = cfg.resolved_dict()
    doc["fingerprint"] = cfg.fingerprint()
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(doc, fh, sort_keys=True)


def load_snapshot(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    doc.pop("fingerprint", None)
    return _from_dict(doc)
