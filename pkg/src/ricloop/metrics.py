"""Per-phase summary metrics computed from exported KPI rows.

The metric set mirrors the run comparison: all-UE DL percentiles, outage
fractions, tail ratio, incident-cell share of scheduled DL, dwell percentiles,
and handover counts. Dwell is re-derived from the HO event rows with the same
rule the control stack uses (time since the last handover).
"""

from __future__ import annotations

import csv
import math
from typing import Iterable

from .telemetry import percentile

KPI_HEADER = [
    "record", "t", "phase", "cell_id", "ue_id", "prb_dl", "pdcp_dl_mbps",
    "pdcp_ul_mbps", "sched_dl_mbps", "sinr_db", "rsrp_dbm", "rsrq_db", "mcs",
    "ul_interf_dbm", "attached_ue_count", "ho_from", "ho_to",
]

OUTAGE_THRESHOLDS_MBPS = (0.10, 0.45, 0.50)

PHASE_ALL = "all"


def parse_kpi_csv(path: str) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in KPI_HEADER if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"kpi csv missing columns: {missing}")
        rows = []
        for raw in reader:
            row = dict(raw)
            row["t"] = float(raw["t"])
            for key in ("prb_dl", "pdcp_dl_mbps", "pdcp_ul_mbps", "sched_dl_mbps",
                        "sinr_db", "ul_interf_dbm"):
                row[key] = float(raw[key]) if raw[key] != "" else None
            for key in ("cell_id", "ue_id", "ho_from", "ho_to", "attached_ue_count", "mcs"):
                row[key] = int(raw[key]) if raw[key] != "" else None
            rows.append(row)
        return rows


def _dwell_series(rows: list[dict]) -> list[tuple[str, float]]:
    """Completed dwell episodes: the time a UE sat on its cell before each HO,
    tagged with the phase the episode ended in. The final (still open) camp of
    each UE is closed out at the end of the trace so long stable camps count."""
    ho_times: dict[int, list[tuple[float, str]]] = {}
    t_end, end_phase = 0.0, None
    for r in rows:
        if r["record"] == "ho":
            ho_times.setdefault(r["ue_id"], []).append((r["t"], r["phase"]))
        if r["record"] == "ue":
            ho_times.setdefault(r["ue_id"], [])
            if r["t"] >= t_end:
                t_end, end_phase = r["t"], r["phase"]
    out = []
    for ue, events in ho_times.items():
        events.sort()
        prev = 0.0
        for t, phase in events:
            out.append((phase, t - prev))
            prev = t
        if end_phase is not None and t_end > prev:
            out.append((end_phase, t_end - prev))
    return out


def compute_summary(rows: list[dict], incident_cells: Iterable[int]) -> dict[str, dict[str, float]]:
    incident = set(incident_cells)
    phases = sorted({r["phase"] for r in rows})
    dwell = _dwell_series(rows)
    out: dict[str, dict[str, float]] = {}
    for phase in phases + [PHASE_ALL]:
        sel = rows if phase == PHASE_ALL else [r for r in rows if r["phase"] == phase]
        ue_dl = [r["pdcp_dl_mbps"] for r in sel if r["record"] == "ue"]
        ue_sinr = [r["sinr_db"] for r in sel if r["record"] == "ue"]
        cell_rows = [r for r in sel if r["record"] == "cell"]
        dwells = [d for p, d in dwell if phase == PHASE_ALL or p == phase]
        metrics: dict[str, float] = {}
        if ue_dl:
            for q, name in ((0.05, "dl_p05_mbps"), (0.10, "dl_p10_mbps"), (0.20, "dl_p20_mbps"),
                            (0.50, "dl_p50_mbps"), (0.90, "dl_p90_mbps")):
                metrics[name] = percentile(ue_dl, q)
            p10, p90 = metrics["dl_p10_mbps"], metrics["dl_p90_mbps"]
            metrics["p90_p10_ratio"] = p90 / p10 if p10 > 0 else math.inf
            for thr in OUTAGE_THRESHOLDS_MBPS:
                key = f"frac_below_{format(thr, '.2f').replace('.', 'p')}"
                metrics[key] = sum(1 for v in ue_dl if v < thr) / len(ue_dl)
            metrics["sinr_p10_db"] = percentile(ue_sinr, 0.10)
        total_sched = sum(r["sched_dl_mbps"] for r in cell_rows)
        incident_sched = sum(r["sched_dl_mbps"] for r in cell_rows if r["cell_id"] in incident)
        metrics["hotspot_share"] = incident_sched / total_sched if total_sched > 0 else 0.0
        if dwells:
            metrics["dwell_p90_s"] = percentile(dwells, 0.90)
            metrics["dwell_p99_s"] = percentile(dwells, 0.99)
        metrics["ho_count"] = float(sum(1 for r in sel if r["record"] == "ho"))
        out[phase] = metrics
    return out


def summary_to_csv_rows(summary: dict[str, dict[str, float]]) -> list[tuple[str, str, str]]:
    rows = []
    for phase in sorted(summary):
        for metric in sorted(summary[phase]):
            rows.append((phase, metric, format_metric(summary[phase][metric])))
    return rows


def format_metric(value: float) -> str:
    if math.isinf(value):
        return "inf"
    return f"{value:.6f}"


def write_summary_csv(path: str, summary: dict[str, dict[str, float]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["phase", "metric", "value"])
        writer.writerows(summary_to_csv_rows(summary))


def load_summary_csv(path: str) -> dict[str, dict[str, float]]:
    out: dict[str, dict[str, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            out.setdefault(row["phase"], {})[row["metric"]] = float(row["value"])
    return out


def compare_summaries(summary_a: dict, summary_b: dict) -> dict[str, dict[str, dict[str, float]]]:
    """Per-phase, per-metric {a, b, delta} over the metrics both runs share."""
    out: dict[str, dict[str, dict[str, float]]] = {}
    for phase in sorted(set(summary_a) & set(summary_b)):
        out[phase] = {}
        for metric in sorted(set(summary_a[phase]) & set(summary_b[phase])):
            a, b = summary_a[phase][metric], summary_b[phase][metric]
            delta = b - a if not (math.isinf(a) or math.isinf(b)) else math.inf
            out[phase][metric] = {"a": a, "b": b, "delta": delta}
    return out


def aggregate_sweep(per_seed: dict[int, dict[str, dict[str, float]]]) -> dict[str, dict[str, dict[str, float]]]:
    """Median / min / max across seeds for every (phase, metric)."""
    out: dict[str, dict[str, dict[str, float]]] = {}
    seeds = sorted(per_seed)
    if not seeds:
        return out
    phases = sorted(set.intersection(*(set(per_seed[s]) for s in seeds)))
    for phase in phases:
        out[phase] = {}
        metrics = sorted(set.intersection(*(set(per_seed[s][phase]) for s in seeds)))
        for metric in metrics:
            vals = sorted(per_seed[s][phase][metric] for s in seeds)
            out[phase][metric] = {
                "median": percentile(vals, 0.5),
                "min": vals[0],
                "max": vals[-1],
            }
    return out
