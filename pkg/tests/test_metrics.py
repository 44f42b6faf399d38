import math

import pytest

from ricloop.metrics import (
    aggregate_sweep, compare_summaries, compute_summary, format_metric,
)


def ue_row(t, phase, ue, pdcp, cell=1, sinr=5.0):
    return {"record": "ue", "t": t, "phase": phase, "cell_id": cell, "ue_id": ue,
            "pdcp_dl_mbps": pdcp, "sinr_db": sinr, "sched_dl_mbps": None}


def cell_row(t, phase, cell, sched):
    return {"record": "cell", "t": t, "phase": phase, "cell_id": cell, "ue_id": None,
            "pdcp_dl_mbps": None, "sinr_db": None, "sched_dl_mbps": sched}


def ho_row(t, phase, ue, frm, to):
    return {"record": "ho", "t": t, "phase": phase, "cell_id": to, "ue_id": ue,
            "pdcp_dl_mbps": None, "sinr_db": None, "sched_dl_mbps": None,
            "ho_from": frm, "ho_to": to}


class TestComputeSummary:
    def test_percentiles_and_outage(self):
        rows = [ue_row(float(t), "normal", 1, pdcp=t / 100.0) for t in range(1, 101)]
        summary = compute_summary(rows, incident_cells=[1])
        m = summary["normal"]
        assert m["dl_p10_mbps"] == pytest.approx(0.10)
        assert m["dl_p90_mbps"] == pytest.approx(0.90)
        assert m["frac_below_0p10"] == pytest.approx(0.09)
        assert m["p90_p10_ratio"] == pytest.approx(9.0)

    def test_zero_p10_gives_inf_ratio(self):
        rows = [ue_row(float(t), "normal", 1, pdcp=0.0) for t in range(1, 11)]
        summary = compute_summary(rows, incident_cells=[1])
        assert math.isinf(summary["normal"]["p90_p10_ratio"])
        assert format_metric(summary["normal"]["p90_p10_ratio"]) == "inf"

    def test_hotspot_share(self):
        rows = [cell_row(1.0, "normal", 1, sched=30.0),
                cell_row(1.0, "normal", 2, sched=10.0),
                ue_row(1.0, "normal", 1, pdcp=1.0)]
        summary = compute_summary(rows, incident_cells=[1])
        assert summary["normal"]["hotspot_share"] == pytest.approx(0.75)

    def test_dwell_episodes(self):
        rows = [ue_row(float(t), "normal" if t <= 50 else "recovery", 1, pdcp=1.0)
                for t in range(1, 101)]
        rows.append(ho_row(40.0, "normal", 1, 1, 2))
        rows.append(ho_row(45.0, "normal", 1, 2, 1))
        summary = compute_summary(rows, incident_cells=[1])
        # episodes ending in normal: 40 (start->first HO) and 5 (ping-pong return)
        assert summary["normal"]["dwell_p90_s"] == pytest.approx(40.0)
        assert summary["normal"]["ho_count"] == 2.0
        # the still-open camp closes out at the end of the trace: 100 - 45 = 55
        assert summary["recovery"]["dwell_p90_s"] == pytest.approx(55.0)


class TestCompareAndSweep:
    def test_self_compare_zero(self):
        rows = [ue_row(float(t), "normal", 1, pdcp=1.0) for t in range(1, 11)]
        summary = compute_summary(rows, incident_cells=[1])
        table = compare_summaries(summary, summary)
        for phase in table.values():
            for row in phase.values():
                assert row["delta"] == 0.0 or math.isinf(row["a"])

    def test_sweep_median_min_max(self):
        per_seed = {
            1: {"normal": {"x": 1.0}},
            2: {"normal": {"x": 3.0}},
            3: {"normal": {"x": 2.0}},
        }
        agg = aggregate_sweep(per_seed)
        assert agg["normal"]["x"] == {"median": 2.0, "min": 1.0, "max": 3.0}

    def test_single_seed_sweep_equals_summary(self):
        per_seed = {7: {"normal": {"x": 1.5}}}
        agg = aggregate_sweep(per_seed)
        assert agg["normal"]["x"]["median"] == 1.5
        assert agg["normal"]["x"]["min"] == agg["normal"]["x"]["max"] == 1.5
