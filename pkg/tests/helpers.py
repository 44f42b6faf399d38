"""Synthetic view builders shared by the xApp and orchestrator tests."""

from ricloop.telemetry import CellAgg, CellMeas, KpiView, UeAgg


def make_view(agent="qoe", now=30.0, window_s=5.0, cells=None, ues=None):
    return KpiView(agent=agent, window_s=window_s, now=now,
                   cells=cells or {}, ues=ues or {})


def cell_agg(cell_id, prb=0.5, sched=5.0, ue_count=2, ho_hz=0.0, mcs_p50=10.0,
             ul_p95=-100.0, has_data=True):
    return CellAgg(cell_id=cell_id, has_data=has_data, prb_mean=prb, sched_dl_mean=sched,
                   ue_count=ue_count, ho_arrival_hz=ho_hz, mcs_p50=mcs_p50,
                   ul_p95_dbm=ul_p95)


def ue_agg(ue_id, pdcp=1.0, sinr=5.0, dwell=10.0, serving=1, meas=(), last_ho=None,
           has_data=True):
    return UeAgg(ue_id=ue_id, has_data=has_data, pdcp_dl_mean=pdcp, sinr_median=sinr,
                 dwell_s=dwell, last_ho_t=last_ho, serving_cell=serving, meas=tuple(meas))


def meas(cell_id, rsrp=-80.0, rsrq=-5.0, sinr=5.0, active=True):
    return CellMeas(cell_id=cell_id, rsrp_dbm=rsrp, rsrq_db=rsrq, sinr_db=sinr,
                    active=active)
