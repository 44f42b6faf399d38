import pytest

from helpers import cell_agg, make_view, meas, ue_agg
from ricloop.policy import EnergyPolicy
from ricloop.telemetry import HoEvent, KpiSample, TelemetryStore
from ricloop.xapp_energy import EnergyXapp, assess_idle, pending_ues

POLICY = EnergyPolicy(idle_window_min=1.0, idle_prb_max=0.05, idle_sched_mbps_max=0.5,
                      idle_ue_max=1, wake_ue_min=2, wake_sched_mbps_min=2.0,
                      ho_arrival_max_hz=0.2)

SITE_OF = {1: 1, 2: 1, 3: 1}


def fill_store(samples_fn, t_end=120, cell_id=1):
    store = TelemetryStore()
    for t in range(1, t_end + 1):
        prb, sched, ues = samples_fn(t)
        store.ingest(KpiSample(t=float(t), phase="normal", cell_id=cell_id, prb_dl=prb,
                               sched_dl_mbps=sched, attached_ue_count=ues))
    return store


def oracle_idle(store, cell, policy, now):
    """Direct window recomputation, independent of the production path."""
    w = policy.idle_window_min * 60.0
    rows = [s for s in store.cell_samples(cell) if now - w < s.t <= now]
    expected_samples = int(w)  # 1 Hz sampling
    if len(rows) < expected_samples:
        return False
    ho = sum(1 for e in store.ho_events(now - w, now) if e.to_cell == cell)
    return (max(r.prb_dl for r in rows) <= policy.idle_prb_max
            and max(r.sched_dl_mbps for r in rows) <= policy.idle_sched_mbps_max
            and max(r.attached_ue_count for r in rows) <= policy.idle_ue_max
            and ho / w <= policy.ho_arrival_max_hz)


class TestAssessIdle:
    def test_all_quiet_is_idle(self):
        store = fill_store(lambda t: (0.0, 0.0, 0))
        a = assess_idle(1, store, POLICY, now=120.0, first_sample_t=1.0)
        assert a.idle
        assert a.prb_ok and a.sched_ok and a.ue_ok and a.ho_ok

    def test_single_prb_spike_breaks_idle(self):
        store = fill_store(lambda t: (0.5 if t == 90 else 0.0, 0.0, 0))
        a = assess_idle(1, store, POLICY, now=120.0, first_sample_t=1.0)
        assert not a.idle and not a.prb_ok

    def test_partial_window_not_idle(self):
        store = fill_store(lambda t: (0.0, 0.0, 0), t_end=30)
        a = assess_idle(1, store, POLICY, now=30.0, first_sample_t=1.0)
        assert not a.observed and not a.idle

    def test_ho_arrivals_break_idle(self):
        store = fill_store(lambda t: (0.0, 0.0, 0))
        for i in range(20):
            store.ingest_ho_event(HoEvent(t=70.0 + i, ue_id=1, from_cell=2, to_cell=1,
                                          cause="native"))
        a = assess_idle(1, store, POLICY, now=120.0, first_sample_t=1.0)
        assert not a.idle and not a.ho_ok

    @pytest.mark.parametrize("scenario", [
        lambda t: (0.0, 0.0, 0),
        lambda t: (0.04, 0.4, 1),
        lambda t: (0.06, 0.0, 0),
        lambda t: (0.0, 0.9, 0),
        lambda t: (0.0, 0.0, 3),
    ])
    def test_matches_direct_recomputation(self, scenario):
        store = fill_store(scenario)
        a = assess_idle(1, store, POLICY, now=120.0, first_sample_t=1.0)
        assert a.idle == oracle_idle(store, 1, POLICY, now=120.0)


class TestEnergyTick:
    def _tick(self, store, cell_states, view, last_wake=None):
        app = EnergyXapp(provider=None, site_of=SITE_OF)
        return app.tick(view, POLICY, store, cell_states, last_wake or {},
                        first_sample_t=1.0)

    def test_idle_cell_sleep_proposed(self):
        store = fill_store(lambda t: (0.0, 0.0, 0))
        view = make_view(agent="energy", now=120.0, cells={1: cell_agg(1, prb=0.0)}, ues={})
        proposals = self._tick(store, {1: True}, view)
        assert [p.kind for p in proposals] == ["sleep"]
        assert proposals[0].subject == ("cell", 1)

    def test_sleep_suppressed_by_cooldown(self):
        store = fill_store(lambda t: (0.0, 0.0, 0))
        view = make_view(agent="energy", now=120.0, cells={1: cell_agg(1, prb=0.0)}, ues={})
        proposals = self._tick(store, {1: True}, view, last_wake={1: 100.0})
        assert proposals == []

    def test_pending_ues_trigger_wake(self):
        store = fill_store(lambda t: (0.0, 0.0, 0))
        ues = {u: ue_agg(u, serving=2, meas=[meas(1, rsrp=-60), meas(2, rsrp=-70)])
               for u in (4, 5)}
        view = make_view(agent="energy", now=120.0, cells={1: cell_agg(1)}, ues=ues)
        proposals = self._tick(store, {1: False}, view)
        assert [p.kind for p in proposals] == ["wake"]

    def test_cluster_prb_triggers_wake(self):
        store = fill_store(lambda t: (0.0, 0.0, 0))
        cells = {1: cell_agg(1), 2: cell_agg(2, prb=0.9), 3: cell_agg(3, prb=0.8)}
        view = make_view(agent="energy", now=120.0, cells=cells, ues={})
        proposals = self._tick(store, {1: False, 2: True, 3: True}, view)
        assert any(p.kind == "wake" and p.subject == ("cell", 1) for p in proposals)

    def test_never_sleep_and_wake_same_cell_same_tick(self):
        store = fill_store(lambda t: (0.0, 0.0, 0))
        view = make_view(agent="energy", now=120.0,
                         cells={c: cell_agg(c, prb=0.0) for c in (1, 2, 3)}, ues={})
        for states in ({1: True, 2: False, 3: True}, {1: False, 2: False, 3: True}):
            proposals = self._tick(store, states, view)
            by_cell = {}
            for p in proposals:
                by_cell.setdefault(p.subject, set()).add(p.kind)
            assert all(len(kinds) == 1 for kinds in by_cell.values())

    def test_only_o1_kinds(self):
        store = fill_store(lambda t: (0.0, 0.0, 0))
        view = make_view(agent="energy", now=120.0,
                         cells={1: cell_agg(1, prb=0.0)}, ues={})
        for p in self._tick(store, {1: True, 2: False}, view):
            assert p.kind in ("sleep", "wake")

    def test_pending_ue_detection(self):
        ues = {7: ue_agg(7, serving=2, meas=[meas(3, rsrp=-50), meas(2, rsrp=-60)])}
        view = make_view(agent="energy", cells={}, ues=ues)
        assert pending_ues(view, 3) == [7]
        assert pending_ues(view, 1) == []
