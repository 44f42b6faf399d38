import pytest
from hypothesis import given, settings, strategies as st

from ricloop.policy import (
    AGENT_LOAD, AGENT_QOE, AGENTS, FieldDescriptor, LoadPolicy, PolicyError,
    PolicyInstance, PolicyStore, QoePolicy, clamp_rate_limit, default_guardrails,
    default_values, descriptors_for, serialize_values, validate_values,
    values_as_dict, values_from_dict,
)


@pytest.fixture
def spec():
    return default_guardrails()


@pytest.fixture
def store(spec):
    s = PolicyStore(spec)
    for agent in AGENTS:
        s.register_schema(agent, descriptors_for(agent))
    return s


class TestRegisterSchema:
    def test_qoe_five_fields(self, spec):
        s = PolicyStore(spec)
        handle = s.register_schema(AGENT_QOE, descriptors_for(AGENT_QOE))
        assert len(handle) == 5

    def test_empty_descriptors_rejected(self, spec):
        s = PolicyStore(spec)
        with pytest.raises(PolicyError, match="empty"):
            s.register_schema(AGENT_QOE, [])

    def test_duplicate_registration_rejected(self, spec):
        s = PolicyStore(spec)
        s.register_schema(AGENT_QOE, descriptors_for(AGENT_QOE))
        with pytest.raises(PolicyError, match="already registered"):
            s.register_schema(AGENT_QOE, descriptors_for(AGENT_QOE))

    def test_unknown_field_rejected(self, spec):
        s = PolicyStore(spec)
        bad = descriptors_for(AGENT_QOE)[:-1] + [FieldDescriptor("bogus", "x", "float")]
        with pytest.raises(PolicyError, match="does not match"):
            s.register_schema(AGENT_QOE, bad)

    def test_field_counts_match_catalog(self):
        assert len(descriptors_for("qoe")) == 5
        assert len(descriptors_for("load")) == 6
        assert len(descriptors_for("energy")) == 7


class TestValidate:
    def test_cio_step_in_range_ok(self, spec):
        values = LoadPolicy(hot_prb=0.85, cool_prb=0.5, cio_step_db=1.0, mcs_min=5,
                            ul_p95_dbm_max=-95.0, ue_ban_s=15.0)
        assert validate_values(AGENT_LOAD, values, spec) == []

    def test_cio_step_above_max(self, spec):
        values = LoadPolicy(hot_prb=0.85, cool_prb=0.5, cio_step_db=2.0, mcs_min=5,
                            ul_p95_dbm_max=-95.0, ue_ban_s=15.0)
        violations = validate_values(AGENT_LOAD, values, spec)
        assert len(violations) == 1
        v = violations[0]
        assert (v.field, v.value, v.bound) == ("cio_step_db", 2.0, "max 1.5")

    def test_defaults_valid(self, spec):
        for agent in AGENTS:
            assert validate_values(agent, default_values(agent, spec), spec) == []

    def test_cross_field_ordering(self, spec):
        values = LoadPolicy(hot_prb=0.75, cool_prb=0.75, cio_step_db=1.0, mcs_min=5,
                            ul_p95_dbm_max=-95.0, ue_ban_s=15.0)
        fields = [v.field for v in validate_values(AGENT_LOAD, values, spec)]
        assert "cool_prb" in fields

    def test_nonfinite_rejected(self, spec):
        values = QoePolicy(dl_target_mbps=float("nan"), sinr_target_db=1.0,
                           headroom_min=0.15, min_dwell_s=3.0, ue_ban_s=15.0)
        assert any(v.bound == "finite" for v in validate_values(AGENT_QOE, values, spec))

    def test_unregistered_agent_errors(self, spec):
        s = PolicyStore(spec)
        inst = PolicyInstance(AGENT_QOE, default_values(AGENT_QOE, spec), 1, 0.0, "default")
        with pytest.raises(PolicyError, match="not registered"):
            s.validate_instance(inst)


class TestClampRateLimit:
    def test_step_capped(self, spec):
        prev = values_as_dict(default_values(AGENT_LOAD, spec))
        prev["cio_step_db"] = 0.5
        proposed = dict(prev, cio_step_db=1.5)
        bounds = dict(spec.fields)
        bounds["cio_step_db"] = bounds["cio_step_db"].__class__(
            min=0.5, max=1.5, max_step_per_edit=0.2, edit_cooldown_s=0.0)
        narrowed = spec.__class__(fields=bounds)
        out = clamp_rate_limit(proposed, prev, narrowed, {}, now=0.0)
        assert out["cio_step_db"] == pytest.approx(0.7)

    def test_identity(self, spec):
        prev = values_as_dict(default_values(AGENT_QOE, spec))
        assert clamp_rate_limit(dict(prev), prev, spec, {}, 0.0) == prev

    def test_clamp_then_cap_composition(self, spec):
        prev = values_as_dict(default_values(AGENT_QOE, spec))
        prev["headroom_min"] = 0.15
        proposed = dict(prev, headroom_min=0.9)
        out = clamp_rate_limit(proposed, prev, spec, {}, 0.0)
        # clamps toward 0.30 first, then the 10%-of-range step cap applies
        assert out["headroom_min"] == pytest.approx(0.15 + 0.025)

    def test_cooldown_holds_field(self, spec):
        prev = values_as_dict(default_values(AGENT_QOE, spec))
        proposed = dict(prev, headroom_min=prev["headroom_min"] + 0.01)
        out = clamp_rate_limit(proposed, prev, spec, {"headroom_min": 100.0}, now=150.0)
        assert out["headroom_min"] == prev["headroom_min"]
        out2 = clamp_rate_limit(proposed, prev, spec, {"headroom_min": 100.0}, now=250.0)
        assert out2["headroom_min"] == pytest.approx(prev["headroom_min"] + 0.01)

    @given(st.dictionaries(
        st.sampled_from(["dl_target_mbps", "sinr_target_db", "headroom_min",
                         "min_dwell_s", "ue_ban_s"]),
        st.floats(min_value=-100, max_value=100, allow_nan=False),
    ))
    @settings(max_examples=200)
    def test_idempotent(self, overrides):
        spec = default_guardrails()
        prev = values_as_dict(default_values(AGENT_QOE, spec))
        proposed = dict(prev, **overrides)
        once = clamp_rate_limit(proposed, prev, spec, {}, 0.0)
        twice = clamp_rate_limit(once, prev, spec, {}, 0.0)
        assert once == twice
        for name, v in once.items():
            b = spec.fields[name]
            assert b.min <= v <= b.max


class TestPublish:
    def test_version_increments(self, store):
        values = default_values(AGENT_QOE, store.spec)
        for expect in (1, 2, 3, 4, 5):
            assert store.publish(AGENT_QOE, values, "default", now=float(expect)) == expect

    def test_invalid_publication_refused_and_audited(self, spec):
        events = []
        s = PolicyStore(spec, on_event=lambda kind, payload: events.append((kind, payload)))
        s.register_schema(AGENT_LOAD, descriptors_for(AGENT_LOAD))
        s.publish(AGENT_LOAD, default_values(AGENT_LOAD, spec), "default", 0.0)
        bad = LoadPolicy(hot_prb=0.85, cool_prb=0.5, cio_step_db=9.0, mcs_min=5,
                         ul_p95_dbm_max=-95.0, ue_ban_s=15.0)
        with pytest.raises(PolicyError, match="refused"):
            s.publish(AGENT_LOAD, bad, "intent-l2", 1.0)
        assert s.snapshot(AGENT_LOAD).version == 1
        assert events[-1][0] == "refuse"

    def test_ttl_revert_restores_exact_bytes(self, store):
        base = default_values(AGENT_QOE, store.spec)
        store.publish(AGENT_QOE, base, "default", now=0.0)
        before = serialize_values(store.snapshot(AGENT_QOE).values)
        edited = values_from_dict(AGENT_QOE, dict(values_as_dict(base), headroom_min=0.16))
        store.publish(AGENT_QOE, edited, "apt", now=10.0, ttl_s=60.0)
        assert store.process_ttl(now=50.0) == []
        reverted = store.process_ttl(now=70.0)
        assert len(reverted) == 1
        assert serialize_values(store.snapshot(AGENT_QOE).values) == before
        assert store.snapshot(AGENT_QOE).version == 3

    def test_frozen_store_keeps_last_instance(self, store):
        base = default_values(AGENT_QOE, store.spec)
        store.publish(AGENT_QOE, base, "default", 0.0)
        store.frozen = True
        edited = values_from_dict(AGENT_QOE, dict(values_as_dict(base), headroom_min=0.2))
        store.publish(AGENT_QOE, edited, "intent-l2", 1.0)
        assert store.snapshot(AGENT_QOE).values == base


class TestRangeInvariant:
    @given(st.lists(st.tuples(
        st.sampled_from(["dl_target_mbps", "sinr_target_db", "headroom_min",
                         "min_dwell_s", "ue_ban_s"]),
        st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
    ), max_size=8))
    @settings(max_examples=300)
    def test_snapshots_never_out_of_range(self, edits):
        spec = default_guardrails()
        s = PolicyStore(spec)
        s.register_schema(AGENT_QOE, descriptors_for(AGENT_QOE))
        s.publish(AGENT_QOE, default_values(AGENT_QOE, spec), "default", 0.0)
        now = 1.0
        for name, value in edits:
            proposed = s.snapshot(AGENT_QOE).values_dict()
            proposed[name] = value
            clamped = s.clamp_against_current(AGENT_QOE, proposed, now)
            s.publish(AGENT_QOE, values_from_dict(AGENT_QOE, clamped), "intent-l2", now)
            snap = s.snapshot(AGENT_QOE).values_dict()
            for field, v in snap.items():
                b = spec.fields[field]
                assert b.min <= v <= b.max
            now += 1000.0  # step past edit cooldowns

    def test_versions_gapless(self, store):
        values = default_values(AGENT_QOE, store.spec)
        versions = [store.publish(AGENT_QOE, values, "default", float(i)) for i in range(20)]
        assert versions == list(range(1, 21))
