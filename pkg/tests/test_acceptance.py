"""Acceptance gate: one test per release criterion, each printing PASS/FAIL.

Everything here is deterministic. The directional scenario criterion drives
the packaged default scenario for seeds 1..3 under both controllers and
requires the correct sign of the median per-seed delta on all five headline
metrics; magnitudes are deliberately not scored.
"""

import dataclasses
import filecmp
import itertools
import math
import random
import time

from ricloop.actions import ActionProposal
from ricloop.config import default_config, TunerSettings
from ricloop.orchestrator import (GuardState, IntentWeights, enforce_guards, merge,
                                  translate_intent)
from ricloop.policy import (AGENT_LOAD, AGENT_QOE, AGENTS, PolicyError, PolicyStore,
                            default_guardrails, default_values, descriptors_for,
                            serialize_values, values_from_dict)
from ricloop.provider import TimeoutProvider
from ricloop.runner import replay_run, run_scenario
from ricloop.telemetry import KpiSample, TelemetryStore, percentile
from ricloop.xapp_load import HotCoolPair, stable_merge_order
from ricloop.xapp_energy import assess_idle

from helpers import cell_agg, make_view, ue_agg


def report(name, ok, detail=""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name} {detail}".rstrip())
    assert ok, f"{name}: {detail}"


# --------------------------------------------------------------------------
# Safety-envelope fuzz: 10,000 randomized proposal/publication sequences.
# --------------------------------------------------------------------------

def _random_proposal(rng, t):
    kind = rng.choice(["ho", "offset_step", "sleep", "wake"])
    if kind == "ho":
        return ActionProposal.make(rng.choice(["qoe", "load"]), kind,
                                   ("ue", rng.randint(1, 5)),
                                   {"target": rng.randint(1, 9)}, "fuzz", t)
    if kind == "offset_step":
        cell = rng.randint(1, 9)
        neighbor = rng.choice([c for c in range(1, 10) if c != cell])
        return ActionProposal.make("load", kind, ("pair", cell, neighbor),
                                   {"step_db": rng.uniform(-8, 8)}, "fuzz", t)
    return ActionProposal.make("energy", kind, ("cell", rng.randint(1, 9)), {}, "fuzz", t)


def test_safety_envelope_fuzz():
    started = time.monotonic()
    rng = random.Random(20260809)
    spec = default_guardrails()
    store = PolicyStore(spec)
    for agent in AGENTS:
        store.register_schema(agent, descriptors_for(agent))
        store.publish(agent, default_values(agent, spec), "default", 0.0)
    state = GuardState(cell_active={c: True for c in range(1, 10)},
                       site_of={c: (c - 1) // 3 + 1 for c in range(1, 10)})
    dwell_floor = 3.0
    ues = {u: ue_agg(u, dwell=rng.uniform(0, 30), serving=rng.randint(1, 9))
           for u in range(1, 6)}
    view = make_view(cells={c: cell_agg(c) for c in range(1, 10)}, ues=ues, now=0.0)

    violations = 0
    for i in range(10_000):
        now = float(i)
        if rng.random() < 0.2:
            agent = rng.choice(AGENTS)
            proposed = store.snapshot(agent).values_dict()
            field = rng.choice(list(proposed))
            proposed[field] = rng.uniform(-1e3, 1e3)
            clamped = store.clamp_against_current(agent, proposed, now)
            try:
                store.publish(agent, values_from_dict(agent, clamped), "intent-l2", now)
            except PolicyError:
                pass  # refusal keeps the previous valid instance in force
            snap = store.snapshot(agent).values_dict()
            for name, v in snap.items():
                b = spec.fields[name]
                if not b.min <= v <= b.max:
                    violations += 1
        else:
            proposals = [_random_proposal(rng, now) for _ in range(rng.randint(1, 6))]
            accepted, _ = merge(proposals)
            batch = enforce_guards(accepted, state, spec, view, dwell_floor, 15.0, now)
            for d in batch.decisions:
                if not d.accepted:
                    continue
                p = d.proposal
                if p.kind == "offset_step":
                    cell, nb = p.subject[1], p.subject[2]
                    new = state.offsets.get((cell, nb), 0.0) + p.param("step_db")
                    recent = sum(1 for t in state.offset_dispatch_t.get(cell, ())
                                 if now - t < spec.budget_window_s)
                    if not -6.0 <= new <= 6.0 or recent >= spec.budget_offset_steps:
                        violations += 1
                    state.note_offset(cell, nb, new, now)
                elif p.kind == "ho":
                    ue = view.ues[p.subject[1]]
                    if ue.dwell_s < dwell_floor or now - state.last_ho_t.get(ue.ue_id, -1e9) < 15.0:
                        violations += 1
                    state.note_ho(p.subject[1], now)
                elif p.kind == "sleep":
                    state.note_cell_state(p.subject[1], False, now)
                    site = state.site_of[p.subject[1]]
                    active = sum(1 for c, a in state.cell_active.items()
                                 if state.site_of[c] == site and a)
                    if active < spec.min_active_cells_per_site:
                        violations += 1
                elif p.kind == "wake":
                    state.note_cell_state(p.subject[1], True, now)
    elapsed = time.monotonic() - started
    report("safety-envelope fuzz (10,000 sequences, zero violations, <60 s)",
           violations == 0 and elapsed < 60.0,
           f"violations={violations} elapsed={elapsed:.1f}s")


# --------------------------------------------------------------------------
# Merger determinism over 1,000 random multisets.
# --------------------------------------------------------------------------

def test_merger_determinism():
    started = time.monotonic()
    rng = random.Random(7)
    priority = {"energy": 3, "qoe": 2, "load": 1}
    failures = 0
    for _ in range(1_000):
        proposals = [_random_proposal(rng, rng.uniform(0, 10)) for _ in range(rng.randint(0, 10))]
        base_accepted, _ = merge(list(proposals))
        for _ in range(3):
            shuffled = list(proposals)
            rng.shuffle(shuffled)
            accepted, _ = merge(shuffled)
            if accepted != base_accepted:
                failures += 1
        seen = {}
        for p in proposals:
            seen.setdefault(p.subject, []).append(p)
        for winner in base_accepted:
            best = max(priority[q.source] for q in seen[winner.subject])
            if priority[winner.source] != best:
                failures += 1
    elapsed = time.monotonic() - started
    report("merger determinism (1,000 multisets, permutation-invariant, <10 s)",
           failures == 0 and elapsed < 10.0,
           f"failures={failures} elapsed={elapsed:.1f}s")


# --------------------------------------------------------------------------
# Level-2 formula exactness at the interval endpoints (tolerance 0).
# --------------------------------------------------------------------------

def test_l2_formula_exactness():
    checks = [
        (translate_intent(IntentWeights(0, 0, 0))[AGENT_LOAD]["cio_step_db"], 0.5),
        (translate_intent(IntentWeights(0, 1, 0))[AGENT_LOAD]["cio_step_db"], 1.5),
        (translate_intent(IntentWeights(0, 0, 0))[AGENT_QOE]["dl_target_mbps"], 0.3),
        (translate_intent(IntentWeights(1, 0, 0))[AGENT_QOE]["dl_target_mbps"], 0.8),
    ]
    exact = all(got == want for got, want in checks)
    report("L2 translation endpoint exactness (tolerance 0)", exact, f"{checks}")


# --------------------------------------------------------------------------
# Replay equality: full 300 s agentic run replayed bit-for-bit.
# --------------------------------------------------------------------------

def test_replay_equality(tmp_path):
    started = time.monotonic()
    cfg = default_config().with_seed(1)
    original = run_scenario(cfg, str(tmp_path / "orig"))
    replayed = replay_run(original.audit_path, cfg, str(tmp_path / "replay"))
    same = filecmp.cmp(original.kpi_path, replayed.kpi_path, shallow=False)
    elapsed = time.monotonic() - started
    report("replay equality (300 s run, bitwise kpi.csv, <2 min/run)",
           same and elapsed < 240.0, f"bitwise={same} elapsed={elapsed:.1f}s")


# --------------------------------------------------------------------------
# Non-blocking guarantee: timeout provider and frozen publication.
# --------------------------------------------------------------------------

def test_non_blocking_guarantee(tmp_path):
    cfg = default_config().with_seed(1)
    timed_out = run_scenario(cfg, str(tmp_path / "timeout"), provider=TimeoutProvider())
    ticks_ok = timed_out.xapp_tick_counts == {"qoe": 300, "load": 300, "energy": 300}
    from ricloop.audit import load_log
    dispatches = sum(1 for r in load_log(timed_out.audit_path) if r.kind == "dispatch")
    frozen = run_scenario(cfg, str(tmp_path / "frozen"), freeze_publication=(100.0, 160.0))
    frozen_ok = frozen.xapp_tick_counts == {"qoe": 300, "load": 300, "energy": 300}
    report("non-blocking guarantee (always-timeout provider + 60 s publication freeze)",
           ticks_ok and dispatches == 300 and frozen_ok,
           f"ticks={timed_out.xapp_tick_counts} dispatches={dispatches} frozen_ticks={frozen.xapp_tick_counts}")


# --------------------------------------------------------------------------
# Tuner boundedness over a full run with an aggressive cadence.
# --------------------------------------------------------------------------

def test_tuner_boundedness(tmp_path):
    cfg = dataclasses.replace(default_config().with_seed(1),
                              tuner=TunerSettings(enabled=True, cadence_s=15.0))
    with_tuner = run_scenario(cfg, str(tmp_path / "apt"))
    from ricloop.audit import load_log
    records = load_log(with_tuner.audit_path)
    edits = [r for r in records if r.kind == "apt_edit"]
    spec = cfg.guardrails
    bounded = True
    last_edit_t = {}
    for r in edits:
        field, old, new = r.payload["field"], r.payload["old"], r.payload["new"]
        b = spec.fields[field]
        if not (b.min <= new <= b.max and abs(new - old) <= b.max_step_per_edit + 1e-12):
            bounded = False
        if field in last_edit_t and r.t - last_edit_t[field] < b.edit_cooldown_s:
            bounded = False
        last_edit_t[field] = r.t
    ttl_edits = [r for r in edits if r.payload.get("ttl_s")]
    reverts = [r for r in records if r.kind == "ttl_revert"]
    ttl_ok = len(reverts) >= len(ttl_edits) > 0 if ttl_edits else True
    without = run_scenario(cfg, str(tmp_path / "noapt"), tuner_enabled=False)
    tick_ok = without.xapp_tick_counts == with_tuner.xapp_tick_counts
    report("tuner boundedness (range/max-step/cooldown; TTL reverts; tick counts unchanged)",
           bounded and ttl_ok and tick_ok and len(edits) > 0,
           f"edits={len(edits)} ttl_edits={len(ttl_edits)} reverts={len(reverts)} ticks_equal={tick_ok}")


def test_ttl_revert_byte_identity():
    spec = default_guardrails()
    store = PolicyStore(spec)
    store.register_schema(AGENT_QOE, descriptors_for(AGENT_QOE))
    base = default_values(AGENT_QOE, spec)
    store.publish(AGENT_QOE, base, "default", 0.0)
    before = serialize_values(store.snapshot(AGENT_QOE).values)
    edited = values_from_dict(AGENT_QOE, dict(store.snapshot(AGENT_QOE).values_dict(),
                                              headroom_min=0.17))
    store.publish(AGENT_QOE, edited, "apt", 10.0, ttl_s=30.0)
    store.process_ttl(41.0)
    after = serialize_values(store.snapshot(AGENT_QOE).values)
    report("TTL revert restores byte-identical values", before == after)


# --------------------------------------------------------------------------
# Directional scenario reproduction: 3 seeds, both controllers, median deltas.
# --------------------------------------------------------------------------

def test_directional_scenario_reproduction(tmp_path):
    started = time.monotonic()
    cfg = default_config()
    summaries = {}
    for controller in ("baseline", "agentic"):
        for seed in (1, 2, 3):
            result = run_scenario(cfg.with_seed(seed).with_controller(controller),
                                  str(tmp_path / f"{controller}-{seed}"))
            summaries[(controller, seed)] = result.summary
    criteria = [
        ("emergency DL p10 higher", "emergency", "dl_p10_mbps", "higher"),
        ("emergency p90/p10 ratio lower", "emergency", "p90_p10_ratio", "lower"),
        ("outage fraction <0.10 Mbps lower", "all", "frac_below_0p10", "lower"),
        ("incident-cell DL share higher", "recovery", "hotspot_share", "higher"),
        ("emergency p90 dwell not lower", "emergency", "dwell_p90_s", "not-lower"),
    ]
    all_ok = True
    details = []
    for label, phase, metric, direction in criteria:
        deltas = sorted(summaries[("agentic", s)][phase][metric]
                        - summaries[("baseline", s)][phase][metric] for s in (1, 2, 3))
        median_delta = percentile(deltas, 0.5)
        if direction == "higher":
            ok = median_delta > 0
        elif direction == "lower":
            ok = median_delta < 0
        else:
            ok = median_delta >= 0
        all_ok &= ok
        details.append(f"{label}: median delta {median_delta:+.4f} {'ok' if ok else 'WRONG SIGN'}")
    elapsed = time.monotonic() - started
    report("directional scenario reproduction (3 seeds, sign of median per-seed delta)",
           all_ok and elapsed < 600.0, "; ".join(details) + f"; elapsed={elapsed:.0f}s")


# --------------------------------------------------------------------------
# Oracle suites.
# --------------------------------------------------------------------------

def test_percentile_oracle_suite():
    rng = random.Random(99)
    failures = 0
    for _ in range(1_000):
        values = [rng.uniform(-1e6, 1e6) for _ in range(rng.randint(1, 200))]
        q = rng.random()
        ordered = sorted(values)
        rank = min(max(math.ceil(q * len(ordered)), 1), len(ordered))
        if percentile(values, q) != ordered[rank - 1]:
            failures += 1
    report("percentile vs brute-force oracle (1,000 cases)", failures == 0,
           f"failures={failures}")


def test_stable_merge_order_oracle_suite():
    def oracle(pairs, hint):
        if not hint:
            return list(pairs)
        keys = [p.key() for p in pairs]
        if len(set(hint)) != len(hint) or any(h not in keys for h in hint):
            return list(pairs)
        named = [p for h in hint for p in pairs if p.key() == h]
        return named + [p for p in pairs if p.key() not in set(hint)]

    base = [HotCoolPair(i, i + 10, 1.0 - 0.1 * i) for i in range(1, 5)]
    failures = 0
    cases = 0
    for n in range(5):
        pairs = base[:n]
        keys = [p.key() for p in pairs]
        for r in range(n + 1):
            for subset in itertools.combinations(keys, r):
                for hint in itertools.permutations(subset):
                    cases += 1
                    if stable_merge_order(pairs, list(hint)) != oracle(pairs, list(hint)):
                        failures += 1
    report("stable merge order vs exhaustive promotion oracle (all lists <=4 pairs)",
           failures == 0, f"cases={cases} failures={failures}")


def test_idle_assessment_oracle_suite():
    policy = default_values("energy", default_guardrails())
    policy = dataclasses.replace(policy, idle_window_min=1.0)
    scenarios = [
        lambda t: (0.0, 0.0, 0),
        lambda t: (0.04, 0.4, 1),
        lambda t: (0.08, 0.0, 0),
        lambda t: (0.0, 0.8, 0),
        lambda t: (0.0, 0.0, 2),
        lambda t: (0.5 if t == 80 else 0.0, 0.0, 0),
    ]
    failures = 0
    for fn in scenarios:
        store = TelemetryStore()
        for t in range(1, 121):
            prb, sched, ues = fn(t)
            store.ingest(KpiSample(t=float(t), phase="normal", cell_id=1, prb_dl=prb,
                                   sched_dl_mbps=sched, attached_ue_count=ues))
        got = assess_idle(1, store, policy, now=120.0, first_sample_t=1.0).idle
        rows = store.cell_samples(1, 60.0, 120.0)
        want = (len(rows) == 60
                and max(s.prb_dl for s in rows) <= policy.idle_prb_max
                and max(s.sched_dl_mbps for s in rows) <= policy.idle_sched_mbps_max
                and max(s.attached_ue_count for s in rows) <= policy.idle_ue_max
                and len([e for e in store.ho_events(60.0, 120.0) if e.to_cell == 1]) / 60.0
                <= policy.ho_arrival_max_hz)
        if got != want:
            failures += 1
    report("idle assessment vs direct window recomputation", failures == 0,
           f"failures={failures}")
