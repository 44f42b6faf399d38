"""Operator entry point: run scenarios, replay audits, compare runs, sweep seeds.

Exit codes: 0 success; 2 scenario/config parse failure; 3 audit storage
failure; 4 guard failure (seed or scenario mismatch, existing run without
--force, unknown subject).
"""

from __future__ import annotations

import argparse
import filecmp
import json
import math
import os
import sys

from .audit import AuditError, explain as explain_records, load_log
from .config import ConfigError, RunConfig, load_config, load_snapshot
from .metrics import aggregate_sweep, compare_summaries, load_summary_csv
from .runner import RunnerError, replay_run, run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STORAGE = 3
EXIT_GUARD = 4


def _default_scenario_path() -> str:
    import importlib.resources
    return str(importlib.resources.files("ricloop").joinpath("data/default_scenario.yaml"))


def _load(scenario: str) -> RunConfig:
    return load_config(scenario)


def cmd_run(args) -> int:
    cfg = _load(args.scenario)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.controller:
        cfg = cfg.with_controller(args.controller)
    result = run_scenario(cfg, args.out, force=args.force)
    print(f"run complete: controller={cfg.controller} seed={cfg.sim.seed}")
    for name in ("kpi_path", "summary_path", "audit_path", "snapshot_path"):
        print(f"  {getattr(result, name)}")
    return EXIT_OK


def cmd_replay(args) -> int:
    cfg = load_snapshot(args.snapshot)
    result = replay_run(args.audit, cfg, args.out, force=args.force)
    print(f"replay complete: {result.kpi_path}")
    if args.check_against:
        same = filecmp.cmp(result.kpi_path, args.check_against, shallow=False)
        print(f"kpi.csv bitwise {'MATCH' if same else 'MISMATCH'} vs {args.check_against}")
        if not same:
            return EXIT_GUARD
    return EXIT_OK


def _check_same_run_pair(dir_a: str, dir_b: str) -> None:
    snap_a = load_snapshot(os.path.join(dir_a, "config.snapshot.yaml"))
    snap_b = load_snapshot(os.path.join(dir_b, "config.snapshot.yaml"))
    if snap_a.fingerprint() != snap_b.fingerprint():
        raise AuditError("runs come from different scenarios")
    if snap_a.sim.seed != snap_b.sim.seed:
        raise AuditError(f"runs use different seeds ({snap_a.sim.seed} vs {snap_b.sim.seed})")


def cmd_compare(args) -> int:
    _check_same_run_pair(args.run_a, args.run_b)
    summary_a = load_summary_csv(os.path.join(args.run_a, "summary.csv"))
    summary_b = load_summary_csv(os.path.join(args.run_b, "summary.csv"))
    table = compare_summaries(summary_a, summary_b)
    _print_compare(table)
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as fh:
            json.dump(table, fh, indent=2, sort_keys=True, default=_json_inf)
        print(f"wrote {args.json_out}")
    return EXIT_OK


def _json_inf(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    raise TypeError(value)


def _print_compare(table: dict) -> None:
    print(f"{'phase':<10} {'metric':<22} {'a':>12} {'b':>12} {'delta':>12}")
    for phase in table:
        for metric, row in table[phase].items():
            print(f"{phase:<10} {metric:<22} {row['a']:>12.4f} {row['b']:>12.4f} "
                  f"{row['delta']:>12.4f}")


def cmd_sweep(args) -> int:
    cfg = _load(args.scenario)
    seeds = [int(s) for s in args.seeds.split(",") if s]
    if not seeds:
        raise ConfigError("at least one seed required")
    per_controller: dict[str, dict[int, dict]] = {}
    for controller in ("baseline", "agentic"):
        per_seed = {}
        for seed in seeds:
            run_dir = os.path.join(args.out, f"{controller}-seed{seed}")
            result = run_scenario(cfg.with_seed(seed).with_controller(controller),
                                  run_dir, force=args.force)
            per_seed[seed] = result.summary
        per_controller[controller] = per_seed
    aggregate = {c: aggregate_sweep(per_seed) for c, per_seed in per_controller.items()}
    out_path = os.path.join(args.out, "sweep.json")
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(aggregate, fh, indent=2, sort_keys=True, default=_json_inf)
    print(f"swept seeds {seeds} for both controllers -> {out_path}")
    return EXIT_OK


def cmd_explain(args) -> int:
    records = load_log(args.audit)
    lines = explain_records(records, args.subject)
    for line in lines:
        print(line)
    if not lines:
        print(f"(no records for subject {args.subject!r})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ricloop",
        description="Deterministic intent-driven RAN control experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one scenario run")
    p_run.add_argument("--scenario", default=_default_scenario_path())
    p_run.add_argument("--controller", choices=["baseline", "agentic"])
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--force", action="store_true")
    p_run.set_defaults(fn=cmd_run)

    p_replay = sub.add_parser("replay", help="re-drive a run from its audit log")
    p_replay.add_argument("--audit", required=True)
    p_replay.add_argument("--snapshot", required=True)
    p_replay.add_argument("--out", required=True)
    p_replay.add_argument("--check-against", help="original kpi.csv to compare bytes against")
    p_replay.add_argument("--force", action="store_true")
    p_replay.set_defaults(fn=cmd_replay)

    p_cmp = sub.add_parser("compare", help="compare two completed runs")
    p_cmp.add_argument("--run-a", required=True)
    p_cmp.add_argument("--run-b", required=True)
    p_cmp.add_argument("--json-out")
    p_cmp.set_defaults(fn=cmd_compare)

    p_sweep = sub.add_parser("sweep", help="run both controllers over a seed list")
    p_sweep.add_argument("--scenario", default=_default_scenario_path())
    p_sweep.add_argument("--seeds", required=True, help="comma-separated, e.g. 1,2,3")
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--force", action="store_true")
    p_sweep.set_defaults(fn=cmd_sweep)

    p_explain = sub.add_parser("explain", help="decision trace for a UE, cell, or field")
    p_explain.add_argument("--audit", required=True)
    p_explain.add_argument("--subject", required=True, help="e.g. ue5, cell3, cio_step_db")
    p_explain.set_defaults(fn=cmd_explain)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AuditError as exc:
        print(f"guard failure: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except RunnerError as exc:
        print(f"guard failure: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except OSError as exc:
        print(f"storage failure: {exc}", file=sys.stderr)
        return EXIT_STORAGE


if __name__ == "__main__":
    sys.exit(main())
