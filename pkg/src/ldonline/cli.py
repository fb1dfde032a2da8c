"""Command-line front end for the simulator.

Subcommands: validate-config, run, sweep, sensitivity, budget. Exit codes:
0 success, 1 validation failure, 2 runtime failure, 64 usage error.
Output files are written atomically (temp file then rename).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile

import numpy as np

from . import privacy, schedules, simulate
from .config import ConfigError, load_config

EXIT_OK = 0
EXIT_INVALID = 1      # config or theorem-condition validation failed
EXIT_RUNTIME = 2      # run started but failed (diverged replicate etc.)
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _atomic_write(path, writer):
    """Write via a sibling temp file and rename, so readers never see partials."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_trace(trace, path):
    if path.endswith(".csv"):
        def writer(fh):
            w = csv.writer(fh)
            for row in trace.csv_rows():
                w.writerow(row)
    else:
        def writer(fh):
            fh.write(trace.to_json() + "\n")
    _atomic_write(path, writer)


def _load(args):
    return load_config(args.config, overrides=args.override or ())


def _apply_run_flags(config, args):
    kwargs = {}
    if getattr(args, "seed", None) is not None:
        kwargs["seed"] = args.seed
    if getattr(args, "horizon", None) is not None:
        kwargs["horizon"] = args.horizon
    if getattr(args, "replicates", None) is not None:
        kwargs["replicates"] = args.replicates
    if kwargs:
        from dataclasses import replace
        config = replace(config, **kwargs)
    return config


def _theorem_check(config):
    sched = config.schedules
    if sched.regime == "theorem2":
        return schedules.check_theorem2(config.problem, config.weights, sched,
                                        config.noise)
    if sched.regime in ("theorem1", "ablation_constant_gamma"):
        return schedules.check_theorem1(config.problem, config.weights, sched,
                                        config.noise)
    return None


def cmd_validate(args) -> int:
    config = _load(args)
    report = {"ok": True, "violations": [], "warnings": []}
    check = _theorem_check(config)
    if check is not None:
        report = check.as_dict()
    sched = config.schedules
    if sched.regime == "theorem3":
        try:
            t0 = schedules.compute_t0(config.problem, config.weights, sched)
            report = {"ok": True, "violations": [], "warnings": [], "t0": t0}
        except ValueError as exc:
            report = {"ok": False, "violations": [str(exc)], "warnings": []}
    elif sched.regime == "theorem4":
        try:
            t0 = schedules.compute_t0_tilde(config.problem, config.weights, sched)
            report = {"ok": True, "violations": [], "warnings": [], "t0": t0}
        except ValueError as exc:
            report = {"ok": False, "violations": [str(exc)], "warnings": []}
    report["config_digest"] = simulate.config_digest(config)
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK if report["ok"] else EXIT_INVALID


def cmd_run(args) -> int:
    config = _apply_run_flags(_load(args), args)
    if args.dry_run:
        from dataclasses import replace
        smoke = replace(config, horizon=10, replicates=1, checkpoints=(0, 10))
        simulate.run(smoke)
        print(json.dumps({"config_digest": simulate.config_digest(config),
                          "checkpoints": config.resolved_checkpoints(),
                          "engine": config.resolved_engine(),
                          "smoke_rounds": 10},
                         indent=2, sort_keys=True))
        return EXIT_OK
    trace = simulate.run(config)
    if args.out:
        _write_trace(trace, args.out)
    summary = trace.as_dict()
    summary.pop("eps_partial", None)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_sweep(args) -> int:
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        print("sweep: no values given", file=sys.stderr)
        return EXIT_USAGE
    os.makedirs(args.out, exist_ok=True)
    index = []
    for value in values:
        overrides = list(args.override or ()) + [f"{args.param}={value}"]
        config = _apply_run_flags(
            load_config(args.config, overrides=overrides), args)
        trace = simulate.run(config)
        safe = value.replace("/", "_").replace('"', "")
        path = os.path.join(args.out, f"trace_{args.param}_{safe}.json")
        _write_trace(trace, path)
        index.append({"param": args.param, "value": value, "trace": path,
                      "final_tracking": trace.tracking[-1],
                      "final_regret": trace.regret[-1]})
    _atomic_write(os.path.join(args.out, "sweep_index.json"),
                  lambda fh: fh.write(json.dumps(index, indent=2) + "\n"))
    print(json.dumps(index, indent=2))
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    config = _apply_run_flags(_load(args), args)
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    worst = 0.0
    rows = []
    ok = True
    for trial in range(args.trials):
        k = int(rng.integers(0, config.horizon + 1)) if args.k is None else args.k
        alt_rep = 1_000_000 + trial
        alt_X, alt_Y = config.stream.draw(config.seed, alt_rep, args.learner, 1)
        trace, bound = privacy.empirical_sensitivity(
            config, args.learner, k, alt_X[0], alt_Y[0])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(bound > 0, trace / np.maximum(bound, 1e-300), 0.0)
        trial_ok = bool(np.all(trace <= bound + 1e-12))
        ok = ok and trial_ok
        worst = max(worst, float(ratios.max()))
        rows.append({"trial": trial, "k": k, "max_divergence": float(trace.max()),
                     "max_ratio": float(ratios.max()), "ok": trial_ok})
    report = {"ok": ok, "worst_ratio": worst, "trials": rows}
    if args.out:
        _atomic_write(args.out,
                      lambda fh: fh.write(json.dumps(report, indent=2) + "\n"))
    print(json.dumps({"ok": ok, "worst_ratio": worst}, indent=2))
    return EXIT_OK if ok else EXIT_INVALID


def cmd_budget(args) -> int:
    config = _apply_run_flags(_load(args), args)
    if args.at:
        checkpoints = sorted(set(args.at))
    else:
        checkpoints = config.resolved_checkpoints()
    report = {"checkpoints": checkpoints, "learners": {}}
    for i in range(config.m):
        curve, _ = privacy.budget_curve(
            config.problem, config.schedules, config.noise[i],
            config.weights.wbar if config.m > 1 else 1.0,
            config.dim, checkpoints)
        bound = privacy.budget_bound(
            config.problem, config.schedules, config.noise[i],
            config.weights.wbar if config.m > 1 else 1.0,
            config.dim, max(checkpoints))
        report["learners"][str(i)] = {
            "eps_partial": [curve[t] for t in checkpoints],
            "eps_horizon": bound["eps_T"],
            "tail_estimate": bound["tail_estimate"],
            "tail_exponent": bound["tail_exponent"],
            "warnings": bound["warnings"],
        }
    if args.out:
        _atomic_write(args.out,
                      lambda fh: fh.write(json.dumps(report, indent=2) + "\n"))
    print(json.dumps(report, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ldonline",
                     description="Private distributed online learning simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, run_flags=True):
        p.add_argument("config", help="TOML configuration file")
        p.add_argument("--override", action="append", metavar="KEY=VALUE",
                       help="dotted-key config override, TOML-typed value")
        if run_flags:
            p.add_argument("--seed", type=int)
            p.add_argument("--horizon", type=int)
            p.add_argument("--replicates", type=int)

    p = sub.add_parser("validate-config",
                       help="check structure, spectrum, and regime conditions")
    common(p, run_flags=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="simulate and write the metric trace")
    common(p)
    p.add_argument("--out", help="trace output path (.json or .csv)")
    p.add_argument("--dry-run", action="store_true",
                   help="resolve the config and print its digest without running")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run once per value of one parameter")
    common(p)
    p.add_argument("--param", required=True, metavar="SECTION.KEY")
    p.add_argument("--values", required=True,
                   help="comma-separated TOML-typed values")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("sensitivity",
                       help="coupled-trajectory divergence vs the analytic bound")
    common(p)
    p.add_argument("--learner", type=int, default=0)
    p.add_argument("--k", type=int, default=None,
                   help="index of the differing sample (random per trial if unset)")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--out", help="JSON report path")
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("budget", help="privacy budget curve and tail bound")
    common(p)
    p.add_argument("at", nargs="*", type=int,
                   help="round indices to report (default: run checkpoints)")
    p.add_argument("--out", help="JSON report path")
    p.set_defaults(func=cmd_budget)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except simulate.SimulationError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
