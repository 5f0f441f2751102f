"""Command line front end.

    gmcast run <cfg> [--seed N] [--algorithm base|ft] [--no-recovery]
                     [--assert-latency B] [--trace-out PATH]
                     [--figures DIR] [--sweep K]
    gmcast check <trace> <cfg>
    gmcast sweep <cfg> --sweep K [--seed N] [--assert-latency B] ...

Exit status: 0 all verdicts pass and latency assertions hold, 1 any
failure, 2 config or usage errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

from .core import GmcastError
from .report import build_report, render_run_figure, render_sweep_figure
from .scenario import ConfigError, Scenario, ScenarioInvalid, load_scenario
from .simnet import Trace, run


def _apply_overrides(template: Scenario, args: argparse.Namespace) -> Scenario:
    sc = template
    if getattr(args, "algorithm", None):
        sc = replace(sc, algorithm=args.algorithm)
        if sc.generate is not None:
            sc = replace(sc, generate={**sc.generate,
                                       "algorithm": args.algorithm})
    if getattr(args, "no_recovery", False):
        sc = replace(sc, recovery=False)
    return sc


def _write_trace(trace: Trace, report, path: str) -> None:
    Path(path).write_text(trace.to_text(summary=report.summary()))


def cmd_run(args: argparse.Namespace) -> int:
    template = _apply_overrides(load_scenario(args.config), args)
    if args.sweep and args.sweep > 1:
        return _sweep(template, args)
    seed = args.seed if args.seed is not None else template.seed
    sc = template.realize(seed)
    trace = run(sc)
    report = build_report(trace, sc, assert_latency=args.assert_latency)
    sys.stdout.write(report.to_text())
    if args.trace_out:
        _write_trace(trace, report, args.trace_out)
    if args.figures:
        outdir = Path(args.figures)
        outdir.mkdir(parents=True, exist_ok=True)
        render_run_figure(trace, sc, outdir / f"{template.name}_timeline.png")
    return report.exit_status


def _sweep(template: Scenario, args: argparse.Namespace) -> int:
    base = args.seed if args.seed is not None else template.seed
    all_latencies: list[int] = []
    per_class_max: dict[str, int] = {}
    failures: list[str] = []
    for i in range(args.sweep):
        sc = template.realize(base + i)
        trace = run(sc)
        report = build_report(trace, sc, assert_latency=args.assert_latency)
        values = [v for v in report.latencies.values() if v is not None]
        all_latencies.extend(values)
        if values:
            cls = report.classification
            per_class_max[cls] = max(per_class_max.get(cls, 0), max(values))
        if not report.ok:
            bad = [v.name for v in report.verdicts if not v.passed]
            failures.append(f"seed {base + i}: {','.join(bad) or 'latency'}")
    lines = [f"scenario\t{template.name}", f"sweep\t{args.sweep}"]
    for cls in sorted(per_class_max):
        lines.append(f"max-latency\t{cls}\t{per_class_max[cls]}")
    if args.assert_latency is not None:
        worst = max(all_latencies, default=0)
        held = worst <= args.assert_latency
        lines.append(f"assert-latency\t{args.assert_latency}"
                     f"\t{'PASS' if held else 'FAIL'}")
        if not held:
            failures.append(f"latency {worst} > {args.assert_latency}")
    for f in failures:
        lines.append(f"failure\t{f}")
    lines.append(f"result\t{'PASS' if not failures else 'FAIL'}")
    sys.stdout.write("\n".join(lines) + "\n")
    if args.figures:
        outdir = Path(args.figures)
        outdir.mkdir(parents=True, exist_ok=True)
        render_sweep_figure(all_latencies, args.assert_latency,
                            f"{template.name}: {args.sweep} seeds",
                            outdir / f"{template.name}_latency_hist.png")
    return 0 if not failures else 1


def cmd_check(args: argparse.Namespace) -> int:
    trace = Trace.parse(Path(args.trace).read_text())
    template = load_scenario(args.config)
    seed = trace.meta.get("seed", template.seed)
    sc = template.realize(int(seed))
    if trace.meta.get("algorithm") not in (None, sc.algorithm):
        print(f"error: trace was produced by algorithm="
              f"{trace.meta['algorithm']}, config says {sc.algorithm}",
              file=sys.stderr)
        return 2
    report = build_report(trace, sc)
    sys.stdout.write(report.to_text())
    return report.exit_status


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="gmcast",
        description="Run and check generic multicast simulations.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario (or a sweep)")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--algorithm", choices=("base", "ft"))
    p_run.add_argument("--no-recovery", action="store_true")
    p_run.add_argument("--assert-latency", type=int, default=None,
                       metavar="BOUND")
    p_run.add_argument("--trace-out", metavar="PATH")
    p_run.add_argument("--figures", metavar="DIR")
    p_run.add_argument("--sweep", type=int, default=None, metavar="K")
    p_run.set_defaults(func=cmd_run)

    p_check = sub.add_parser("check", help="re-check a recorded trace")
    p_check.add_argument("trace")
    p_check.add_argument("config")
    p_check.set_defaults(func=cmd_check)

    p_sweep = sub.add_parser("sweep", help="run K seeds and aggregate")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--sweep", type=int, required=True, metavar="K")
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--algorithm", choices=("base", "ft"))
    p_sweep.add_argument("--no-recovery", action="store_true")
    p_sweep.add_argument("--assert-latency", type=int, default=None,
                         metavar="BOUND")
    p_sweep.add_argument("--figures", metavar="DIR")
    p_sweep.set_defaults(
        func=lambda args: _sweep(_apply_overrides(load_scenario(args.config),
                                                  args), args))

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ScenarioInvalid) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except GmcastError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
