"""Command-line entry point: ``symrl run|compare|verify|export-csv``.

Exit status is 0 on success, 1 when a run hits a numeric failure or a
verification check fails, and 2 for invalid input.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from symrl import experiment, verify
from symrl.errors import ValidationError

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", help="only print the final result")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="symrl", description="Symmetric RL losses on numpy toy environments.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="train every seed of an experiment config")
    run.add_argument("config", type=Path)
    run.add_argument("--seed-override", type=int, action="append", metavar="SEED",
                     help="run these seeds instead of the config's (repeatable)")
    run.add_argument("--output-dir", type=Path,
                     help=f"where metrics and summary go (default: config, then ${experiment.OUTPUT_DIR_ENV}, then ./runs/<name>)")
    run.add_argument("--debug-gradient-probe", action="store_true",
                     help="finite-difference check of three gradient coordinates on every minibatch")
    run.add_argument("--jobs", type=int, default=1, help="seeds trained in parallel processes")

    cmp_ = sub.add_parser("compare", parents=[common], help="paired comparison of two summary files")
    cmp_.add_argument("summary_a", type=Path)
    cmp_.add_argument("summary_b", type=Path)

    ver = sub.add_parser("verify", parents=[common], help="run a built-in property suite")
    ver.add_argument("suite", choices=verify.SUITES + ("all",))

    exp = sub.add_parser("export-csv", parents=[common], help="convert a metrics JSONL file to CSV")
    exp.add_argument("metrics", type=Path)
    exp.add_argument("-o", "--out", type=Path, help="CSV path (default: alongside the metrics file)")
    return parser


def cmd_run(args) -> int:
    cfg = experiment.ExperimentConfig.load(args.config, output_dir=args.output_dir, seeds=args.seed_override)
    if args.debug_gradient_probe:
        cfg = replace(cfg, trainer=replace(cfg.trainer, debug_gradient_probe=True))
    summary = experiment.run_experiment(cfg, jobs=args.jobs, quiet=args.quiet)
    for s in summary.seeds:
        if s.error:
            print(f"seed {s.seed}: FAILED {s.error}", file=sys.stderr)
        elif not args.quiet:
            print(f"seed {s.seed}: final return {s.final_mean:.3f} +/- {s.final_se:.3f}")
    if summary.aggregate_mean is not None:
        print(f"{summary.name}: {summary.aggregate_mean:.3f} +/- {summary.aggregate_se:.3f} over {len(summary.seeds)} seeds "
              f"-> {cfg.output_dir / 'summary.json'}")
    return EXIT_FAILURE if summary.failed else EXIT_OK


def cmd_compare(args) -> int:
    report = experiment.compare(args.summary_a, args.summary_b)
    if args.quiet:
        print(json.dumps({k: report[k] for k in ("verdict", "mean_difference", "difference_se")}))
    else:
        print(json.dumps(report, indent=2))
    return EXIT_OK


def cmd_verify(args) -> int:
    suites = verify.SUITES if args.suite == "all" else (args.suite,)
    failed = 0
    for name in suites:
        for check in verify.run_suite(name):
            failed += not check.passed
            if not args.quiet or not check.passed:
                print(f"[{'PASS' if check.passed else 'FAIL'}] {name}: {check.name}: {check.detail}")
    print(f"{failed} failed check(s)")
    return EXIT_FAILURE if failed else EXIT_OK


def cmd_export_csv(args) -> int:
    out = experiment.export_csv(args.metrics, args.out)
    if not args.quiet:
        print(out)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "verify": cmd_verify, "export-csv": cmd_export_csv}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
