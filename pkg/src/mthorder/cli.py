"""Command-line entry point.

``mthorder run <config.json>`` runs one experiment config, writes its
report directory, and exits 0 when every verdict holds.  ``--all``
sweeps the built-in catalog; ``--list`` prints it.  Exit codes: 0 ok,
1 a verdict was violated, 2 bad config, 3 a job failed numerically.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness


def _print_verdicts(verdicts) -> None:
    for v in verdicts:
        print(f"{v.status:24s} {v.name}: lhs={v.lhs.value:.10g} "
              f"rhs={v.rhs.value:.10g} margin={v.margin:+.4g}")


def _run_all(args) -> int:
    base = Path(args.out) if args.out else Path("runs")
    seed = 0 if args.seed is None else args.seed
    threads = harness.resolve_threads(None)
    code = 0
    for exp in sorted(harness.CATALOG.values(), key=lambda e: e.criterion):
        verdicts = harness.run_experiment(exp.name, seed=seed,
                                          samples=args.samples)
        manifest = harness.build_manifest(exp.name, None, seed, args.samples,
                                          threads, verdicts)
        out = harness.write_report(base / exp.name, exp.name, verdicts,
                                   manifest)
        _print_verdicts(verdicts)
        print(f"[{exp.name}] report in {out}")
        code = max(code, harness.exit_code(verdicts))
    return code


def _run_one(args) -> int:
    cfg = harness.load_config(args.config)
    verdicts = harness.run_config(cfg, seed=args.seed, samples=args.samples)
    seed = cfg.seed if args.seed is None else args.seed
    samples = cfg.samples if args.samples is None else args.samples
    label = cfg.experiment if cfg.experiment is not None else cfg.name
    out_dir = Path(args.out) if args.out else Path("runs") / cfg.name
    manifest = harness.build_manifest(label, cfg, seed, samples,
                                      harness.resolve_threads(None), verdicts)
    out = harness.write_report(out_dir, label, verdicts, manifest)
    _print_verdicts(verdicts)
    print(f"report in {out}")
    return harness.exit_code(verdicts)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mthorder",
        description="Verdict experiments for m-th order covariograms, "
                    "radial mean bodies, and their inequality chains.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a config file or the catalog")
    run.add_argument("config", nargs="?",
                     help="path to a JSON experiment config")
    run.add_argument("--seed", type=int, default=None,
                     help="override the config seed")
    run.add_argument("--samples", type=int, default=None,
                     help="override Monte Carlo sample budgets")
    run.add_argument("--out", default=None,
                     help="report directory (default runs/<name>)")
    run.add_argument("--all", action="store_true", dest="run_all",
                     help="run every built-in experiment")
    run.add_argument("--list", action="store_true", dest="list_catalog",
                     help="print the built-in experiment catalog")
    args = parser.parse_args(argv)

    if args.list_catalog:
        for line in harness.catalog_lines():
            print(line)
        return 0
    try:
        if args.run_all:
            if args.config is not None:
                raise harness.ConfigError("--all does not take a config file")
            return _run_all(args)
        if args.config is None:
            raise harness.ConfigError(
                "need a config file, --all, or --list (see mthorder run -h)")
        return _run_one(args)
    except harness.ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except harness.NumericFailure as e:
        print(f"numeric failure in job {e.job!r}: {e.cause}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
