"""Command-line interface: dataset generation, runs, sweeps, and reports.

Subcommands: ``gen-data``, ``train``, ``plan``, ``ablate``, ``report``,
``print-defaults``. Every knob has a built-in default, an optional config
file overrides defaults, and command-line flags override the file
(precedence: flags > file > defaults). Exit code is 0 iff every run
succeeded.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import default_config, format_defaults, parse_config
from .data import dump_csv, make_synthetic
from .errors import SemikitError
from .harness import (ABLATION_KINDS, ablate, execute_cell,
                      format_ablation_markdown, format_summary_markdown,
                      plan_from_config, report, run_plan)


def _add_config_flags(parser):
    parser.add_argument("--config", metavar="PATH",
                        help="config file (sectioned key = value)")
    parser.add_argument("--seed", type=int, metavar="N",
                        help="train with this single seed")
    parser.add_argument("--out", metavar="DIR", help="output directory")


def _add_sweep_flags(parser):
    parser.add_argument("--jobs", type=int, metavar="N",
                        help="parallel worker processes")
    parser.add_argument("--algorithm", metavar="NAME",
                        help="restrict to one algorithm")
    parser.add_argument("--labels-per-class", type=int, metavar="N",
                        help="restrict to one label budget")
    parser.add_argument("--iterations", type=int, metavar="K",
                        help="training iterations per run")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="semikit",
        description="curriculum pseudo-labeling on synthetic datasets",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic dataset CSV")
    _add_config_flags(p)

    p = sub.add_parser("train", help="train one run and write its metrics")
    _add_config_flags(p)
    _add_sweep_flags(p)

    p = sub.add_parser("plan", help="run the full sweep and summarize")
    _add_config_flags(p)
    _add_sweep_flags(p)

    p = sub.add_parser("ablate", help="run a one-knob comparison")
    p.add_argument("kind", choices=ABLATION_KINDS)
    _add_config_flags(p)
    _add_sweep_flags(p)

    p = sub.add_parser("report", help="derive curve CSVs and a text table")
    p.add_argument("run_dir", metavar="DIR")

    sub.add_parser("print-defaults", help="print every default as a config")
    return parser


def _load_config(args):
    """Config dict with flag overrides applied (flags > file > defaults)."""
    if args.config is not None:
        config = parse_config(args.config)
    else:
        config = default_config()
    if getattr(args, "iterations", None) is not None:
        config["train"]["iterations"] = args.iterations
    if getattr(args, "algorithm", None) is not None:
        config["plan"]["algorithms"] = [args.algorithm]
    if getattr(args, "labels_per_class", None) is not None:
        config["plan"]["label_budgets"] = [args.labels_per_class]
    if args.seed is not None:
        config["plan"]["seeds"] = [args.seed]
    if getattr(args, "jobs", None) is not None:
        config["plan"]["jobs"] = args.jobs
    if args.out is not None:
        config["plan"]["out"] = args.out
    return config


def _cmd_gen_data(args):
    config = default_config() if args.config is None \
        else parse_config(args.config)
    d = config["dataset"]
    seed = d["seed"] if args.seed is None else args.seed
    x, y = make_synthetic(d["kind"], d["n_samples"],
                          n_classes=d["n_classes"], noise=d["noise"],
                          seed=seed, imbalance_ratio=d["imbalance_ratio"])
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{d['kind']}.csv")
    dump_csv(path, x, y)
    print(f"wrote {len(y)} samples to {path}")
    return 0


def _cmd_train(args):
    config = _load_config(args)
    plan = plan_from_config(config)
    algorithm = plan.algorithms[0]
    budget = plan.label_budgets[0]
    seed = plan.seeds[0]
    os.makedirs(os.path.join(plan.out_dir, "runs"), exist_ok=True)
    outcome = execute_cell(plan, algorithm, budget, seed)
    if not outcome.succeeded:
        print(f"{outcome.run_id}: FAILED ({outcome.error})", file=sys.stderr)
        return 1
    print(f"{outcome.run_id}: best error {100 * outcome.best_error:.2f}%, "
          f"median of last 20 checkpoints "
          f"{100 * outcome.median_last20_error:.2f}%")
    print(f"metrics: {outcome.csv_path}")
    return 0


def _cmd_plan(args):
    plan = plan_from_config(_load_config(args))
    result = run_plan(plan)
    print(format_summary_markdown(plan, result.summary))
    for outcome in result.outcomes:
        if not outcome.succeeded:
            print(f"{outcome.run_id}: FAILED ({outcome.error})",
                  file=sys.stderr)
    print(f"summary: {os.path.join(result.out_dir, 'summary.md')}")
    return 0 if result.ok else 1


def _cmd_ablate(args):
    plan = plan_from_config(_load_config(args))
    result = ablate(args.kind, plan)
    print(format_ablation_markdown(result.kind, result.rows))
    print(f"details: {os.path.join(result.out_dir, 'ablation.csv')}")
    return 0 if result.ok else 1


def _cmd_report(args):
    rows = report(args.run_dir)
    print(f"reported {len(rows)} runs; see "
          f"{os.path.join(args.run_dir, 'report.md')} and "
          f"{os.path.join(args.run_dir, 'curves')}/")
    return 0


def _cmd_print_defaults(_args):
    print(format_defaults())
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "plan": _cmd_plan,
    "ablate": _cmd_ablate,
    "report": _cmd_report,
    "print-defaults": _cmd_print_defaults,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except SemikitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
