"""Experiment sweeps: plan runner, ablations, and report generation.

A plan is the cross product algorithm x label budget x seed over one
synthetic dataset. Each cell trains one model and writes one metrics CSV
under ``<out>/runs/``; completed CSVs are detected and reused, so deleting
a single run's file and re-running the plan regenerates exactly that run
(runs are independently seeded, so the bytes come out identical). After all
runs finish, a single-threaded aggregation pass writes ``summary.csv`` and
a markdown table of best / median-of-last-20 error as mean +/- sample std
across seeds.

Ablations are small derived plans varying one knob at a time: the threshold
cap tau, the mapping function, threshold warm-up (on two datasets), and
class balancing (FixMatch with and without the balance objective vs
FlexMatch).
"""

from __future__ import annotations

import glob
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .augment import AugmentConfig
from .config import default_config
from .data import make_synthetic, split
from .errors import ConfigError
from .losses import ALGORITHM_NAMES, algorithm_spec
from .metrics import read_metrics_csv, summarize, write_metrics_csv
from .training import TrainConfig, train

DISPLAY_NAMES = {
    "pl": "PL",
    "flex_pl": "Flex-PL",
    "uda": "UDA",
    "flex_uda": "Flex-UDA",
    "fixmatch": "FixMatch",
    "flexmatch": "FlexMatch",
}

ABLATION_KINDS = ("tau_sweep", "mapping", "warmup", "class_balance")
TAU_SWEEP_VALUES = (0.85, 0.9, 0.95, 0.97, 1.0)


@dataclass(frozen=True)
class DatasetSpec:
    """Everything needed to regenerate a dataset pool deterministically."""

    kind: str = "two_moons"
    n_samples: int = 2510
    n_classes: int = 2
    noise: float = 0.1
    imbalance_ratio: float = 1.0
    eval_fraction: float = 0.2
    seed: int = 0

    def build(self, labels_per_class):
        """Generate the pool and split it for the given label budget."""
        x, y = make_synthetic(
            self.kind, self.n_samples, n_classes=self.n_classes,
            noise=self.noise, seed=self.seed,
            imbalance_ratio=self.imbalance_ratio,
        )
        return split(x, y, labels_per_class=labels_per_class,
                     eval_fraction=self.eval_fraction, seed=self.seed)


@dataclass
class ExperimentPlan:
    """A sweep: algorithms x label budgets x seeds on one dataset."""

    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    algorithms: tuple = tuple(ALGORITHM_NAMES)
    overrides: dict = field(default_factory=dict)
    label_budgets: tuple = (4,)
    seeds: tuple = (1, 2, 3)
    train: dict = field(default_factory=lambda: default_config()["train"])
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    out_dir: str = "runs"
    jobs: int = 1

    def __post_init__(self):
        self.algorithms = tuple(self.algorithms)
        self.label_budgets = tuple(self.label_budgets)
        self.seeds = tuple(self.seeds)
        if not (self.algorithms and self.label_budgets and self.seeds):
            raise ConfigError(
                "plan is empty: need at least one algorithm, one label "
                "budget, and one seed"
            )
        for name, values in (("algorithms", self.algorithms),
                             ("label_budgets", self.label_budgets),
                             ("seeds", self.seeds)):
            if len(set(values)) != len(values):
                raise ConfigError(f"duplicate entries in plan {name}: {values}")
        unknown = [a for a in self.algorithms if a not in ALGORITHM_NAMES]
        if unknown:
            raise ConfigError(f"unknown algorithms in plan: {unknown}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")

    def cells(self):
        """All (algorithm, labels_per_class, seed) triples, in sweep order."""
        return [(a, b, s) for a in self.algorithms
                for b in self.label_budgets for s in self.seeds]

    def train_config(self, algorithm, seed):
        """Materialize the TrainConfig for one cell."""
        spec = algorithm_spec(algorithm, **self.overrides.get(algorithm, {}))
        t = self.train
        return TrainConfig(
            spec=spec,
            batch_size=t["batch_size"],
            iterations=t["iterations"],
            lr=t["lr"],
            momentum=t["momentum"],
            ema_momentum=t["ema_momentum"],
            weight_decay=t["weight_decay"],
            checkpoint_every=t["checkpoint_every"],
            seed=seed,
            mapping=t["mapping"],
            warmup_enabled=t["warmup"],
            threshold_floor=t["threshold_floor"],
            hidden_sizes=tuple(t["hidden_sizes"]),
            balance_weight=t["balance_weight"],
            augment=self.augment,
        )


def plan_from_config(config, out_dir=None, jobs=None):
    """Build an ExperimentPlan from a parsed config dict."""
    d = config["dataset"]
    p = config["plan"]
    a = config["augment"]
    augment = AugmentConfig(
        weak_noise_sigma=a["weak_noise"],
        strong_noise_sigma=a["strong_noise"],
        strong_dropout_prob=a["strong_dropout"],
        strong_scale_range=(a["strong_scale_min"], a["strong_scale_max"]),
    )
    return ExperimentPlan(
        dataset=DatasetSpec(
            kind=d["kind"], n_samples=d["n_samples"],
            n_classes=d["n_classes"], noise=d["noise"],
            imbalance_ratio=d["imbalance_ratio"],
            eval_fraction=d["eval_fraction"], seed=d["seed"],
        ),
        algorithms=tuple(p["algorithms"]),
        overrides={k: dict(v) for k, v in config["algorithm"].items()},
        label_budgets=tuple(p["label_budgets"]),
        seeds=tuple(p["seeds"]),
        train=dict(config["train"]),
        augment=augment,
        out_dir=p["out"] if out_dir is None else out_dir,
        jobs=p["jobs"] if jobs is None else jobs,
    )


# ---------------------------------------------------------------------------
# running


def run_id(algorithm, labels_per_class, seed):
    return f"{algorithm}_b{labels_per_class}_s{seed}"


@dataclass
class RunOutcome:
    """Result of one plan cell: where its CSV is and how it went."""

    run_id: str
    algorithm: str
    labels_per_class: int
    seed: int
    csv_path: str
    status: str                  # "ok" | "cached" | "failed"
    error: str | None = None
    best_error: float = math.nan
    median_last20_error: float = math.nan

    @property
    def succeeded(self):
        return self.status in ("ok", "cached")


def _runs_dir(out_dir):
    return os.path.join(out_dir, "runs")


def _csv_path(out_dir, rid):
    return os.path.join(_runs_dir(out_dir), rid + ".csv")


def _completed_records(path, iterations):
    """Records from an existing CSV iff it covers the full run, else None."""
    if not os.path.exists(path):
        return None
    try:
        records = read_metrics_csv(path)
    except Exception:
        return None
    if records and records[-1].iteration == iterations:
        return records
    return None


def execute_cell(plan, algorithm, labels_per_class, seed):
    """Train one cell, write its metrics CSV, and report the outcome."""
    rid = run_id(algorithm, labels_per_class, seed)
    path = _csv_path(plan.out_dir, rid)
    outcome = RunOutcome(rid, algorithm, labels_per_class, seed, path, "ok")
    try:
        dataset = plan.dataset.build(labels_per_class)
        artifact = train(plan.train_config(algorithm, seed), dataset)
        write_metrics_csv(path, artifact.records, dataset.n_classes)
        summary = summarize(artifact.records)
        outcome.best_error = summary.best_error
        outcome.median_last20_error = summary.median_last20_error
    except Exception as exc:
        outcome.status = "failed"
        outcome.error = f"{type(exc).__name__}: {exc}"
    return outcome


def _cached_outcome(plan, algorithm, labels_per_class, seed):
    rid = run_id(algorithm, labels_per_class, seed)
    path = _csv_path(plan.out_dir, rid)
    records = _completed_records(path, plan.train["iterations"])
    if records is None:
        return None
    summary = summarize(records)
    return RunOutcome(
        rid, algorithm, labels_per_class, seed, path, "cached",
        best_error=summary.best_error,
        median_last20_error=summary.median_last20_error,
    )


@dataclass
class SummaryCell:
    """Aggregate over seeds for one (algorithm, label budget) pair."""

    algorithm: str
    labels_per_class: int
    n_runs: int
    n_failed: int
    best_mean: float
    best_std: float
    median20_mean: float
    median20_std: float


@dataclass
class PlanResult:
    outcomes: list
    summary: list
    out_dir: str

    @property
    def ok(self):
        return all(o.succeeded for o in self.outcomes)


def _mean_std(values):
    if not values:
        return math.nan, math.nan
    if len(values) == 1:
        return float(values[0]), 0.0
    return float(np.mean(values)), float(np.std(values, ddof=1))


def _aggregate(plan, outcomes):
    by_cell = {}
    for o in outcomes:
        by_cell.setdefault((o.algorithm, o.labels_per_class), []).append(o)
    summary = []
    for algorithm in plan.algorithms:
        for budget in plan.label_budgets:
            group = by_cell.get((algorithm, budget), [])
            good = [o for o in group if o.succeeded]
            best_mean, best_std = _mean_std([o.best_error for o in good])
            med_mean, med_std = _mean_std(
                [o.median_last20_error for o in good])
            summary.append(SummaryCell(
                algorithm, budget, len(group), len(group) - len(good),
                best_mean, best_std, med_mean, med_std,
            ))
    return summary


def write_summary_csv(path, summary):
    header = ("algorithm,labels_per_class,n_runs,n_failed,"
              "best_mean,best_std,median20_mean,median20_std")
    lines = [header]
    for c in summary:
        lines.append(",".join([
            c.algorithm, repr(c.labels_per_class), repr(c.n_runs),
            repr(c.n_failed), repr(c.best_mean), repr(c.best_std),
            repr(c.median20_mean), repr(c.median20_std),
        ]))
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def _format_cell(cell):
    if cell.n_failed == cell.n_runs:
        return f"failed ({cell.n_failed}/{cell.n_runs})"
    text = f"{100 * cell.best_mean:.2f} ± {100 * cell.best_std:.2f}"
    if cell.n_failed:
        text += f" ({cell.n_failed}/{cell.n_runs} failed)"
    return text


def format_summary_markdown(plan, summary):
    """Markdown table: algorithm rows x label-budget columns, best error %."""
    by_cell = {(c.algorithm, c.labels_per_class): c for c in summary}
    budgets = sorted(plan.label_budgets)
    lines = [
        f"# {plan.dataset.kind} sweep",
        "",
        f"Dataset: {plan.dataset.kind}, n={plan.dataset.n_samples}, "
        f"classes={plan.dataset.n_classes}, noise={plan.dataset.noise}, "
        f"seeds={list(plan.seeds)}, iterations={plan.train['iterations']}.",
        "",
        "Best eval error % (mean ± sample std over seeds); lower is better.",
        "",
        "| algorithm | " + " | ".join(f"{b} labels/class" for b in budgets)
        + " |",
        "|---" * (1 + len(budgets)) + "|",
    ]
    ordered = [a for a in ALGORITHM_NAMES if a in plan.algorithms]
    ordered += [a for a in plan.algorithms if a not in ALGORITHM_NAMES]
    for algorithm in ordered:
        cells = [_format_cell(by_cell[(algorithm, b)]) for b in budgets]
        name = DISPLAY_NAMES.get(algorithm, algorithm)
        lines.append("| " + " | ".join([name] + cells) + " |")
    return "\n".join(lines) + "\n"


def run_plan(plan):
    """Execute every cell (reusing completed CSVs), then aggregate."""
    os.makedirs(_runs_dir(plan.out_dir), exist_ok=True)
    outcomes = {}
    pending = []
    for cell in plan.cells():
        cached = _cached_outcome(plan, *cell)
        if cached is not None:
            outcomes[cell] = cached
        else:
            pending.append(cell)
    if plan.jobs > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=plan.jobs) as pool:
            futures = {cell: pool.submit(execute_cell, plan, *cell)
                       for cell in pending}
            for cell, future in futures.items():
                outcomes[cell] = future.result()
    else:
        for cell in pending:
            outcomes[cell] = execute_cell(plan, *cell)
    ordered = [outcomes[cell] for cell in plan.cells()]
    summary = _aggregate(plan, ordered)
    write_summary_csv(os.path.join(plan.out_dir, "summary.csv"), summary)
    markdown = format_summary_markdown(plan, summary)
    with open(os.path.join(plan.out_dir, "summary.md"), "w",
              encoding="utf-8", newline="\n") as handle:
        handle.write(markdown)
    return PlanResult(ordered, summary, plan.out_dir)


# ---------------------------------------------------------------------------
# ablations


@dataclass
class AblationRow:
    setting: str
    n_runs: int
    n_failed: int
    best_mean: float
    best_std: float


@dataclass
class AblationResult:
    kind: str
    rows: list
    out_dir: str

    @property
    def ok(self):
        return all(r.n_failed == 0 for r in self.rows)


def _partner_kind(kind):
    """Second dataset for the warm-up ablation (must allow any class count)."""
    return "rings" if kind == "blobs" else "blobs"


def _sub_plans(kind, plan):
    """(setting label, derived single-knob plan) pairs for one ablation."""
    budget = plan.label_budgets[0]
    base = replace(plan, label_budgets=(budget,))
    if kind == "tau_sweep":
        pairs = []
        for tau in TAU_SWEEP_VALUES:
            overrides = dict(plan.overrides.get("flexmatch", {}))
            overrides["tau"] = tau
            pairs.append((f"tau={tau}", replace(
                base, algorithms=("flexmatch",),
                overrides={"flexmatch": overrides})))
        return pairs
    if kind == "mapping":
        pairs = []
        for mapping in ("concave", "linear", "convex"):
            train_cfg = dict(plan.train, mapping=mapping)
            pairs.append((f"mapping={mapping}", replace(
                base, algorithms=("flexmatch",), train=train_cfg)))
        return pairs
    if kind == "warmup":
        pairs = []
        kinds = (plan.dataset.kind, _partner_kind(plan.dataset.kind))
        for dataset_kind in kinds:
            dataset = replace(plan.dataset, kind=dataset_kind)
            for enabled in (True, False):
                train_cfg = dict(plan.train, warmup=enabled)
                label = f"{dataset_kind}/warmup={'on' if enabled else 'off'}"
                pairs.append((label, replace(
                    base, dataset=dataset, algorithms=("flexmatch",),
                    train=train_cfg)))
        return pairs
    if kind == "class_balance":
        weight = plan.train["balance_weight"] or 1.0
        return [
            ("fixmatch", replace(base, algorithms=("fixmatch",))),
            ("fixmatch+balance", replace(
                base, algorithms=("fixmatch",),
                train=dict(plan.train, balance_weight=weight))),
            ("flexmatch", replace(base, algorithms=("flexmatch",))),
        ]
    raise ConfigError(
        f"unknown ablation kind {kind!r}; choose from {ABLATION_KINDS}"
    )


def _slug(label):
    return label.replace("/", "_").replace("=", "_")


def write_ablation_csv(path, rows):
    lines = ["setting,n_runs,n_failed,best_mean,best_std"]
    for r in rows:
        lines.append(",".join([
            r.setting, repr(r.n_runs), repr(r.n_failed),
            repr(r.best_mean), repr(r.best_std),
        ]))
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def format_ablation_markdown(kind, rows):
    lines = [
        f"# ablation: {kind}",
        "",
        "| setting | best error % (mean ± std) | runs | failed |",
        "|---|---|---|---|",
    ]
    for r in rows:
        value = ("n/a" if math.isnan(r.best_mean)
                 else f"{100 * r.best_mean:.2f} ± {100 * r.best_std:.2f}")
        lines.append(f"| {r.setting} | {value} | {r.n_runs} | {r.n_failed} |")
    return "\n".join(lines) + "\n"


def ablate(kind, plan):
    """Run one ablation: a matched sub-plan per setting of the named knob."""
    out_dir = os.path.join(plan.out_dir, f"ablate_{kind}")
    rows = []
    for label, sub_plan in _sub_plans(kind, plan):
        sub_plan = replace(sub_plan,
                           out_dir=os.path.join(out_dir, _slug(label)))
        result = run_plan(sub_plan)
        cell = result.summary[0]
        rows.append(AblationRow(label, cell.n_runs, cell.n_failed,
                                cell.best_mean, cell.best_std))
    os.makedirs(out_dir, exist_ok=True)
    write_ablation_csv(os.path.join(out_dir, "ablation.csv"), rows)
    with open(os.path.join(out_dir, "ablation.md"), "w",
              encoding="utf-8", newline="\n") as handle:
        handle.write(format_ablation_markdown(kind, rows))
    return AblationResult(kind, rows, out_dir)


# ---------------------------------------------------------------------------
# reporting


def _curve_header(n_classes):
    acc = [f"acc_c{c}" for c in range(n_classes)]
    thr = [f"threshold_c{c}" for c in range(n_classes)]
    return ["iteration", "error", "loss_s", "loss_u", "utilization",
            *acc, *thr]


def write_curves_csv(path, records):
    """Slim per-iteration curves for external plotting."""
    n_classes = len(records[0].per_class_acc)
    lines = [",".join(_curve_header(n_classes))]
    for r in records:
        row = [repr(r.iteration), repr(r.error), repr(r.loss_s),
               repr(r.loss_u), repr(r.utilization)]
        row += [repr(float(v)) for v in r.per_class_acc]
        row += [repr(float(v)) for v in r.thresholds]
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def report(run_dir):
    """Derive curve CSVs and a text table from a directory of run CSVs."""
    candidates = sorted(glob.glob(os.path.join(run_dir, "runs", "*.csv")))
    if not candidates:
        candidates = sorted(glob.glob(os.path.join(run_dir, "*.csv")))
        candidates = [p for p in candidates
                      if os.path.basename(p) != "summary.csv"]
    if not candidates:
        raise ConfigError(f"no run CSVs found under {run_dir}")
    curves_dir = os.path.join(run_dir, "curves")
    os.makedirs(curves_dir, exist_ok=True)
    lines = [
        "# run report",
        "",
        "| run | checkpoints | best error % | median-last-20 error % |"
        " final utilization |",
        "|---|---|---|---|---|",
    ]
    rows = []
    for path in candidates:
        records = read_metrics_csv(path)
        name = os.path.splitext(os.path.basename(path))[0]
        write_curves_csv(
            os.path.join(curves_dir, name + "_curves.csv"), records)
        summary = summarize(records)
        final_util = records[-1].utilization
        util_text = "n/a" if math.isnan(final_util) else f"{final_util:.3f}"
        lines.append(
            f"| {name} | {len(records)} | {100 * summary.best_error:.2f} "
            f"| {100 * summary.median_last20_error:.2f} | {util_text} |"
        )
        rows.append((name, summary))
    report_path = os.path.join(run_dir, "report.md")
    with open(report_path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")
    return rows
