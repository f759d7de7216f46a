"""Checkpoint evaluation metrics, run summaries, and the metrics CSV format.

Evaluation reports error rate, per-class accuracy, macro precision/recall/F1
(0/0 cases count as 0), and macro one-vs-rest AUC. Runs are summarized by the
best error over all checkpoints and the median error of the last 20.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from sklearn.metrics import precision_recall_fscore_support, roc_auc_score

from .errors import ConfigError, ParseError
from .nets import MlpModel, forward, softmax
from .validation import check_features, check_labels


@dataclass
class EvalMetrics:
    error: float
    per_class_acc: np.ndarray
    precision: float
    recall: float
    f1: float
    auc: float


@dataclass
class MetricsRecord:
    """One checkpoint row: eval metrics plus training-window diagnostics.

    ``utilization``, ``loss_s``, ``loss_u`` are means over the iterations
    since the previous checkpoint; ``pseudo_acc`` is the accuracy of
    mask-passing pseudo-labels in that window (nan if none passed);
    ``thresholds`` is the per-class threshold snapshot at the checkpoint.
    """

    iteration: int
    error: float
    per_class_acc: np.ndarray
    precision: float
    recall: float
    f1: float
    auc: float
    utilization: float
    thresholds: np.ndarray
    loss_s: float
    loss_u: float
    pseudo_acc: float


@dataclass
class RunSummary:
    best_error: float
    median_last20_error: float
    final_per_class_acc: np.ndarray


def evaluate_probabilities(probs, y, n_classes) -> EvalMetrics:
    """Metrics from predicted class probabilities on a labeled eval set."""
    probs = np.asarray(probs, dtype=np.float64)
    y = check_labels(y, n_classes, "eval labels")
    if len(y) == 0:
        raise ConfigError("eval set is empty; cannot compute metrics")
    preds = probs.argmax(axis=1)
    error = float(np.mean(preds != y))
    per_class = np.full(n_classes, np.nan)
    for c in range(n_classes):
        members = y == c
        if members.any():
            per_class[c] = float(np.mean(preds[members] == c))
    precision, recall, f1, _ = precision_recall_fscore_support(
        y, preds, labels=np.arange(n_classes), average="macro", zero_division=0
    )
    aucs = []
    for c in range(n_classes):
        positives = y == c
        if positives.any() and not positives.all():
            aucs.append(roc_auc_score(positives, probs[:, c]))
    auc = float(np.mean(aucs)) if aucs else float("nan")
    return EvalMetrics(
        error=error,
        per_class_acc=per_class,
        precision=float(precision),
        recall=float(recall),
        f1=float(f1),
        auc=auc,
    )


def evaluate(model: MlpModel, eval_x, eval_y, use_ema=True) -> EvalMetrics:
    """Evaluate a model (EMA shadow weights by default) on a labeled set."""
    eval_x = check_features(eval_x, "eval_x")
    if len(eval_x) == 0:
        raise ConfigError("eval set is empty; cannot compute metrics")
    probs = softmax(forward(model, eval_x, use_ema=use_ema))
    return evaluate_probabilities(probs, eval_y, model.n_classes)


def summarize(records) -> RunSummary:
    """Best error over all checkpoints and median error of the last 20."""
    records = list(records)
    if not records:
        raise ConfigError("cannot summarize a run with no checkpoints")
    errors = np.array([r.error for r in records])
    return RunSummary(
        best_error=float(errors.min()),
        median_last20_error=float(np.median(errors[-20:])),
        final_per_class_acc=np.asarray(records[-1].per_class_acc),
    )


def metrics_header(n_classes):
    """Stable CSV column order for metrics rows."""
    return (
        ["iteration", "error"]
        + [f"acc_c{c}" for c in range(n_classes)]
        + ["precision", "recall", "f1", "auc", "utilization"]
        + [f"threshold_c{c}" for c in range(n_classes)]
        + ["loss_s", "loss_u", "pseudo_acc"]
    )


def record_to_row(record: MetricsRecord):
    values = (
        [record.iteration, record.error]
        + list(record.per_class_acc)
        + [record.precision, record.recall, record.f1, record.auc,
           record.utilization]
        + list(record.thresholds)
        + [record.loss_s, record.loss_u, record.pseudo_acc]
    )
    return [str(values[0])] + [repr(float(v)) for v in values[1:]]


def write_metrics_csv(path, records, n_classes):
    """One row per checkpoint; float fields use repr for byte-stable reruns."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(metrics_header(n_classes))
        for record in records:
            writer.writerow(record_to_row(record))


def read_metrics_csv(path):
    """Read a metrics CSV back into MetricsRecord objects."""
    path = str(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("file is empty", path=path) from None
        acc_cols = [h for h in header if h.startswith("acc_c")]
        n_classes = len(acc_cols)
        if not n_classes or header != metrics_header(n_classes):
            raise ParseError(
                "not a metrics CSV (unexpected column layout)", path=path, line=1
            )
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, got {len(row)}",
                    path=path, line=lineno,
                )
            try:
                vals = [float(v) for v in row]
            except ValueError:
                raise ParseError(
                    "non-numeric field", path=path, line=lineno
                ) from None
            c = n_classes
            records.append(MetricsRecord(
                iteration=int(vals[0]),
                error=vals[1],
                per_class_acc=np.array(vals[2:2 + c]),
                precision=vals[2 + c],
                recall=vals[3 + c],
                f1=vals[4 + c],
                auc=vals[5 + c],
                utilization=vals[6 + c],
                thresholds=np.array(vals[7 + c:7 + 2 * c]),
                loss_s=vals[7 + 2 * c],
                loss_u=vals[8 + 2 * c],
                pseudo_acc=vals[9 + 2 * c],
            ))
    return records
