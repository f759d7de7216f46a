"""Synthetic datasets, stratified splits, ratio batching, and CSV round-trip.

A dataset is split three ways: a small labeled set (exactly
``labels_per_class`` per class), a held-out eval set, and the remaining
training samples as the unlabeled pool. Unlabeled samples carry stable integer
indices 0..N-1 that the curriculum cache keys on. Their true labels are kept
on the dataset for diagnostics only; batches expose features and indices.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ParseError
from .validation import as_rng, check_features, check_labels

SYNTHETIC_KINDS = ("two_moons", "blobs", "rings")


def _class_counts(n_total, n_classes, imbalance_ratio):
    """Per-class sample counts: balanced, or geometrically decaying."""
    if imbalance_ratio == 1.0:
        base, extra = divmod(n_total, n_classes)
        return [base + (1 if c < extra else 0) for c in range(n_classes)]
    # class 0 is imbalance_ratio times as frequent as class C-1
    weights = imbalance_ratio ** (-np.arange(n_classes) / (n_classes - 1))
    targets = n_total * weights / weights.sum()
    counts = np.floor(targets).astype(int)
    order = np.argsort(-(targets - counts), kind="stable")
    for i in range(n_total - int(counts.sum())):
        counts[order[i]] += 1
    if counts.min() < 1:
        raise ConfigError(
            f"imbalance_ratio {imbalance_ratio} leaves a class empty "
            f"at n_total={n_total}"
        )
    return counts.tolist()


def make_synthetic(kind, n_total, n_classes=2, noise=0.1, seed=0,
                   imbalance_ratio=1.0):
    """Generate a labeled 2-D pool; returns (features, labels).

    Kinds: ``two_moons`` (two interleaved half-circles, 2 classes only),
    ``blobs`` (gaussian clusters centered on a circle of radius 2), ``rings``
    (concentric circles of radius c+1). ``imbalance_ratio`` r makes class 0
    r times as frequent as the last class, interpolating geometrically.
    """
    if kind not in SYNTHETIC_KINDS:
        raise ConfigError(
            f"unknown dataset kind {kind!r}; choose from {SYNTHETIC_KINDS}"
        )
    if n_classes < 2:
        raise ConfigError(f"n_classes must be >= 2, got {n_classes}")
    if n_total < n_classes:
        raise ConfigError(
            f"n_total={n_total} cannot cover {n_classes} classes"
        )
    if noise < 0:
        raise ConfigError(f"noise must be non-negative, got {noise}")
    if imbalance_ratio < 1.0:
        raise ConfigError(
            f"imbalance_ratio must be >= 1, got {imbalance_ratio}"
        )
    if kind == "two_moons" and n_classes != 2:
        raise ConfigError("two_moons supports exactly 2 classes")
    rng = as_rng(seed)
    counts = _class_counts(n_total, n_classes, imbalance_ratio)
    xs, ys = [], []
    for c, count in enumerate(counts):
        if kind == "two_moons":
            t = rng.uniform(0.0, np.pi, size=count)
            if c == 0:
                pts = np.column_stack([np.cos(t), np.sin(t)])
            else:
                pts = np.column_stack([1.0 - np.cos(t), 0.5 - np.sin(t)])
        elif kind == "blobs":
            angle = 2.0 * np.pi * c / n_classes
            center = 2.0 * np.array([np.cos(angle), np.sin(angle)])
            pts = np.tile(center, (count, 1))
        else:  # rings
            t = rng.uniform(0.0, 2.0 * np.pi, size=count)
            radius = float(c + 1)
            pts = radius * np.column_stack([np.cos(t), np.sin(t)])
        if noise > 0:
            pts = pts + noise * rng.standard_normal(pts.shape)
        xs.append(pts)
        ys.append(np.full(count, c, dtype=np.int64))
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    order = rng.permutation(len(y))
    return x[order], y[order]


@dataclass
class SplitDataset:
    """Labeled/unlabeled/eval split with stable unlabeled indices."""

    labeled_x: np.ndarray
    labeled_y: np.ndarray
    unlabeled_x: np.ndarray
    eval_x: np.ndarray
    eval_y: np.ndarray
    n_classes: int
    unlabeled_true_y: np.ndarray | None = None  # diagnostics only

    def __post_init__(self):
        self.labeled_x = check_features(self.labeled_x, "labeled_x")
        self.labeled_y = check_labels(self.labeled_y, self.n_classes, "labeled_y")
        present = np.bincount(self.labeled_y, minlength=self.n_classes)
        if np.any(present == 0):
            missing = int(np.flatnonzero(present == 0)[0])
            raise ConfigError(
                f"labeled set is missing class {missing}; every class needs "
                f"at least one labeled sample"
            )

    @property
    def feature_dim(self):
        return self.labeled_x.shape[1]

    @property
    def n_labeled(self):
        return len(self.labeled_y)

    @property
    def n_unlabeled(self):
        return len(self.unlabeled_x)

    @property
    def n_eval(self):
        return len(self.eval_y)

    def pseudo_label_accuracy(self, indices, predicted):
        """Diagnostic accuracy of pseudo-labels against hidden true labels.

        Returns nan when no indices are given or true labels are unavailable.
        """
        indices = np.asarray(indices)
        predicted = np.asarray(predicted)
        if self.unlabeled_true_y is None or indices.size == 0:
            return float("nan")
        return float(np.mean(self.unlabeled_true_y[indices] == predicted))

    def train_pool_feature_std(self):
        """Per-feature std over labeled + unlabeled features (augment scale)."""
        pool = (
            np.concatenate([self.labeled_x, self.unlabeled_x])
            if self.n_unlabeled
            else self.labeled_x
        )
        return pool.std(axis=0)


def _largest_remainder(targets, total):
    """Integerize non-negative targets so they sum exactly to ``total``."""
    base = np.floor(targets).astype(int)
    order = np.argsort(-(targets - base), kind="stable")
    for i in range(total - int(base.sum())):
        base[order[i]] += 1
    return base


def split(x, y, labels_per_class, eval_fraction, seed):
    """Carve a labeled pool into labeled / unlabeled / eval sets.

    The eval set is held out first, stratified proportionally per class; then
    exactly ``labels_per_class`` samples per class are labeled; everything
    else becomes the unlabeled pool (true labels retained for diagnostics).
    """
    x = check_features(x, "pool features")
    y = check_labels(y, name="pool labels")
    if len(x) != len(y):
        raise ConfigError(f"features ({len(x)}) and labels ({len(y)}) disagree")
    if y.size == 0:
        raise ConfigError("cannot split an empty pool")
    if y.min() < 0:
        raise ConfigError("labels must be non-negative class indices")
    n_classes = int(y.max()) + 1
    if labels_per_class < 1:
        raise ConfigError(
            f"labels_per_class must be >= 1, got {labels_per_class}"
        )
    if not 0.0 <= eval_fraction < 1.0:
        raise ConfigError(
            f"eval_fraction must lie in [0, 1), got {eval_fraction}"
        )
    rng = as_rng(seed)
    class_counts = np.bincount(y, minlength=n_classes)
    if np.any(class_counts == 0):
        missing = int(np.flatnonzero(class_counts == 0)[0])
        raise ConfigError(f"pool has no samples of class {missing}")
    n_eval_total = int(round(len(y) * eval_fraction))
    eval_counts = _largest_remainder(class_counts * eval_fraction, n_eval_total)
    e_idx, l_idx, u_idx = [], [], []
    for c in range(n_classes):
        members = rng.permutation(np.flatnonzero(y == c))
        n_eval_c = int(eval_counts[c])
        if len(members) - n_eval_c < labels_per_class:
            raise ConfigError(
                f"class {c} has {len(members)} samples; cannot hold out "
                f"{n_eval_c} for eval and still label {labels_per_class}"
            )
        e_idx.append(members[:n_eval_c])
        l_idx.append(members[n_eval_c:n_eval_c + labels_per_class])
        u_idx.append(members[n_eval_c + labels_per_class:])
    e_idx = np.concatenate(e_idx)
    l_idx = np.concatenate(l_idx)
    u_idx = rng.permutation(np.concatenate(u_idx))
    return SplitDataset(
        labeled_x=x[l_idx],
        labeled_y=y[l_idx],
        unlabeled_x=x[u_idx],
        eval_x=x[e_idx],
        eval_y=y[e_idx],
        n_classes=n_classes,
        unlabeled_true_y=y[u_idx],
    )


@dataclass
class BatchPair:
    """One training batch: B labeled samples plus mu*B unlabeled samples."""

    x: np.ndarray
    y: np.ndarray
    u_x: np.ndarray
    u_indices: np.ndarray


class BatchStream:
    """Single-consumer batch iterator over a SplitDataset.

    Labeled samples are drawn uniformly with replacement (the labeled set can
    be smaller than the batch size). Unlabeled samples are drawn without
    replacement from a perpetual stream of reshuffled permutations, so every
    window of N consecutive draws aligned to a cycle start covers each index
    exactly once.
    """

    def __init__(self, dataset: SplitDataset, batch_size: int, mu: int, rng):
        if batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
        if mu < 1:
            raise ConfigError(f"mu must be >= 1, got {mu}")
        if dataset.n_labeled == 0:
            raise ConfigError("labeled set is empty")
        self.dataset = dataset
        self.batch_size = int(batch_size)
        self.mu = int(mu)
        self.rng = as_rng(rng)
        self._perm = np.empty(0, dtype=np.int64)
        self._pos = 0

    def next_labeled(self):
        """Uniform with-replacement draw of B labeled samples."""
        idx = self.rng.integers(0, self.dataset.n_labeled, size=self.batch_size)
        return self.dataset.labeled_x[idx], self.dataset.labeled_y[idx]

    def _next_unlabeled_indices(self, count):
        out = np.empty(count, dtype=np.int64)
        filled = 0
        while filled < count:
            if self._pos >= len(self._perm):
                self._perm = self.rng.permutation(self.dataset.n_unlabeled)
                self._pos = 0
            take = min(count - filled, len(self._perm) - self._pos)
            out[filled:filled + take] = self._perm[self._pos:self._pos + take]
            self._pos += take
            filled += take
        return out

    def next_batch(self) -> BatchPair:
        if self.dataset.n_unlabeled == 0:
            raise ConfigError(
                "unlabeled set is empty; only labeled batches are available"
            )
        x, y = self.next_labeled()
        u_idx = self._next_unlabeled_indices(self.mu * self.batch_size)
        return BatchPair(x, y, self.dataset.unlabeled_x[u_idx], u_idx)


def dump_csv(path, x, y):
    """Write a labeled pool as `f1..fd,label` rows; byte-stable per input."""
    x = check_features(x, "features")
    y = check_labels(y, name="labels")
    if len(x) != len(y):
        raise ConfigError(f"features ({len(x)}) and labels ({len(y)}) disagree")
    d = x.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{j + 1}" for j in range(d)] + ["label"])
        for row, label in zip(x, y):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


def load_csv(path):
    """Read a labeled pool written by dump_csv; returns (features, labels).

    Labels must be 0-based contiguous integers; rows must agree with the
    header's feature count; all features must be finite. Violations raise a
    parse error naming the offending line.
    """
    path = str(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("file is empty", path=path) from None
        d = len(header) - 1
        expected = [f"f{j + 1}" for j in range(d)] + ["label"]
        if d < 1 or header != expected:
            raise ParseError(
                f"header must be f1..fd,label, got {','.join(header)}",
                path=path, line=1,
            )
        feats, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise ParseError(
                    f"expected {d + 1} fields, got {len(row)}",
                    path=path, line=lineno,
                )
            try:
                values = [float(v) for v in row[:d]]
            except ValueError:
                raise ParseError(
                    "feature fields must be numeric", path=path, line=lineno
                ) from None
            if not all(np.isfinite(values)):
                raise ParseError(
                    "features must be finite", path=path, line=lineno
                )
            try:
                label = int(row[d])
            except ValueError:
                raise ParseError(
                    f"label must be an integer, got {row[d]!r}",
                    path=path, line=lineno,
                ) from None
            if label < 0:
                raise ParseError(
                    f"labels must be >= 0, got {label}", path=path, line=lineno
                )
            feats.append(values)
            labels.append(label)
    if not labels:
        raise ParseError("no data rows", path=path)
    x = np.asarray(feats, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    present = np.bincount(y)
    if np.any(present == 0):
        missing = int(np.flatnonzero(present == 0)[0])
        raise ParseError(
            f"labels must be 0-based contiguous; class {missing} is absent "
            f"while class {int(y.max())} appears",
            path=path,
        )
    return x, y
