"""Curriculum state for per-class flexible confidence thresholds.

The state tracks, for every unlabeled sample, the most recent class it was
confidently predicted into (or -1 if never). Per-class counts of those cached
predictions measure how well each class is being learned; normalizing them
and passing them through a mapping function scales the fixed threshold tau
down per class, so poorly-learned classes admit more pseudo-labels. Cache
admission always uses the fixed tau; the flexible thresholds only gate the
unsupervised loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

MAPPINGS = ("linear", "convex", "concave")


def map_effect(beta, mapping):
    """Map normalized learning effects through the chosen curve.

    All three curves are monotone increasing on [0, 1] with fixed endpoints
    0 -> 0 and 1 -> 1: ``linear`` x, ``convex`` x/(2-x) (grows slowly near 0),
    ``concave`` ln(x+1)/ln 2 (grows quickly near 0). Accepts scalars or
    arrays; scalar input returns a float.
    """
    if mapping not in MAPPINGS:
        raise ConfigError(f"unknown mapping {mapping!r}; choose from {MAPPINGS}")
    x = np.asarray(beta, dtype=np.float64)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError(f"normalized effects must lie in [0, 1], got {beta}")
    if mapping == "linear":
        out = x
    elif mapping == "convex":
        out = x / (2.0 - x)
    else:
        out = np.log(x + 1.0) / np.log(2.0)
    return float(out) if np.isscalar(beta) else out


def confidence_mask(confidences, classes, thresholds):
    """Samples whose max confidence strictly exceeds their class threshold.

    This single comparison serves both fixed-threshold algorithms (pass a
    constant vector filled with tau) and flexible ones (pass the per-class
    threshold vector), so the two paths cannot drift apart.
    """
    conf = np.asarray(confidences, dtype=np.float64)
    cls = np.asarray(classes)
    thr = np.asarray(thresholds, dtype=np.float64)
    return conf > thr[cls]


@dataclass
class ThresholdVector:
    """Per-class flexible thresholds with their normalized effects."""

    per_class: np.ndarray
    beta: np.ndarray
    warmup_active: bool


class CurriculumState:
    """Prediction cache plus incremental per-class learning-effect counts.

    ``pinned_beta`` freezes the normalized effects at a fixed vector; it
    exists so a flexible run can be pinned to reproduce its fixed-threshold
    counterpart exactly.
    """

    def __init__(self, n_unlabeled, n_classes, fixed_threshold=0.95,
                 mapping="convex", warmup_enabled=True, threshold_floor=0.0,
                 pinned_beta=None):
        if n_unlabeled < 0:
            raise ConfigError(f"n_unlabeled must be >= 0, got {n_unlabeled}")
        if n_classes < 2:
            raise ConfigError(f"n_classes must be >= 2, got {n_classes}")
        if not 0.0 < fixed_threshold <= 1.0:
            raise ConfigError(
                f"fixed_threshold must lie in (0, 1], got {fixed_threshold}"
            )
        if mapping not in MAPPINGS:
            raise ConfigError(
                f"unknown mapping {mapping!r}; choose from {MAPPINGS}"
            )
        if not 0.0 <= threshold_floor <= fixed_threshold:
            raise ConfigError(
                f"threshold_floor must lie in [0, fixed_threshold], "
                f"got {threshold_floor}"
            )
        self.n_unlabeled = int(n_unlabeled)
        self.n_classes = int(n_classes)
        self.fixed_threshold = float(fixed_threshold)
        self.mapping = mapping
        self.warmup_enabled = bool(warmup_enabled)
        self.threshold_floor = float(threshold_floor)
        if pinned_beta is not None:
            pinned_beta = np.asarray(pinned_beta, dtype=np.float64)
            if pinned_beta.shape != (n_classes,):
                raise ConfigError(
                    f"pinned_beta must have one entry per class, "
                    f"got shape {pinned_beta.shape}"
                )
            if np.any(pinned_beta < 0.0) or np.any(pinned_beta > 1.0):
                raise ConfigError("pinned_beta entries must lie in [0, 1]")
        self.pinned_beta = pinned_beta
        self.cache = np.full(self.n_unlabeled, -1, dtype=np.int64)
        self.counts = np.zeros(self.n_classes, dtype=np.int64)
        self.unused_count = self.n_unlabeled

    def record_predictions(self, indices, confidences, classes):
        """Cache confident predictions: for conf > tau set cache[n] <- class.

        Admission compares against the fixed tau, strictly. Entries already
        cached are overwritten (the old class's count drops); entries never
        revert to unused. Duplicate indices within one call keep the last
        occurrence, matching sequential per-sample processing.
        """
        idx = np.asarray(indices, dtype=np.int64)
        conf = np.asarray(confidences, dtype=np.float64)
        cls = np.asarray(classes, dtype=np.int64)
        if not idx.shape == conf.shape == cls.shape or idx.ndim != 1:
            raise ValueError("indices, confidences, classes must be 1-D and aligned")
        if idx.size == 0:
            return
        if idx.min() < 0 or idx.max() >= self.n_unlabeled:
            raise IndexError(
                f"unlabeled indices must lie in [0, {self.n_unlabeled})"
            )
        if np.any(conf <= 0.0) or np.any(conf > 1.0):
            raise ValueError("confidences must lie in (0, 1]")
        if cls.min() < 0 or cls.max() >= self.n_classes:
            raise ValueError(f"classes must lie in [0, {self.n_classes})")
        keep = conf > self.fixed_threshold
        if not np.any(keep):
            return
        idx, cls = idx[keep], cls[keep]
        # last occurrence wins for duplicate indices
        rev_first = np.unique(idx[::-1], return_index=True)[1]
        sel = idx.size - 1 - rev_first
        idx, cls = idx[sel], cls[sel]
        old = self.cache[idx]
        previously_cached = old >= 0
        self.counts -= np.bincount(
            old[previously_cached], minlength=self.n_classes
        )
        self.counts += np.bincount(cls, minlength=self.n_classes)
        self.unused_count -= int(np.count_nonzero(~previously_cached))
        self.cache[idx] = cls

    def learning_effects(self):
        """Current per-class counts of cached confident predictions."""
        return self.counts.copy()

    def normalized_effects(self):
        """Counts scaled into [0, 1]; returns (beta, warmup_active).

        During warm-up (enabled and unused samples outnumber the best class)
        the denominator is the unused count, which keeps all thresholds low
        until most of the pool has been confidently predicted at least once.
        Otherwise the best-learned class anchors at beta = 1. All-zero counts
        with nothing to divide by give beta = 0 (thresholds stay open).
        """
        if self.pinned_beta is not None:
            return self.pinned_beta.copy(), False
        sigma = self.counts
        max_sigma = int(sigma.max())
        if self.warmup_enabled and max_sigma < self.unused_count:
            denom = max(max_sigma, self.unused_count)
            return sigma / denom, True
        if max_sigma == 0:
            return np.zeros(self.n_classes), False
        return sigma / max_sigma, False

    def thresholds(self) -> ThresholdVector:
        """Per-class flexible thresholds T(c) = M(beta(c)) * tau, recomputed
        fresh from the current counts on every call."""
        beta, warmup_active = self.normalized_effects()
        per_class = map_effect(beta, self.mapping) * self.fixed_threshold
        if self.threshold_floor > 0.0:
            per_class = np.maximum(per_class, self.threshold_floor)
        return ThresholdVector(per_class, beta, warmup_active)

    def mask(self, confidences, classes):
        """Boolean mask of samples beating their predicted class's flexible
        threshold (strictly)."""
        conf = np.asarray(confidences, dtype=np.float64)
        if conf.size and (np.any(conf <= 0.0) or np.any(conf > 1.0)):
            raise ValueError("confidences must lie in (0, 1]")
        return confidence_mask(conf, classes, self.thresholds().per_class)
