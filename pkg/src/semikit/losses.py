"""Loss terms for the six algorithm variants, plus the class-balance objective.

Every variant combines a supervised cross-entropy on weak-augmented labeled
data with a masked consistency term on unlabeled data: pseudo-targets come
from a weak-augmented prediction pass (gradient-detached), the trained
prediction runs on a second augmented view (weak again for the pseudo-label
family, strong for UDA/FixMatch), and only samples whose target-pass
confidence beats their class's threshold contribute. Fixed-threshold and
flexible variants share one masking code path; they differ only in the
threshold vector they pass to it.

Loss results carry the logit gradients (already divided by batch size and
masked) and the forward cache, so the training loop can run a single exact
backward pass per branch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .augment import AugmentConfig, strong, weak
from .curriculum import CurriculumState, confidence_mask
from .errors import ConfigError, StateError
from .nets import (
    ForwardCache,
    MlpModel,
    forward,
    forward_cached,
    log_softmax,
    softmax,
)
from .validation import check_probability_rows

FAMILIES = ("pseudo_label", "uda", "fixmatch")


@dataclass(frozen=True)
class AlgorithmSpec:
    """One algorithm variant: family, thresholding style, and its constants."""

    name: str
    family: str
    flexible: bool
    tau: float
    mu: int
    lam: float = 1.0
    temperature: float | None = None
    target_kind: str = "hard"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(
                f"unknown family {self.family!r}; choose from {FAMILIES}"
            )
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError(f"tau must lie in (0, 1], got {self.tau}")
        if self.mu < 1:
            raise ConfigError(f"mu must be >= 1, got {self.mu}")
        if self.lam < 0:
            raise ConfigError(f"lam must be >= 0, got {self.lam}")
        if self.target_kind not in ("hard", "soft"):
            raise ConfigError(f"target_kind must be hard or soft, got {self.target_kind}")
        if self.target_kind == "soft":
            if self.temperature is None or self.temperature <= 0:
                raise ConfigError(
                    f"soft targets need temperature > 0, got {self.temperature}"
                )


_ALGORITHM_DEFAULTS = {
    "pl": dict(family="pseudo_label", flexible=False, tau=0.95, mu=1),
    "flex_pl": dict(family="pseudo_label", flexible=True, tau=0.95, mu=1),
    "uda": dict(family="uda", flexible=False, tau=0.8, mu=7,
                temperature=0.5, target_kind="soft"),
    "flex_uda": dict(family="uda", flexible=True, tau=0.8, mu=7,
                     temperature=0.5, target_kind="soft"),
    "fixmatch": dict(family="fixmatch", flexible=False, tau=0.95, mu=7),
    "flexmatch": dict(family="fixmatch", flexible=True, tau=0.95, mu=7),
}

ALGORITHM_NAMES = tuple(_ALGORITHM_DEFAULTS)


def algorithm_spec(name, **overrides) -> AlgorithmSpec:
    """Build an AlgorithmSpec by name, with optional hyperparameter overrides.

    Names: pl, flex_pl, uda, flex_uda, fixmatch, flexmatch (hyphens accepted).
    Overridable: tau, mu, lam, temperature.
    """
    key = str(name).lower().replace("-", "_")
    if key not in _ALGORITHM_DEFAULTS:
        raise ConfigError(
            f"unknown algorithm {name!r}; choose from {ALGORITHM_NAMES}"
        )
    fields = dict(_ALGORITHM_DEFAULTS[key])
    allowed = {"tau", "mu", "lam", "temperature"}
    bad = set(overrides) - allowed
    if bad:
        raise ConfigError(
            f"cannot override {sorted(bad)}; allowed: {sorted(allowed)}"
        )
    fields.update({k: v for k, v in overrides.items() if v is not None})
    return AlgorithmSpec(name=key, **fields)


def one_hot(classes, n_classes):
    """Integer class labels to one-hot rows."""
    classes = np.asarray(classes, dtype=np.int64)
    out = np.zeros((classes.size, n_classes))
    out[np.arange(classes.size), classes.ravel()] = 1.0
    return out if np.asarray(classes).ndim else out[0]


def cross_entropy(target, probs):
    """H(t, p) = -sum_c t_c log p_c, treating class targets as one-hot.

    Accepts a single sample (int or distribution target with a probability
    vector) or aligned batches; batches return per-sample values.
    """
    p = np.asarray(probs, dtype=np.float64)
    single = p.ndim == 1
    rows = check_probability_rows(p, "predicted probabilities")
    if p.ndim == 1:
        rows = rows.reshape(1, -1)
    t = np.asarray(target)
    if t.ndim <= 1 and np.issubdtype(t.dtype, np.integer) or t.ndim == 0:
        cls = np.atleast_1d(np.asarray(target, dtype=np.int64))
        if np.any(cls < 0) or np.any(cls >= rows.shape[1]):
            raise ValueError(
                f"class targets must lie in [0, {rows.shape[1]})"
            )
        values = -np.log(rows[np.arange(len(cls)), cls])
    else:
        dist = check_probability_rows(t, "target distribution")
        if t.ndim == 1:
            dist = dist.reshape(1, -1)
        if dist.shape != rows.shape:
            raise ValueError(
                f"target shape {dist.shape} does not match "
                f"probabilities {rows.shape}"
            )
        values = -(dist * np.log(rows)).sum(axis=1)
    return float(values[0]) if single else values


def sharpen(p, temperature):
    """Temperature-sharpened distribution: p^(1/T) renormalized per row."""
    if temperature <= 0:
        raise ConfigError(f"temperature must be > 0, got {temperature}")
    rows = check_probability_rows(p, "probabilities")
    arr = np.asarray(p, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        rows = rows.reshape(1, -1)
    powered = rows ** (1.0 / temperature)
    out = powered / powered.sum(axis=1, keepdims=True)
    return out[0] if single else out


def softmax_backward(probs, dprobs):
    """Pull a gradient w.r.t. softmax outputs back to the logits."""
    inner = (dprobs * probs).sum(axis=1, keepdims=True)
    return probs * (dprobs - inner)


@dataclass
class SupervisedResult:
    loss: float
    dlogits: np.ndarray
    cache: ForwardCache


def supervised_loss(model: MlpModel, x, y, augment_cfg: AugmentConfig,
                    rng) -> SupervisedResult:
    """Mean cross-entropy on a weak-augmented labeled batch.

    ``dlogits`` is (p - onehot(y)) / B, the exact gradient of the mean.
    """
    y = np.asarray(y, dtype=np.int64)
    xw = weak(np.asarray(x, dtype=np.float64), augment_cfg, rng)
    logits, cache = forward_cached(model, xw)
    logp = log_softmax(logits)
    n = len(y)
    loss = float(-logp[np.arange(n), y].mean())
    probs = np.exp(logp)
    dlogits = (probs - one_hot(y, model.n_classes)) / n
    return SupervisedResult(loss, dlogits, cache)


@dataclass
class UnsupBatchResult:
    """Unsupervised term outputs plus everything needed downstream.

    ``dlogits`` is the gradient w.r.t. the prediction-branch logits with the
    mask and the 1/(mu*B) factor folded in, but not the loss weight lambda.
    ``confidences``/``predicted_classes`` come from the unsharpened weak-branch
    target pass.
    """

    loss: float
    mask: np.ndarray
    utilization: float
    pseudo_labels: np.ndarray
    confidences: np.ndarray
    predicted_classes: np.ndarray
    dlogits: np.ndarray
    cache: ForwardCache
    probs: np.ndarray


def unsupervised_loss(spec: AlgorithmSpec, model: MlpModel, u_x, u_indices,
                      cpl_state: CurriculumState | None,
                      augment_cfg: AugmentConfig, rng) -> UnsupBatchResult:
    """Masked consistency loss over one unlabeled batch.

    Target pass: q = p(weak(u)). Masking compares max q against the per-class
    threshold of its argmax — the flexible vector when ``spec.flexible``, a
    constant tau vector otherwise — strictly, and before the curriculum cache
    sees this batch. Targets are one-hot argmax q (hard families) or
    sharpen(q) (soft), detached. The trained prediction runs on a fresh weak
    draw (pseudo-label family) or a strong draw (UDA/FixMatch). Flexible
    variants then record (index, max q, argmax q) into the cache, which admits
    by the fixed tau on its own.
    """
    if spec.flexible and cpl_state is None:
        raise StateError(f"{spec.name} needs a curriculum state")
    u_x = np.asarray(u_x, dtype=np.float64)
    u_indices = np.asarray(u_indices, dtype=np.int64)
    n = len(u_x)
    # target pass (detached: plain forward, no cache kept)
    q = softmax(forward(model, weak(u_x, augment_cfg, rng)))
    confidences = q.max(axis=1)
    predicted = q.argmax(axis=1)
    if spec.flexible:
        thresholds = cpl_state.thresholds().per_class
    else:
        thresholds = np.full(model.n_classes, spec.tau)
    mask = confidence_mask(confidences, predicted, thresholds)
    if spec.target_kind == "hard":
        targets = one_hot(predicted, model.n_classes)
        pseudo_labels = predicted
    else:
        targets = sharpen(q, spec.temperature)
        pseudo_labels = targets
    if spec.family == "pseudo_label":
        pred_input = weak(u_x, augment_cfg, rng)
    else:
        pred_input = strong(u_x, augment_cfg, rng)
    logits, cache = forward_cached(model, pred_input)
    logp = log_softmax(logits)
    probs = np.exp(logp)
    per_sample = -(targets * logp).sum(axis=1)
    loss = float((per_sample * mask).sum() / n)
    dlogits = (mask[:, np.newaxis] * (probs - targets)) / n
    utilization = float(np.count_nonzero(mask) / n)
    if spec.flexible:
        cpl_state.record_predictions(u_indices, confidences, predicted)
    return UnsupBatchResult(
        loss=loss,
        mask=mask,
        utilization=utilization,
        pseudo_labels=pseudo_labels,
        confidences=confidences,
        predicted_classes=predicted,
        dlogits=dlogits,
        cache=cache,
        probs=probs,
    )


def total_loss(spec: AlgorithmSpec, supervised, unsupervised):
    """Weighted combination L_s + lambda * L_u."""
    return float(supervised) + spec.lam * float(unsupervised)


def class_balance_loss(probs):
    """KL(uniform || batch-mean predicted distribution); zero iff uniform."""
    rows = check_probability_rows(probs, "probabilities")
    if rows.ndim == 1:
        rows = rows.reshape(1, -1)
    if rows.shape[0] == 0:
        raise ValueError("class balance needs a non-empty batch")
    mean = rows.mean(axis=0)
    c = rows.shape[1]
    uniform = 1.0 / c
    return float(np.sum(uniform * np.log(uniform / mean)))


def class_balance_dlogits(probs):
    """Gradient of class_balance_loss w.r.t. the logits behind ``probs``."""
    rows = np.asarray(probs, dtype=np.float64)
    n, c = rows.shape
    mean = rows.mean(axis=0)
    dprobs = np.tile(-(1.0 / c) / mean / n, (n, 1))
    return softmax_backward(rows, dprobs)
