"""Dense feed-forward network with exact backpropagation.

The network is a plain MLP: rectified-linear hidden layers, identity output
layer (logits). Alongside the live parameters each model carries an
exponential-moving-average shadow copy that evaluation code reads; training
only ever updates the live parameters and then folds them into the shadow.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, StateError
from .validation import as_rng, check_features


@dataclass
class MlpModel:
    """Layer weights/biases plus the EMA shadow copy.

    ``weights[l]`` has shape ``(layer_sizes[l], layer_sizes[l+1])``;
    ``biases[l]`` has shape ``(layer_sizes[l+1],)``.
    """

    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    ema_weights: list[np.ndarray] = field(default_factory=list)
    ema_biases: list[np.ndarray] = field(default_factory=list)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_classes(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    def copy(self) -> "MlpModel":
        return MlpModel(
            layer_sizes=list(self.layer_sizes),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            ema_weights=[w.copy() for w in self.ema_weights],
            ema_biases=[b.copy() for b in self.ema_biases],
        )


@dataclass
class ForwardCache:
    """Activations retained by a training forward pass for backprop.

    ``activations[0]`` is the input batch; ``activations[l]`` for l >= 1 is the
    post-ReLU output of hidden layer l. The logits themselves are not needed.
    """

    activations: list[np.ndarray]
    n_layers: int


def init_mlp(layer_sizes, rng) -> MlpModel:
    """Build a model with uniform Glorot weights and zero biases.

    Weights are drawn from +-sqrt(6 / (fan_in + fan_out)), which keeps early
    softmax outputs near uniform. The EMA shadow starts as an exact copy.
    """
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ShapeError(f"layer_sizes needs >= 2 positive entries, got {sizes}")
    rng = as_rng(rng)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    model = MlpModel(sizes, weights, biases)
    sync_ema(model)
    return model


def sync_ema(model: MlpModel) -> None:
    """Reset the shadow parameters to an exact copy of the live ones."""
    model.ema_weights = [w.copy() for w in model.weights]
    model.ema_biases = [b.copy() for b in model.biases]


def forward(model: MlpModel, batch, use_ema: bool = False) -> np.ndarray:
    """Run the network on a batch and return logits of shape (n, C)."""
    x = check_features(batch, name="batch")
    if x.shape[1] != model.input_dim:
        raise ShapeError(
            f"batch has {x.shape[1]} features, model expects {model.input_dim}"
        )
    weights = model.ema_weights if use_ema else model.weights
    biases = model.ema_biases if use_ema else model.biases
    if use_ema and not weights:
        raise StateError("EMA shadow parameters are not initialized")
    a = x
    last = model.n_layers - 1
    for l, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w + b
        a = z if l == last else np.maximum(z, 0.0)
    return a


def forward_cached(model: MlpModel, batch) -> tuple[np.ndarray, ForwardCache]:
    """Forward pass that also returns the activations needed by backward()."""
    x = check_features(batch, name="batch")
    if x.shape[1] != model.input_dim:
        raise ShapeError(
            f"batch has {x.shape[1]} features, model expects {model.input_dim}"
        )
    activations = [x]
    a = x
    last = model.n_layers - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        if l == last:
            return z, ForwardCache(activations, model.n_layers)
        a = np.maximum(z, 0.0)
        activations.append(a)
    raise AssertionError("unreachable")


def backward(model: MlpModel, cache: ForwardCache, dlogits) -> tuple[list, list]:
    """Exact gradients for the upstream logit gradient ``dlogits``.

    ``dlogits`` must already carry any loss scaling (1/batch, loss weights,
    per-sample masks); the returned (dweights, dbiases) are then the exact
    gradients of that scalar loss. The ReLU derivative is taken as 0 at 0.
    """
    if cache is None or not isinstance(cache, ForwardCache):
        raise StateError("backward() needs the ForwardCache from forward_cached()")
    if cache.n_layers != model.n_layers or len(cache.activations) != model.n_layers:
        raise StateError("forward cache does not match this model's layout")
    delta = np.asarray(dlogits, dtype=np.float64)
    if delta.shape != (cache.activations[0].shape[0], model.n_classes):
        raise ShapeError(
            f"dlogits shape {delta.shape} does not match "
            f"(batch={cache.activations[0].shape[0]}, C={model.n_classes})"
        )
    dweights = [None] * model.n_layers
    dbiases = [None] * model.n_layers
    for l in range(model.n_layers - 1, -1, -1):
        a_prev = cache.activations[l]
        dweights[l] = a_prev.T @ delta
        dbiases[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ model.weights[l].T) * (a_prev > 0.0)
    return dweights, dbiases


def softmax(logits) -> np.ndarray:
    """Row-wise softmax with max-subtraction for overflow safety.

    Rows sum to 1 and every entry is strictly positive for finite input.
    """
    z = np.asarray(logits, dtype=np.float64)
    squeeze = z.ndim == 1
    if squeeze:
        z = z[np.newaxis, :]
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=1, keepdims=True)
    return p[0] if squeeze else p


def log_softmax(logits) -> np.ndarray:
    """Row-wise log-probabilities via the log-sum-exp identity."""
    z = np.asarray(logits, dtype=np.float64)
    squeeze = z.ndim == 1
    if squeeze:
        z = z[np.newaxis, :]
    shifted = z - z.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return logp[0] if squeeze else logp


def ema_update(model: MlpModel, momentum: float) -> None:
    """Fold the live parameters into the shadow: s <- m*s + (1-m)*live."""
    if not model.ema_weights:
        raise StateError("EMA shadow parameters are not initialized")
    m = float(momentum)
    for s, live in zip(model.ema_weights, model.weights):
        s *= m
        s += (1.0 - m) * live
    for s, live in zip(model.ema_biases, model.biases):
        s *= m
        s += (1.0 - m) * live
