"""SGD with Nesterov-free momentum, cosine learning-rate decay, weight decay.

The learning-rate schedule is eta0 * cos(7*pi*k / (16*K)) for step k of K
total steps, which decays from eta0 to about 0.195*eta0 without ever reaching
zero. Weight decay is decoupled: weights (not biases) are shrunk by
(1 - eta*wd) before the momentum step is applied.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, StateError
from .nets import MlpModel


def cosine_lr(step: int, total_steps: int, base_lr: float) -> float:
    """Cosine-decayed learning rate for 0 <= step <= total_steps."""
    if total_steps <= 0:
        raise ConfigError(f"total_steps must be positive, got {total_steps}")
    if not 0 <= step <= total_steps:
        raise ConfigError(
            f"step must lie in [0, {total_steps}], got {step}"
        )
    return float(base_lr) * float(np.cos(7.0 * np.pi * step / (16.0 * total_steps)))


@dataclass
class OptimizerState:
    """Momentum buffers plus schedule bookkeeping for one model."""

    base_lr: float = 0.03
    momentum: float = 0.9
    weight_decay: float = 5e-4
    total_steps: int = 20000
    step_count: int = 0
    velocity_w: list = field(default_factory=list)
    velocity_b: list = field(default_factory=list)

    def __post_init__(self):
        if self.base_lr <= 0:
            raise ConfigError(f"base_lr must be positive, got {self.base_lr}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ConfigError(
                f"weight_decay must be non-negative, got {self.weight_decay}"
            )
        if self.total_steps <= 0:
            raise ConfigError(
                f"total_steps must be positive, got {self.total_steps}"
            )

    def current_lr(self) -> float:
        return cosine_lr(self.step_count, self.total_steps, self.base_lr)


def sgd_step(model: MlpModel, opt: OptimizerState, dweights, dbiases) -> float:
    """Apply one decayed-LR momentum update in place; returns the LR used.

    Order per step: compute eta for the current step count, shrink weights by
    the decoupled decay factor (1 - eta*wd), then v <- m*v + g and
    p <- p - eta*v for every parameter tensor. Biases skip the decay shrink.
    """
    if opt.step_count >= opt.total_steps:
        raise StateError(
            f"optimizer exhausted: {opt.step_count} steps already taken "
            f"of {opt.total_steps}"
        )
    if len(dweights) != model.n_layers or len(dbiases) != model.n_layers:
        raise StateError("gradient list length does not match model layers")
    if not opt.velocity_w:
        opt.velocity_w = [np.zeros_like(w) for w in model.weights]
        opt.velocity_b = [np.zeros_like(b) for b in model.biases]
    eta = opt.current_lr()
    if opt.weight_decay > 0.0:
        shrink = 1.0 - eta * opt.weight_decay
        for w in model.weights:
            w *= shrink
    for w, v, g in zip(model.weights, opt.velocity_w, dweights):
        v *= opt.momentum
        v += g
        w -= eta * v
    for b, v, g in zip(model.biases, opt.velocity_b, dbiases):
        v *= opt.momentum
        v += g
        b -= eta * v
    opt.step_count += 1
    return eta
