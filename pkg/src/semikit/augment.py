"""Weak and strong stochastic augmentations for feature vectors.

Weak augmentation adds small gaussian jitter and should preserve the label of
nearly every sample; strong augmentation layers heavier noise, per-feature
dropout, and a global scale jitter, and is expected to distort substantially.
Noise magnitudes are expressed in units of each feature's standard deviation:
the actual noise std is ``sigma * feature_scale`` per feature, where
``feature_scale`` defaults to 1 and is normally set to the per-feature std of
the training pool.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass
class AugmentConfig:
    weak_noise_sigma: float = 0.05
    strong_noise_sigma: float = 0.25
    strong_dropout_prob: float = 0.2
    strong_scale_range: tuple[float, float] = (0.7, 1.3)
    feature_scale: np.ndarray | None = None

    def __post_init__(self):
        if self.weak_noise_sigma < 0 or self.strong_noise_sigma < 0:
            raise ConfigError("noise sigmas must be non-negative")
        if not 0.0 <= self.strong_dropout_prob < 1.0:
            raise ConfigError(
                f"strong_dropout_prob must lie in [0, 1), "
                f"got {self.strong_dropout_prob}"
            )
        lo, hi = self.strong_scale_range
        if lo <= 0 or hi < lo:
            raise ConfigError(
                f"strong_scale_range must be positive and ordered, got {(lo, hi)}"
            )
        if self.feature_scale is not None:
            scale = np.asarray(self.feature_scale, dtype=np.float64)
            if scale.ndim != 1 or np.any(scale < 0) or not np.all(np.isfinite(scale)):
                raise ConfigError(
                    "feature_scale must be a 1-D array of non-negative finite values"
                )
            self.feature_scale = scale

    def _scale_for(self, n_features: int) -> np.ndarray:
        if self.feature_scale is None:
            return np.ones(n_features)
        if self.feature_scale.shape[0] != n_features:
            raise ConfigError(
                f"feature_scale has {self.feature_scale.shape[0]} entries, "
                f"input has {n_features} features"
            )
        return self.feature_scale


def weak(x, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    """Additive gaussian jitter: x + N(0, (sigma*scale)^2) per feature."""
    arr = np.asarray(x, dtype=np.float64)
    scale = cfg._scale_for(arr.shape[-1])
    return arr + rng.standard_normal(arr.shape) * (cfg.weak_noise_sigma * scale)


def strong(x, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    """Heavy distortion: gaussian noise, then dropout, then global scale.

    The scale factor is a single uniform draw per sample (per row for batch
    input), applied to every feature of that sample.
    """
    arr = np.asarray(x, dtype=np.float64)
    scale = cfg._scale_for(arr.shape[-1])
    out = arr + rng.standard_normal(arr.shape) * (cfg.strong_noise_sigma * scale)
    if cfg.strong_dropout_prob > 0.0:
        keep = rng.random(arr.shape) >= cfg.strong_dropout_prob
        out = out * keep
    lo, hi = cfg.strong_scale_range
    if arr.ndim == 1:
        out = out * rng.uniform(lo, hi)
    else:
        out = out * rng.uniform(lo, hi, size=(arr.shape[0], 1))
    return out
