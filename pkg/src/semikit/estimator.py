"""Scikit-learn style classifier facade over the training engine.

Follows the sklearn semi-supervised convention: pass the full training matrix
to ``fit`` with ``y = -1`` marking unlabeled rows. Labels may be arbitrary
hashable values; they are mapped to contiguous class indices internally and
mapped back on predict.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .augment import AugmentConfig
from .data import SplitDataset
from .errors import ConfigError
from .losses import algorithm_spec
from .metrics import summarize
from .nets import forward, softmax
from .training import TrainConfig, train
from .validation import check_features


class CurriculumSSLClassifier(ClassifierMixin, BaseEstimator):
    """Semi-supervised MLP classifier with optional flexible thresholds.

    Parameters mirror the training configuration; ``algorithm`` selects among
    pl, flex_pl, uda, flex_uda, fixmatch, flexmatch. ``tau``, ``mu``, ``lam``
    and ``temperature`` override the algorithm's defaults when given.

    After ``fit``: ``model_`` holds the trained network (EMA weights are used
    for prediction), ``records_`` the checkpoint metrics computed on
    ``eval_set`` (or on the labeled data when no eval set is given), and
    ``summary_`` the best/median error digest.
    """

    def __init__(self, algorithm="flexmatch", tau=None, mu=None, lam=None,
                 temperature=None, batch_size=64, iterations=2000, lr=0.03,
                 momentum=0.9, ema_momentum=0.999, weight_decay=5e-4,
                 checkpoint_every=200, mapping="convex", warmup=True,
                 threshold_floor=0.0, hidden_sizes=(64, 64),
                 balance_weight=0.0, weak_noise=0.05, strong_noise=0.25,
                 strong_dropout=0.2, random_state=1):
        self.algorithm = algorithm
        self.tau = tau
        self.mu = mu
        self.lam = lam
        self.temperature = temperature
        self.batch_size = batch_size
        self.iterations = iterations
        self.lr = lr
        self.momentum = momentum
        self.ema_momentum = ema_momentum
        self.weight_decay = weight_decay
        self.checkpoint_every = checkpoint_every
        self.mapping = mapping
        self.warmup = warmup
        self.threshold_floor = threshold_floor
        self.hidden_sizes = hidden_sizes
        self.balance_weight = balance_weight
        self.weak_noise = weak_noise
        self.strong_noise = strong_noise
        self.strong_dropout = strong_dropout
        self.random_state = random_state

    def fit(self, X, y, eval_set=None):
        """Train on a mixed labeled/unlabeled matrix (y == -1 is unlabeled)."""
        X = check_features(X, "X")
        y = np.asarray(y)
        if y.ndim != 1 or len(y) != len(X):
            raise ConfigError(
                f"y must be 1-D with one entry per row of X, got shape {y.shape}"
            )
        unlabeled = np.asarray([label == -1 for label in y])
        labeled_y_raw = y[~unlabeled]
        if labeled_y_raw.size == 0:
            raise ConfigError("no labeled samples (every y is -1)")
        self.classes_ = np.unique(labeled_y_raw)
        if len(self.classes_) < 2:
            raise ConfigError(
                f"need at least 2 labeled classes, got {len(self.classes_)}"
            )
        class_index = {label: i for i, label in enumerate(self.classes_)}
        labeled_y = np.array([class_index[v] for v in labeled_y_raw], dtype=np.int64)
        labeled_x = X[~unlabeled]
        unlabeled_x = X[unlabeled]
        if eval_set is not None:
            eval_x = check_features(eval_set[0], "eval X")
            eval_y_raw = np.asarray(eval_set[1])
            unknown = [v for v in np.unique(eval_y_raw) if v not in class_index]
            if unknown:
                raise ConfigError(
                    f"eval labels {unknown} never appear in the labeled data"
                )
            eval_y = np.array([class_index[v] for v in eval_y_raw], dtype=np.int64)
        else:
            eval_x, eval_y = labeled_x, labeled_y
        dataset = SplitDataset(
            labeled_x=labeled_x,
            labeled_y=labeled_y,
            unlabeled_x=unlabeled_x,
            eval_x=eval_x,
            eval_y=eval_y,
            n_classes=len(self.classes_),
        )
        spec = algorithm_spec(
            self.algorithm, tau=self.tau, mu=self.mu, lam=self.lam,
            temperature=self.temperature,
        )
        config = TrainConfig(
            spec=spec,
            batch_size=self.batch_size,
            iterations=self.iterations,
            lr=self.lr,
            momentum=self.momentum,
            ema_momentum=self.ema_momentum,
            weight_decay=self.weight_decay,
            checkpoint_every=self.checkpoint_every,
            seed=self.random_state,
            mapping=self.mapping,
            warmup_enabled=self.warmup,
            threshold_floor=self.threshold_floor,
            hidden_sizes=tuple(self.hidden_sizes),
            balance_weight=self.balance_weight,
            augment=AugmentConfig(
                weak_noise_sigma=self.weak_noise,
                strong_noise_sigma=self.strong_noise,
                strong_dropout_prob=self.strong_dropout,
            ),
        )
        artifact = train(config, dataset)
        self.model_ = artifact.model
        self.records_ = artifact.records
        self.curriculum_ = artifact.curriculum
        self.summary_ = summarize(artifact.records)
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise ConfigError("this classifier has not been fitted yet")

    def predict_proba(self, X):
        """Class probabilities from the EMA weights, columns follow classes_."""
        self._check_fitted()
        X = check_features(X, "X")
        return softmax(forward(self.model_, X, use_ema=True))

    def predict(self, X):
        """Most probable class for each row, in the original label space."""
        self._check_fitted()
        return self.classes_[self.predict_proba(X).argmax(axis=1)]
