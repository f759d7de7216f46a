"""The training loop: batches, losses, SGD with EMA, checkpoint metrics.

Each iteration draws one labeled + unlabeled batch pair, computes the
supervised term on weak-augmented labeled data and the algorithm's masked
unsupervised term, backpropagates their combined logit gradients exactly,
applies decoupled weight decay and a cosine-annealed momentum step, and folds
the live weights into the EMA shadow. Flexible variants refresh their
per-class thresholds from the curriculum state inside the unsupervised pass
(mask first, then cache update, so thresholds always reflect the state before
the current batch). Every ``checkpoint_every`` iterations the EMA weights are
evaluated and a metrics record is emitted; the run aborts on a non-finite
loss rather than clipping.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass

import numpy as np

from .augment import AugmentConfig
from .curriculum import MAPPINGS, CurriculumState
from .data import BatchStream, SplitDataset
from .errors import ConfigError, DivergenceError
from .losses import (
    AlgorithmSpec,
    class_balance_dlogits,
    class_balance_loss,
    supervised_loss,
    total_loss,
    unsupervised_loss,
)
from .metrics import MetricsRecord, evaluate
from .nets import MlpModel, backward, ema_update, init_mlp
from .optim import OptimizerState, sgd_step


@dataclass
class TrainConfig:
    """All knobs for one training run."""

    spec: AlgorithmSpec
    batch_size: int = 64
    iterations: int = 20000
    lr: float = 0.03
    momentum: float = 0.9
    ema_momentum: float = 0.999
    weight_decay: float = 5e-4
    checkpoint_every: int = 200
    seed: int = 1
    mapping: str = "convex"
    warmup_enabled: bool = True
    threshold_floor: float = 0.0
    hidden_sizes: tuple = (64, 64)
    balance_weight: float = 0.0
    augment: AugmentConfig | None = None
    pinned_beta: tuple | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if self.checkpoint_every < 1:
            raise ConfigError(
                f"checkpoint_every must be >= 1, got {self.checkpoint_every}"
            )
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must lie in [0, 1), got {self.momentum}")
        if not 0.0 <= self.ema_momentum < 1.0:
            raise ConfigError(
                f"ema_momentum must lie in [0, 1), got {self.ema_momentum}"
            )
        if self.weight_decay < 0:
            raise ConfigError(
                f"weight_decay must be >= 0, got {self.weight_decay}"
            )
        if self.mapping not in MAPPINGS:
            raise ConfigError(
                f"unknown mapping {self.mapping!r}; choose from {MAPPINGS}"
            )
        if self.balance_weight < 0:
            raise ConfigError(
                f"balance_weight must be >= 0, got {self.balance_weight}"
            )
        if not self.hidden_sizes or any(int(h) < 1 for h in self.hidden_sizes):
            raise ConfigError(
                f"hidden_sizes needs positive entries, got {self.hidden_sizes}"
            )


@dataclass
class RunArtifact:
    """Everything a finished run leaves behind."""

    records: list
    model: MlpModel
    curriculum: CurriculumState | None
    config: TrainConfig
    seconds: float = 0.0


class _Window:
    """Accumulates per-iteration diagnostics between checkpoints."""

    def __init__(self):
        self.reset()

    def reset(self):
        self.loss_s = 0.0
        self.loss_u = 0.0
        self.utilization = 0.0
        self.iterations = 0
        self.pseudo_correct = 0
        self.pseudo_total = 0

    def add(self, loss_s, loss_u, utilization, pseudo_correct, pseudo_total):
        self.loss_s += loss_s
        self.loss_u += loss_u
        self.utilization += utilization
        self.iterations += 1
        self.pseudo_correct += pseudo_correct
        self.pseudo_total += pseudo_total

    def means(self):
        n = max(self.iterations, 1)
        pseudo_acc = (
            self.pseudo_correct / self.pseudo_total
            if self.pseudo_total else float("nan")
        )
        return (
            self.loss_s / n,
            self.loss_u / n,
            self.utilization / n,
            pseudo_acc,
        )


def _resolve_augment(config: TrainConfig, dataset: SplitDataset):
    cfg = config.augment if config.augment is not None else AugmentConfig()
    if cfg.feature_scale is None:
        cfg = dataclasses.replace(
            cfg, feature_scale=dataset.train_pool_feature_std()
        )
    return cfg


def train(config: TrainConfig, dataset: SplitDataset) -> RunArtifact:
    """Run one full training job; deterministic given config (incl. seed).

    With no unlabeled data the loop degenerates to supervised-only training
    (the unsupervised term, utilization, and pseudo-label diagnostics are
    skipped).
    """
    spec = config.spec
    n_classes = dataset.n_classes
    init_rng, batch_rng, augment_rng = [
        np.random.default_rng(s)
        for s in np.random.SeedSequence(config.seed).spawn(3)
    ]
    model = init_mlp(
        [dataset.feature_dim, *map(int, config.hidden_sizes), n_classes],
        init_rng,
    )
    opt = OptimizerState(
        base_lr=config.lr,
        momentum=config.momentum,
        weight_decay=config.weight_decay,
        total_steps=config.iterations,
    )
    augment_cfg = _resolve_augment(config, dataset)
    stream = BatchStream(dataset, config.batch_size, spec.mu, batch_rng)
    use_unlabeled = dataset.n_unlabeled > 0
    state = None
    if spec.flexible:
        state = CurriculumState(
            dataset.n_unlabeled,
            n_classes,
            fixed_threshold=spec.tau,
            mapping=config.mapping,
            warmup_enabled=config.warmup_enabled,
            threshold_floor=config.threshold_floor,
            pinned_beta=(
                np.asarray(config.pinned_beta, dtype=np.float64)
                if config.pinned_beta is not None else None
            ),
        )
    records = []
    window = _Window()
    started = time.perf_counter()
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for k in range(config.iterations):
            if use_unlabeled:
                batch = stream.next_batch()
                x, y = batch.x, batch.y
            else:
                x, y = stream.next_labeled()
            sup = supervised_loss(model, x, y, augment_cfg, augment_rng)
            if use_unlabeled:
                unsup = unsupervised_loss(
                    spec, model, batch.u_x, batch.u_indices, state,
                    augment_cfg, augment_rng,
                )
                loss = total_loss(spec, sup.loss, unsup.loss)
                if config.balance_weight > 0.0:
                    loss += config.balance_weight * class_balance_loss(unsup.probs)
            else:
                unsup = None
                loss = sup.loss
            if not np.isfinite(loss):
                raise DivergenceError(k + 1)
            dweights, dbiases = backward(model, sup.cache, sup.dlogits)
            if unsup is not None and (spec.lam > 0 or config.balance_weight > 0):
                dlogits_u = spec.lam * unsup.dlogits
                if config.balance_weight > 0.0:
                    dlogits_u = dlogits_u + (
                        config.balance_weight * class_balance_dlogits(unsup.probs)
                    )
                dw_u, db_u = backward(model, unsup.cache, dlogits_u)
                for g, extra in zip(dweights, dw_u):
                    g += extra
                for g, extra in zip(dbiases, db_u):
                    g += extra
            sgd_step(model, opt, dweights, dbiases)
            ema_update(model, config.ema_momentum)
            if unsup is not None:
                passing = unsup.mask
                correct = 0
                if passing.any() and dataset.unlabeled_true_y is not None:
                    correct = int(np.count_nonzero(
                        dataset.unlabeled_true_y[batch.u_indices[passing]]
                        == unsup.predicted_classes[passing]
                    ))
                window.add(
                    sup.loss, unsup.loss, unsup.utilization,
                    correct, int(passing.sum()),
                )
            else:
                window.add(sup.loss, 0.0, float("nan"), 0, 0)
            iteration = k + 1
            if iteration % config.checkpoint_every == 0 or iteration == config.iterations:
                em = evaluate(model, dataset.eval_x, dataset.eval_y, use_ema=True)
                if state is not None:
                    thresholds = state.thresholds().per_class
                else:
                    thresholds = np.full(n_classes, spec.tau)
                loss_s, loss_u, utilization, pseudo_acc = window.means()
                records.append(MetricsRecord(
                    iteration=iteration,
                    error=em.error,
                    per_class_acc=em.per_class_acc,
                    precision=em.precision,
                    recall=em.recall,
                    f1=em.f1,
                    auc=em.auc,
                    utilization=utilization,
                    thresholds=thresholds,
                    loss_s=loss_s,
                    loss_u=loss_u,
                    pseudo_acc=pseudo_acc,
                ))
                window.reset()
    return RunArtifact(
        records=records,
        model=model,
        curriculum=state,
        config=config,
        seconds=time.perf_counter() - started,
    )
