"""Curriculum pseudo-labeling for semi-supervised learning on small data.

Implements pseudo-labeling, UDA-style consistency training, and FixMatch
together with their curriculum variants (Flex-PL, Flex-UDA, FlexMatch),
where per-class confidence thresholds scale with each class's estimated
learning status. Models are small MLPs trained with pure-numpy SGD;
datasets are 2-D synthetics, so every experiment runs on a laptop core.
"""

from .augment import AugmentConfig, strong, weak
from .curriculum import (CurriculumState, ThresholdVector, confidence_mask,
                         map_effect)
from .data import (BatchStream, SplitDataset, dump_csv, load_csv,
                   make_synthetic, split)
from .errors import (ConfigError, DivergenceError, ParseError, SemikitError,
                     ShapeError, StateError)
from .estimator import CurriculumSSLClassifier
from .harness import DatasetSpec, ExperimentPlan, ablate, run_plan
from .losses import (ALGORITHM_NAMES, AlgorithmSpec, algorithm_spec,
                     class_balance_loss, cross_entropy, sharpen,
                     supervised_loss, total_loss, unsupervised_loss)
from .metrics import evaluate, read_metrics_csv, summarize, write_metrics_csv
from .nets import MlpModel, backward, forward, init_mlp, softmax
from .optim import OptimizerState, cosine_lr, sgd_step
from .training import RunArtifact, TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "ALGORITHM_NAMES",
    "AlgorithmSpec",
    "AugmentConfig",
    "BatchStream",
    "ConfigError",
    "CurriculumSSLClassifier",
    "CurriculumState",
    "DatasetSpec",
    "DivergenceError",
    "ExperimentPlan",
    "MlpModel",
    "OptimizerState",
    "ParseError",
    "RunArtifact",
    "SemikitError",
    "ShapeError",
    "SplitDataset",
    "StateError",
    "ThresholdVector",
    "TrainConfig",
    "ablate",
    "algorithm_spec",
    "backward",
    "class_balance_loss",
    "confidence_mask",
    "cosine_lr",
    "cross_entropy",
    "dump_csv",
    "evaluate",
    "forward",
    "init_mlp",
    "load_csv",
    "make_synthetic",
    "map_effect",
    "read_metrics_csv",
    "run_plan",
    "sgd_step",
    "sharpen",
    "softmax",
    "split",
    "strong",
    "summarize",
    "supervised_loss",
    "total_loss",
    "train",
    "unsupervised_loss",
    "weak",
    "write_metrics_csv",
]
