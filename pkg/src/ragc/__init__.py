"""Contrastive attributed-graph clustering with hybrid node/edge augmentation
and pseudo-label guided pair weighting."""

from .config import RunConfig, load_config
from .graphio import Graph, generate_sbm, load_dataset, normalized_operators, save_dataset
from .metrics import aggregate, ari, clustering_accuracy, evaluate, macro_f1, nmi
from .objective import TrainResult, total_loss, train

__all__ = [
    "Graph",
    "RunConfig",
    "TrainResult",
    "aggregate",
    "ari",
    "clustering_accuracy",
    "evaluate",
    "generate_sbm",
    "load_config",
    "load_dataset",
    "macro_f1",
    "nmi",
    "normalized_operators",
    "save_dataset",
    "total_loss",
    "train",
]

__version__ = "0.1.0"
