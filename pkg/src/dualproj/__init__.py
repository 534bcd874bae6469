"""Dual projection analysis: editable 2-D views of rows and columns."""

from .metrics import continuity, trustworthiness
from .projection import InvertibleProjection, ProjectionModel, TrainConfig, train_projection
from .session import DualSession, ModificationEvent, gene_weights, hybrid_weights

__all__ = [
    "DualSession",
    "InvertibleProjection",
    "ModificationEvent",
    "ProjectionModel",
    "TrainConfig",
    "continuity",
    "gene_weights",
    "hybrid_weights",
    "train_projection",
    "trustworthiness",
]

__version__ = "0.1.0"
