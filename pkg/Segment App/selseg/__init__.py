"""Selective image segmentation with nonlinear multigrid."""

from .core.model import MarkerSet, ModelKind, ModelParams
from .core.multigrid import CycleConfig, SolveStats, segment
from .core.smoothers import SmootherKind

__version__ = "0.1.0"

__all__ = [
    "MarkerSet",
    "ModelKind",
    "ModelParams",
    "CycleConfig",
    "SolveStats",
    "SmootherKind",
    "segment",
]
