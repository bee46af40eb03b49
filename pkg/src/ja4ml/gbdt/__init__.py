"""Gradient-boosted decision trees for binary classification."""

from ._kernels import BACKEND, BACKENDS
from .model import (
    GbdtModel,
    ModelError,
    TrainConfig,
    Tree,
    build_tree,
    feature_importance,
    load_model,
    predict_proba,
    save_model,
    sigmoid,
    train,
)

__all__ = [
    "BACKEND",
    "BACKENDS",
    "GbdtModel",
    "ModelError",
    "TrainConfig",
    "Tree",
    "build_tree",
    "feature_importance",
    "load_model",
    "predict_proba",
    "save_model",
    "sigmoid",
    "train",
]
