"""Trajectory prediction with variational Bayesian Gaussian mixture regression."""

__version__ = "0.1.0"

from .core import (
    FeatureVector,
    GridSequence,
    GridSpec,
    TrackPoint,
    Trajectory,
    TrajectorySegment,
    build_feature_vectors,
    split_dataset,
    to_grid_sequence,
    validate_trajectory,
)
from .predict import CandidateGrid, condition, predict_future, select_model, to_predictive_mixture
from .vbgmm import Hyperparameters, VbGmmModel, effective_components, fit

__all__ = [
    "CandidateGrid",
    "FeatureVector",
    "GridSequence",
    "GridSpec",
    "Hyperparameters",
    "TrackPoint",
    "Trajectory",
    "TrajectorySegment",
    "VbGmmModel",
    "build_feature_vectors",
    "condition",
    "effective_components",
    "fit",
    "predict_future",
    "select_model",
    "split_dataset",
    "to_grid_sequence",
    "to_predictive_mixture",
    "validate_trajectory",
]
