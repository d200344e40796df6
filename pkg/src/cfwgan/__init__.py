"""Conditional WGAN-GP collaborative filtering with zero-reconstruction and partial-masking designs."""

from .adversarial import GanHyperParams, LossVariant, train_gan
from .baselines import MlcHyperParams, itempop_scores, train_mlc
from .config import RunConfig, load_config
from .data import InteractionMatrix, SplitDataset, load_split, parse_ratings, split_dataset
from .errors import ConfigError, DataError, NumericalAbort
from .estimators import CFWGANGP, ItemPop, MLCRecommender
from .evaluation import LearningCurve, MetricsReport, evaluate_model
from .experiment import run_experiment

__version__ = "0.1.0"

__all__ = [
    "CFWGANGP",
    "ConfigError",
    "DataError",
    "GanHyperParams",
    "InteractionMatrix",
    "ItemPop",
    "LearningCurve",
    "LossVariant",
    "MLCRecommender",
    "MetricsReport",
    "MlcHyperParams",
    "NumericalAbort",
    "RunConfig",
    "SplitDataset",
    "evaluate_model",
    "itempop_scores",
    "load_config",
    "load_split",
    "parse_ratings",
    "run_experiment",
    "split_dataset",
    "train_gan",
    "train_mlc",
]
