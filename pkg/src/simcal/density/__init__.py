from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import GradCheckReport, grad_check
from .networks import (
    MODEL_KINDS,
    MdnnConfig,
    MdrffConfig,
    MixtureDensityModel,
    NonFiniteLossError,
    build_model,
    forward,
    median_heuristic,
    nll_loss,
    rff_features,
)
from .standardizer import Standardizer
from .training import TrainConfig, TrainingDivergedError, TrainReport, TrainResult, train

__all__ = [
    "MODEL_KINDS",
    "GradCheckReport",
    "MdnnConfig",
    "MdrffConfig",
    "MixtureDensityModel",
    "NonFiniteLossError",
    "Standardizer",
    "TrainConfig",
    "TrainReport",
    "TrainResult",
    "TrainingDivergedError",
    "build_model",
    "forward",
    "grad_check",
    "load_checkpoint",
    "median_heuristic",
    "nll_loss",
    "rff_features",
    "save_checkpoint",
    "train",
]
