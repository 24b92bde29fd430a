from .mixture import (
    CHOL_DIAG_FLOOR,
    GaussianMixtureDensity,
    mixture_logpdf,
    mixture_logpdf_batch,
    mixture_marginal,
    mixture_moments,
    mixture_sample,
)
from .params import DegenerateTruncationError, ParamDim, ParamSpace, Prior, prior_logpdf, prior_sample
from .random import RandomStream
from .trajectory import SummaryVector, Trajectory

__all__ = [
    "CHOL_DIAG_FLOOR",
    "DegenerateTruncationError",
    "GaussianMixtureDensity",
    "ParamDim",
    "ParamSpace",
    "Prior",
    "RandomStream",
    "SummaryVector",
    "Trajectory",
    "mixture_logpdf",
    "mixture_logpdf_batch",
    "mixture_marginal",
    "mixture_moments",
    "mixture_sample",
    "prior_logpdf",
    "prior_sample",
]
