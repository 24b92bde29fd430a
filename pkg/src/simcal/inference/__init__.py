from .abc import AbcResult, abc_rejection_oracle
from .posterior import (
    Posterior,
    PosteriorEscapeError,
    SliceGrid,
    condition,
    posterior_log_normalizer,
    posterior_logpdf_unnorm,
    posterior_logpdf_unnorm_batch,
    posterior_sample,
    posterior_slice,
)

__all__ = [
    "AbcResult",
    "Posterior",
    "PosteriorEscapeError",
    "SliceGrid",
    "abc_rejection_oracle",
    "condition",
    "posterior_log_normalizer",
    "posterior_logpdf_unnorm",
    "posterior_logpdf_unnorm_batch",
    "posterior_sample",
    "posterior_slice",
]
