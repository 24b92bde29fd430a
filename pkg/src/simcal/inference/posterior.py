from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from simcal.core import (
    GaussianMixtureDensity,
    Prior,
    RandomStream,
    Trajectory,
    mixture_logpdf_batch,
    mixture_marginal,
    mixture_sample,
)
from simcal.density import MixtureDensityModel
from simcal.summarizers import SummarizerMismatchError, SummarizerSpec, summarize

logger = logging.getLogger(__name__)

MIN_PROPOSAL_DRAWS = 10_000
DRAWS_PER_SAMPLE = 50
DEFAULT_NORMALIZER_DRAWS = 20_000

Proposal = Prior | GaussianMixtureDensity


class PosteriorEscapeError(RuntimeError):
    pass


@dataclass(frozen=True)
class Posterior:
    """p(theta | x_real) proportional to prior/proposal * q(theta | x_real), truncated to the prior box."""

    base: GaussianMixtureDensity
    prior: Prior
    proposal: Proposal

    def __post_init__(self) -> None:
        if self.base.D != self.prior.space.D:
            raise ValueError(f"Posterior base has D={self.base.D} but the prior has D={self.prior.space.D}")
        proposal_dim = self.proposal.space.D if isinstance(self.proposal, Prior) else self.proposal.D
        if proposal_dim != self.base.D:
            raise ValueError(f"Proposal has D={proposal_dim}, expected {self.base.D}")

    @property
    def D(self) -> int:
        return self.base.D

    @property
    def names(self) -> list[str]:
        return self.prior.space.names

    def logpdf_unnorm(self, theta: np.ndarray) -> float:
        return posterior_logpdf_unnorm(self, theta)


@dataclass(frozen=True, eq=False)
class SliceGrid:
    values: np.ndarray
    axis_a: np.ndarray
    axis_b: np.ndarray
    dims: tuple[int, int]
    names: tuple[str, str]
    ratio_corrected: bool

    @property
    def G(self) -> int:
        return int(self.axis_a.shape[0])

    def cell_of(self, point_a: float, point_b: float) -> tuple[int, int]:
        """Index of the grid node nearest to (point_a, point_b)."""
        return int(np.argmin(np.abs(self.axis_a - point_a))), int(np.argmin(np.abs(self.axis_b - point_b)))


def _proposal_logpdf_batch(proposal: Proposal, thetas: np.ndarray) -> np.ndarray:
    if isinstance(proposal, Prior):
        return proposal.logpdf_batch(thetas)
    return mixture_logpdf_batch(proposal, thetas)


def _log_ratio_batch(p: Posterior, thetas: np.ndarray) -> np.ndarray:
    """log prior - log proposal; -inf wherever either side gives no mass."""
    log_prior = p.prior.logpdf_batch(thetas)
    log_proposal = _proposal_logpdf_batch(p.proposal, thetas)
    valid = np.isfinite(log_prior) & np.isfinite(log_proposal)
    with np.errstate(invalid="ignore"):
        return np.where(valid, log_prior - log_proposal, -np.inf)


def posterior_logpdf_unnorm_batch(p: Posterior, thetas: np.ndarray) -> np.ndarray:
    batch = np.atleast_2d(np.asarray(thetas, dtype=float))
    if batch.shape[1] != p.D:
        raise ValueError(f"Expected parameter rows of length {p.D}, got {batch.shape[1]}")
    out = np.full(batch.shape[0], -np.inf)
    inside = p.prior.space.contains_batch(batch)
    if np.any(inside):
        kept = batch[inside]
        log_ratio = _log_ratio_batch(p, kept)
        finite = np.isfinite(log_ratio)
        values = np.full(kept.shape[0], -np.inf)
        if np.any(finite):
            values[finite] = log_ratio[finite] + mixture_logpdf_batch(p.base, kept[finite])
        out[inside] = values
    return out


def posterior_logpdf_unnorm(p: Posterior, theta: np.ndarray) -> float:
    vector = p.prior.space.check_vector(theta)
    return float(posterior_logpdf_unnorm_batch(p, vector[None, :])[0])


def posterior_sample(p: Posterior, rng: RandomStream, n: int) -> np.ndarray:
    """Self-normalized importance resampling from the truncated, ratio-corrected base."""
    if n < 1:
        raise ValueError(f"Sample count must be >= 1, got {n}")
    n_draws = max(DRAWS_PER_SAMPLE * n, MIN_PROPOSAL_DRAWS)
    draws = mixture_sample(p.base, rng.child("draws"), n_draws)
    survivors = draws[p.prior.space.contains_batch(draws)]
    log_weights = _log_ratio_batch(p, survivors) if survivors.shape[0] else np.empty(0)
    finite = np.isfinite(log_weights)
    survivors, log_weights = survivors[finite], log_weights[finite]
    if survivors.shape[0] < n:
        raise PosteriorEscapeError(
            f"posterior mass escapes support: {survivors.shape[0]} of {n_draws} draws usable, {n} requested"
        )
    weights = np.exp(log_weights - log_weights.max())
    weights /= weights.sum()
    picks = rng.child("resample").generator().choice(survivors.shape[0], size=n, replace=True, p=weights)
    logger.debug("posterior_sample n=%d draws=%d survivors=%d", n, n_draws, survivors.shape[0])
    return survivors[picks]


def posterior_log_normalizer(p: Posterior, rng: RandomStream, n_draws: int = DEFAULT_NORMALIZER_DRAWS) -> float:
    """Monte-Carlo estimate of log of the integral of prior/proposal * base over the support."""
    if n_draws < 1:
        raise ValueError(f"n_draws must be >= 1, got {n_draws}")
    draws = mixture_sample(p.base, rng, n_draws)
    log_ratio = np.full(n_draws, -np.inf)
    inside = p.prior.space.contains_batch(draws)
    if np.any(inside):
        log_ratio[inside] = _log_ratio_batch(p, draws[inside])
    if not np.any(np.isfinite(log_ratio)):
        return -math.inf
    return float(logsumexp(log_ratio) - math.log(n_draws))


def _ratio_is_constant(p: Posterior) -> bool:
    if not (p.prior.is_uniform and isinstance(p.proposal, Prior) and p.proposal.is_uniform):
        return False
    space, proposal_space = p.prior.space, p.proposal.space
    return bool(np.all(proposal_space.lows <= space.lows) and np.all(proposal_space.highs >= space.highs))


def posterior_slice(p: Posterior, dims: tuple[int, int], grid: int = 50) -> SliceGrid:
    """Normalized 2-D marginal of the base on a grid spanning the two dims' bounds.

    Exact when prior and proposal are uniform with the proposal box covering
    the prior; otherwise the uncorrected base marginal is returned and
    ``ratio_corrected`` is False.
    """
    if grid < 2:
        raise ValueError(f"Slice grid size must be >= 2, got {grid}")
    dim_a, dim_b = int(dims[0]), int(dims[1])
    marginal = mixture_marginal(p.base, (dim_a, dim_b))
    space = p.prior.space
    axis_a = np.linspace(space.lows[dim_a], space.highs[dim_a], grid)
    axis_b = np.linspace(space.lows[dim_b], space.highs[dim_b], grid)
    mesh_a, mesh_b = np.meshgrid(axis_a, axis_b, indexing="ij")
    points = np.column_stack([mesh_a.reshape(-1), mesh_b.reshape(-1)])
    log_values = mixture_logpdf_batch(marginal, points).reshape(grid, grid)
    peak = np.max(log_values)
    if not np.isfinite(peak):
        raise PosteriorEscapeError(f"posterior mass escapes support: slice {dims} has no finite density")
    values = np.exp(log_values - peak)
    values /= values.sum()
    return SliceGrid(
        values=values,
        axis_a=axis_a,
        axis_b=axis_b,
        dims=(dim_a, dim_b),
        names=(space.names[dim_a], space.names[dim_b]),
        ratio_corrected=_ratio_is_constant(p),
    )


def condition(
    model: MixtureDensityModel,
    real_traj: Trajectory,
    spec: SummarizerSpec,
    prior: Prior,
    proposal: Proposal,
) -> Posterior:
    if real_traj.params is not None:
        raise ValueError("Real trajectory must not carry its generating parameters.")
    summary = summarize(real_traj, spec)
    if model.summarizer_id is not None and model.summarizer_id != summary.summarizer_id:
        raise SummarizerMismatchError(
            f"model was trained on summarizer {model.summarizer_id}, got {summary.summarizer_id}"
        )
    if summary.F != model.input_dim:
        raise SummarizerMismatchError(f"model expects summaries of length {model.input_dim}, got {summary.F}")
    return Posterior(base=model.forward(summary), prior=prior, proposal=proposal)
