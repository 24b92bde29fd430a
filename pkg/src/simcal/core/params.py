from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
from scipy.stats import norm

from .random import RandomStream

PRIOR_KINDS = {"uniform", "truncated_gaussian"}
TRUNCATION_TRIAL_SIZE = 10_000
MIN_TRUNCATION_ACCEPTANCE = 1e-6
MAX_REJECTION_BATCH = 1_000_000


class DegenerateTruncationError(ValueError):
    pass


@dataclass(frozen=True)
class ParamDim:
    name: str
    low: float
    high: float


@dataclass(frozen=True)
class ParamSpace:
    dims: tuple[ParamDim, ...]

    def __post_init__(self) -> None:
        if not self.dims:
            raise ValueError("A parameter space needs at least one dimension.")
        seen: set[str] = set()
        for dim in self.dims:
            if not dim.name or not dim.name.strip():
                raise ValueError("Parameter names must be non-empty.")
            if dim.name in seen:
                raise ValueError(f"Duplicate parameter name: {dim.name}")
            seen.add(dim.name)
            if not (math.isfinite(dim.low) and math.isfinite(dim.high)):
                raise ValueError(f"Bounds for {dim.name} must be finite.")
            if not dim.low < dim.high:
                raise ValueError(f"Invalid bounds for {dim.name}: low={dim.low} must be < high={dim.high}")

    @classmethod
    def from_bounds(cls, bounds: Mapping[str, tuple[float, float]] | Iterable[tuple[str, float, float]]) -> "ParamSpace":
        if isinstance(bounds, Mapping):
            items = [(name, low, high) for name, (low, high) in bounds.items()]
        else:
            items = list(bounds)
        return cls(dims=tuple(ParamDim(str(name), float(low), float(high)) for name, low, high in items))

    @property
    def D(self) -> int:
        return len(self.dims)

    @property
    def names(self) -> list[str]:
        return [dim.name for dim in self.dims]

    @property
    def lows(self) -> np.ndarray:
        return np.array([dim.low for dim in self.dims], dtype=float)

    @property
    def highs(self) -> np.ndarray:
        return np.array([dim.high for dim in self.dims], dtype=float)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError as exc:
            raise ValueError(f"Unknown parameter: {name}") from exc

    def contains(self, theta: np.ndarray) -> bool:
        return bool(self.contains_batch(np.atleast_2d(self.check_vector(theta)))[0])

    def contains_batch(self, thetas: np.ndarray) -> np.ndarray:
        # Closed box: the bounds themselves are in the support.
        thetas = np.asarray(thetas, dtype=float)
        return np.all((thetas >= self.lows) & (thetas <= self.highs), axis=1)

    def check_vector(self, theta: np.ndarray | Iterable[float]) -> np.ndarray:
        vector = np.asarray(theta, dtype=float).reshape(-1)
        if vector.shape[0] != self.D:
            raise ValueError(f"Expected a parameter vector of length {self.D}, got {vector.shape[0]}")
        return vector

    def vector_from_mapping(self, values: Mapping[str, float]) -> np.ndarray:
        missing = sorted(set(self.names) - set(values))
        unknown = sorted(set(values) - set(self.names))
        if missing or unknown:
            raise ValueError(f"Parameter mapping mismatch: missing={missing} unknown={unknown}")
        return np.array([float(values[name]) for name in self.names], dtype=float)

    @property
    def log_volume(self) -> float:
        return float(np.sum(np.log(self.highs - self.lows)))


@dataclass(frozen=True)
class Prior:
    """Factorized prior over a box; also used for the proposal prior."""

    space: ParamSpace
    kind: str = "uniform"
    means: tuple[float, ...] | None = None
    stds: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in PRIOR_KINDS:
            raise ValueError(f"Unknown prior kind: {self.kind}. Expected one of {sorted(PRIOR_KINDS)}")
        if self.kind == "truncated_gaussian":
            if self.means is None or self.stds is None:
                raise ValueError("truncated_gaussian prior requires means and stds.")
            if len(self.means) != self.space.D or len(self.stds) != self.space.D:
                raise ValueError("truncated_gaussian means/stds must have one entry per parameter.")
            if any(not (std > 0 and math.isfinite(std)) for std in self.stds):
                raise ValueError("truncated_gaussian stds must be positive and finite.")

    @property
    def is_uniform(self) -> bool:
        return self.kind == "uniform"

    def logpdf(self, theta: np.ndarray) -> float:
        return prior_logpdf(self, theta)

    def logpdf_batch(self, thetas: np.ndarray) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        if thetas.shape[1] != self.space.D:
            raise ValueError(f"Expected parameter rows of length {self.space.D}, got {thetas.shape[1]}")
        inside = self.space.contains_batch(thetas)
        if self.is_uniform:
            values = np.full(thetas.shape[0], -self.space.log_volume)
        else:
            means = np.asarray(self.means, dtype=float)
            stds = np.asarray(self.stds, dtype=float)
            values = np.sum(norm.logpdf(thetas, loc=means, scale=stds), axis=1) - self._log_truncated_mass()
        return np.where(inside, values, -np.inf)

    def _log_truncated_mass(self) -> float:
        means = np.asarray(self.means, dtype=float)
        stds = np.asarray(self.stds, dtype=float)
        mass = norm.cdf((self.space.highs - means) / stds) - norm.cdf((self.space.lows - means) / stds)
        with np.errstate(divide="ignore"):
            return float(np.sum(np.log(mass)))


def prior_logpdf(prior: Prior, theta: np.ndarray | Iterable[float]) -> float:
    vector = prior.space.check_vector(theta)
    return float(prior.logpdf_batch(vector[None, :])[0])


def prior_sample(prior: Prior, rng: RandomStream, n: int) -> np.ndarray:
    if n < 1:
        raise ValueError(f"Sample count must be >= 1, got {n}")
    generator = rng.generator()
    space = prior.space
    if prior.is_uniform:
        return generator.uniform(space.lows, space.highs, size=(n, space.D))
    return _sample_truncated_gaussian(prior, generator, n)


def _sample_truncated_gaussian(prior: Prior, generator: np.random.Generator, n: int) -> np.ndarray:
    means = np.asarray(prior.means, dtype=float)
    stds = np.asarray(prior.stds, dtype=float)
    space = prior.space

    trial = means + stds * generator.standard_normal((TRUNCATION_TRIAL_SIZE, space.D))
    acceptance = float(np.mean(space.contains_batch(trial)))
    if acceptance < MIN_TRUNCATION_ACCEPTANCE:
        raise DegenerateTruncationError(
            f"degenerate truncation: estimated acceptance {acceptance:.3g} from {TRUNCATION_TRIAL_SIZE} proposals"
        )

    accepted: list[np.ndarray] = []
    total = 0
    while total < n:
        batch = min(MAX_REJECTION_BATCH, int(math.ceil((n - total) / acceptance * 1.2)) + 16)
        draws = means + stds * generator.standard_normal((batch, space.D))
        kept = draws[space.contains_batch(draws)]
        accepted.append(kept)
        total += kept.shape[0]
    return np.concatenate(accepted, axis=0)[:n]
