from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .random import RandomStream

CHOL_DIAG_FLOOR = 1e-6
WEIGHT_SUM_TOLERANCE = 1e-9
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class GaussianMixtureDensity:
    """Weighted sum of full-covariance Gaussians, covariance k = L_k @ L_k.T."""

    weights: np.ndarray
    means: np.ndarray
    chol_factors: np.ndarray

    def __post_init__(self) -> None:
        weights = np.array(self.weights, dtype=float).reshape(-1)
        means = np.array(self.means, dtype=float)
        chol = np.array(self.chol_factors, dtype=float)
        K = weights.shape[0]
        if K < 1:
            raise ValueError("A mixture needs at least one component.")
        if means.ndim != 2 or means.shape[0] != K:
            raise ValueError(f"means must have shape (K, D) with K={K}, got {means.shape}")
        D = means.shape[1]
        if chol.shape != (K, D, D):
            raise ValueError(f"chol_factors must have shape {(K, D, D)}, got {chol.shape}")
        if np.any(weights < 0) or abs(float(weights.sum()) - 1.0) > WEIGHT_SUM_TOLERANCE:
            raise ValueError(f"Mixture weights must lie on the simplex, got sum={weights.sum()!r}")
        if not (np.all(np.isfinite(means)) and np.all(np.isfinite(chol))):
            raise ValueError("Mixture means and Cholesky factors must be finite.")
        if np.any(np.triu(chol, k=1) != 0.0):
            raise ValueError("Cholesky factors must be lower triangular.")
        diagonals = np.diagonal(chol, axis1=1, axis2=2)
        if np.any(diagonals < CHOL_DIAG_FLOOR):
            raise ValueError(f"Cholesky diagonal entries must be >= {CHOL_DIAG_FLOOR}, got min={diagonals.min()!r}")
        for array, name in ((weights, "weights"), (means, "means"), (chol, "chol_factors")):
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @classmethod
    def from_params(
        cls,
        weights: np.ndarray | Iterable[float],
        means: np.ndarray,
        chol_factors: np.ndarray,
    ) -> "GaussianMixtureDensity":
        """Build a mixture from raw parameters.

        Negative weights are clipped and the rest renormalized. The upper triangle of
        each factor is dropped and diagonal entries below ``CHOL_DIAG_FLOOR`` are raised
        to it, so the result may differ from the input. Use the constructor to reject
        such inputs instead.
        """
        weights = np.clip(np.asarray(weights, dtype=float).reshape(-1), 0.0, None)
        total = weights.sum()
        if not total > 0:
            raise ValueError("Mixture weights must have positive total mass.")
        chol = np.tril(np.array(chol_factors, dtype=float))
        D = chol.shape[-1]
        diag_index = np.arange(D)
        chol[:, diag_index, diag_index] = np.maximum(chol[:, diag_index, diag_index], CHOL_DIAG_FLOOR)
        return cls(weights=weights / total, means=np.asarray(means, dtype=float), chol_factors=chol)

    @property
    def K(self) -> int:
        return int(self.weights.shape[0])

    @property
    def D(self) -> int:
        return int(self.means.shape[1])

    @property
    def covariances(self) -> np.ndarray:
        return self.chol_factors @ np.swapaxes(self.chol_factors, 1, 2)

    def logpdf(self, theta: np.ndarray) -> float:
        return mixture_logpdf(self, theta)

    def logpdf_batch(self, thetas: np.ndarray) -> np.ndarray:
        return mixture_logpdf_batch(self, thetas)

    def affine(self, scale: np.ndarray, shift: np.ndarray) -> "GaussianMixtureDensity":
        """Density of ``scale * x + shift`` where x follows this mixture.

        ``scale`` must be positive and finite. Scaled Cholesky diagonals that fall
        below ``CHOL_DIAG_FLOOR`` are floored, which widens those components slightly.
        """
        scale = np.asarray(scale, dtype=float).reshape(-1)
        shift = np.asarray(shift, dtype=float).reshape(-1)
        if scale.shape != (self.D,) or shift.shape != (self.D,):
            raise ValueError(f"scale and shift must have length {self.D}")
        if not (np.all(np.isfinite(scale)) and np.all(scale > 0.0)):
            raise ValueError(f"Affine scale must be positive and finite, got {scale.tolist()}")
        means = self.means * scale + shift
        chol = scale[None, :, None] * self.chol_factors
        return GaussianMixtureDensity.from_params(self.weights, means, chol)


def _component_log_densities(m: GaussianMixtureDensity, thetas: np.ndarray) -> np.ndarray:
    N = thetas.shape[0]
    out = np.empty((N, m.K))
    for k in range(m.K):
        chol = m.chol_factors[k]
        whitened = solve_triangular(chol, (thetas - m.means[k]).T, lower=True)
        log_det = float(np.sum(np.log(np.diagonal(chol))))
        out[:, k] = -0.5 * np.sum(whitened**2, axis=0) - log_det - 0.5 * m.D * LOG_2PI
    return out


def _log_weights(weights: np.ndarray) -> np.ndarray:
    return np.log(weights, out=np.full(weights.shape, -np.inf), where=weights > 0)


def mixture_logpdf_batch(m: GaussianMixtureDensity, thetas: np.ndarray) -> np.ndarray:
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    if thetas.shape[1] != m.D:
        raise ValueError(f"Expected rows of length {m.D}, got {thetas.shape[1]}")
    if not np.all(np.isfinite(thetas)):
        raise ValueError("mixture_logpdf requires finite parameter values.")
    return logsumexp(_log_weights(m.weights)[None, :] + _component_log_densities(m, thetas), axis=1)


def mixture_logpdf(m: GaussianMixtureDensity, theta: np.ndarray | Iterable[float]) -> float:
    vector = np.asarray(theta, dtype=float).reshape(-1)
    if vector.shape[0] != m.D:
        raise ValueError(f"Expected a parameter vector of length {m.D}, got {vector.shape[0]}")
    return float(mixture_logpdf_batch(m, vector[None, :])[0])


def mixture_sample(m: GaussianMixtureDensity, rng: RandomStream, n: int) -> np.ndarray:
    if n < 1:
        raise ValueError(f"Sample count must be >= 1, got {n}")
    generator = rng.generator()
    components = generator.choice(m.K, size=n, p=m.weights)
    noise = generator.standard_normal((n, m.D))
    return m.means[components] + np.einsum("nij,nj->ni", m.chol_factors[components], noise)


def mixture_marginal(m: GaussianMixtureDensity, dims: tuple[int, int]) -> GaussianMixtureDensity:
    first, second = (int(index) for index in dims)
    if first == second:
        raise ValueError(f"Marginal dims must be distinct, got {dims}")
    for index in (first, second):
        if not 0 <= index < m.D:
            raise ValueError(f"Marginal dim {index} out of range for D={m.D}")
    selected = [first, second]
    blocks = m.covariances[:, selected][:, :, selected]
    chol = np.linalg.cholesky(blocks)
    return GaussianMixtureDensity.from_params(m.weights, m.means[:, selected], chol)


def mixture_moments(m: GaussianMixtureDensity) -> tuple[np.ndarray, np.ndarray]:
    mean = m.weights @ m.means
    centered = m.means - mean
    spread = np.einsum("k,ki,kj->ij", m.weights, centered, centered)
    covariance = np.einsum("k,kij->ij", m.weights, m.covariances) + spread
    return mean, covariance
