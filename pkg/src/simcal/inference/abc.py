from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from simcal.core import Prior, RandomStream, Trajectory, prior_sample
from simcal.density import Standardizer
from simcal.simulators import Policy, TaskSpec, rollout_batch
from simcal.summarizers import SummarizerSpec, summarize, summarize_batch

logger = logging.getLogger(__name__)

MIN_ORACLE_SIMS = 1000
MAX_ORACLE_QUANTILE = 0.1


@dataclass(frozen=True, eq=False)
class AbcResult:
    accepted: np.ndarray
    distances: np.ndarray
    threshold: float
    n_sims: int
    n_valid: int
    quantile: float
    names: tuple[str, ...]

    @property
    def n_accepted(self) -> int:
        return int(self.accepted.shape[0])

    @property
    def mean(self) -> np.ndarray:
        return self.accepted.mean(axis=0)

    @property
    def std(self) -> np.ndarray:
        return self.accepted.std(axis=0)


def abc_rejection_oracle(
    task: TaskSpec,
    prior: Prior,
    policy: Policy,
    real_traj: Trajectory,
    spec: SummarizerSpec,
    rng: RandomStream,
    n_sims: int,
    quantile: float,
    *,
    standardizer: Standardizer | None = None,
    workers: int = 1,
    allow_degenerate_quantile: bool = False,
) -> AbcResult:
    """Brute-force rejection posterior: keep the prior draws whose summaries land closest to the real one."""
    if n_sims < MIN_ORACLE_SIMS:
        raise ValueError(f"n_sims must be >= {MIN_ORACLE_SIMS}, got {n_sims}")
    upper = 1.0 if allow_degenerate_quantile else MAX_ORACLE_QUANTILE
    if not 0.0 < quantile <= upper:
        raise ValueError(f"quantile must be in (0, {upper}], got {quantile}")

    thetas = prior_sample(prior, rng.child("prior"), n_sims)
    batch = rollout_batch(task, thetas, policy, rng.child("simulate"), real_traj.T, workers=workers)
    thetas = thetas[batch.kept_indices]
    summaries = summarize_batch(batch.trajectories, spec)
    observed = summarize(real_traj, spec).values

    if standardizer is not None and standardizer.input_dim == summaries.shape[1]:
        scaled = standardizer.transform_inputs(summaries)
        target = standardizer.transform_inputs(observed)
    else:
        mean = summaries.mean(axis=0)
        std = np.maximum(summaries.std(axis=0), 1e-8)
        scaled = (summaries - mean) / std
        target = (observed - mean) / std

    distances = np.linalg.norm(scaled - target, axis=1)
    finite = np.isfinite(distances)
    if not np.any(finite):
        raise ValueError("ABC oracle found no finite summary distances.")
    thetas, distances = thetas[finite], distances[finite]
    n_valid = int(distances.shape[0])
    n_accept = max(1, int(round(quantile * n_valid)))
    order = np.argsort(distances, kind="stable")[:n_accept]
    threshold = float(distances[order[-1]])
    logger.info("abc oracle n_sims=%d n_valid=%d accepted=%d threshold=%.6g", n_sims, n_valid, n_accept, threshold)
    return AbcResult(
        accepted=thetas[order],
        distances=distances[order],
        threshold=threshold,
        n_sims=n_sims,
        n_valid=n_valid,
        quantile=quantile,
        names=tuple(prior.space.names),
    )
