from __future__ import annotations

import numpy as np

from simcal.core import SummaryVector, Trajectory

from .spec import SummarizerSpec


def _interleave(traj: Trajectory, indices: np.ndarray) -> np.ndarray:
    return np.concatenate([traj.states[indices], traj.actions[indices]], axis=1).reshape(-1)


def summarize_start(traj: Trajectory, n_steps: int) -> SummaryVector:
    if not 1 <= n_steps <= traj.T:
        raise ValueError(f"n_steps must be in [1, {traj.T}], got {n_steps}")
    spec = SummarizerSpec(kind="start", n_steps=n_steps)
    return SummaryVector(values=_interleave(traj, np.arange(n_steps)), summarizer_id=spec.summarizer_id)


def summarize_waypoints(traj: Trajectory, stride: int) -> SummaryVector:
    if not 1 <= stride <= traj.T:
        raise ValueError(f"stride must be in [1, {traj.T}], got {stride}")
    spec = SummarizerSpec(kind="waypoints", stride=stride)
    return SummaryVector(values=_interleave(traj, np.arange(0, traj.T, stride)), summarizer_id=spec.summarizer_id)
