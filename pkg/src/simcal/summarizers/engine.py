from __future__ import annotations

from typing import Sequence

import numpy as np

from simcal.core import SummaryVector, Trajectory

from .crosscorr import summarize_crosscorr, summarize_crosscorr_diff
from .signature import summarize_signature
from .snippets import summarize_start, summarize_waypoints
from .spec import SummarizerSpec, summary_dim


def summarize(traj: Trajectory, spec: SummarizerSpec) -> SummaryVector:
    if spec.kind == "start":
        return summarize_start(traj, spec.n_steps)
    if spec.kind == "waypoints":
        return summarize_waypoints(traj, spec.stride)
    if spec.kind == "signature":
        return summarize_signature(traj, spec.depth, spec.time_augment)
    if spec.kind == "crosscorr":
        return summarize_crosscorr(traj, spec.n_lags)
    return summarize_crosscorr_diff(traj, spec.n_lags)


def summarize_batch(trajectories: Sequence[Trajectory], spec: SummarizerSpec) -> np.ndarray:
    if not trajectories:
        raise ValueError("summarize_batch needs at least one trajectory.")
    first = trajectories[0]
    width = summary_dim(spec, first.ds, first.da, first.T)
    out = np.empty((len(trajectories), width))
    for index, traj in enumerate(trajectories):
        out[index] = summarize(traj, spec).values
    return out
