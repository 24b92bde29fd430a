from __future__ import annotations

import numpy as np

from simcal.core import SummaryVector, Trajectory

from .spec import SummarizerSpec


def _lagged_features(signal: np.ndarray, actions: np.ndarray, n_lags: int) -> np.ndarray:
    """Features c[i, j, lag] = mean_t a_j(t) * x_i(t + lag), then means and variances of x."""
    length, ds = signal.shape
    da = actions.shape[1]
    correlations = np.empty((ds, da, n_lags))
    for lag in range(n_lags):
        valid = length - lag
        correlations[:, :, lag] = signal[lag:].T @ actions[:valid] / valid
    return np.concatenate([correlations.reshape(-1), signal.mean(axis=0), signal.var(axis=0)])


def _check_lags(traj: Trajectory, n_lags: int) -> None:
    if not 1 <= n_lags <= traj.T - 1:
        raise ValueError(f"n_lags must be in [1, {traj.T - 1}], got {n_lags}")


def summarize_crosscorr(traj: Trajectory, n_lags: int) -> SummaryVector:
    _check_lags(traj, n_lags)
    spec = SummarizerSpec(kind="crosscorr", n_lags=n_lags)
    values = _lagged_features(np.asarray(traj.states), np.asarray(traj.actions), n_lags)
    return SummaryVector(values=values, summarizer_id=spec.summarizer_id)


def summarize_crosscorr_diff(traj: Trajectory, n_lags: int) -> SummaryVector:
    _check_lags(traj, n_lags)
    spec = SummarizerSpec(kind="crosscorrdiff", n_lags=n_lags)
    differences = np.diff(np.asarray(traj.states), axis=0)
    values = _lagged_features(differences, np.asarray(traj.actions), n_lags)
    return SummaryVector(values=values, summarizer_id=spec.summarizer_id)
