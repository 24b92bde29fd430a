from __future__ import annotations

import numpy as np
import pytest

from simcal.core import RandomStream, Trajectory
from simcal.simulators import Policy, make_task, rollout
from simcal.summarizers import (
    SUMMARIZER_KINDS,
    SummarizerSpec,
    chen_product,
    flatten_signature,
    signature_levels,
    summarize,
    summarize_batch,
    summarize_crosscorr,
    summarize_crosscorr_diff,
    summarize_signature,
    summarize_start,
    summarize_waypoints,
    summary_dim,
)


def _trajectory(states, actions, dt: float = 0.1) -> Trajectory:
    return Trajectory(states=np.asarray(states, dtype=float), actions=np.asarray(actions, dtype=float), dt=dt)


def _random_trajectory(T: int = 10, ds: int = 2, da: int = 1, seed: int = 0) -> Trajectory:
    generator = np.random.default_rng(seed)
    return _trajectory(generator.normal(size=(T, ds)), generator.uniform(-1, 1, size=(T, da)))


def test_summary_dim_formulas() -> None:
    assert summary_dim(SummarizerSpec(kind="waypoints", stride=5), ds=2, da=1, T=10) == 6
    assert summary_dim(SummarizerSpec(kind="signature", depth=2, time_augment=True), ds=1, da=1, T=10) == 6
    assert summary_dim(SummarizerSpec(kind="crosscorr", n_lags=3), ds=2, da=1, T=10) == 10
    assert summary_dim(SummarizerSpec(kind="crosscorrdiff", n_lags=3), ds=2, da=1, T=10) == 10
    assert summary_dim(SummarizerSpec(kind="start", n_steps=4), ds=2, da=1, T=10) == 12
    with pytest.raises(ValueError):
        summary_dim(SummarizerSpec(kind="start", n_steps=11), ds=2, da=1, T=10)
    with pytest.raises(ValueError):
        summary_dim(SummarizerSpec(kind="waypoints", stride=11), ds=2, da=1, T=10)


def test_summarizer_spec_ids_and_aliases() -> None:
    assert SummarizerSpec().summarizer_id == "crosscorrdiff:n_lags=5"
    assert SummarizerSpec(kind="signatory").kind == "signature"
    assert SummarizerSpec(kind="signature").summarizer_id == "signature:depth=3,time_augment=true"
    assert SummarizerSpec(kind="cross_corr_difference").short_name == "crosscorrdiff"
    with pytest.raises(ValueError, match="Unknown summarizer"):
        SummarizerSpec(kind="fourier")
    with pytest.raises(ValueError, match="depth"):
        SummarizerSpec(kind="signature", depth=5)


def test_start_summarizer_interleaves_states_and_actions() -> None:
    traj = _trajectory([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]], [[10.0], [20.0], [30.0]])
    np.testing.assert_array_equal(summarize_start(traj, 1).values, [1.0, 2.0, 10.0])
    np.testing.assert_array_equal(summarize_start(traj, 3).values, [1, 2, 10, 3, 4, 20, 5, 6, 30])
    zeros = _trajectory(np.zeros((4, 2)), np.zeros((4, 1)))
    np.testing.assert_array_equal(summarize_start(zeros, 2).values, np.zeros(6))
    with pytest.raises(ValueError):
        summarize_start(traj, 4)


def test_waypoints_indices_include_start() -> None:
    traj = _trajectory(np.arange(7, dtype=float)[:, None], np.zeros((7, 1)))
    np.testing.assert_array_equal(summarize_waypoints(traj, 3).values, [0, 0, 3, 0, 6, 0])
    ten = _trajectory(np.arange(10, dtype=float)[:, None], np.ones((10, 1)))
    np.testing.assert_array_equal(summarize_waypoints(ten, 5).values, [0, 1, 5, 1])


def test_waypoints_with_unit_stride_equals_full_start() -> None:
    traj = _random_trajectory(T=8)
    np.testing.assert_array_equal(summarize_waypoints(traj, 1).values, summarize_start(traj, 8).values)


def test_signature_of_single_segments() -> None:
    line = _trajectory([[0.0], [2.5]], np.zeros((2, 1)))
    np.testing.assert_allclose(summarize_signature(line, 2, time_augment=False).values, [2.5, 2.5**2 / 2])
    plane = signature_levels(np.array([[0.0, 0.0], [2.0, 3.0]]), 2)
    np.testing.assert_allclose(plane[1], [2.0, 3.0, 3.0, 4.5])


def test_signature_of_two_one_dimensional_segments() -> None:
    levels = signature_levels(np.array([[0.0], [1.0], [3.0]]), 2)
    np.testing.assert_allclose(flatten_signature(levels), [3.0, 4.5])
    np.testing.assert_allclose(flatten_signature(levels), flatten_signature(signature_levels(np.array([[0.0], [3.0]]), 2)))


def test_signature_level_one_is_exact_increment() -> None:
    path = np.random.default_rng(1).normal(size=(50, 3))
    levels = signature_levels(path, 3)
    assert np.array_equal(levels[0], path[-1] - path[0])


def test_signature_collinear_refinement_invariance() -> None:
    generator = np.random.default_rng(2)
    for _ in range(100):
        channels = int(generator.integers(1, 4))
        depth = int(generator.integers(1, 5))
        points = generator.normal(size=(int(generator.integers(2, 8)), channels))
        split = int(generator.integers(0, points.shape[0] - 1))
        midpoint = 0.5 * (points[split] + points[split + 1])
        refined = np.insert(points, split + 1, midpoint, axis=0)
        np.testing.assert_allclose(
            flatten_signature(signature_levels(refined, depth)),
            flatten_signature(signature_levels(points, depth)),
            atol=1e-10,
        )


def test_signature_chen_identity_on_concatenated_paths() -> None:
    generator = np.random.default_rng(3)
    for _ in range(100):
        channels = int(generator.integers(1, 4))
        depth = int(generator.integers(1, 5))
        left = generator.normal(size=(int(generator.integers(2, 6)), channels))
        right = left[-1] + np.cumsum(generator.normal(size=(int(generator.integers(2, 6)), channels)), axis=0)
        right = np.vstack([left[-1], right])
        joined = np.vstack([left, right[1:]])
        combined = chen_product(signature_levels(left, depth), signature_levels(right, depth), depth)
        np.testing.assert_allclose(
            flatten_signature(signature_levels(joined, depth)),
            flatten_signature(combined),
            atol=1e-10,
        )


def test_crosscorr_constant_trajectory() -> None:
    traj = _trajectory(np.ones((5, 1)), np.ones((5, 1)))
    np.testing.assert_allclose(summarize_crosscorr(traj, 1).values, [1.0, 1.0, 0.0])
    np.testing.assert_allclose(summarize_crosscorr_diff(traj, 1).values, [0.0, 0.0, 0.0])


def test_crosscorr_direct_evaluation() -> None:
    traj = _trajectory([[0.0], [1.0], [2.0], [3.0]], np.ones((4, 1)))
    np.testing.assert_allclose(summarize_crosscorr(traj, 2).values, [1.5, 2.0, 1.5, 1.25])
    with pytest.raises(ValueError):
        summarize_crosscorr(traj, 4)


def test_every_summarizer_matches_its_declared_dimension() -> None:
    task = make_task("Cartpole")
    traj = rollout(task, np.array([1.0, 0.2, 0.6]), Policy(), RandomStream(seed=9)).without_params()
    for kind in SUMMARIZER_KINDS:
        spec = SummarizerSpec(kind=kind)
        summary = summarize(traj, spec)
        assert summary.F == summary_dim(spec, task.ds, task.da, traj.T)
        assert summary.summarizer_id == spec.summarizer_id
        assert np.all(np.isfinite(summary.values))
        np.testing.assert_array_equal(summary.values, summarize(traj, spec).values)


def test_summarize_batch_stacks_rows() -> None:
    spec = SummarizerSpec(kind="waypoints", stride=2)
    trajectories = [_random_trajectory(seed=seed) for seed in range(3)]
    batch = summarize_batch(trajectories, spec)
    assert batch.shape == (3, 15)
    np.testing.assert_array_equal(batch[1], summarize(trajectories[1], spec).values)
    with pytest.raises(ValueError):
        summarize_batch([], spec)
