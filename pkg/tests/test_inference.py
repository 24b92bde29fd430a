from __future__ import annotations

import math

import numpy as np
import pytest

from simcal.core import (
    GaussianMixtureDensity,
    ParamSpace,
    Prior,
    RandomStream,
    Trajectory,
    mixture_logpdf_batch,
    prior_sample,
)
from simcal.density import MdnnConfig, MixtureDensityModel, forward
from simcal.inference import (
    Posterior,
    PosteriorEscapeError,
    abc_rejection_oracle,
    condition,
    posterior_log_normalizer,
    posterior_logpdf_unnorm,
    posterior_logpdf_unnorm_batch,
    posterior_sample,
    posterior_slice,
)
from simcal.simulators import Policy, RealConfig, make_task, real_rollout, rollout_batch
from simcal.summarizers import SummarizerMismatchError, SummarizerSpec, summarize, summarize_batch


def _gaussian(mean, cov) -> GaussianMixtureDensity:
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    chol = np.linalg.cholesky(np.atleast_2d(np.asarray(cov, dtype=float)))
    return GaussianMixtureDensity(weights=np.array([1.0]), means=mean[None, :], chol_factors=chol[None, :, :])


def _box(*bounds: tuple[float, float]) -> ParamSpace:
    return ParamSpace.from_bounds({f"p{index}": bound for index, bound in enumerate(bounds)})


def _pendulum_model(spec: SummarizerSpec) -> tuple[MixtureDensityModel, Prior, Policy]:
    task = make_task("Pendulum")
    prior = Prior(space=task.param_space)
    policy = Policy()
    rng = RandomStream(seed=21, stream_id="condition")
    thetas = prior_sample(prior, rng.child("prior"), 30)
    batch = rollout_batch(task, thetas, policy, rng.child("simulate"))
    model = MixtureDensityModel(MdnnConfig(hidden_sizes=(8,), n_components=2), task.param_space)
    model.initialize(summarize_batch(batch.trajectories, spec), rng.child("init"))
    model.summarizer_id = spec.summarizer_id
    return model, prior, policy


def test_equal_prior_and_proposal_leave_base_differences_unchanged() -> None:
    space = _box((0.0, 2.0), (-1.0, 1.0))
    prior = Prior(space=space)
    base = _gaussian([1.0, 0.2], [[0.3, 0.1], [0.1, 0.2]])
    posterior = Posterior(base=base, prior=prior, proposal=prior)
    points = prior_sample(prior, RandomStream(seed=1), 100)
    logp = posterior_logpdf_unnorm_batch(posterior, points)
    base_logp = mixture_logpdf_batch(base, points)
    np.testing.assert_allclose(logp[:, None] - logp[None, :], base_logp[:, None] - base_logp[None, :], atol=1e-9)
    np.testing.assert_allclose(logp, base_logp, atol=1e-12)


def test_wider_uniform_proposal_adds_log_volume_ratio() -> None:
    prior = Prior(space=_box((0.0, 1.0), (0.0, 1.0)))
    proposal = Prior(space=_box((0.0, 2.0), (0.0, 1.0)))
    base = _gaussian([0.5, 0.5], np.eye(2) * 0.1)
    posterior = Posterior(base=base, prior=prior, proposal=proposal)
    theta = np.array([0.3, 0.8])
    expected = float(mixture_logpdf_batch(base, theta[None, :])[0]) + math.log(2.0)
    assert posterior_logpdf_unnorm(posterior, theta) == pytest.approx(expected, abs=1e-12)


def test_support_is_closed_and_truncated() -> None:
    prior = Prior(space=_box((0.0, 1.0), (0.0, 1.0)))
    posterior = Posterior(base=_gaussian([0.5, 0.5], np.eye(2)), prior=prior, proposal=prior)
    assert math.isfinite(posterior.logpdf_unnorm(np.array([1.0, 1.0])))
    assert math.isfinite(posterior.logpdf_unnorm(np.array([0.0, 0.5])))
    assert posterior.logpdf_unnorm(np.array([1.0 + 1e-9, 0.5])) == -math.inf
    with pytest.raises(ValueError):
        posterior.logpdf_unnorm(np.array([0.5]))


def test_posterior_rejects_dimension_mismatch() -> None:
    prior = Prior(space=_box((0.0, 1.0), (0.0, 1.0)))
    with pytest.raises(ValueError):
        Posterior(base=_gaussian([0.5], [[1.0]]), prior=prior, proposal=prior)


def test_posterior_sample_stays_in_support_and_replays() -> None:
    prior = Prior(space=_box((0.0, 1.0), (0.0, 1.0)))
    posterior = Posterior(base=_gaussian([0.9, 0.1], np.eye(2) * 0.2), prior=prior, proposal=prior)
    rng = RandomStream(seed=2, stream_id="posterior")
    draws = posterior_sample(posterior, rng, 500)
    assert draws.shape == (500, 2)
    assert np.all(prior.space.contains_batch(draws))
    np.testing.assert_array_equal(draws, posterior_sample(posterior, rng, 500))
    with pytest.raises(ValueError):
        posterior_sample(posterior, rng, 0)


def test_posterior_sample_raises_when_mass_escapes_support() -> None:
    prior = Prior(space=_box((0.0, 1.0)))
    posterior = Posterior(base=_gaussian([100.0], [[1e-6]]), prior=prior, proposal=prior)
    with pytest.raises(PosteriorEscapeError, match="escapes support"):
        posterior_sample(posterior, RandomStream(seed=3), 10)


def test_posterior_sample_matches_grid_normalized_density() -> None:
    prior = Prior(space=_box((0.0, 1.0)))
    posterior = Posterior(base=_gaussian([0.3], [[0.04]]), prior=prior, proposal=_gaussian([0.5], [[0.25]]))
    draws = posterior_sample(posterior, RandomStream(seed=4, stream_id="tv"), 20_000)[:, 0]

    cells = 200
    centres = (np.arange(cells) + 0.5) / cells
    density = np.exp(posterior_logpdf_unnorm_batch(posterior, centres[:, None]))
    grid_mass = (density / density.sum()).reshape(50, 4).sum(axis=1)
    counts, _ = np.histogram(draws, bins=50, range=(0.0, 1.0))
    total_variation = 0.5 * float(np.sum(np.abs(counts / draws.size - grid_mass)))
    assert total_variation < 0.05


def test_log_normalizer_counts_base_mass_inside_support() -> None:
    prior = Prior(space=_box((0.0, 10.0)))
    half = Posterior(base=_gaussian([0.0], [[1.0]]), prior=prior, proposal=prior)
    assert posterior_log_normalizer(half, RandomStream(seed=5)) == pytest.approx(math.log(0.5), abs=0.02)
    outside = Posterior(base=_gaussian([-50.0], [[1.0]]), prior=prior, proposal=prior)
    assert posterior_log_normalizer(outside, RandomStream(seed=5), n_draws=1000) == -math.inf


def test_slice_of_uniform_posterior_is_normalized_base_marginal() -> None:
    space = _box((0.0, 2.0), (-1.0, 1.0), (5.0, 6.0))
    prior = Prior(space=space)
    base = _gaussian([1.2, 0.1, 5.5], [[0.2, 0.05, 0.0], [0.05, 0.3, 0.02], [0.0, 0.02, 0.1]])
    grid = posterior_slice(Posterior(base=base, prior=prior, proposal=prior), (0, 1), grid=25)
    assert grid.values.shape == (25, 25)
    assert grid.values.sum() == pytest.approx(1.0, abs=1e-9)
    assert grid.ratio_corrected
    assert grid.names == ("p0", "p1")

    mesh_a, mesh_b = np.meshgrid(grid.axis_a, grid.axis_b, indexing="ij")
    marginal = _gaussian([1.2, 0.1], [[0.2, 0.05], [0.05, 0.3]])
    expected = np.exp(mixture_logpdf_batch(marginal, np.column_stack([mesh_a.ravel(), mesh_b.ravel()]))).reshape(25, 25)
    np.testing.assert_allclose(grid.values, expected / expected.sum(), rtol=1e-9)
    assert grid.cell_of(2.0, -1.0) == (24, 0)


def test_slice_of_centred_symmetric_base_is_symmetric() -> None:
    space = _box((-1.0, 1.0), (2.0, 4.0))
    prior = Prior(space=space)
    base = _gaussian([0.0, 3.0], [[0.3, 0.1], [0.1, 0.5]])
    grid = posterior_slice(Posterior(base=base, prior=prior, proposal=prior), (0, 1), grid=31)
    np.testing.assert_allclose(grid.values, grid.values[::-1, ::-1], rtol=1e-9, atol=0.0)


def test_slice_flags_uncorrected_marginals_and_validates_dims() -> None:
    space = _box((0.0, 1.0), (0.0, 1.0))
    prior = Prior(space=space)
    base = _gaussian([0.5, 0.5], np.eye(2) * 0.1)
    against_mixture = posterior_slice(Posterior(base=base, prior=prior, proposal=base), (0, 1))
    assert not against_mixture.ratio_corrected
    narrower = Prior(space=_box((0.2, 0.8), (0.0, 1.0)))
    assert not posterior_slice(Posterior(base=base, prior=prior, proposal=narrower), (0, 1)).ratio_corrected
    with pytest.raises(ValueError):
        posterior_slice(Posterior(base=base, prior=prior, proposal=prior), (1, 1))
    with pytest.raises(ValueError):
        posterior_slice(Posterior(base=base, prior=prior, proposal=prior), (0, 1), grid=1)


def test_condition_wraps_forward_of_real_summary() -> None:
    spec = SummarizerSpec(kind="crosscorrdiff", n_lags=5)
    model, prior, policy = _pendulum_model(spec)
    task = make_task("Pendulum")
    real = RealConfig(real_params={"mass": 1.2, "length": 0.7}, space=task.param_space)
    real_traj = real_rollout(task, real, policy, RandomStream(seed=22, stream_id="real"))

    posterior = condition(model, real_traj, spec, prior, prior)
    again = condition(model, real_traj, spec, prior, prior)
    expected = forward(model, summarize(real_traj, spec))
    np.testing.assert_array_equal(posterior.base.means, expected.means)
    np.testing.assert_array_equal(posterior.base.chol_factors, again.base.chol_factors)
    assert posterior.names == ["mass", "length"]


def test_condition_rejects_visible_params_and_summarizer_mismatch() -> None:
    spec = SummarizerSpec(kind="crosscorrdiff", n_lags=5)
    model, prior, policy = _pendulum_model(spec)
    task = make_task("Pendulum")
    real = RealConfig(real_params={"mass": 1.2, "length": 0.7}, space=task.param_space)
    hidden = real_rollout(task, real, policy, RandomStream(seed=23))
    visible = Trajectory(states=hidden.states, actions=hidden.actions, dt=hidden.dt, params=real.theta)

    with pytest.raises(ValueError, match="generating parameters"):
        condition(model, visible, spec, prior, prior)
    with pytest.raises(SummarizerMismatchError):
        condition(model, hidden, SummarizerSpec(kind="crosscorrdiff", n_lags=3), prior, prior)
    model.summarizer_id = None
    with pytest.raises(SummarizerMismatchError, match="length"):
        condition(model, hidden, SummarizerSpec(kind="crosscorrdiff", n_lags=3), prior, prior)


def test_abc_oracle_validates_budget_and_quantile() -> None:
    task = make_task("MassSpringDamper")
    prior = Prior(space=task.param_space)
    real = RealConfig(real_params={"mass": 1.3, "stiffness": 2.5, "damping": 0.3}, space=task.param_space)
    real_traj = real_rollout(task, real, Policy(), RandomStream(seed=1))
    spec = SummarizerSpec()
    with pytest.raises(ValueError, match="n_sims"):
        abc_rejection_oracle(task, prior, Policy(), real_traj, spec, RandomStream(seed=1), 999, 0.01)
    with pytest.raises(ValueError, match="quantile"):
        abc_rejection_oracle(task, prior, Policy(), real_traj, spec, RandomStream(seed=1), 1000, 0.2)


def test_abc_oracle_degenerate_quantile_returns_every_draw() -> None:
    task = make_task("Pendulum", constants={"episode_length": 20})
    prior = Prior(space=task.param_space)
    real = RealConfig(real_params={"mass": 1.2, "length": 0.7}, space=task.param_space)
    real_traj = real_rollout(task, real, Policy(), RandomStream(seed=30, stream_id="real"))
    result = abc_rejection_oracle(
        task,
        prior,
        Policy(),
        real_traj,
        SummarizerSpec(kind="waypoints", stride=5),
        RandomStream(seed=30, stream_id="oracle"),
        1000,
        1.0,
        allow_degenerate_quantile=True,
    )
    assert result.n_accepted == 1000
    assert np.all(np.diff(result.distances) >= 0.0)
    assert result.threshold == result.distances[-1]
    assert result.names == ("mass", "length")


def test_abc_oracle_recovers_stiffness_of_deterministic_spring() -> None:
    space = ParamSpace.from_bounds({"stiffness": (0.5, 5.0)})
    task = make_task("MassSpringDamper", param_space=space)
    prior = Prior(space=space)
    policy = Policy(kind="fixed", fixed_action=(0.0,))
    real = RealConfig(real_params={"stiffness": 2.5}, space=space)
    real_traj = real_rollout(task, real, policy, RandomStream(seed=40, stream_id="real"))
    result = abc_rejection_oracle(
        task,
        prior,
        policy,
        real_traj,
        SummarizerSpec(kind="waypoints", stride=10),
        RandomStream(seed=40, stream_id="oracle"),
        2000,
        0.05,
    )
    assert result.n_accepted == 100
    accepted = result.accepted[:, 0]
    low, median, high = np.percentile(accepted, [25, 50, 75])
    assert low <= 2.5 <= high
    assert abs(median - 2.5) <= high - low
