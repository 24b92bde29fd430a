from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from simcal.core import ParamSpace, RandomStream, Trajectory

from .tasks import DynamicsBlowUpError, TaskSpec, advance

logger = logging.getLogger(__name__)

POLICY_KINDS = {"random", "fixed"}
MAX_FAILURE_FRACTION = 0.10


class RolloutBatchError(RuntimeError):
    def __init__(self, failed_indices: Sequence[int], total: int) -> None:
        self.failed_indices = list(failed_indices)
        self.total = total
        preview = self.failed_indices[:10]
        super().__init__(
            f"{len(self.failed_indices)} of {total} episodes blew up (more than "
            f"{MAX_FAILURE_FRACTION:.0%}); first failed indices: {preview}"
        )


@dataclass(frozen=True)
class Policy:
    kind: str = "random"
    fixed_action: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"Unknown policy kind: {self.kind}. Expected one of {sorted(POLICY_KINDS)}")

    def validate(self, task: TaskSpec) -> None:
        if self.kind != "fixed":
            return
        action = np.asarray(self.fixed_action, dtype=float)
        if action.shape != (task.da,):
            raise ValueError(f"Fixed action for {task.name} must have length {task.da}, got {len(self.fixed_action)}")
        if np.any(action < task.action_low) or np.any(action > task.action_high):
            raise ValueError(f"Fixed action {list(self.fixed_action)} is outside the action bounds of {task.name}")

    def actions(self, task: TaskSpec, generator: np.random.Generator, T: int) -> np.ndarray:
        if self.kind == "random":
            return generator.uniform(task.action_low, task.action_high, size=(T, task.da))
        return np.tile(np.asarray(self.fixed_action, dtype=float), (T, 1))


@dataclass(frozen=True, eq=False)
class RealConfig:
    """Hidden ground-truth parameters of the surrogate-real environment."""

    real_params: Mapping[str, float]
    space: ParamSpace
    episodes: int = 1

    def __post_init__(self) -> None:
        theta = self.space.vector_from_mapping(self.real_params)
        if not self.space.contains(theta):
            outside = [
                name
                for name, value, low, high in zip(self.space.names, theta, self.space.lows, self.space.highs)
                if not low <= value <= high
            ]
            raise ValueError(f"realParams outside the prior support: {outside}")
        if self.episodes < 1:
            raise ValueError(f"episodes must be >= 1, got {self.episodes}")
        object.__setattr__(self, "real_params", {name: float(self.real_params[name]) for name in self.space.names})

    @property
    def theta(self) -> np.ndarray:
        return self.space.vector_from_mapping(self.real_params)


@dataclass(frozen=True)
class RolloutBatchResult:
    trajectories: list[Trajectory]
    kept_indices: list[int]
    failed_indices: list[int] = field(default_factory=list)
    elapsed_seconds: float = 0.0


def rollout(
    task: TaskSpec,
    theta: np.ndarray,
    policy: Policy,
    rng: RandomStream,
    T: int | None = None,
    *,
    initial_state: np.ndarray | None = None,
) -> Trajectory:
    steps = task.episode_length if T is None else int(T)
    if steps < 2:
        raise ValueError(f"Rollout length must be >= 2, got {steps}")
    vector = task.param_space.check_vector(theta)
    if not task.param_space.contains(vector):
        raise ValueError(f"theta={vector.tolist()} is outside the support of task {task.name}")
    policy.validate(task)

    generator = rng.generator()
    start = task.initial_state(generator)
    if initial_state is not None:
        start = np.asarray(initial_state, dtype=float).reshape(task.ds)
    actions = np.clip(policy.actions(task, generator, steps), task.action_low, task.action_high)

    quantities = task.quantities(vector)
    action_rows = actions.tolist()
    states = [start.tolist()]
    for t in range(steps - 1):
        next_state = advance(task, quantities, states[-1], action_rows[t])
        if next_state is None:
            raise DynamicsBlowUpError(vector, t + 1)
        states.append(next_state)
    return Trajectory(states=np.array(states), actions=actions, dt=task.dt, params=vector)


def rollout_batch(
    task: TaskSpec,
    thetas: np.ndarray,
    policy: Policy,
    base_rng: RandomStream,
    T: int | None = None,
    *,
    workers: int = 1,
) -> RolloutBatchResult:
    batch = np.atleast_2d(np.asarray(thetas, dtype=float))
    N = batch.shape[0]
    if N < 1:
        raise ValueError("rollout_batch needs at least one parameter vector.")

    def run_episode(index: int) -> Trajectory | None:
        try:
            return rollout(task, batch[index], policy, base_rng.child(f"rollout/episode/{index}"), T)
        except DynamicsBlowUpError as exc:
            logger.warning("episode=%d status=blow_up detail=%s", index, exc)
            return None

    started = time.perf_counter()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(run_episode, range(N)))
    else:
        results = [run_episode(index) for index in range(N)]
    elapsed = time.perf_counter() - started

    failed = [index for index, result in enumerate(results) if result is None]
    if len(failed) > MAX_FAILURE_FRACTION * N:
        raise RolloutBatchError(failed, N)
    kept = [index for index, result in enumerate(results) if result is not None]
    logger.info("episodes=%d failed=%d workers=%d elapsed_seconds=%.3f", N, len(failed), workers, elapsed)
    return RolloutBatchResult(
        trajectories=[results[index] for index in kept],
        kept_indices=kept,
        failed_indices=failed,
        elapsed_seconds=elapsed,
    )


def real_rollouts(
    task: TaskSpec,
    real_cfg: RealConfig,
    policy: Policy,
    rng: RandomStream,
    T: int | None = None,
) -> list[Trajectory]:
    return [real_rollout(task, real_cfg, policy, rng.child(f"episode/{episode}"), T) for episode in range(real_cfg.episodes)]


def real_rollout(
    task: TaskSpec,
    real_cfg: RealConfig,
    policy: Policy,
    rng: RandomStream,
    T: int | None = None,
) -> Trajectory:
    """Surrogate-real episode; the generating parameters are stripped from the result."""
    return rollout(task, real_cfg.theta, policy, rng, T).without_params()
