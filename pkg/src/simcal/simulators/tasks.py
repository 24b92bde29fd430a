from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from simcal.core import ParamSpace

TASK_NAMES = ("Pendulum", "Cartpole", "MassSpringDamper")


class DynamicsBlowUpError(RuntimeError):
    def __init__(self, theta: Sequence[float], t: int | None, detail: str = "") -> None:
        self.theta = tuple(float(value) for value in theta)
        self.t = t
        message = f"dynamics blow-up at t={t} for theta={list(self.theta)}"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


StepFn = Callable[[Mapping[str, float], list[float], list[float], float], list[float]]


def _pendulum_step(q: Mapping[str, float], state: list[float], action: list[float], dt: float) -> list[float]:
    angle, velocity = state
    mass, length = q["mass"], q["length"]
    accel = -(q["gravity"] / length) * math.sin(angle) + action[0] / (mass * length * length) - q["damping"] * velocity
    velocity = velocity + dt * accel
    return [angle + dt * velocity, velocity]


def _cartpole_step(q: Mapping[str, float], state: list[float], action: list[float], dt: float) -> list[float]:
    x, x_dot, angle, angle_dot = state
    cart_mass, pole_mass, length = q["cart_mass"], q["pole_mass"], q["pole_length"]
    total_mass = cart_mass + pole_mass
    pole_moment = pole_mass * length
    sin_a, cos_a = math.sin(angle), math.cos(angle)

    temp = (action[0] + pole_moment * angle_dot * angle_dot * sin_a) / total_mass
    angle_acc = (q["gravity"] * sin_a - cos_a * temp) / (length * (4.0 / 3.0 - pole_mass * cos_a * cos_a / total_mass))
    x_acc = temp - pole_moment * angle_acc * cos_a / total_mass

    x_dot = x_dot + dt * x_acc
    angle_dot = angle_dot + dt * angle_acc
    return [x + dt * x_dot, x_dot, angle + dt * angle_dot, angle_dot]


def _mass_spring_damper_step(q: Mapping[str, float], state: list[float], action: list[float], dt: float) -> list[float]:
    position, velocity = state
    accel = (action[0] - q["stiffness"] * position - q["damping"] * velocity) / q["mass"]
    velocity = velocity + dt * accel
    return [position + dt * velocity, velocity]


@dataclass(frozen=True)
class _TaskModel:
    physical: tuple[str, ...]
    nominal: Mapping[str, float]
    bounds: Mapping[str, tuple[float, float]]
    constants: Mapping[str, float]
    state_names: tuple[str, ...]
    action_names: tuple[str, ...]
    step: StepFn


_TASK_MODELS: dict[str, _TaskModel] = {
    "Pendulum": _TaskModel(
        physical=("mass", "length", "damping"),
        nominal={"mass": 1.0, "length": 1.0, "damping": 0.0},
        bounds={"mass": (0.5, 2.0), "length": (0.3, 1.5)},
        constants={"gravity": 9.81, "dt": 0.05, "episode_length": 100, "action_bound": 2.0, "init_angle_range": math.pi},
        state_names=("angle", "angular_velocity"),
        action_names=("torque",),
        step=_pendulum_step,
    ),
    "Cartpole": _TaskModel(
        physical=("cart_mass", "pole_mass", "pole_length"),
        nominal={"cart_mass": 1.0, "pole_mass": 0.1, "pole_length": 0.5},
        bounds={"cart_mass": (0.5, 2.0), "pole_mass": (0.05, 0.5), "pole_length": (0.25, 1.0)},
        constants={"gravity": 9.81, "dt": 0.05, "episode_length": 100, "action_bound": 10.0, "init_state_range": 0.05},
        state_names=("x", "x_velocity", "angle", "angular_velocity"),
        action_names=("force",),
        step=_cartpole_step,
    ),
    "MassSpringDamper": _TaskModel(
        physical=("mass", "stiffness", "damping"),
        nominal={"mass": 1.0, "stiffness": 2.0, "damping": 0.1},
        bounds={"mass": (0.5, 2.0), "stiffness": (0.5, 5.0), "damping": (0.0, 1.0)},
        constants={
            "dt": 0.05,
            "episode_length": 100,
            "action_bound": 1.0,
            "init_position": 1.0,
            "init_velocity": 0.0,
        },
        state_names=("position", "velocity"),
        action_names=("force",),
        step=_mass_spring_damper_step,
    ),
}


def _task_model(name: str) -> _TaskModel:
    try:
        return _TASK_MODELS[name]
    except KeyError as exc:
        raise ValueError(f"Unknown task: {name}. Expected one of {list(TASK_NAMES)}") from exc


@dataclass(frozen=True, eq=False)
class TaskSpec:
    """A simulator with its randomizable parameters and fixed constants.

    Physical quantities listed in ``param_space`` are read from theta; every other
    quantity the dynamics need is read from ``fixed_constants``.
    """

    name: str
    param_space: ParamSpace
    fixed_constants: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        model = _task_model(self.name)
        unknown = sorted(set(self.param_space.names) - set(model.physical))
        if unknown:
            raise ValueError(f"Task {self.name} has no randomizable parameters named {unknown}")
        overlap = sorted(set(self.param_space.names) & set(self.fixed_constants))
        if overlap:
            raise ValueError(f"Parameters {overlap} are both randomized and fixed for task {self.name}")
        required = (set(model.physical) - set(self.param_space.names)) | set(model.constants)
        missing = sorted(required - set(self.fixed_constants))
        if missing:
            raise ValueError(f"Task {self.name} is missing fixed constants: {missing}")
        if int(self.fixed_constants["episode_length"]) < 2:
            raise ValueError("episode_length must be >= 2")
        if not float(self.fixed_constants["dt"]) > 0:
            raise ValueError("dt must be positive")
        if not float(self.fixed_constants["action_bound"]) > 0:
            raise ValueError("action_bound must be positive")
        object.__setattr__(self, "fixed_constants", {key: float(value) for key, value in self.fixed_constants.items()})

    @property
    def model(self) -> _TaskModel:
        return _task_model(self.name)

    @property
    def ds(self) -> int:
        return len(self.model.state_names)

    @property
    def da(self) -> int:
        return len(self.model.action_names)

    @property
    def dt(self) -> float:
        return float(self.fixed_constants["dt"])

    @property
    def episode_length(self) -> int:
        return int(self.fixed_constants["episode_length"])

    @property
    def action_low(self) -> np.ndarray:
        return np.full(self.da, -self.fixed_constants["action_bound"])

    @property
    def action_high(self) -> np.ndarray:
        return np.full(self.da, self.fixed_constants["action_bound"])

    def quantities(self, theta: np.ndarray) -> dict[str, float]:
        resolved = dict(self.fixed_constants)
        for name, value in zip(self.param_space.names, theta):
            resolved[name] = float(value)
        return resolved

    def initial_state(self, generator: np.random.Generator) -> np.ndarray:
        if self.name == "Pendulum":
            spread = self.fixed_constants["init_angle_range"]
            return np.array([generator.uniform(-spread, spread), 0.0])
        if self.name == "Cartpole":
            spread = self.fixed_constants["init_state_range"]
            return generator.uniform(-spread, spread, size=4)
        return np.array([self.fixed_constants["init_position"], self.fixed_constants["init_velocity"]])


def default_param_space(name: str, names: Sequence[str] | None = None) -> ParamSpace:
    model = _task_model(name)
    selected = list(names) if names is not None else list(model.bounds)
    unknown = sorted(set(selected) - set(model.bounds))
    if unknown:
        raise ValueError(f"No default bounds for {name} parameters {unknown}")
    return ParamSpace.from_bounds({key: model.bounds[key] for key in selected})


def make_task(
    name: str,
    *,
    param_space: ParamSpace | None = None,
    constants: Mapping[str, float] | None = None,
) -> TaskSpec:
    model = _task_model(name)
    space = param_space or default_param_space(name)
    unknown = sorted(set(constants or {}) - set(model.constants) - set(model.physical))
    if unknown:
        raise ValueError(f"Unknown constants for task {name}: {unknown}")
    resolved: dict[str, float] = dict(model.constants)
    for quantity in model.physical:
        if quantity not in space.names:
            resolved[quantity] = model.nominal[quantity]
    for key, value in (constants or {}).items():
        if key in space.names:
            raise ValueError(f"Constant {key} is randomized for task {name}; remove it from the param space first")
        resolved[key] = float(value)
    return TaskSpec(name=name, param_space=space, fixed_constants=resolved)


def clip_action(task: TaskSpec, action: np.ndarray) -> np.ndarray:
    return np.clip(np.asarray(action, dtype=float).reshape(-1), task.action_low, task.action_high)


def step(task: TaskSpec, theta: np.ndarray, state: np.ndarray, action: np.ndarray, *, t: int | None = None) -> np.ndarray:
    """Advance one step; ``t`` is the step index reported on a blow-up."""
    vector = task.param_space.check_vector(theta)
    if not task.param_space.contains(vector):
        raise ValueError(f"theta={vector.tolist()} is outside the support of task {task.name}")
    state_vector = np.asarray(state, dtype=float).reshape(-1)
    action_vector = np.asarray(action, dtype=float).reshape(-1)
    if state_vector.shape[0] != task.ds or action_vector.shape[0] != task.da:
        raise ValueError(f"Task {task.name} expects state of length {task.ds} and action of length {task.da}")
    if not (np.all(np.isfinite(state_vector)) and np.all(np.isfinite(action_vector))):
        raise ValueError("step requires finite state and action.")
    next_state = advance(task, task.quantities(vector), state_vector.tolist(), clip_action(task, action_vector).tolist())
    if next_state is None:
        raise DynamicsBlowUpError(vector, t)
    return np.array(next_state)


def advance(task: TaskSpec, quantities: Mapping[str, float], state: list[float], action: list[float]) -> list[float] | None:
    """One semi-implicit Euler step on plain floats; ``None`` signals a blow-up."""
    try:
        next_state = task.model.step(quantities, state, action, task.dt)
    except (OverflowError, ValueError, ZeroDivisionError):
        return None
    if not all(math.isfinite(value) for value in next_state):
        return None
    return next_state
