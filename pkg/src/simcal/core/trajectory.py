from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _frozen_array(values: np.ndarray | list, *, ndim: int, name: str) -> np.ndarray:
    array = np.array(values, dtype=float)
    if array.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {array.shape}")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One simulated (or surrogate-real) episode.

    ``params`` is the parameter vector that generated the episode and is ``None``
    for the real trajectory, whose parameters are hidden from inference.
    """

    states: np.ndarray
    actions: np.ndarray
    dt: float
    params: np.ndarray | None = None

    def __post_init__(self) -> None:
        states = _frozen_array(self.states, ndim=2, name="states")
        actions = _frozen_array(self.actions, ndim=2, name="actions")
        if states.shape[0] != actions.shape[0]:
            raise ValueError(f"states and actions must share T, got {states.shape[0]} and {actions.shape[0]}")
        if states.shape[0] < 2:
            raise ValueError(f"A trajectory needs T >= 2 steps, got {states.shape[0]}")
        if not (np.all(np.isfinite(states)) and np.all(np.isfinite(actions))):
            raise ValueError("Trajectory entries must be finite.")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "actions", actions)
        if self.params is not None:
            object.__setattr__(self, "params", _frozen_array(self.params, ndim=1, name="params"))

    @property
    def T(self) -> int:
        return int(self.states.shape[0])

    @property
    def ds(self) -> int:
        return int(self.states.shape[1])

    @property
    def da(self) -> int:
        return int(self.actions.shape[1])

    def without_params(self) -> "Trajectory":
        return Trajectory(states=self.states, actions=self.actions, dt=self.dt, params=None)


@dataclass(frozen=True, eq=False)
class SummaryVector:
    values: np.ndarray
    summarizer_id: str

    def __post_init__(self) -> None:
        values = _frozen_array(self.values, ndim=1, name="summary values")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"Summary {self.summarizer_id} contains non-finite entries.")
        object.__setattr__(self, "values", values)

    @property
    def F(self) -> int:
        return int(self.values.shape[0])
