from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from simcal.core import ParamSpace

STD_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Z-scores summaries and maps every parameter box onto [-1, 1]."""

    input_mean: np.ndarray
    input_std: np.ndarray
    low: np.ndarray
    high: np.ndarray

    def __post_init__(self) -> None:
        for name in ("input_mean", "input_std", "low", "high"):
            array = np.array(getattr(self, name), dtype=float).reshape(-1)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        if self.input_mean.shape != self.input_std.shape:
            raise ValueError("Standardizer input mean/std shapes differ.")
        if np.any(self.input_std < STD_FLOOR):
            raise ValueError(f"Standardizer stds must be >= {STD_FLOOR}")
        if np.any(self.high <= self.low):
            raise ValueError("Standardizer output map needs low < high in every dimension.")

    @classmethod
    def fit(cls, summaries: np.ndarray, space: ParamSpace) -> "Standardizer":
        data = np.atleast_2d(np.asarray(summaries, dtype=float))
        if data.shape[0] < 1:
            raise ValueError("Cannot fit a standardizer on an empty dataset.")
        return cls(
            input_mean=data.mean(axis=0),
            input_std=np.maximum(data.std(axis=0), STD_FLOOR),
            low=space.lows,
            high=space.highs,
        )

    @property
    def input_dim(self) -> int:
        return int(self.input_mean.shape[0])

    @property
    def output_scale(self) -> np.ndarray:
        return (self.high - self.low) / 2.0

    @property
    def output_shift(self) -> np.ndarray:
        return (self.high + self.low) / 2.0

    @property
    def log_jacobian(self) -> float:
        """log |d unit / d theta|, added to a unit-space log-density to get raw space."""
        return float(np.sum(np.log(2.0 / (self.high - self.low))))

    def transform_inputs(self, summaries: np.ndarray) -> np.ndarray:
        data = np.asarray(summaries, dtype=float)
        if data.shape[-1] != self.input_dim:
            raise ValueError(f"Expected summaries of length {self.input_dim}, got {data.shape[-1]}")
        return (data - self.input_mean) / self.input_std

    def params_to_unit(self, thetas: np.ndarray) -> np.ndarray:
        return (np.asarray(thetas, dtype=float) - self.output_shift) / self.output_scale

    def unit_to_params(self, units: np.ndarray) -> np.ndarray:
        return np.asarray(units, dtype=float) * self.output_scale + self.output_shift
