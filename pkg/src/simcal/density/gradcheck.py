from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from simcal.core import RandomStream

from .networks import MixtureDensityModel

MAX_CHECK_PARAMETERS = 2000
MAX_CHECK_BATCH = 8


@dataclass(frozen=True)
class GradCheckReport:
    max_relative_error: float
    checked: int
    worst_parameter: str
    baseline_loss: float
    restored_loss: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.tolerance


def _relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric))


def grad_check(
    model: MixtureDensityModel,
    summaries: np.ndarray,
    thetas: np.ndarray,
    *,
    rng: RandomStream,
    n_checks: int = 100,
    step: float = 1e-5,
    tolerance: float = 1e-4,
) -> GradCheckReport:
    """Compare backprop gradients with central differences on random parameter entries."""
    if model.n_parameters > MAX_CHECK_PARAMETERS:
        raise ValueError(f"grad_check is limited to models with <= {MAX_CHECK_PARAMETERS} parameters")
    standardizer = model.standardizer
    if standardizer is None:
        raise RuntimeError("Model is not initialized: the standardizer has not been fitted.")
    inputs = standardizer.transform_inputs(np.atleast_2d(summaries))
    units = standardizer.params_to_unit(np.atleast_2d(thetas))
    if inputs.shape[0] > MAX_CHECK_BATCH:
        raise ValueError(f"grad_check uses batches of at most {MAX_CHECK_BATCH} examples")

    baseline, grads = model.nll_and_grad(inputs, units)
    locations = [(name, index) for name in model.parameter_names for index in range(model.params[name].size)]
    picks = rng.generator().choice(len(locations), size=min(n_checks, len(locations)), replace=False)

    worst_error = 0.0
    worst_name = ""
    for pick in picks:
        name, index = locations[int(pick)]
        target = model.params[name]
        original = float(target.flat[index])
        target.flat[index] = original + step
        plus, _ = model.nll_and_grad(inputs, units, compute_grad=False)
        target.flat[index] = original - step
        minus, _ = model.nll_and_grad(inputs, units, compute_grad=False)
        target.flat[index] = original
        numeric = (plus - minus) / (2.0 * step)
        error = _relative_error(float(grads[name].reshape(-1)[index]), numeric)
        if error > worst_error:
            worst_error = error
            worst_name = f"{name}[{index}]"

    restored, _ = model.nll_and_grad(inputs, units, compute_grad=False)
    return GradCheckReport(
        max_relative_error=worst_error,
        checked=int(picks.size),
        worst_parameter=worst_name,
        baseline_loss=baseline,
        restored_loss=restored,
        tolerance=tolerance,
    )
