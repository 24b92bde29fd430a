from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from simcal.core import RandomStream

from .networks import MixtureDensityModel, NonFiniteLossError

logger = logging.getLogger(__name__)

INIT_MODES = ("scratch", "finetune")
EVAL_CHUNK = 1024
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 256
    learning_rate: float = 1e-3
    max_epochs: int = 500
    patience: int = 20
    validation_fraction: float = 0.1
    grad_clip_norm: float = 10.0
    init_mode: str = "scratch"

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.patience < 0:
            raise ValueError(f"patience must be >= 0, got {self.patience}")
        if not 0.0 < self.validation_fraction < 0.5:
            raise ValueError(f"validation_fraction must be in (0, 0.5), got {self.validation_fraction}")
        if not self.grad_clip_norm > 0:
            raise ValueError(f"grad_clip_norm must be positive, got {self.grad_clip_norm}")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"Unknown init_mode: {self.init_mode}. Expected one of {list(INIT_MODES)}")


@dataclass(frozen=True)
class TrainReport:
    train_nll: list[float] = field(default_factory=list)
    val_nll: list[float] = field(default_factory=list)
    initial_train_nll: float = math.nan
    initial_val_nll: float = math.nan
    best_epoch: int = -1
    stopped_early: bool = False
    n_train: int = 0
    n_val: int = 0
    skipped_batches: int = 0
    skipped_per_epoch: list[int] = field(default_factory=list)

    @property
    def epochs_run(self) -> int:
        return len(self.val_nll)

    @property
    def best_val_nll(self) -> float:
        return self.val_nll[self.best_epoch] if self.best_epoch >= 0 else self.initial_val_nll

    @property
    def final_train_nll(self) -> float:
        return self.train_nll[self.best_epoch] if self.best_epoch >= 0 else self.initial_train_nll


@dataclass(frozen=True)
class TrainResult:
    model: MixtureDensityModel
    report: TrainReport


def _mean_nll(model: MixtureDensityModel, inputs: np.ndarray, units: np.ndarray) -> float:
    total = 0.0
    for start in range(0, inputs.shape[0], EVAL_CHUNK):
        chunk = slice(start, start + EVAL_CHUNK)
        try:
            loss, _ = model.nll_and_grad(inputs[chunk], units[chunk], compute_grad=False)
        except NonFiniteLossError:
            return math.nan
        total += loss * inputs[chunk].shape[0]
    return total / inputs.shape[0]


def _clip(grads: dict[str, np.ndarray], max_norm: float) -> dict[str, np.ndarray]:
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if norm <= max_norm:
        return grads
    scale = max_norm / norm
    return {name: g * scale for name, g in grads.items()}


class _Adam:
    def __init__(self, params: dict[str, np.ndarray], learning_rate: float) -> None:
        self.learning_rate = learning_rate
        self.step_count = 0
        self.first = {name: np.zeros_like(value) for name, value in params.items()}
        self.second = {name: np.zeros_like(value) for name, value in params.items()}

    def update(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.step_count += 1
        correction1 = 1.0 - ADAM_BETA1**self.step_count
        correction2 = 1.0 - ADAM_BETA2**self.step_count
        for name, grad in grads.items():
            self.first[name] = ADAM_BETA1 * self.first[name] + (1.0 - ADAM_BETA1) * grad
            self.second[name] = ADAM_BETA2 * self.second[name] + (1.0 - ADAM_BETA2) * grad * grad
            step = self.learning_rate * (self.first[name] / correction1) / (
                np.sqrt(self.second[name] / correction2) + ADAM_EPS
            )
            params[name] -= step


def train(
    model: MixtureDensityModel,
    summaries: np.ndarray,
    thetas: np.ndarray,
    config: TrainConfig | None = None,
    *,
    rng: RandomStream,
) -> TrainResult:
    """Fit ``model`` to (summary, theta) pairs; the input model is left untouched.

    Returns the parameters of the epoch with the lowest validation NLL.
    """
    active = config or TrainConfig()
    summaries = np.atleast_2d(np.asarray(summaries, dtype=float))
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    n_total = summaries.shape[0]
    if thetas.shape[0] != n_total:
        raise ValueError(f"Dataset size mismatch: {n_total} summaries vs {thetas.shape[0]} parameter rows")
    minimum = 10 * model.config.n_components
    if n_total < minimum:
        raise ValueError(f"Training needs at least 10*K={minimum} examples, got {n_total}")

    working = model.copy()
    if active.init_mode == "scratch" or not working.fitted:
        working.initialize(summaries, rng.child("init"))
    elif working.input_dim != summaries.shape[1]:
        raise ValueError(f"Finetuning a model with input_dim={working.input_dim} on summaries of length {summaries.shape[1]}")

    standardizer = working.standardizer
    assert standardizer is not None
    inputs = standardizer.transform_inputs(summaries)
    units = standardizer.params_to_unit(thetas)

    order = rng.child("split").generator().permutation(n_total)
    n_val = max(1, int(round(n_total * active.validation_fraction)))
    val_idx, train_idx = order[:n_val], order[n_val:]
    if train_idx.size == 0:
        raise ValueError("Validation split leaves no training examples.")

    initial_train = _mean_nll(working, inputs[train_idx], units[train_idx])
    initial_val = _mean_nll(working, inputs[val_idx], units[val_idx])
    logger.info(
        "train start kind=%s n_train=%d n_val=%d init_mode=%s initial_val_nll=%.6g",
        working.kind,
        train_idx.size,
        n_val,
        active.init_mode,
        initial_val,
    )

    optimizer = _Adam(working.params, active.learning_rate)
    shuffler = rng.child("shuffle").generator()
    train_history: list[float] = []
    val_history: list[float] = []
    best_val = math.inf
    best_epoch = -1
    best_params = {name: value.copy() for name, value in working.params.items()}
    stale_epochs = 0
    stopped_early = False
    skipped = 0
    skipped_history: list[int] = []

    for epoch in range(active.max_epochs):
        epoch_order = shuffler.permutation(train_idx)
        finite_batches = 0
        n_batches = 0
        for start in range(0, epoch_order.size, active.batch_size):
            batch = epoch_order[start : start + active.batch_size]
            n_batches += 1
            try:
                _, grads = working.nll_and_grad(inputs[batch], units[batch])
            except NonFiniteLossError as exc:
                skipped += 1
                logger.warning("skipping batch epoch=%d batch_start=%d reason=%s", epoch, start, exc)
                continue
            finite_batches += 1
            optimizer.update(working.params, _clip(grads, active.grad_clip_norm))
        skipped_history.append(n_batches - finite_batches)
        if finite_batches == 0:
            raise TrainingDivergedError(f"every batch in epoch {epoch} produced a non-finite loss ({n_batches} batches)")

        train_nll = _mean_nll(working, inputs[train_idx], units[train_idx])
        val_nll = _mean_nll(working, inputs[val_idx], units[val_idx])
        train_history.append(train_nll)
        val_history.append(val_nll)
        logger.debug("epoch=%d train_nll=%.6g val_nll=%.6g", epoch, train_nll, val_nll)

        if math.isfinite(val_nll) and val_nll < best_val:
            best_val = val_nll
            best_epoch = epoch
            best_params = {name: value.copy() for name, value in working.params.items()}
            stale_epochs = 0
        else:
            stale_epochs += 1
            if stale_epochs > active.patience:
                stopped_early = True
                break

    if best_epoch < 0:
        raise TrainingDivergedError("validation NLL never became finite during training")
    working.params = best_params

    report = TrainReport(
        train_nll=train_history,
        val_nll=val_history,
        initial_train_nll=initial_train,
        initial_val_nll=initial_val,
        best_epoch=best_epoch,
        stopped_early=stopped_early,
        n_train=int(train_idx.size),
        n_val=int(n_val),
        skipped_batches=skipped,
        skipped_per_epoch=skipped_history,
    )
    logger.info(
        "train done epochs=%d best_epoch=%d best_val_nll=%.6g stopped_early=%s skipped_batches=%d",
        report.epochs_run,
        best_epoch,
        report.best_val_nll,
        stopped_early,
        skipped,
    )
    return TrainResult(model=working, report=report)
