"""Conditional mixture density models with hand-written backpropagation.

Both model kinds share the same full-covariance mixture head; they differ in
the trunk that embeds the standardized summary:

* MDNN  - a multilayer perceptron (tanh or relu),
* MDRFF - a frozen random Fourier feature map approximating an RBF kernel.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist
from scipy.special import expit, logsumexp

from simcal.core import CHOL_DIAG_FLOOR, GaussianMixtureDensity, ParamSpace, RandomStream, SummaryVector

from .standardizer import Standardizer

ACTIVATIONS = {"tanh", "relu"}
MODEL_KINDS = ("MDNN", "MDRFF")
INITIAL_COMPONENT_SCALE = 0.5
MEDIAN_HEURISTIC_SAMPLES = 1000
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class NonFiniteLossError(RuntimeError):
    def __init__(self, batch_index: int) -> None:
        self.batch_index = batch_index
        super().__init__(f"non-finite negative log-likelihood at batch index {batch_index}")


@dataclass(frozen=True)
class MdnnConfig:
    hidden_sizes: tuple[int, ...] = (128, 128)
    activation: str = "tanh"
    n_components: int = 10

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_sizes", tuple(int(size) for size in self.hidden_sizes))
        if not self.hidden_sizes or any(size < 1 for size in self.hidden_sizes):
            raise ValueError(f"hidden_sizes must be a non-empty list of positive ints, got {self.hidden_sizes}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"Unknown activation: {self.activation}. Expected one of {sorted(ACTIVATIONS)}")
        if self.n_components < 1:
            raise ValueError(f"n_components must be >= 1, got {self.n_components}")


@dataclass(frozen=True)
class MdrffConfig:
    n_features: int = 512
    bandwidth: float | None = None
    kernel: str = "rbf"
    n_components: int = 10

    def __post_init__(self) -> None:
        if self.n_features < 1:
            raise ValueError(f"n_features must be >= 1, got {self.n_features}")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.kernel != "rbf":
            raise ValueError(f"Unsupported kernel: {self.kernel}")
        if self.n_components < 1:
            raise ValueError(f"n_components must be >= 1, got {self.n_components}")


def rff_features(x: np.ndarray, omega: np.ndarray, phase: np.ndarray) -> np.ndarray:
    """sqrt(2/R) * cos(omega @ x + phase); rows of a 2-D ``x`` are mapped independently."""
    n_features = omega.shape[0]
    return math.sqrt(2.0 / n_features) * np.cos(np.asarray(x, dtype=float) @ omega.T + phase)


def median_heuristic(points: np.ndarray) -> float:
    distances = pdist(np.atleast_2d(points)[:MEDIAN_HEURISTIC_SAMPLES])
    distances = distances[distances > 0]
    if distances.size == 0:
        return 1.0
    return float(np.median(distances))


def _softplus(values: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, values)


def _glorot(generator: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return generator.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass(frozen=True)
class HeadLayout:
    K: int
    D: int

    @property
    def n_offdiag(self) -> int:
        return self.D * (self.D - 1) // 2

    @property
    def size(self) -> int:
        return self.K + 2 * self.K * self.D + self.K * self.n_offdiag

    def split(self, outputs: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        B, K, D = outputs.shape[0], self.K, self.D
        logits = outputs[:, :K]
        means = outputs[:, K : K + K * D].reshape(B, K, D)
        raw_diag = outputs[:, K + K * D : K + 2 * K * D].reshape(B, K, D)
        offdiag = outputs[:, K + 2 * K * D :].reshape(B, K, self.n_offdiag)
        return logits, means, raw_diag, offdiag

    def cholesky(self, raw_diag: np.ndarray, offdiag: np.ndarray) -> np.ndarray:
        B = raw_diag.shape[0]
        chol = np.zeros((B, self.K, self.D, self.D))
        diag = np.arange(self.D)
        chol[:, :, diag, diag] = _softplus(raw_diag) + CHOL_DIAG_FLOOR
        rows, cols = np.tril_indices(self.D, k=-1)
        chol[:, :, rows, cols] = offdiag
        return chol


@dataclass
class _Cache:
    activations: list[np.ndarray]
    features: np.ndarray


class MixtureDensityModel:
    """q(theta | summary): trunk -> linear head -> full-covariance Gaussian mixture.

    The mixture lives in the standardized parameter space ([-1, 1] per dimension);
    ``forward`` maps it back to raw parameter units.
    """

    def __init__(self, config: MdnnConfig | MdrffConfig, space: ParamSpace) -> None:
        self.config = config
        self.space = space
        self.layout = HeadLayout(K=config.n_components, D=space.D)
        self.standardizer: Standardizer | None = None
        self.params: dict[str, np.ndarray] = {}
        self.frozen: dict[str, np.ndarray] = {}
        self.summarizer_id: str | None = None

    @property
    def kind(self) -> str:
        return "MDNN" if isinstance(self.config, MdnnConfig) else "MDRFF"

    @property
    def fitted(self) -> bool:
        return self.standardizer is not None and bool(self.params)

    @property
    def input_dim(self) -> int:
        if self.standardizer is None:
            raise RuntimeError("Model standardizer is not fitted.")
        return self.standardizer.input_dim

    @property
    def parameter_names(self) -> list[str]:
        return list(self.params)

    @property
    def n_parameters(self) -> int:
        return int(sum(value.size for value in self.params.values()))

    def copy(self) -> "MixtureDensityModel":
        return copy.deepcopy(self)

    def initialize(self, summaries: np.ndarray, rng: RandomStream) -> None:
        """Fit the standardizer to ``summaries`` and draw fresh weights."""
        self.standardizer = Standardizer.fit(summaries, self.space)
        generator = rng.generator()
        inputs = self.standardizer.transform_inputs(np.atleast_2d(summaries))
        self.params = {}
        self.frozen = {}

        if isinstance(self.config, MdnnConfig):
            width = self.input_dim
            for index, size in enumerate(self.config.hidden_sizes):
                self.params[f"hidden_{index}_weight"] = _glorot(generator, width, size)
                self.params[f"hidden_{index}_bias"] = np.zeros(size)
                width = size
        else:
            bandwidth = self.config.bandwidth or median_heuristic(inputs)
            self.frozen["rff_omega"] = generator.standard_normal((self.config.n_features, self.input_dim)) / bandwidth
            self.frozen["rff_phase"] = generator.uniform(0.0, 2.0 * math.pi, size=self.config.n_features)
            self.frozen["rff_bandwidth"] = np.array([bandwidth])
            width = self.config.n_features

        K, D = self.layout.K, self.layout.D
        head_weight = 0.1 * _glorot(generator, width, self.layout.size)
        head_weight[:, :K] = 0.0
        head_bias = np.zeros(self.layout.size)
        head_bias[K : K + K * D] = generator.uniform(-0.5, 0.5, size=K * D)
        head_bias[K + K * D : K + 2 * K * D] = math.log(math.expm1(INITIAL_COMPONENT_SCALE - CHOL_DIAG_FLOOR))
        self.params["head_weight"] = head_weight
        self.params["head_bias"] = head_bias

    def _require_fitted(self) -> Standardizer:
        if not self.fitted or self.standardizer is None:
            raise RuntimeError("Model is not initialized: the standardizer has not been fitted.")
        return self.standardizer

    def _trunk(self, inputs: np.ndarray) -> _Cache:
        if isinstance(self.config, MdrffConfig):
            features = rff_features(inputs, self.frozen["rff_omega"], self.frozen["rff_phase"])
            return _Cache(activations=[inputs], features=features)
        activations = [inputs]
        hidden = inputs
        for index in range(len(self.config.hidden_sizes)):
            pre = hidden @ self.params[f"hidden_{index}_weight"] + self.params[f"hidden_{index}_bias"]
            hidden = np.tanh(pre) if self.config.activation == "tanh" else np.maximum(pre, 0.0)
            activations.append(hidden)
        return _Cache(activations=activations, features=hidden)

    def head_outputs(self, inputs: np.ndarray) -> tuple[np.ndarray, _Cache]:
        cache = self._trunk(np.atleast_2d(inputs))
        return cache.features @ self.params["head_weight"] + self.params["head_bias"], cache

    def mixture_standardized(self, summary: SummaryVector | np.ndarray) -> GaussianMixtureDensity:
        standardizer = self._require_fitted()
        values = summary.values if isinstance(summary, SummaryVector) else np.asarray(summary, dtype=float)
        if values.ndim != 1 or values.shape[0] != standardizer.input_dim:
            raise ValueError(f"Expected a summary of length {standardizer.input_dim}, got shape {values.shape}")
        outputs, _ = self.head_outputs(standardizer.transform_inputs(values)[None, :])
        logits, means, raw_diag, offdiag = self.layout.split(outputs)
        weights = np.exp(logits[0] - logsumexp(logits[0]))
        return GaussianMixtureDensity.from_params(weights, means[0], self.layout.cholesky(raw_diag, offdiag)[0])

    def forward(self, summary: SummaryVector | np.ndarray) -> GaussianMixtureDensity:
        standardizer = self._require_fitted()
        return self.mixture_standardized(summary).affine(standardizer.output_scale, standardizer.output_shift)

    def nll_and_grad(
        self,
        inputs: np.ndarray,
        units: np.ndarray,
        *,
        compute_grad: bool = True,
    ) -> tuple[float, dict[str, np.ndarray]]:
        """Mean negative log-likelihood of standardized targets and its gradient."""
        B = inputs.shape[0]
        if B < 1:
            raise ValueError("nll needs a non-empty batch.")
        layout = self.layout
        outputs, cache = self.head_outputs(inputs)
        logits, means, raw_diag, offdiag = layout.split(outputs)
        chol = layout.cholesky(raw_diag, offdiag)

        log_weights = logits - logsumexp(logits, axis=1, keepdims=True)
        residual = units[:, None, :] - means
        whitened = np.linalg.solve(chol, residual[..., None])[..., 0]
        log_diag = np.log(np.diagonal(chol, axis1=2, axis2=3))
        component = -0.5 * np.sum(whitened**2, axis=2) - np.sum(log_diag, axis=2) - layout.D * HALF_LOG_2PI
        joint = log_weights + component
        log_likelihood = logsumexp(joint, axis=1)
        bad = np.flatnonzero(~np.isfinite(log_likelihood))
        if bad.size:
            raise NonFiniteLossError(int(bad[0]))
        loss = -float(np.mean(log_likelihood))
        if not compute_grad:
            return loss, {}

        responsibility = np.exp(joint - log_likelihood[:, None])
        coefficient = -responsibility / B
        solved = np.linalg.solve(np.swapaxes(chol, 2, 3), whitened[..., None])[..., 0]
        outer = solved[..., :, None] * whitened[..., None, :]
        diag = np.arange(layout.D)
        rows, cols = np.tril_indices(layout.D, k=-1)

        grad_logits = (np.exp(log_weights) - responsibility) / B
        grad_means = coefficient[..., None] * solved
        grad_diag = coefficient[..., None] * (outer[..., diag, diag] - 1.0 / chol[..., diag, diag]) * expit(raw_diag)
        grad_offdiag = coefficient[..., None] * outer[..., rows, cols]
        grad_outputs = np.concatenate(
            [
                grad_logits,
                grad_means.reshape(B, -1),
                grad_diag.reshape(B, -1),
                grad_offdiag.reshape(B, -1),
            ],
            axis=1,
        )
        return loss, self._backward(grad_outputs, cache)

    def _backward(self, grad_outputs: np.ndarray, cache: _Cache) -> dict[str, np.ndarray]:
        grads = {
            "head_weight": cache.features.T @ grad_outputs,
            "head_bias": grad_outputs.sum(axis=0),
        }
        if isinstance(self.config, MdrffConfig):
            return grads
        upstream = grad_outputs @ self.params["head_weight"].T
        for index in reversed(range(len(self.config.hidden_sizes))):
            hidden = cache.activations[index + 1]
            if self.config.activation == "tanh":
                local = upstream * (1.0 - hidden**2)
            else:
                local = upstream * (hidden > 0.0)
            grads[f"hidden_{index}_weight"] = cache.activations[index].T @ local
            grads[f"hidden_{index}_bias"] = local.sum(axis=0)
            upstream = local @ self.params[f"hidden_{index}_weight"].T
        return {name: grads[name] for name in self.params}


def build_model(kind: str, config: MdnnConfig | MdrffConfig, space: ParamSpace) -> MixtureDensityModel:
    if kind not in MODEL_KINDS:
        raise ValueError(f"Unknown model kind: {kind}. Expected one of {list(MODEL_KINDS)}")
    expected = MdnnConfig if kind == "MDNN" else MdrffConfig
    if not isinstance(config, expected):
        raise ValueError(f"Model kind {kind} needs a {expected.__name__}, got {type(config).__name__}")
    return MixtureDensityModel(config, space)


def forward(model: MixtureDensityModel, summary: SummaryVector | np.ndarray) -> GaussianMixtureDensity:
    return model.forward(summary)


def nll_loss(model: MixtureDensityModel, summaries: np.ndarray, thetas: np.ndarray) -> float:
    standardizer = model._require_fitted()
    inputs = standardizer.transform_inputs(np.atleast_2d(summaries))
    units = standardizer.params_to_unit(np.atleast_2d(thetas))
    if inputs.shape[0] != units.shape[0]:
        raise ValueError(f"Batch size mismatch: {inputs.shape[0]} summaries vs {units.shape[0]} parameter rows")
    loss, _ = model.nll_and_grad(inputs, units, compute_grad=False)
    return loss
