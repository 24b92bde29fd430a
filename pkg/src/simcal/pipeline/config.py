"""Run configuration: YAML file -> validated, frozen ``RunConfig``.

Grammar (one nesting level)::

    task: Pendulum              # Pendulum | Cartpole | MassSpringDamper
    seed: 42
    logdir: runs
    n_iters: 5
    n_sims_per_iter: 2000
    episode_length: 100         # defaults to the task's own episode length
    init_mode: scratch          # scratch | finetune
    freeze_real: false
    workers: 1
    real_episodes: 1
    prior:                      # name: [low, high] or [low, high, mean, std]
      mass: [0.5, 2.0]
    real_params:
      mass: 1.2
    policy: {kind: random, fixed_action: [0.0]}
    summarizer: {kind: crosscorrdiff, n_lags: 5}
    model: {kind: MDNN, n_components: 10, hidden_sizes: [128, 128], activation: tanh}
    train: {batch_size: 256, learning_rate: 0.001, max_epochs: 500, patience: 20}
    task_constants: {dt: 0.05}
    inference: {slice_dims: [[0, 1]], slice_grid: 50, posterior_samples: 1000}
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from simcal.core import ParamSpace, Prior
from simcal.density import MODEL_KINDS, MdnnConfig, MdrffConfig, TrainConfig
from simcal.simulators import TASK_NAMES, Policy, RealConfig, TaskSpec, default_param_space, make_task
from simcal.summarizers import SummarizerSpec, summary_dim

from .settings import RuntimeSettings

logger = logging.getLogger(__name__)

RESOLVED_CONFIG_NAME = "config_resolved"

TOP_LEVEL_DEFAULTS: dict[str, Any] = {
    "task": "Pendulum",
    "seed": 42,
    "logdir": "runs",
    "n_iters": 5,
    "n_sims_per_iter": 2000,
    "episode_length": None,
    "init_mode": "scratch",
    "freeze_real": False,
    "workers": 1,
    "real_episodes": 1,
}
SECTIONS = ("prior", "real_params", "policy", "summarizer", "model", "train", "task_constants", "inference")

DEFAULT_REAL_PARAMS: dict[str, dict[str, float]] = {
    "Pendulum": {"mass": 1.2, "length": 0.7},
    "Cartpole": {"cart_mass": 1.0, "pole_mass": 0.2, "pole_length": 0.6},
    "MassSpringDamper": {"mass": 1.3, "stiffness": 2.5, "damping": 0.3},
}

_POLICY_KEYS = {"kind", "fixed_action"}
_SUMMARIZER_KEYS = {"kind", "n_steps", "stride", "depth", "time_augment", "n_lags"}
_MDNN_KEYS = {"kind", "n_components", "hidden_sizes", "activation"}
_MDRFF_KEYS = {"kind", "n_components", "n_features", "bandwidth", "kernel"}
_TRAIN_KEYS = {"batch_size", "learning_rate", "max_epochs", "patience", "validation_fraction", "grad_clip_norm"}
_INFERENCE_KEYS = {"slice_dims", "slice_grid", "posterior_samples", "normalizer_draws"}


class ConfigError(ValueError):
    def __init__(self, message: str, *, key: str | None = None, line: int | None = None) -> None:
        self.key = key
        self.line = line
        location = []
        if line is not None:
            location.append(f"line {line}")
        if key is not None:
            location.append(f"key '{key}'")
        prefix = f"config error ({', '.join(location)}): " if location else "config error: "
        super().__init__(prefix + message)


@dataclass(frozen=True)
class PriorSpec:
    kind: str = "uniform"
    bounds: tuple[tuple[str, float, float], ...] = ()
    means: tuple[float, ...] | None = None
    stds: tuple[float, ...] | None = None

    def space(self) -> ParamSpace:
        return ParamSpace.from_bounds(self.bounds)

    def build(self) -> Prior:
        return Prior(space=self.space(), kind=self.kind, means=self.means, stds=self.stds)


@dataclass(frozen=True)
class InferenceConfig:
    slice_dims: tuple[tuple[int, int], ...] = ((0, 1),)
    slice_grid: int = 50
    posterior_samples: int = 1000
    normalizer_draws: int = 20_000

    def __post_init__(self) -> None:
        if self.slice_grid < 2:
            raise ValueError(f"slice_grid must be >= 2, got {self.slice_grid}")
        if self.posterior_samples < 1:
            raise ValueError(f"posterior_samples must be >= 1, got {self.posterior_samples}")
        if self.normalizer_draws < 1:
            raise ValueError(f"normalizer_draws must be >= 1, got {self.normalizer_draws}")
        for pair in self.slice_dims:
            if len(pair) != 2 or pair[0] == pair[1]:
                raise ValueError(f"slice_dims entries must be pairs of distinct indices, got {list(pair)}")


@dataclass(frozen=True)
class RunConfig:
    task: str = "Pendulum"
    seed: int = 42
    logdir: str = "runs"
    n_iters: int = 5
    n_sims_per_iter: int = 2000
    episode_length: int = 100
    init_mode: str = "scratch"
    freeze_real: bool = False
    workers: int = 1
    real_episodes: int = 1
    prior: PriorSpec = field(default_factory=PriorSpec)
    real_params: Mapping[str, float] = field(default_factory=dict)
    policy: Policy = field(default_factory=Policy)
    summarizer: SummarizerSpec = field(default_factory=SummarizerSpec)
    model_kind: str = "MDNN"
    model: MdnnConfig | MdrffConfig = field(default_factory=MdnnConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    task_constants: Mapping[str, float] = field(default_factory=dict)
    inference: InferenceConfig = field(default_factory=InferenceConfig)

    def build_task(self) -> TaskSpec:
        constants = dict(self.task_constants)
        constants["episode_length"] = self.episode_length
        return make_task(self.task, param_space=self.prior.space(), constants=constants)

    def build_prior(self) -> Prior:
        return self.prior.build()

    def real_config(self) -> RealConfig:
        return RealConfig(real_params=self.real_params, space=self.prior.space(), episodes=self.real_episodes)

    @property
    def run_dir(self) -> Path:
        return Path(self.logdir) / run_name(self)

    def to_mapping(self) -> dict[str, Any]:
        """Plain mapping in the file grammar; parsing it back yields an equal config."""
        prior: dict[str, list[float]] = {}
        for index, (name, low, high) in enumerate(self.prior.bounds):
            entry = [low, high]
            if self.prior.kind == "truncated_gaussian" and self.prior.means and self.prior.stds:
                entry += [self.prior.means[index], self.prior.stds[index]]
            prior[name] = entry
        model = {"kind": self.model_kind, **asdict(self.model)}
        if isinstance(self.model, MdnnConfig):
            model["hidden_sizes"] = list(self.model.hidden_sizes)
        train = {key: value for key, value in asdict(self.train).items() if key != "init_mode"}
        return {
            "task": self.task,
            "seed": self.seed,
            "logdir": self.logdir,
            "n_iters": self.n_iters,
            "n_sims_per_iter": self.n_sims_per_iter,
            "episode_length": self.episode_length,
            "init_mode": self.init_mode,
            "freeze_real": self.freeze_real,
            "workers": self.workers,
            "real_episodes": self.real_episodes,
            "prior": prior,
            "real_params": dict(self.real_params),
            "policy": {"kind": self.policy.kind, "fixed_action": list(self.policy.fixed_action)},
            "summarizer": {"kind": self.summarizer.kind, **self.summarizer.params},
            "model": model,
            "train": train,
            "task_constants": dict(self.task_constants),
            "inference": {
                "slice_dims": [list(pair) for pair in self.inference.slice_dims],
                "slice_grid": self.inference.slice_grid,
                "posterior_samples": self.inference.posterior_samples,
                "normalizer_draws": self.inference.normalizer_draws,
            },
        }


def run_name(config: RunConfig) -> str:
    """``[Task]_[model]_[summarizer]_[policy]_seed[N]``."""
    return f"{config.task}_{config.model_kind}_{config.summarizer.short_name}_{config.policy.kind}_seed{config.seed}"


def _as_int(value: Any, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ConfigError(f"expected an integer, got {value!r}", key=key)
    try:
        number = float(value)
    except ValueError as exc:
        raise ConfigError(f"expected an integer, got {value!r}", key=key) from exc
    if not number.is_integer():
        raise ConfigError(f"expected an integer, got {value!r}", key=key)
    return int(number)


def _as_float(value: Any, key: str) -> float:
    if isinstance(value, bool):
        raise ConfigError(f"expected a number, got {value!r}", key=key)
    try:
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"expected a number, got {value!r}", key=key) from exc


def _as_bool(value: Any, key: str) -> bool:
    if isinstance(value, bool):
        return value
    normalized = str(value).strip().lower()
    if normalized in {"1", "true", "yes", "y", "on"}:
        return True
    if normalized in {"0", "false", "no", "n", "off"}:
        return False
    raise ConfigError(f"expected a boolean, got {value!r}", key=key)


def _section(raw: Mapping[str, Any], name: str) -> dict[str, Any]:
    value = raw.get(name)
    if value is None:
        return {}
    if not isinstance(value, Mapping):
        raise ConfigError("expected a mapping", key=name)
    return {str(key): item for key, item in value.items()}


def _reject_unknown(section: str, values: Mapping[str, Any], allowed: set[str]) -> None:
    unknown = sorted(set(values) - allowed)
    if unknown:
        raise ConfigError(f"unknown key; expected one of {sorted(allowed)}", key=f"{section}.{unknown[0]}")


def _parse_prior(task: str, values: Mapping[str, Any]) -> PriorSpec:
    if not values:
        space = default_param_space(task)
        return PriorSpec(bounds=tuple((dim.name, dim.low, dim.high) for dim in space.dims))
    bounds: list[tuple[str, float, float]] = []
    means: list[float] = []
    stds: list[float] = []
    lengths: set[int] = set()
    for name, entry in values.items():
        key = f"prior.{name}"
        if not isinstance(entry, (list, tuple)) or len(entry) not in (2, 4):
            raise ConfigError("expected [low, high] or [low, high, mean, std]", key=key)
        lengths.add(len(entry))
        numbers = [_as_float(item, key) for item in entry]
        bounds.append((name, numbers[0], numbers[1]))
        if len(numbers) == 4:
            means.append(numbers[2])
            stds.append(numbers[3])
    if len(lengths) > 1:
        raise ConfigError("mix of uniform and truncated-Gaussian entries", key="prior")
    if lengths == {4}:
        return PriorSpec(kind="truncated_gaussian", bounds=tuple(bounds), means=tuple(means), stds=tuple(stds))
    return PriorSpec(bounds=tuple(bounds))


def _parse_real_params(task: str, space: ParamSpace, values: Mapping[str, Any]) -> dict[str, float]:
    unknown = sorted(set(values) - set(space.names))
    if unknown:
        raise ConfigError("not a randomized parameter of the prior", key=f"real_params.{unknown[0]}")
    defaults = DEFAULT_REAL_PARAMS.get(task, {})
    resolved: dict[str, float] = {}
    for dim in space.dims:
        if dim.name in values:
            resolved[dim.name] = _as_float(values[dim.name], f"real_params.{dim.name}")
        elif dim.name in defaults:
            resolved[dim.name] = defaults[dim.name]
        else:
            resolved[dim.name] = 0.5 * (dim.low + dim.high)
    return resolved


def _parse_model(values: Mapping[str, Any]) -> tuple[str, MdnnConfig | MdrffConfig]:
    kind = str(values.get("kind", "MDNN")).upper()
    if kind not in MODEL_KINDS:
        raise ConfigError(f"unknown model kind {values.get('kind')!r}; expected one of {list(MODEL_KINDS)}", key="model.kind")
    # keys of the inactive model kind are accepted and ignored
    _reject_unknown("model", values, _MDNN_KEYS | _MDRFF_KEYS)
    try:
        if kind == "MDNN":
            defaults = MdnnConfig()
            hidden = values.get("hidden_sizes", list(defaults.hidden_sizes))
            if not isinstance(hidden, (list, tuple)):
                raise ConfigError("expected a list of layer sizes", key="model.hidden_sizes")
            return kind, MdnnConfig(
                hidden_sizes=tuple(_as_int(size, "model.hidden_sizes") for size in hidden),
                activation=str(values.get("activation", defaults.activation)),
                n_components=_as_int(values.get("n_components", defaults.n_components), "model.n_components"),
            )
        defaults_rff = MdrffConfig()
        bandwidth = values.get("bandwidth")
        return kind, MdrffConfig(
            n_features=_as_int(values.get("n_features", defaults_rff.n_features), "model.n_features"),
            bandwidth=None if bandwidth is None else _as_float(bandwidth, "model.bandwidth"),
            kernel=str(values.get("kernel", defaults_rff.kernel)),
            n_components=_as_int(values.get("n_components", defaults_rff.n_components), "model.n_components"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc), key="model") from exc


def _parse_train(values: Mapping[str, Any], init_mode: str) -> TrainConfig:
    _reject_unknown("train", values, _TRAIN_KEYS)
    defaults = TrainConfig()
    try:
        return TrainConfig(
            batch_size=_as_int(values.get("batch_size", defaults.batch_size), "train.batch_size"),
            learning_rate=_as_float(values.get("learning_rate", defaults.learning_rate), "train.learning_rate"),
            max_epochs=_as_int(values.get("max_epochs", defaults.max_epochs), "train.max_epochs"),
            patience=_as_int(values.get("patience", defaults.patience), "train.patience"),
            validation_fraction=_as_float(
                values.get("validation_fraction", defaults.validation_fraction), "train.validation_fraction"
            ),
            grad_clip_norm=_as_float(values.get("grad_clip_norm", defaults.grad_clip_norm), "train.grad_clip_norm"),
            init_mode=init_mode,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc), key="train") from exc


def _parse_inference(values: Mapping[str, Any], D: int) -> InferenceConfig:
    _reject_unknown("inference", values, _INFERENCE_KEYS)
    defaults = InferenceConfig()
    raw_dims = values.get("slice_dims", [list(pair) for pair in defaults.slice_dims])
    if not isinstance(raw_dims, (list, tuple)) or not all(isinstance(pair, (list, tuple)) for pair in raw_dims):
        raise ConfigError("expected a list of [dim_a, dim_b] pairs", key="inference.slice_dims")
    pairs = tuple(tuple(_as_int(index, "inference.slice_dims") for index in pair) for pair in raw_dims)
    if D < 2:
        pairs = ()
    for pair in pairs:
        if any(not 0 <= index < D for index in pair):
            raise ConfigError(f"slice dims {list(pair)} out of range for D={D}", key="inference.slice_dims")
    try:
        return InferenceConfig(
            slice_dims=pairs,
            slice_grid=_as_int(values.get("slice_grid", defaults.slice_grid), "inference.slice_grid"),
            posterior_samples=_as_int(
                values.get("posterior_samples", defaults.posterior_samples), "inference.posterior_samples"
            ),
            normalizer_draws=_as_int(values.get("normalizer_draws", defaults.normalizer_draws), "inference.normalizer_draws"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), key="inference") from exc


def build_run_config(raw: Mapping[str, Any]) -> RunConfig:
    """Validate a parsed mapping in the file grammar and fill documented defaults."""
    unknown = sorted(set(raw) - set(TOP_LEVEL_DEFAULTS) - set(SECTIONS))
    if unknown:
        raise ConfigError("unknown key", key=unknown[0])
    top = {key: raw.get(key, default) for key, default in TOP_LEVEL_DEFAULTS.items()}
    for key, default in TOP_LEVEL_DEFAULTS.items():
        if top[key] is None:
            top[key] = default

    task = str(top["task"])
    if task not in TASK_NAMES:
        raise ConfigError(f"unknown task {task!r}; expected one of {list(TASK_NAMES)}", key="task")
    init_mode = str(top["init_mode"])
    if init_mode not in ("scratch", "finetune"):
        raise ConfigError(f"unknown init_mode {init_mode!r}", key="init_mode")
    n_iters = _as_int(top["n_iters"], "n_iters")
    if n_iters < 1:
        raise ConfigError("must be >= 1", key="n_iters")
    workers = _as_int(top["workers"], "workers")
    if workers < 1:
        raise ConfigError("must be >= 1", key="workers")
    real_episodes = _as_int(top["real_episodes"], "real_episodes")
    if real_episodes < 1:
        raise ConfigError("must be >= 1", key="real_episodes")
    seed = _as_int(top["seed"], "seed")

    prior_spec = _parse_prior(task, _section(raw, "prior"))
    try:
        prior_spec.build()
    except ValueError as exc:
        raise ConfigError(str(exc), key="prior") from exc
    space = prior_spec.space()

    task_constants = {name: _as_float(value, f"task_constants.{name}") for name, value in _section(raw, "task_constants").items()}
    if top["episode_length"] is not None:
        episode_length = _as_int(top["episode_length"], "episode_length")
    elif "episode_length" in task_constants:
        episode_length = int(task_constants["episode_length"])
    else:
        episode_length = make_task(task).episode_length
    task_constants.pop("episode_length", None)

    policy_values = _section(raw, "policy")
    _reject_unknown("policy", policy_values, _POLICY_KEYS)
    summarizer_values = _section(raw, "summarizer")
    _reject_unknown("summarizer", summarizer_values, _SUMMARIZER_KEYS)
    model_kind, model = _parse_model(_section(raw, "model"))

    try:
        summarizer = SummarizerSpec(**summarizer_values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), key="summarizer") from exc

    config = RunConfig(
        task=task,
        seed=seed,
        logdir=str(top["logdir"]),
        n_iters=n_iters,
        n_sims_per_iter=_as_int(top["n_sims_per_iter"], "n_sims_per_iter"),
        episode_length=episode_length,
        init_mode=init_mode,
        freeze_real=_as_bool(top["freeze_real"], "freeze_real"),
        workers=workers,
        real_episodes=real_episodes,
        prior=prior_spec,
        real_params=_parse_real_params(task, space, _section(raw, "real_params")),
        summarizer=summarizer,
        model_kind=model_kind,
        model=model,
        train=_parse_train(_section(raw, "train"), init_mode),
        task_constants=task_constants,
        inference=_parse_inference(_section(raw, "inference"), space.D),
    )

    try:
        task_spec = config.build_task()
    except ValueError as exc:
        raise ConfigError(str(exc), key="task_constants" if task_constants else "prior") from exc

    kind = str(policy_values.get("kind", "random"))
    fixed_action = policy_values.get("fixed_action")
    if fixed_action is None:
        fixed_action = [0.0] * task_spec.da if kind == "fixed" else []
    if not isinstance(fixed_action, (list, tuple)):
        raise ConfigError("expected a list of action values", key="policy.fixed_action")
    try:
        policy = Policy(kind=kind, fixed_action=tuple(_as_float(a, "policy.fixed_action") for a in fixed_action))
        policy.validate(task_spec)
    except ValueError as exc:
        raise ConfigError(str(exc), key="policy") from exc
    config = replace(config, policy=policy)

    try:
        config.real_config()
    except ValueError as exc:
        raise ConfigError(str(exc), key="real_params") from exc
    try:
        summary_dim(config.summarizer, task_spec.ds, task_spec.da, config.episode_length)
    except ValueError as exc:
        raise ConfigError(str(exc), key="summarizer") from exc
    minimum = 10 * config.model.n_components
    if config.n_sims_per_iter < minimum:
        raise ConfigError(f"must be >= 10 * n_components = {minimum}", key="n_sims_per_iter")
    return config


def _apply_overrides(raw: dict[str, Any], overrides: Mapping[str, Any]) -> None:
    for dotted, value in overrides.items():
        if value is None:
            continue
        section, _, key = dotted.partition(".")
        if not key:
            raw[section] = value
            continue
        target = raw.get(section)
        if target is None:
            target = {}
        if not isinstance(target, Mapping):
            raise ConfigError("expected a mapping", key=section)
        target = dict(target)
        target[key] = value
        raw[section] = target


def load_raw_config(path: str | Path | None) -> dict[str, Any]:
    if path is None:
        return {}
    config_path = Path(path)
    if not config_path.exists():
        raise FileNotFoundError(f"Config file not found: {config_path}")
    text = config_path.read_text(encoding="utf-8")
    try:
        loaded = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"could not parse {config_path}: {getattr(exc, 'problem', exc)}", line=line) from exc
    if loaded is None:
        return {}
    if not isinstance(loaded, Mapping):
        raise ConfigError(f"top level of {config_path} must be a mapping")
    return {str(key): value for key, value in loaded.items()}


def write_resolved_config(config: RunConfig) -> Path:
    target = config.run_dir / RESOLVED_CONFIG_NAME
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(yaml.safe_dump(config.to_mapping(), sort_keys=False), encoding="utf-8")
    return target


def parse_config(
    path: str | Path | None,
    overrides: Mapping[str, Any] | None = None,
    *,
    settings: RuntimeSettings | None = None,
    echo: bool = True,
) -> RunConfig:
    """Defaults < config file < runtime settings < ``overrides`` (dotted keys, e.g. ``model.kind``)."""
    raw = load_raw_config(path)
    if settings is not None:
        _apply_overrides(raw, settings.config_overrides())
    _apply_overrides(raw, overrides or {})
    config = build_run_config(raw)
    if echo:
        written = write_resolved_config(config)
        logger.info("config resolved run_name=%s path=%s", run_name(config), written)
    return config
