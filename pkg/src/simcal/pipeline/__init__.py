from .artifacts import (
    IterationRecord,
    read_dataset,
    read_iteration_records,
    read_posterior_samples,
    read_posterior_slice,
    write_dataset,
    write_posterior_samples,
    write_posterior_slice,
    write_real_trajectories,
    write_run_report,
    write_scalars,
    write_timings,
)
from .config import (
    ConfigError,
    InferenceConfig,
    PriorSpec,
    RunConfig,
    build_run_config,
    load_raw_config,
    parse_config,
    run_name,
    write_resolved_config,
)
from .runner import PipelineStageError, RunResult, run, surrogate_real_trajectories, surrogate_real_trajectory
from .settings import RuntimeSettings

__all__ = [
    "ConfigError",
    "InferenceConfig",
    "IterationRecord",
    "PipelineStageError",
    "PriorSpec",
    "RunConfig",
    "RunResult",
    "RuntimeSettings",
    "build_run_config",
    "load_raw_config",
    "parse_config",
    "read_dataset",
    "read_iteration_records",
    "read_posterior_samples",
    "read_posterior_slice",
    "run",
    "run_name",
    "surrogate_real_trajectories",
    "surrogate_real_trajectory",
    "write_dataset",
    "write_posterior_samples",
    "write_posterior_slice",
    "write_real_trajectories",
    "write_resolved_config",
    "write_run_report",
    "write_scalars",
    "write_timings",
]
