from .rollout import (
    Policy,
    RealConfig,
    RolloutBatchError,
    RolloutBatchResult,
    real_rollout,
    real_rollouts,
    rollout,
    rollout_batch,
)
from .tasks import TASK_NAMES, DynamicsBlowUpError, TaskSpec, default_param_space, make_task, step

__all__ = [
    "TASK_NAMES",
    "DynamicsBlowUpError",
    "Policy",
    "RealConfig",
    "RolloutBatchError",
    "RolloutBatchResult",
    "TaskSpec",
    "default_param_space",
    "make_task",
    "real_rollout",
    "real_rollouts",
    "rollout",
    "rollout_batch",
    "step",
]
