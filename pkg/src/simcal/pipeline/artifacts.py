from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import pandas as pd

from simcal.core import Trajectory
from simcal.inference import SliceGrid
from simcal.simulators import TaskSpec

UTC = timezone.utc
FLOAT_FORMAT = "%.17g"
SCALARS_FILE = "scalars.csv"
TIMINGS_FILE = "timings.csv"
REPORT_FILE = "run_report.json"
STAGES = ("sample", "simulate", "summarize", "train", "condition", "emit")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    n_simulations: int
    n_failed: int
    epochs_run: int
    best_epoch: int
    train_nll: float
    val_nll: float
    posterior_mean: tuple[float, ...]
    posterior_std: tuple[float, ...]
    logpdf_at_truth: float
    log_normalizer: float
    skipped_batches: int = 0
    stage_seconds: dict[str, float] = field(default_factory=dict)


def posterior_samples_path(run_dir: Path, iteration: int) -> Path:
    return run_dir / f"posterior_samples_iter{iteration}.csv"


def posterior_slice_path(run_dir: Path, iteration: int, dims: tuple[int, int]) -> Path:
    return run_dir / f"posterior_slice_iter{iteration}_{dims[0]}_{dims[1]}.csv"


def checkpoint_path(run_dir: Path, iteration: int) -> Path:
    return run_dir / f"model_iter{iteration}.ckpt"


def dataset_path(run_dir: Path, iteration: int) -> Path:
    return run_dir / f"dataset_iter{iteration}.parquet"


def real_trajectories_path(run_dir: Path, iteration: int) -> Path:
    return run_dir / f"real_trajectories_iter{iteration}.parquet"


def _to_csv(frame: pd.DataFrame, path: Path, **kwargs: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", **kwargs)
    return path


def _read_csv(path: Path, **kwargs: Any) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip", **kwargs)


def write_posterior_samples(samples: np.ndarray, names: Sequence[str], path: Path) -> Path:
    return _to_csv(pd.DataFrame(np.atleast_2d(samples), columns=list(names)), path)


def read_posterior_samples(path: Path) -> pd.DataFrame:
    return _read_csv(path)


def write_posterior_slice(grid: SliceGrid, path: Path) -> Path:
    """Line 1: the two parameter names; line 2: low_a, high_a, low_b, high_b; then the G x G grid."""
    path.parent.mkdir(parents=True, exist_ok=True)
    bounds = [grid.axis_a[0], grid.axis_a[-1], grid.axis_b[0], grid.axis_b[-1]]
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write(f"{grid.names[0]},{grid.names[1]}\n")
        handle.write(",".join(FLOAT_FORMAT % value for value in bounds) + "\n")
        pd.DataFrame(grid.values).to_csv(
            handle, index=False, header=False, float_format=FLOAT_FORMAT, lineterminator="\n"
        )
    return path


def read_posterior_slice(path: Path) -> tuple[tuple[str, str], tuple[float, float, float, float], np.ndarray]:
    with path.open("r", encoding="utf-8") as handle:
        names = tuple(handle.readline().strip().split(","))
        bounds = tuple(float(value) for value in handle.readline().strip().split(","))
    values = _read_csv(path, skiprows=2, header=None).to_numpy(dtype=float)
    return (names[0], names[1]), (bounds[0], bounds[1], bounds[2], bounds[3]), values


def _scalars_frame(records: Sequence[IterationRecord], names: Sequence[str]) -> pd.DataFrame:
    rows = []
    for record in records:
        row: dict[str, Any] = {
            "iteration": record.iteration,
            "n_simulations": record.n_simulations,
            "n_failed": record.n_failed,
            "epochs_run": record.epochs_run,
            "best_epoch": record.best_epoch,
            "skipped_batches": record.skipped_batches,
            "train_nll": record.train_nll,
            "val_nll": record.val_nll,
            "logpdf_at_truth": record.logpdf_at_truth,
            "log_normalizer": record.log_normalizer,
        }
        row.update({f"mean_{name}": value for name, value in zip(names, record.posterior_mean)})
        row.update({f"std_{name}": value for name, value in zip(names, record.posterior_std)})
        rows.append(row)
    return pd.DataFrame(rows)


def write_scalars(records: Sequence[IterationRecord], names: Sequence[str], run_dir: Path) -> Path:
    return _to_csv(_scalars_frame(records, names), run_dir / SCALARS_FILE)


def write_timings(records: Sequence[IterationRecord], run_dir: Path) -> Path:
    rows = []
    for record in records:
        row: dict[str, Any] = {"iteration": record.iteration}
        row.update({stage: record.stage_seconds.get(stage, 0.0) for stage in STAGES})
        rows.append(row)
    return _to_csv(pd.DataFrame(rows), run_dir / TIMINGS_FILE)


def read_iteration_records(run_dir: Path) -> list[IterationRecord]:
    scalars = _read_csv(run_dir / SCALARS_FILE)
    timings_path = run_dir / TIMINGS_FILE
    timings = _read_csv(timings_path).set_index("iteration") if timings_path.exists() else None
    names = [column[len("mean_") :] for column in scalars.columns if column.startswith("mean_")]

    records = []
    for row in scalars.to_dict(orient="records"):
        iteration = int(row["iteration"])
        stage_seconds: dict[str, float] = {}
        if timings is not None and iteration in timings.index:
            stage_seconds = {stage: float(timings.loc[iteration, stage]) for stage in STAGES if stage in timings.columns}
        records.append(
            IterationRecord(
                iteration=iteration,
                n_simulations=int(row["n_simulations"]),
                n_failed=int(row["n_failed"]),
                epochs_run=int(row["epochs_run"]),
                best_epoch=int(row["best_epoch"]),
                train_nll=float(row["train_nll"]),
                val_nll=float(row["val_nll"]),
                posterior_mean=tuple(float(row[f"mean_{name}"]) for name in names),
                posterior_std=tuple(float(row[f"std_{name}"]) for name in names),
                logpdf_at_truth=float(row["logpdf_at_truth"]),
                log_normalizer=float(row["log_normalizer"]),
                skipped_batches=int(row.get("skipped_batches", 0)),
                stage_seconds=stage_seconds,
            )
        )
    return records


def write_dataset(
    path: Path,
    thetas: np.ndarray,
    summaries: np.ndarray,
    names: Sequence[str],
    episodes: Sequence[int],
) -> Path:
    frame = pd.DataFrame({"episode": np.asarray(episodes, dtype="int64")})
    for index, name in enumerate(names):
        frame[f"theta_{name}"] = thetas[:, index]
    summary_frame = pd.DataFrame(summaries, columns=[f"x_{j}" for j in range(summaries.shape[1])])
    frame = pd.concat([frame, summary_frame], axis=1)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_parquet(path, index=False)
    return path


def read_dataset(path: Path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    frame = pd.read_parquet(path)
    theta_columns = [column for column in frame.columns if column.startswith("theta_")]
    summary_columns = [column for column in frame.columns if column.startswith("x_")]
    names = [column[len("theta_") :] for column in theta_columns]
    return frame[theta_columns].to_numpy(dtype=float), frame[summary_columns].to_numpy(dtype=float), names


def write_real_trajectories(path: Path, trajectories: Sequence[Trajectory], task: TaskSpec) -> Path:
    frames = []
    for episode, traj in enumerate(trajectories):
        frame = pd.DataFrame(traj.states, columns=list(task.model.state_names))
        for index, name in enumerate(task.model.action_names):
            frame[name] = traj.actions[:, index]
        frame.insert(0, "t", np.arange(traj.T, dtype="int64"))
        frame.insert(0, "episode", episode)
        frames.append(frame)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.concat(frames, ignore_index=True).to_parquet(path, index=False)
    return path


def write_run_report(run_dir: Path, payload: dict[str, Any]) -> Path:
    report = {"generated_at_utc": datetime.now(tz=UTC).isoformat(), **payload}
    target = run_dir / REPORT_FILE
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(report, indent=2, default=_json_default), encoding="utf-8")
    return target


def _json_default(value: Any) -> Any:
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (np.integer, np.floating)):
        return value.item()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")
