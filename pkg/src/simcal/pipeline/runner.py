from __future__ import annotations

import logging
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from simcal.core import GaussianMixtureDensity, Prior, RandomStream, Trajectory, prior_sample
from simcal.density import build_model, save_checkpoint, train
from simcal.inference import (
    Posterior,
    condition,
    posterior_log_normalizer,
    posterior_logpdf_unnorm,
    posterior_sample,
    posterior_slice,
)
from simcal.simulators import TaskSpec, real_rollouts, rollout_batch
from simcal.summarizers import summarize_batch

from .artifacts import (
    SCALARS_FILE,
    TIMINGS_FILE,
    IterationRecord,
    checkpoint_path,
    dataset_path,
    posterior_samples_path,
    posterior_slice_path,
    real_trajectories_path,
    write_dataset,
    write_posterior_samples,
    write_posterior_slice,
    write_real_trajectories,
    write_run_report,
    write_scalars,
    write_timings,
)
from .config import RESOLVED_CONFIG_NAME, RunConfig, run_name, write_resolved_config

logger = logging.getLogger(__name__)

ROOT_STREAM = "simcal"


class PipelineStageError(RuntimeError):
    def __init__(self, stage: str, iteration: int, cause: BaseException) -> None:
        self.stage = stage
        self.iteration = iteration
        self.cause = cause
        super().__init__(f"stage '{stage}' failed at iteration {iteration}: {type(cause).__name__}: {cause}")


@dataclass(frozen=True)
class RunResult:
    run_name: str
    run_dir: Path
    records: list[IterationRecord] = field(default_factory=list)
    report_file: Path | None = None


def root_stream(config: RunConfig) -> RandomStream:
    return RandomStream(seed=config.seed, stream_id=ROOT_STREAM)


def _real_stream(config: RunConfig, iteration: int) -> RandomStream:
    root = root_stream(config)
    return root.child("real") if config.freeze_real else root.child(f"iter/{iteration}/real")


def surrogate_real_trajectories(config: RunConfig, iteration: int, task: TaskSpec | None = None) -> list[Trajectory]:
    active_task = task or config.build_task()
    return real_rollouts(active_task, config.real_config(), config.policy, _real_stream(config, iteration), config.episode_length)


def surrogate_real_trajectory(config: RunConfig, iteration: int) -> Trajectory:
    """The observation a run conditions on at ``iteration``."""
    return surrogate_real_trajectories(config, iteration)[0]


@contextmanager
def _stage(name: str, iteration: int, timings: dict[str, float]) -> Iterator[None]:
    started = time.perf_counter()
    try:
        yield
    except PipelineStageError:
        raise
    except Exception as exc:
        logger.error("iteration=%d stage=%s status=failed error=%s", iteration, name, exc)
        raise PipelineStageError(name, iteration, exc) from exc
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - started


def run(config: RunConfig) -> RunResult:
    """Sample, simulate, summarize, train and condition for ``config.n_iters`` rounds."""
    name = run_name(config)
    run_dir = config.run_dir
    write_resolved_config(config)

    task = config.build_task()
    prior = config.build_prior()
    names = prior.space.names
    truth = config.real_config().theta
    root = root_stream(config)
    model = build_model(config.model_kind, config.model, prior.space)
    model.summarizer_id = config.summarizer.summarizer_id

    proposal: Prior | GaussianMixtureDensity = prior
    posterior: Posterior | None = None
    records: list[IterationRecord] = []
    artifacts: list[str] = [str(run_dir / RESOLVED_CONFIG_NAME)]
    logger.info("run start run_name=%s iterations=%d n_sims=%d", name, config.n_iters, config.n_sims_per_iter)

    try:
        for iteration in range(config.n_iters):
            stream = root.child(f"iter/{iteration}")
            timings: dict[str, float] = {}

            with _stage("sample", iteration, timings):
                if posterior is None:
                    thetas = prior_sample(prior, stream.child("sample"), config.n_sims_per_iter)
                else:
                    thetas = posterior_sample(posterior, stream.child("sample"), config.n_sims_per_iter)

            with _stage("simulate", iteration, timings):
                batch = rollout_batch(
                    task, thetas, config.policy, stream.child("simulate"), config.episode_length, workers=config.workers
                )
                real_trajs = surrogate_real_trajectories(config, iteration, task)

            with _stage("summarize", iteration, timings):
                kept = thetas[batch.kept_indices]
                summaries = summarize_batch(batch.trajectories, config.summarizer)
                artifacts.append(str(write_dataset(dataset_path(run_dir, iteration), kept, summaries, names, batch.kept_indices)))
                artifacts.append(str(write_real_trajectories(real_trajectories_path(run_dir, iteration), real_trajs, task)))

            with _stage("train", iteration, timings):
                result = train(model, summaries, kept, config.train, rng=stream.child("train"))
                model = result.model
                artifacts.append(str(save_checkpoint(model, checkpoint_path(run_dir, iteration))))

            with _stage("condition", iteration, timings):
                posterior = condition(model, real_trajs[0], config.summarizer, prior, proposal)
                samples = posterior_sample(posterior, stream.child("posterior"), config.inference.posterior_samples)
                log_normalizer = posterior_log_normalizer(
                    posterior, stream.child("normalizer"), config.inference.normalizer_draws
                )
                log_truth = posterior_logpdf_unnorm(posterior, truth)
                logpdf_at_truth = log_truth - log_normalizer if math.isfinite(log_truth) else -math.inf
                slices = [posterior_slice(posterior, dims, config.inference.slice_grid) for dims in config.inference.slice_dims]

            with _stage("emit", iteration, timings):
                artifacts.append(str(write_posterior_samples(samples, names, posterior_samples_path(run_dir, iteration))))
                for grid in slices:
                    artifacts.append(str(write_posterior_slice(grid, posterior_slice_path(run_dir, iteration, grid.dims))))

            record = IterationRecord(
                iteration=iteration,
                n_simulations=len(batch.kept_indices),
                n_failed=len(batch.failed_indices),
                epochs_run=result.report.epochs_run,
                best_epoch=result.report.best_epoch,
                train_nll=result.report.final_train_nll,
                val_nll=result.report.best_val_nll,
                posterior_mean=tuple(float(value) for value in np.mean(samples, axis=0)),
                posterior_std=tuple(float(value) for value in np.std(samples, axis=0)),
                logpdf_at_truth=float(logpdf_at_truth),
                log_normalizer=float(log_normalizer),
                skipped_batches=result.report.skipped_batches,
                stage_seconds=dict(timings),
            )
            records.append(record)
            with _stage("emit", iteration, {}):
                write_scalars(records, names, run_dir)
                write_timings(records, run_dir)
            logger.info(
                "iteration=%d train_nll=%.6g val_nll=%.6g logpdf_at_truth=%.6g mean=%s std=%s",
                iteration,
                record.train_nll,
                record.val_nll,
                record.logpdf_at_truth,
                [round(value, 6) for value in record.posterior_mean],
                [round(value, 6) for value in record.posterior_std],
            )
            proposal = posterior.base
    except PipelineStageError as exc:
        write_run_report(
            run_dir,
            {
                "run_name": name,
                "status": "failed",
                "failed_stage": exc.stage,
                "failed_iteration": exc.iteration,
                "error": str(exc.cause),
                "iterations_completed": len(records),
                "skipped_batches": sum(record.skipped_batches for record in records),
                "artifacts": artifacts,
            },
        )
        raise

    report_file = write_run_report(
        run_dir,
        {
            "run_name": name,
            "status": "succeeded",
            "iterations_completed": len(records),
            "skipped_batches": sum(record.skipped_batches for record in records),
            "parameters": names,
            "real_params": dict(config.real_params),
            "artifacts": artifacts + [str(run_dir / SCALARS_FILE), str(run_dir / TIMINGS_FILE)],
        },
    )
    logger.info("run done run_name=%s report=%s", name, report_file)
    return RunResult(run_name=name, run_dir=run_dir, records=records, report_file=report_file)
