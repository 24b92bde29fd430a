from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
import yaml

from simcal.cli import main
from simcal.config import DEFAULT_RUN_CONFIG
from simcal.density import MdrffConfig, load_checkpoint
from simcal.inference import SliceGrid
from simcal.pipeline import (
    ConfigError,
    IterationRecord,
    PipelineStageError,
    RuntimeSettings,
    build_run_config,
    parse_config,
    read_dataset,
    read_iteration_records,
    read_posterior_samples,
    read_posterior_slice,
    run,
    run_name,
    surrogate_real_trajectory,
    write_dataset,
    write_posterior_slice,
    write_scalars,
    write_timings,
)
from simcal.pipeline import runner as runner_module


def _tiny_raw(logdir: Path, **overrides) -> dict:
    raw = {
        "task": "Pendulum",
        "seed": 3,
        "logdir": str(logdir),
        "n_iters": 2,
        "n_sims_per_iter": 60,
        "episode_length": 20,
        "summarizer": {"kind": "crosscorrdiff", "n_lags": 3},
        "model": {"kind": "MDNN", "n_components": 2, "hidden_sizes": [8]},
        "train": {"batch_size": 16, "max_epochs": 3, "patience": 2},
        "inference": {"slice_grid": 6, "posterior_samples": 40, "normalizer_draws": 500},
    }
    raw.update(overrides)
    return raw


def _write_yaml(path: Path, payload: dict) -> Path:
    path.write_text(yaml.safe_dump(payload, sort_keys=False), encoding="utf-8")
    return path


def test_empty_file_resolves_to_documented_defaults(tmp_path) -> None:
    empty = tmp_path / "empty.yaml"
    empty.write_text("", encoding="utf-8")
    config = parse_config(empty, echo=False)
    assert config.task == "Pendulum"
    assert (config.seed, config.n_iters, config.n_sims_per_iter, config.episode_length) == (42, 5, 2000, 100)
    assert config.prior.bounds == (("mass", 0.5, 2.0), ("length", 0.3, 1.5))
    assert dict(config.real_params) == {"mass": 1.2, "length": 0.7}
    assert config.model.hidden_sizes == (128, 128)
    assert config.train.patience == 20
    assert config.inference.slice_dims == ((0, 1),)


def test_packaged_default_config_matches_code_defaults(tmp_path) -> None:
    empty = tmp_path / "empty.yaml"
    empty.write_text("", encoding="utf-8")
    assert parse_config(DEFAULT_RUN_CONFIG, echo=False) == parse_config(empty, echo=False)


def test_unknown_keys_are_rejected_by_name() -> None:
    with pytest.raises(ConfigError, match="n_sims_per_itr") as excinfo:
        build_run_config({"n_sims_per_itr": 100})
    assert excinfo.value.key == "n_sims_per_itr"
    with pytest.raises(ConfigError, match="train.learning_rat"):
        build_run_config({"train": {"learning_rat": 0.1}})


def test_real_params_outside_support_are_rejected() -> None:
    with pytest.raises(ConfigError, match="real_params"):
        build_run_config({"real_params": {"mass": 99}})
    with pytest.raises(ConfigError, match="real_params.friction"):
        build_run_config({"real_params": {"friction": 0.1}})


def test_yaml_syntax_errors_report_line_numbers(tmp_path) -> None:
    broken = tmp_path / "broken.yaml"
    broken.write_text("task: Pendulum\nseed: 42\n  logdir: runs\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="line 3") as excinfo:
        parse_config(broken, echo=False)
    assert excinfo.value.line == 3


def test_validation_errors_name_the_offending_key() -> None:
    with pytest.raises(ConfigError, match="n_iters"):
        build_run_config({"n_iters": 0})
    with pytest.raises(ConfigError, match="n_sims_per_iter"):
        build_run_config({"n_sims_per_iter": 50})
    with pytest.raises(ConfigError, match="summarizer"):
        build_run_config({"episode_length": 5, "summarizer": {"kind": "start", "n_steps": 10}})
    with pytest.raises(ConfigError, match="policy"):
        build_run_config({"policy": {"kind": "fixed", "fixed_action": [50.0]}})
    with pytest.raises(ConfigError, match="prior"):
        build_run_config({"prior": {"mass": [2.0, 1.0]}})


def test_truncated_gaussian_prior_and_default_real_params() -> None:
    config = build_run_config({"task": "MassSpringDamper", "prior": {"stiffness": [0.5, 5.0, 2.0, 1.0], "damping": [0.0, 1.0, 0.2, 0.3]}})
    prior = config.build_prior()
    assert prior.kind == "truncated_gaussian"
    assert dict(config.real_params) == {"stiffness": 2.5, "damping": 0.3}
    task = config.build_task()
    assert task.fixed_constants["mass"] == 1.0


def test_overrides_beat_file_values(tmp_path) -> None:
    path = _write_yaml(tmp_path / "run.yaml", _tiny_raw(tmp_path / "runs"))
    config = parse_config(path, {"seed": 7, "model.kind": "MDRFF", "n_iters": None}, echo=False)
    assert config.seed == 7
    assert config.n_iters == 2
    assert config.model_kind == "MDRFF"
    assert isinstance(config.model, MdrffConfig)


def test_parse_config_echoes_resolved_config(tmp_path) -> None:
    path = _write_yaml(tmp_path / "run.yaml", _tiny_raw(tmp_path / "runs"))
    config = parse_config(path)
    echoed = config.run_dir / "config_resolved"
    assert echoed.exists()
    assert build_run_config(yaml.safe_load(echoed.read_text(encoding="utf-8"))) == config


@pytest.mark.parametrize(
    ("raw", "expected"),
    [
        ({}, "Pendulum_MDNN_crosscorrdiff_random_seed42"),
        ({"summarizer": {"kind": "cross_corr_difference"}}, "Pendulum_MDNN_crosscorrdiff_random_seed42"),
        (
            {"task": "Cartpole", "model": {"kind": "MDRFF"}, "summarizer": {"kind": "signature", "depth": 3}, "policy": {"kind": "fixed"}, "seed": 7},
            "Cartpole_MDRFF_signature_fixed_seed7",
        ),
        ({"task": "MassSpringDamper", "summarizer": {"kind": "waypoints"}, "seed": 0}, "MassSpringDamper_MDNN_waypoints_random_seed0"),
        (
            {"model": {"kind": "MDRFF"}, "summarizer": {"kind": "start"}, "policy": {"kind": "fixed"}, "seed": 123},
            "Pendulum_MDRFF_start_fixed_seed123",
        ),
        ({"task": "Cartpole", "summarizer": {"kind": "cross_correlation"}, "seed": 1}, "Cartpole_MDNN_crosscorr_random_seed1"),
    ],
)
def test_run_name_format(raw: dict, expected: str) -> None:
    assert run_name(build_run_config(raw)) == expected


def test_runtime_settings_from_env_file_and_environment(tmp_path, monkeypatch) -> None:
    env_file = tmp_path / "local.env"
    env_file.write_text("SIMCAL_LOG_LEVEL=debug\nSIMCAL_WORKERS=2\nSIMCAL_LOGDIR=/tmp/simcal-runs\n", encoding="utf-8")
    monkeypatch.setenv("SIMCAL_WORKERS", "3")
    settings = RuntimeSettings.from_env(env_file=env_file)
    assert settings.log_level == "DEBUG"
    assert settings.workers == 3
    assert settings.config_overrides() == {"workers": 3, "logdir": "/tmp/simcal-runs"}

    monkeypatch.setenv("SIMCAL_LOG_LEVEL", "chatty")
    with pytest.raises(ValueError, match="LOG_LEVEL"):
        RuntimeSettings.from_env(env_file=env_file)
    with pytest.raises(FileNotFoundError):
        RuntimeSettings.from_env(env_file=tmp_path / "missing.env")


def test_settings_feed_config_below_explicit_overrides(tmp_path) -> None:
    path = _write_yaml(tmp_path / "run.yaml", _tiny_raw(tmp_path / "runs"))
    settings = RuntimeSettings(workers=4, logdir=str(tmp_path / "from-settings"))
    config = parse_config(path, {"logdir": str(tmp_path / "explicit")}, settings=settings, echo=False)
    assert config.workers == 4
    assert config.logdir == str(tmp_path / "explicit")


def test_scalars_round_trip_including_negative_infinity(tmp_path) -> None:
    records = [
        IterationRecord(
            iteration=index,
            n_simulations=100 - index,
            n_failed=index,
            epochs_run=12,
            best_epoch=9,
            train_nll=-1.0 / 3.0,
            val_nll=0.1 + index,
            posterior_mean=(1.2345678901234567, 0.7),
            posterior_std=(0.1, math.pi / 100),
            logpdf_at_truth=-math.inf if index == 0 else 1.5,
            log_normalizer=-0.01,
            skipped_batches=3 * index,
            stage_seconds={"sample": 0.5, "simulate": 1.25, "summarize": 0.0, "train": 2.0, "condition": 0.1, "emit": 0.01},
        )
        for index in range(2)
    ]
    write_scalars(records, ["mass", "length"], tmp_path)
    write_timings(records, tmp_path)
    assert read_iteration_records(tmp_path) == records
    text = (tmp_path / "scalars.csv").read_bytes()
    assert b"\r\n" not in text
    assert text.splitlines()[0].startswith(b"iteration,n_simulations,n_failed")
    assert b",skipped_batches," in text.splitlines()[0]


def test_scalars_without_skipped_column_read_as_zero(tmp_path) -> None:
    record = IterationRecord(
        iteration=0,
        n_simulations=10,
        n_failed=0,
        epochs_run=4,
        best_epoch=2,
        train_nll=0.5,
        val_nll=0.6,
        posterior_mean=(1.0,),
        posterior_std=(0.2,),
        logpdf_at_truth=0.3,
        log_normalizer=0.0,
        skipped_batches=2,
    )
    path = write_scalars([record], ["mass"], tmp_path)
    pd.read_csv(path).drop(columns=["skipped_batches"]).to_csv(path, index=False)
    assert read_iteration_records(tmp_path)[0].skipped_batches == 0


def test_slice_and_dataset_round_trip(tmp_path) -> None:
    grid = SliceGrid(
        values=np.full((3, 3), 1.0 / 9.0),
        axis_a=np.linspace(0.5, 2.0, 3),
        axis_b=np.linspace(0.3, 1.5, 3),
        dims=(0, 1),
        names=("mass", "length"),
        ratio_corrected=True,
    )
    names, bounds, values = read_posterior_slice(write_posterior_slice(grid, tmp_path / "slice.csv"))
    assert names == ("mass", "length")
    assert bounds == (0.5, 2.0, 0.3, 1.5)
    np.testing.assert_array_equal(values, grid.values)

    thetas = np.array([[1.0, 0.5], [1.5, 0.9]])
    summaries = np.array([[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]])
    loaded_thetas, loaded_summaries, loaded_names = read_dataset(
        write_dataset(tmp_path / "data.parquet", thetas, summaries, ["mass", "length"], [0, 2])
    )
    np.testing.assert_array_equal(loaded_thetas, thetas)
    np.testing.assert_array_equal(loaded_summaries, summaries)
    assert loaded_names == ["mass", "length"]


def test_surrogate_real_trajectory_refreshes_unless_frozen(tmp_path) -> None:
    config = build_run_config(_tiny_raw(tmp_path))
    first, second = surrogate_real_trajectory(config, 0), surrogate_real_trajectory(config, 1)
    assert first.params is None
    assert not np.array_equal(first.actions, second.actions)
    frozen = build_run_config(_tiny_raw(tmp_path, freeze_real=True))
    np.testing.assert_array_equal(surrogate_real_trajectory(frozen, 0).states, surrogate_real_trajectory(frozen, 1).states)


def test_tiny_run_writes_every_artifact(tmp_path) -> None:
    config = build_run_config(_tiny_raw(tmp_path / "runs", n_iters=1))
    result = run(config)
    run_dir = result.run_dir
    assert result.run_name == "Pendulum_MDNN_crosscorrdiff_random_seed3"
    assert len(result.records) == 1
    for name in (
        "config_resolved",
        "scalars.csv",
        "timings.csv",
        "run_report.json",
        "posterior_samples_iter0.csv",
        "posterior_slice_iter0_0_1.csv",
        "model_iter0.ckpt",
        "dataset_iter0.parquet",
        "real_trajectories_iter0.parquet",
    ):
        assert (run_dir / name).exists(), name
    assert read_iteration_records(run_dir) == result.records
    samples = read_posterior_samples(run_dir / "posterior_samples_iter0.csv")
    assert list(samples.columns) == ["mass", "length"]
    assert len(samples) == 40
    assert load_checkpoint(run_dir / "model_iter0.ckpt").summarizer_id == "crosscorrdiff:n_lags=3"
    report = json.loads((run_dir / "run_report.json").read_text(encoding="utf-8"))
    assert report["status"] == "succeeded"
    assert report["skipped_batches"] == sum(record.skipped_batches for record in result.records)
    record = result.records[0]
    assert record.n_simulations + record.n_failed == 60
    assert all(math.isfinite(value) for value in record.posterior_mean + record.posterior_std)


def test_runs_are_byte_identical_across_repeats_and_worker_counts(tmp_path) -> None:
    first = run(build_run_config(_tiny_raw(tmp_path / "a")))
    second = run(build_run_config(_tiny_raw(tmp_path / "b")))
    threaded = run(build_run_config(_tiny_raw(tmp_path / "c", workers=3)))
    reference = (first.run_dir / "scalars.csv").read_bytes()
    assert (second.run_dir / "scalars.csv").read_bytes() == reference
    assert (threaded.run_dir / "scalars.csv").read_bytes() == reference
    assert len(first.records) == 2


def test_finetune_mode_runs_every_iteration(tmp_path) -> None:
    result = run(build_run_config(_tiny_raw(tmp_path, init_mode="finetune")))
    assert [record.iteration for record in result.records] == [0, 1]


def test_stage_failure_names_stage_and_leaves_report(tmp_path, monkeypatch) -> None:
    def broken_train(*args, **kwargs):
        raise RuntimeError("optimizer exploded")

    monkeypatch.setattr(runner_module, "train", broken_train)
    config = build_run_config(_tiny_raw(tmp_path))
    with pytest.raises(PipelineStageError, match="stage 'train' failed at iteration 0") as excinfo:
        run(config)
    assert excinfo.value.stage == "train"
    report = json.loads((config.run_dir / "run_report.json").read_text(encoding="utf-8"))
    assert report["status"] == "failed"
    assert report["failed_stage"] == "train"
    assert (config.run_dir / "dataset_iter0.parquet").exists()


def test_cli_run_succeeds_and_prints_run_name(tmp_path, capsys, monkeypatch) -> None:
    monkeypatch.chdir(tmp_path)
    path = _write_yaml(tmp_path / "run.yaml", _tiny_raw(tmp_path / "runs"))
    code = main(["run", "--config", str(path), "--iters", "1", "--seed", "5"])
    assert code == 0
    assert "run_name=Pendulum_MDNN_crosscorrdiff_random_seed5" in capsys.readouterr().out
    assert (tmp_path / "runs" / "Pendulum_MDNN_crosscorrdiff_random_seed5" / "scalars.csv").exists()


def test_cli_oracle_writes_accepted_samples(tmp_path, capsys, monkeypatch) -> None:
    monkeypatch.chdir(tmp_path)
    path = _write_yaml(tmp_path / "run.yaml", _tiny_raw(tmp_path / "runs"))
    out = tmp_path / "oracle.csv"
    code = main(["oracle", "--config", str(path), "--n-sims", "1000", "--quantile", "0.05", "--out", str(out)])
    assert code == 0
    assert "accepted=50" in capsys.readouterr().out
    assert list(read_posterior_samples(out).columns) == ["mass", "length"]


def test_cli_errors_exit_nonzero_with_one_line(tmp_path, capsys, monkeypatch) -> None:
    monkeypatch.chdir(tmp_path)
    bad = _write_yaml(tmp_path / "bad.yaml", {"n_sims_per_itr": 5})
    assert main(["run", "--config", str(bad)]) == 1
    err = capsys.readouterr().err.strip()
    assert err.startswith("simcal: error:")
    assert "n_sims_per_itr" in err
    assert len(err.splitlines()) == 1

    assert main(["run", "--config", str(tmp_path / "missing.yaml")]) == 1
    with pytest.raises(SystemExit) as excinfo:
        main(["run", "--model", "GP"])
    assert excinfo.value.code == 2
