from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from dotenv import dotenv_values

DEFAULT_ENV_FILE = ".env"
LOG_LEVELS = {"CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG"}


def _parse_int(value: str | int | None, *, name: str) -> int | None:
    if value is None:
        return None
    if isinstance(value, int):
        return value
    stripped = str(value).strip()
    if not stripped:
        return None
    try:
        return int(stripped)
    except ValueError as exc:
        raise ValueError(f"Invalid integer for {name}: {value}") from exc


@dataclass(frozen=True)
class RuntimeSettings:
    """Machine-level knobs read from ``SIMCAL_*`` variables; unset values defer to the run config."""

    log_level: str = "INFO"
    workers: int | None = None
    logdir: str | None = None

    @classmethod
    def from_env(
        cls,
        *,
        env_file: str | Path | None = None,
        base_dir: str | Path = ".",
        load_default_env_file: bool = True,
        env_prefix: str = "SIMCAL_",
    ) -> "RuntimeSettings":
        file_values: dict[str, str | None] = {}
        file_path: Path | None = None

        if env_file:
            file_path = Path(env_file)
            if not file_path.is_absolute():
                file_path = Path(base_dir) / file_path
            if not file_path.exists():
                raise FileNotFoundError(f"simcal env file not found: {env_file}")
        elif load_default_env_file:
            candidate = Path(base_dir) / DEFAULT_ENV_FILE
            if candidate.exists():
                file_path = candidate

        if file_path is not None:
            file_values = dict(dotenv_values(file_path))

        def get_value(key: str) -> str | None:
            env_key = f"{env_prefix}{key}"
            if env_key in os.environ:
                return os.environ[env_key]
            raw = file_values.get(env_key)
            if raw is None:
                return None
            return str(raw)

        log_level = (get_value("LOG_LEVEL") or cls.log_level).strip().upper()
        if log_level not in LOG_LEVELS:
            raise ValueError(f"Invalid {env_prefix}LOG_LEVEL: {log_level}. Expected one of {sorted(LOG_LEVELS)}")
        workers = _parse_int(get_value("WORKERS"), name=f"{env_prefix}WORKERS")
        if workers is not None and workers < 1:
            raise ValueError(f"{env_prefix}WORKERS must be >= 1, got {workers}")
        logdir = (get_value("LOGDIR") or "").strip() or None

        return cls(log_level=log_level, workers=workers, logdir=logdir)

    def config_overrides(self) -> dict[str, object]:
        overrides: dict[str, object] = {}
        if self.workers is not None:
            overrides["workers"] = self.workers
        if self.logdir is not None:
            overrides["logdir"] = self.logdir
        return overrides
