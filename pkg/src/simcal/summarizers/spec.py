from __future__ import annotations

import re
from dataclasses import dataclass

SUMMARIZER_KINDS = ("start", "waypoints", "signature", "crosscorr", "crosscorrdiff")

KIND_ALIASES = {
    "start": "start",
    "waypoints": "waypoints",
    "signature": "signature",
    "signatory": "signature",
    "crosscorr": "crosscorr",
    "cross_correlation": "crosscorr",
    "crosscorrdiff": "crosscorrdiff",
    "cross_corr_difference": "crosscorrdiff",
}

MAX_SIGNATURE_DEPTH = 4


class SummarizerMismatchError(ValueError):
    pass


def canonical_kind(kind: str) -> str:
    key = str(kind).strip().lower()
    try:
        return KIND_ALIASES[key]
    except KeyError as exc:
        raise ValueError(f"Unknown summarizer kind: {kind}. Expected one of {sorted(KIND_ALIASES)}") from exc


@dataclass(frozen=True)
class SummarizerSpec:
    kind: str = "crosscorrdiff"
    n_steps: int = 10
    stride: int = 10
    depth: int = 3
    time_augment: bool = True
    n_lags: int = 5

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", canonical_kind(self.kind))
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if not 1 <= self.depth <= MAX_SIGNATURE_DEPTH:
            raise ValueError(f"signature depth must be in [1, {MAX_SIGNATURE_DEPTH}], got {self.depth}")
        if self.n_lags < 1:
            raise ValueError(f"n_lags must be >= 1, got {self.n_lags}")

    @property
    def params(self) -> dict[str, int | bool]:
        if self.kind == "start":
            return {"n_steps": self.n_steps}
        if self.kind == "waypoints":
            return {"stride": self.stride}
        if self.kind == "signature":
            return {"depth": self.depth, "time_augment": self.time_augment}
        return {"n_lags": self.n_lags}

    @property
    def summarizer_id(self) -> str:
        rendered = ",".join(
            f"{key}={str(value).lower() if isinstance(value, bool) else value}" for key, value in self.params.items()
        )
        return f"{self.kind}:{rendered}" if rendered else self.kind

    @property
    def short_name(self) -> str:
        return re.sub(r"[^a-z0-9]", "", self.kind.lower())


def summary_dim(spec: SummarizerSpec, ds: int, da: int, T: int) -> int:
    if spec.kind == "start":
        if spec.n_steps > T:
            raise ValueError(f"n_steps={spec.n_steps} exceeds trajectory length T={T}")
        return spec.n_steps * (ds + da)
    if spec.kind == "waypoints":
        if spec.stride > T:
            raise ValueError(f"stride={spec.stride} exceeds trajectory length T={T}")
        return -(-T // spec.stride) * (ds + da)
    if spec.kind == "signature":
        channels = ds + (1 if spec.time_augment else 0)
        return sum(channels**level for level in range(1, spec.depth + 1))
    if spec.n_lags > T - 1:
        raise ValueError(f"n_lags={spec.n_lags} exceeds T-1={T - 1}")
    return ds * da * spec.n_lags + 2 * ds
