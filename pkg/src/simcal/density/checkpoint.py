from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from simcal.core import ParamSpace

from .networks import MdnnConfig, MdrffConfig, MixtureDensityModel
from .standardizer import Standardizer

CHECKPOINT_VERSION = 1
_PARAM_PREFIX = "param__"
_FROZEN_PREFIX = "frozen__"


def save_checkpoint(model: MixtureDensityModel, path: str | Path) -> Path:
    """Write weights, frozen features and the standardizer as a single npz archive."""
    if model.standardizer is None or not model.params:
        raise RuntimeError("Cannot checkpoint an uninitialized model.")
    header = {
        "version": CHECKPOINT_VERSION,
        "kind": model.kind,
        "config": asdict(model.config),
        "space": [[dim.name, dim.low, dim.high] for dim in model.space.dims],
        "parameter_names": model.parameter_names,
        "frozen_names": list(model.frozen),
        "summarizer_id": model.summarizer_id,
    }
    arrays: dict[str, np.ndarray] = {
        "header": np.array(json.dumps(header)),
        "input_mean": model.standardizer.input_mean,
        "input_std": model.standardizer.input_std,
    }
    arrays.update({f"{_PARAM_PREFIX}{name}": value for name, value in model.params.items()})
    arrays.update({f"{_FROZEN_PREFIX}{name}": value for name, value in model.frozen.items()})

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("wb") as handle:
        np.savez(handle, **arrays)
    return target


def load_checkpoint(path: str | Path) -> MixtureDensityModel:
    with np.load(Path(path), allow_pickle=False) as archive:
        header = json.loads(str(archive["header"]))
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"Unsupported checkpoint version: {header.get('version')}")
        space = ParamSpace.from_bounds({name: (low, high) for name, low, high in header["space"]})
        config_cls = MdnnConfig if header["kind"] == "MDNN" else MdrffConfig
        model = MixtureDensityModel(config_cls(**header["config"]), space)
        model.standardizer = Standardizer(
            input_mean=archive["input_mean"],
            input_std=archive["input_std"],
            low=space.lows,
            high=space.highs,
        )
        model.params = {name: np.array(archive[f"{_PARAM_PREFIX}{name}"]) for name in header["parameter_names"]}
        model.frozen = {name: np.array(archive[f"{_FROZEN_PREFIX}{name}"]) for name in header["frozen_names"]}
        model.summarizer_id = header.get("summarizer_id")
    return model
