"""Run configuration: named presets, TOML/JSON files, reproducibility blocks.

A run's effective configuration is preset -> config file -> explicit
overrides, deep-merged in that order.  Every CLI run writes the fully
resolved configuration (seed included) next to its outputs so the run can
be repeated from that block alone.
"""

import json
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .errors import ConfigurationError

# The desk preset fits a laptop-scale budget; the paper preset carries the
# published full-scale counts (much slower, hours of compute).
PRESETS = {
    "desk": {
        "box": {
            "initial_range": [6000.0, 8000.0],
            "initial_los_deg": [0.0, 5.0],
            "aircraft_mach": [0.8, 1.0],
            "missile_mach": [2.0, 2.5],
            "pn_gain": [2.5, 5.5],
            "time_constant": [0.1, 0.4],
        },
        "sim": {"dt": 0.001, "min_range": 50.0, "max_time": 30.0},
        "noise": {"sigma_r": 5.0, "sigma_q": 0.001},
        "dataset": {
            "n_traj": 200,
            "windows_per_traj": 20,
            "max_steps": 100,
            "min_steps": 10,
            "noise_free": True,
            "val_fraction": 0.1,
            "period": 0.01,
            "workers": 1,
        },
        "train": {
            "hidden": 64,
            "layers": 3,
            "head": "regime",
            "regimes_per_group": 5,
            "iterations": 2000,
            "batch_size": 64,
            "learning_rate": 0.002,
            "decay": 0.99,
            "decay_every": 100,
            "shards": 1,
        },
        "eval": {
            "runs": 600,
            "windows_per_traj": 10,
            "noise": True,
            "grid_gains": [2.5, 4.0, 5.5],
            "grid_lags": [0.10, 0.25, 0.40],
            "runs_per_cell": 20,
            "drag_scales": [0.5, 1.0, 2.0],
            "runs_per_scale": 100,
            "workers": 1,
        },
        "scenario": {
            "initial_range": 7000.0,
            "initial_los_deg": 0.0,
            "aircraft_mach": 0.9,
            "missile_mach": 2.25,
            "pn_gain": 5.0,
            "time_constant": 0.30,
            "drag_scale": 1.0,
        },
    },
}

PRESETS["paper"] = json.loads(json.dumps(PRESETS["desk"]))  # deep copy
PRESETS["paper"]["dataset"].update({"n_traj": 2000, "windows_per_traj": 20})
PRESETS["paper"]["train"].update(
    {"hidden": 96, "iterations": 100000, "batch_size": 3000}
)
PRESETS["paper"]["eval"].update(
    {
        "runs": 6000,
        "grid_gains": [round(2.5 + 0.3 * i, 1) for i in range(11)],
        "grid_lags": [round(0.10 + 0.03 * i, 2) for i in range(11)],
        "runs_per_cell": 150,
        "windows_per_traj": 20,
        "runs_per_scale": 300,
    }
)


def load_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    if path.suffix == ".json":
        with open(path) as fh:
            data = json.load(fh)
    elif path.suffix == ".toml":
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    else:
        raise ConfigurationError(
            f"config files must be .toml or .json, got {path.suffix!r}"
        )
    if not isinstance(data, dict):
        raise ConfigurationError("config root must be a table/object")
    return data


def _deep_merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def resolve_config(preset: str = "desk", path=None, overrides: dict = None) -> dict:
    if preset not in PRESETS:
        raise ConfigurationError(
            f"unknown preset {preset!r}; choose from {sorted(PRESETS)}"
        )
    cfg = json.loads(json.dumps(PRESETS[preset]))
    if path is not None:
        cfg = _deep_merge(cfg, load_config_file(path))
    if overrides:
        cfg = _deep_merge(cfg, overrides)
    cfg["preset"] = preset
    return cfg


def write_repro_block(path, config: dict, seed: int, command: str = ""):
    """Persist everything needed to repeat a run, plus environment versions."""
    from . import __version__

    block = {
        "command": command,
        "seed": seed,
        "config": config,
        "versions": {
            "pnident": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
    }
    with open(path, "w") as fh:
        json.dump(block, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return block
