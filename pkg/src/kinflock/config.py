"""Scenario configuration: JSON loading, schema validation, defaults.

Unknown keys are rejected by the shipped schema (typos in scientific
parameters should fail loudly).  A single 64-bit scenario seed is split
into independent streams with numpy's SeedSequence in a fixed order:
child 0 drives initial sampling, child 1 agent noise, child 2 diagnostics
subsampling.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources

import jsonschema
import numpy as np

from .errors import ConfigError

_DEFAULTS = {
    "delta": 0.0,
    "seed": 0,
    "snapshot_stride": 1,
    "allow_large_dt": False,
    "model": "cutoff_cs",
    "n_agents": 100,
    "integrator": "rk4",
    "kernel": {"kind": "indicator"},
    "vicsek": {"speed": 0.05, "noise": 0.0},
    "initial": {
        "amplitude": 1.0,
        "x_sigma": 0.25,
        "v_sigma": 0.25,
        "sampling": {"kind": "tensor_grid", "n_x": 16, "n_v": 16},
    },
    "oracle": {
        "n_x": 128,
        "n_v": 128,
        "x_min": -3.0,
        "x_max": 3.0,
        "v_max": 2.0,
        "lam_zero_transport": False,
        "field": {"kind": "zero"},
    },
    "picard": {
        "tol": 1e-3,
        "max_iter": 25,
        "damping": 1.0,
        "n_time_nodes": 11,
        "n_space_nodes": 33,
        "cross_check": False,
    },
    "diagnostics": {
        "lp_exponents": [1, 2, 4],
        "mass_tol": 1e-12,
        "support_tol": 1e-9,
        "lp_rel_tol": 0.05,
        "enabled": True,
    },
}


def _schema():
    with resources.files("kinflock.schema").joinpath("config_schema.json").open() as fh:
        return json.load(fh)


def _merge_defaults(defaults, data):
    out = copy.deepcopy(defaults)
    for k, v in data.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge_defaults(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class ScenarioConfig:
    """Fully validated, defaults-materialized scenario description."""

    data: dict

    def __getitem__(self, key):
        return self.data[key]

    def get(self, key, default=None):
        return self.data.get(key, default)

    def seed_streams(self):
        """(sampling_rng, noise_rng, diagnostics_rng), deterministically
        derived from the scenario seed."""
        children = np.random.SeedSequence(self.data["seed"]).spawn(3)
        return tuple(np.random.default_rng(c) for c in children)

    def to_json(self):
        return json.dumps(self.data, indent=2, sort_keys=True)


def validate_config(data: dict) -> ScenarioConfig:
    """Schema-validate, fill defaults, and run the semantic checks."""
    try:
        jsonschema.validate(data, _schema())
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "(root)"
        raise ConfigError(f"config key {path}: {exc.message}") from exc
    merged = _merge_defaults(_DEFAULTS, data)
    if "initial" not in data:
        merged.pop("initial", None)  # partial defaults alone would not re-validate
    mode = merged["mode"]
    if merged["lam"] <= 0:
        raise ConfigError("lam must be > 0")
    if merged["radius"] <= 0:
        raise ConfigError("radius must be > 0")
    if merged["delta"] < 0:
        raise ConfigError("delta must be >= 0")
    if mode == "picard" and merged["delta"] <= 0:
        raise ConfigError("picard mode requires delta > 0 (the regularization "
                          "appears in the field denominator)")
    if merged["lam"] * merged["dt"] > 1.0 + 1e-12 and not merged["allow_large_dt"]:
        raise ConfigError(
            "lam*dt must be <= 1 to preserve the discrete velocity max "
            "principle; set allow_large_dt to override (support checks then "
            "downgrade to warnings)")
    if mode in ("kinetic", "picard") and "initial" not in data:
        raise ConfigError(f"{mode} mode requires an initial distribution spec")
    if mode == "agents" and merged["model"] != "vicsek" and "initial" not in data:
        raise ConfigError("agents mode requires an initial distribution spec")
    if mode == "oracle" and merged["dim"] != 1:
        raise ConfigError("oracle mode is 1D only")
    ib = merged.get("initial")
    if ib is not None and "x_bounds" in ib:
        if len(ib["x_bounds"]) != merged["dim"] or len(ib["v_bounds"]) != merged["dim"]:
            raise ConfigError("initial bounds must have one [lo, hi] pair per dimension")
    return ScenarioConfig(merged)


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return validate_config(data)
