"""JSON experiment configuration and ``key=value`` overrides.

Layout::

    {
      "radio":      {<any RadioParams field>},
      "topology":   {"M": 200, "K": 40, "L": 1, "area_km": 1.0},
      "solver":     {"ims": {<ImsParams fields>}, "greedy_iters": 20,
                     "feature_source": "location", "loc_error_m": 0,
                     "exhaustive_objective": "rate"},
      "experiment": {"schemes": [...], "drops": 100, "seed": 0,
                     "sweep": {"param": "M", "values": [100, 200]},
                     "deterministic": false, "deterministic_sweeps": 2000, "jobs": 1}
    }
"""
from __future__ import annotations

import copy
import json
from dataclasses import fields
from pathlib import Path

from .harness import ExperimentSpec
from .scenario import RadioParams
from .solvers import ImsParams

SECTIONS = ("radio", "topology", "solver", "experiment")
_RADIO_KEYS = {f.name for f in fields(RadioParams)}
_IMS_KEYS = {f.name for f in fields(ImsParams)}


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    unknown = set(cfg) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")
    return cfg


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _locate(key: str) -> list[str]:
    """Full dotted path for a possibly bare override key."""
    parts = key.split(".")
    if parts[0] in SECTIONS:
        return parts
    name = parts[-1]
    if name in _RADIO_KEYS:
        return ["radio", name]
    if name in ("M", "K", "L", "area_km"):
        return ["topology", name]
    if name in _IMS_KEYS:
        return ["solver", "ims", name]
    if name in ("greedy_iters", "feature_source", "loc_error_m", "exhaustive_objective"):
        return ["solver", name]
    return ["experiment", *parts]


def apply_overrides(cfg: dict, overrides) -> dict:
    """Return a copy of ``cfg`` with each ``key=value`` applied."""
    cfg = copy.deepcopy(cfg)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, text = item.split("=", 1)
        path = _locate(key.strip())
        node = cfg
        for part in path[:-1]:
            node = node.setdefault(part, {})
        node[path[-1]] = _parse_value(text.strip())
    return cfg


def spec_from_config(cfg: dict) -> ExperimentSpec:
    radio = dict(cfg.get("radio", {}))
    bad = set(radio) - _RADIO_KEYS
    if bad:
        raise ConfigError(f"unknown radio fields {sorted(bad)}")
    topo = cfg.get("topology", {})
    solver = dict(cfg.get("solver", {}))
    exp = dict(cfg.get("experiment", {}))
    ims_cfg = solver.pop("ims", {})
    bad = set(ims_cfg) - _IMS_KEYS
    if bad:
        raise ConfigError(f"unknown ims fields {sorted(bad)}")
    sweep = exp.pop("sweep", None) or {}
    kwargs = {}
    for key in ("M", "K", "L", "area_km"):
        if key in topo:
            kwargs[key] = topo[key]
    for key in ("greedy_iters", "feature_source", "loc_error_m", "exhaustive_objective"):
        if key in solver:
            kwargs[key] = solver.pop(key)
    if solver:
        raise ConfigError(f"unknown solver fields {sorted(solver)}")
    for key in ("drops", "seed", "deterministic", "deterministic_sweeps", "jobs"):
        if key in exp:
            kwargs[key] = exp.pop(key)
    if "schemes" in exp:
        kwargs["schemes"] = tuple(exp.pop("schemes"))
    if exp:
        raise ConfigError(f"unknown experiment fields {sorted(exp)}")
    if sweep:
        kwargs["sweep_param"] = sweep.get("param")
        kwargs["sweep_values"] = tuple(sweep.get("values", ()))
    try:
        return ExperimentSpec(radio=RadioParams(**radio), ims=ImsParams(**ims_cfg), **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
