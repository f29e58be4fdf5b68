"""Experiment configuration files and the ``desk`` / ``paper`` presets.

A configuration is a small key-value tree (YAML or JSON).  Values are merged
in the order preset < file < environment < command-line overrides.
"""

from __future__ import annotations

import copy
import dataclasses
import json
import os
import re
from pathlib import Path
from typing import Any, Mapping

import yaml

from .experiments import ConfigError, ExperimentConfig, Study, TestbedKind
from .gbm import GbmConfig
from .spde_heat import HeatConfig

SEED_ENV = "MLMC_SEED"

_TESTBED_ALIASES = {
    "gbm": TestbedKind.GBM,
    "heatg1": TestbedKind.HEAT_G1,
    "g1": TestbedKind.HEAT_G1,
    "heatg2": TestbedKind.HEAT_G2,
    "g2": TestbedKind.HEAT_G2,
}

_STUDY_ALIASES = {
    "strong": Study.STRONG,
    "weaktype1": Study.WEAK_TYPE1,
    "weak1": Study.WEAK_TYPE1,
    "weaktype2": Study.WEAK_TYPE2,
    "weak2": Study.WEAK_TYPE2,
    "mlmcweaktype1": Study.MLMC_WEAK_TYPE1,
    "mlmc1": Study.MLMC_WEAK_TYPE1,
    "mlmcweaktype2": Study.MLMC_WEAK_TYPE2,
    "mlmc2": Study.MLMC_WEAK_TYPE2,
    "boundscheck": Study.BOUNDS_CHECK,
    "bounds": Study.BOUNDS_CHECK,
}

STUDY_FILE_NAMES = {
    Study.STRONG: "strong",
    Study.WEAK_TYPE1: "weak_type1",
    Study.WEAK_TYPE2: "weak_type2",
    Study.MLMC_WEAK_TYPE1: "mlmc_weak_type1",
    Study.MLMC_WEAK_TYPE2: "mlmc_weak_type2",
    Study.BOUNDS_CHECK: "bounds_check",
}


def _squash(name: str) -> str:
    return re.sub(r"[^a-z0-9]", "", str(name).lower())


def parse_testbed(name) -> TestbedKind:
    try:
        return _TESTBED_ALIASES[_squash(name)]
    except KeyError:
        raise ConfigError(f"unknown testbed {name!r}; expected one of gbm, heat-g1, heat-g2") from None


def parse_study(name) -> Study:
    try:
        return _STUDY_ALIASES[_squash(name)]
    except KeyError:
        raise ConfigError(f"unknown study {name!r}; expected one of {', '.join(s.value for s in Study)}") from None


def _r(a, b):
    return list(range(a, b + 1))


# (preset, testbed family, study) -> values; testbed family is "gbm" or "heat"
_PRESETS: dict[tuple[str, str, Study], dict[str, Any]] = {
    ("desk", "gbm", Study.STRONG): dict(levels=_r(1, 8), n_samples=10_000),
    ("desk", "gbm", Study.WEAK_TYPE1): dict(levels=_r(1, 8), n_samples=31_623, m_replications=20),
    ("desk", "gbm", Study.WEAK_TYPE2): dict(levels=_r(1, 6), n_samples=31_623, m_replications=20,
                                            fit_skip_last=2),
    ("desk", "gbm", Study.MLMC_WEAK_TYPE1): dict(levels=_r(1, 6), n_samples=1, m_replications=20),
    ("desk", "gbm", Study.MLMC_WEAK_TYPE2): dict(levels=_r(1, 6), n_samples=1, m_replications=20),
    ("desk", "gbm", Study.BOUNDS_CHECK): dict(levels=[6], n_samples=31_623, m_replications=200,
                                              n_pilot=1_000_000),
    ("paper", "gbm", Study.STRONG): dict(levels=_r(1, 8), n_samples=31_623, m_replications=20),
    ("paper", "gbm", Study.WEAK_TYPE1): dict(levels=_r(1, 8), n_samples=31_623, m_replications=20),
    ("paper", "gbm", Study.WEAK_TYPE2): dict(levels=_r(1, 8), n_samples=31_623, m_replications=20,
                                             fit_skip_last=2),
    ("paper", "gbm", Study.MLMC_WEAK_TYPE1): dict(levels=_r(1, 8), n_samples=1, m_replications=20),
    ("paper", "gbm", Study.MLMC_WEAK_TYPE2): dict(levels=_r(1, 8), n_samples=1, m_replications=20),
    ("paper", "gbm", Study.BOUNDS_CHECK): dict(levels=_r(1, 8), n_samples=31_623, m_replications=20,
                                               n_pilot=1_000_000),
    ("desk", "heat", Study.STRONG): dict(levels=_r(1, 4), reference_level=5, n_samples=500),
    ("desk", "heat", Study.WEAK_TYPE1): dict(levels=_r(1, 4), reference_level=5, n_samples=2000,
                                             m_replications=10, reference_samples=2000),
    ("desk", "heat", Study.WEAK_TYPE2): dict(levels=_r(1, 4), reference_level=5, n_samples=2000,
                                             m_replications=10, fit_skip_last=1),
    ("desk", "heat", Study.MLMC_WEAK_TYPE1): dict(levels=_r(1, 3), reference_level=5, n_samples=1,
                                                  m_replications=10, schedule_source="pilot",
                                                  normalize_schedule=True, n_pilot=500,
                                                  sample_cap=2000, reference_samples=2000),
    ("desk", "heat", Study.BOUNDS_CHECK): dict(levels=[2], reference_level=5, n_samples=500,
                                               m_replications=20, n_pilot=2000),
    ("paper", "heat", Study.STRONG): dict(levels=_r(1, 7), reference_level=8, n_samples=12_000),
    ("paper", "heat", Study.WEAK_TYPE1): dict(levels=_r(1, 5), reference_level=8, n_samples=3000,
                                              m_replications=10, reference_samples=10_000),
    ("paper", "heat", Study.WEAK_TYPE2): dict(levels=_r(1, 5), reference_level=8, n_samples=3000,
                                              m_replications=10, fit_skip_last=1),
    ("paper", "heat", Study.MLMC_WEAK_TYPE1): dict(levels=_r(1, 5), reference_level=8, n_samples=1,
                                                   m_replications=100, schedule_source="pilot",
                                                   normalize_schedule=True, n_pilot=1000,
                                                   reference_samples=10_000),
    ("paper", "heat", Study.BOUNDS_CHECK): dict(levels=_r(1, 5), reference_level=8, n_samples=3000,
                                                m_replications=10, n_pilot=10_000),
}

PRESET_NAMES = ("desk", "paper")


def preset_values(preset: str, testbed, study) -> dict[str, Any]:
    tb, st = parse_testbed(testbed), parse_study(study)
    family = "gbm" if tb is TestbedKind.GBM else "heat"
    try:
        values = copy.deepcopy(_PRESETS[(preset, family, st)])
    except KeyError:
        raise ConfigError(f"no preset {preset!r} for {tb.value}/{st.value}") from None
    values.update(testbed=tb.value, study=st.value)
    return values


def load_file(path) -> dict[str, Any]:
    """Read a YAML/JSON config; a run manifest is accepted too (its
    ``config`` entry is used)."""
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping")
    if "config" in data and "master_seed" in data and isinstance(data["config"], dict):
        data = data["config"]
    return data


def _deep_merge(base: dict, extra: Mapping) -> dict:
    out = dict(base)
    for key, val in extra.items():
        if isinstance(val, Mapping) and isinstance(out.get(key), Mapping):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = val
    return out


def parse_override(text: str) -> dict[str, Any]:
    """``a.b=value`` -> {"a": {"b": value}}, value parsed as YAML."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    value = _number(yaml.safe_load(raw))
    for part in reversed(key.strip().split(".")):
        value = {part: value}
    return value


def _number(v):
    """YAML 1.1 reads ``1e-3`` as a string; accept it as a float."""
    if isinstance(v, str):
        try:
            return float(v)
        except ValueError:
            pass
    return v


_FLOAT_FIELDS = {"eps", "r", "tau", "exact_truncation"}
_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}
_GBM_FIELDS = {f.name for f in dataclasses.fields(GbmConfig)}
_HEAT_FIELDS = {"t_end", "c_mu", "eta", "x0_kind"}


def from_mapping(values: Mapping[str, Any]) -> ExperimentConfig:
    values = dict(values)
    unknown = set(values) - _FIELDS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key in ("testbed", "study", "levels", "n_samples"):
        if key not in values:
            raise ConfigError(f"config is missing {key!r}")
    for key in _FLOAT_FIELDS & set(values):
        values[key] = _number(values[key])
    values["testbed"] = parse_testbed(values["testbed"])
    values["study"] = parse_study(values["study"])
    try:
        gbm_vals = {k: _number(v) for k, v in dict(values.pop("gbm", None) or {}).items()}
        if set(gbm_vals) - _GBM_FIELDS:
            raise ConfigError(f"unknown gbm keys: {sorted(set(gbm_vals) - _GBM_FIELDS)}")
        heat_vals = {k: v if k == "x0_kind" else _number(v)
                     for k, v in dict(values.pop("heat", None) or {}).items()}
        if set(heat_vals) - _HEAT_FIELDS:
            raise ConfigError(f"unknown heat keys: {sorted(set(heat_vals) - _HEAT_FIELDS)}")
        return ExperimentConfig(gbm=GbmConfig(**gbm_vals), heat=HeatConfig(**heat_vals), **values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def build_config(preset: str | None = None, testbed=None, study=None, file_values=None,
                 overrides=(), seed: int | None = None, env=None) -> ExperimentConfig:
    env = os.environ if env is None else env
    values: dict[str, Any] = {}
    file_values = dict(file_values or {})
    tb = testbed or file_values.get("testbed")
    st = study or file_values.get("study")
    if preset:
        if preset not in PRESET_NAMES:
            raise ConfigError(f"unknown preset {preset!r}; expected one of {PRESET_NAMES}")
        if tb is None or st is None:
            raise ConfigError("a preset needs both a testbed and a study")
        values = preset_values(preset, tb, st)
    values = _deep_merge(values, file_values)
    if testbed:
        values["testbed"] = testbed
    if study:
        values["study"] = study
    if env.get(SEED_ENV):
        try:
            values["master_seed"] = int(env[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer") from None
    for item in overrides:
        values = _deep_merge(values, parse_override(item))
    if seed is not None:
        values["master_seed"] = seed
    return from_mapping(values)


def to_mapping(cfg: ExperimentConfig) -> dict[str, Any]:
    """Plain-data snapshot that :func:`from_mapping` turns back into ``cfg``."""
    out: dict[str, Any] = {}
    for f in dataclasses.fields(cfg):
        val = getattr(cfg, f.name)
        if f.name == "gbm":
            val = dataclasses.asdict(val)
        elif f.name == "heat":
            val = {"t_end": val.t_end, "c_mu": val.c_mu, "eta": val.eta, "x0_kind": val.x0_kind.value}
        elif f.name in ("testbed", "study"):
            val = val.value
        elif f.name == "levels":
            val = list(val)
        out[f.name] = val
    return out


def dumps(cfg: ExperimentConfig) -> str:
    return json.dumps(to_mapping(cfg), indent=2, sort_keys=True)
