"""Scenario configuration: JSON files, environment overrides and CLI flags.

Precedence, lowest to highest: built-in defaults for the scenario kind, the
JSON file, ``PERMDECOMP_*`` environment variables, command-line flags.
Unknown keys anywhere in a file are rejected.
"""
from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

KINDS = ("gaussian", "scattering", "custom-tree", "verify")
ENV_PREFIX = "PERMDECOMP_"
ENV_KEYS = {"OUT_DIR": "out_dir", "SEED": "seed", "GRID_N": "grid_n", "T_MAX": "t_max"}


@dataclass
class GridConfig:
    n_cells: int = 4096
    box_length: float = 512.0
    origin_offset: float = 0.0


@dataclass
class PacketConfig:
    p0: float = 10.0
    sigma_p: float = 1.0
    x0: float = 0.0
    mass: float = 1.0
    hbar: float = 1.0


@dataclass
class TimeConfig:
    t_max: float = 12.0
    n_samples: int = 121


@dataclass
class Thresholds:
    branch_threshold: float = 1e-3
    analytic_tol: float = 5e-3
    asymptote_tol: float = 1e-3
    monotone_tol: float = 1e-12
    w_momentum_rel_tol: float = 0.05
    w_momentum_reference: float | None = None
    probability_tol: float = 1e-6
    trajectory_cells: float = 2.0
    f_closed_form_tol: float = 1e-12
    final_w: float = 0.05
    momentum_constant_tol: float = 1e-10
    diagnostic_max: float = 1e-2
    monotone_jitter: float = 1e-3


@dataclass
class ScatteringConfig:
    lanes: list = field(default_factory=lambda: ["free", "well", "diagnostic"])
    well_depth: float = 0.7
    well_p0: float = 1.0
    well_sigma_p: float = 1.0
    well_t_max: float = 120.0
    well_n_samples: int = 25
    max_dt: float = 0.05
    diagnostic_p0: float = 4.0
    diagnostic_t_max: float = 100.0
    diagnostic_n_samples: int = 11


@dataclass
class VerifyConfig:
    finite_trials: int = 1000
    tree_trials: int = 500
    partition_trials: int = 200
    inject_fault: str | None = None


@dataclass
class CustomTreeConfig:
    packets: list = field(default_factory=lambda: [{"p0": 10.0, "x0": 0.0},
                                                   {"p0": -10.0, "x0": 0.0}])
    stages: list = field(default_factory=lambda: [{"t": 2.0, "cuts": [0.0]},
                                                  {"t": 6.0, "cuts": [-40.0, 0.0, 40.0]}])


@dataclass
class ScenarioConfig:
    scenario: str
    seed: int = 0
    out_dir: str = ""
    fail_fast: bool = False
    grid: GridConfig = field(default_factory=GridConfig)
    packet: PacketConfig = field(default_factory=PacketConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    thresholds: Thresholds = field(default_factory=Thresholds)
    scattering: ScatteringConfig = field(default_factory=ScatteringConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    custom_tree: CustomTreeConfig = field(default_factory=CustomTreeConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def defaults(kind: str) -> ScenarioConfig:
    """Built-in configuration for a scenario kind."""
    if kind not in KINDS:
        raise ConfigError(f"unknown scenario {kind!r}; choose from {', '.join(KINDS)}")
    cfg = ScenarioConfig(scenario=kind, out_dir=f"runs/{kind}")
    if kind == "gaussian":
        cfg.thresholds.w_momentum_reference = 4.6e-23
    elif kind == "scattering":
        cfg.grid = GridConfig(16384, 2048.0)
        cfg.packet = PacketConfig(p0=2.0)
        cfg.time = TimeConfig(150.0, 61)
    elif kind == "custom-tree":
        cfg.time = TimeConfig(10.0, 51)
    return cfg


def _merge(obj, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be a JSON object")
    known = {f.name: f for f in dataclasses.fields(obj)}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown key {where + key!r}; allowed: {', '.join(sorted(known))}")
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current):
            _merge(current, value, f"{where}{key}.")
        else:
            setattr(obj, key, _coerce(value, current, where + key, str(known[key].type)))


def _coerce(value, current, name: str, annotation: str = ""):
    if value is None and "None" in annotation:
        return None
    if current is None and annotation.startswith("float"):
        current = 0.0
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be true or false")
        return value
    if isinstance(current, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer")
        return value
    if isinstance(current, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be a number")
        return float(value)
    if isinstance(current, list):
        if not isinstance(value, list):
            raise ConfigError(f"{name} must be a list")
        return value
    if value is not None and not isinstance(value, str):
        raise ConfigError(f"{name} must be a string or null")
    return value


def _numbers(obj, where=""):
    for f in dataclasses.fields(obj):
        v = getattr(obj, f.name)
        if dataclasses.is_dataclass(v):
            yield from _numbers(v, f"{where}{f.name}.")
        elif isinstance(v, (int, float)) and not isinstance(v, bool):
            yield where + f.name, v


def validate(cfg: ScenarioConfig) -> ScenarioConfig:
    for name, v in _numbers(cfg):
        if not math.isfinite(v):
            raise ConfigError(f"{name} must be finite")
    if cfg.time.n_samples < 2:
        raise ConfigError("time.n_samples must be at least 2")
    if cfg.time.t_max <= 0:
        raise ConfigError("time.t_max must be positive")
    if cfg.packet.sigma_p <= 0 or cfg.packet.mass <= 0 or cfg.packet.hbar <= 0:
        raise ConfigError("packet.sigma_p, packet.mass and packet.hbar must be positive")
    if cfg.seed < 0:
        raise ConfigError("seed must be nonnegative")
    unknown = set(cfg.scattering.lanes) - {"free", "well", "diagnostic"}
    if unknown:
        raise ConfigError(f"unknown scattering lanes {sorted(unknown)}")
    if min(cfg.verify.finite_trials, cfg.verify.tree_trials, cfg.verify.partition_trials) < 0:
        raise ConfigError("trial counts must be nonnegative")
    for stage in cfg.custom_tree.stages:
        if not isinstance(stage, dict) or set(stage) != {"t", "cuts"}:
            raise ConfigError("custom_tree.stages entries need exactly the keys 't' and 'cuts'")
    for packet in cfg.custom_tree.packets:
        if not isinstance(packet, dict) or not set(packet) <= {"p0", "x0", "amplitude"}:
            raise ConfigError("custom_tree.packets entries take keys p0, x0, amplitude")
    return cfg


def load_file(path) -> ScenarioConfig:
    """Read a scenario file; its ``scenario`` key selects the defaults it overrides."""
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or "scenario" not in data:
        raise ConfigError(f"config {path} needs a top-level 'scenario' key")
    cfg = defaults(data["scenario"])
    _merge(cfg, data, "")
    return cfg


def env_overrides(environ=None) -> dict:
    """``PERMDECOMP_OUT_DIR``, ``_SEED``, ``_GRID_N`` and ``_T_MAX`` as override values."""
    environ = os.environ if environ is None else environ
    out = {}
    for suffix, key in ENV_KEYS.items():
        raw = environ.get(ENV_PREFIX + suffix)
        if raw is None or raw == "":
            continue
        try:
            out[key] = raw if key == "out_dir" else (float(raw) if key == "t_max" else int(raw))
        except ValueError as exc:
            raise ConfigError(f"{ENV_PREFIX + suffix}={raw!r} is not a valid {key}") from exc
    return out


def apply_overrides(cfg: ScenarioConfig, overrides: dict) -> ScenarioConfig:
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "out_dir":
            cfg.out_dir = str(value)
        elif key == "seed":
            cfg.seed = int(value)
        elif key == "grid_n":
            cfg.grid.n_cells = int(value)
        elif key == "t_max":
            cfg.time.t_max = float(value)
        elif key == "fail_fast":
            cfg.fail_fast = bool(value)
        elif key == "trials":
            cfg.verify.finite_trials = cfg.verify.tree_trials = cfg.verify.partition_trials = \
                int(value)
        elif key == "inject_fault":
            cfg.verify.inject_fault = str(value)
        else:
            raise ConfigError(f"unknown override {key!r}")
    return cfg


def resolve(kind: str | None = None, path=None, cli: dict | None = None,
            environ=None) -> ScenarioConfig:
    """Defaults < file < environment < command line."""
    if path is not None:
        cfg = load_file(path)
        if kind is not None and cfg.scenario != kind:
            raise ConfigError(f"config {path} describes {cfg.scenario!r}, not {kind!r}")
    elif kind is not None:
        cfg = defaults(kind)
    else:
        raise ConfigError("either a scenario kind or a config file is required")
    apply_overrides(cfg, env_overrides(environ))
    apply_overrides(cfg, cli or {})
    return validate(cfg)
