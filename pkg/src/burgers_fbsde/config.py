"""Experiment configuration: strict schema, defaults, canonical dumps.

A config is a YAML tree with six sections (problem, grid, mc, picard,
oracle, outputs). Parsing is strict: unknown keys are rejected with the
dotted path that names them, so a typo never silently falls back to a
default. The canonical dump is deterministic, which makes configs
round-trip byte for byte and keeps run artifacts reproducible.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np
import yaml

from .grid import GridSpec, PeriodicField, SpaceTimeField, uniform_times
from .oracle import OracleConfig
from .picard import MCConfig
from .presets import PRESET_KINDS, forcing_from_spec, terminal_from_spec

__all__ = ["ConfigError", "ExperimentConfig", "DEFAULT_CONFIG"]


class ConfigError(Exception):
    """Invalid configuration; the message names the offending key path."""


DEFAULT_CONFIG = {
    "problem": {
        "n": 1,
        "nu": 0.1,
        "T": 0.5,
        "h": {"kind": "sine", "amplitude": 0.5, "wavenumber": 1},
        "F": {"kind": "zero"},
    },
    "grid": {"N": 64, "J": 64},
    "mc": {
        "M": 1000,
        "seed": 0,
        "mode": "independent",
        "antithetic": False,
        "engine": "auto",
        "restart_stride": 1,
    },
    "picard": {"tol": 5e-3, "max_iter": 8},
    "oracle": {"dt": 1e-3, "dealias": True},
    "outputs": {"directory": "runs/experiment", "formats": ["json", "csv"]},
}

_PRESET_KEYS = {
    "zero": set(),
    "constant": {"value"},
    "sine": {"amplitude", "wavenumber"},
    "sine_sum": {"terms"},
    "file": {"path"},
}


def _fail(path: str, message: str):
    raise ConfigError(f"{path}: {message}")


def _check_int(value, path, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        _fail(path, f"must be >= {minimum}, got {value}")
    return int(value)


def _check_number(value, path, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, f"expected a number, got {value!r}")
    value = float(value)
    if positive and not value > 0:
        _fail(path, f"must be > 0, got {value}")
    if not np.isfinite(value):
        _fail(path, f"must be finite, got {value}")
    return value


def _check_bool(value, path):
    if not isinstance(value, bool):
        _fail(path, f"expected true/false, got {value!r}")
    return value


def _check_choice(value, path, choices):
    if value not in choices:
        _fail(path, f"must be one of {sorted(choices)}, got {value!r}")
    return value


def _check_preset(spec, path):
    if not isinstance(spec, dict):
        _fail(path, "expected a preset mapping with a 'kind'")
    if "kind" not in spec:
        _fail(f"{path}.kind", "missing preset kind")
    kind = spec["kind"]
    if kind not in PRESET_KINDS:
        _fail(f"{path}.kind", f"unknown preset '{kind}' (choose from {PRESET_KINDS})")
    allowed = _PRESET_KEYS[kind]
    for key in spec:
        if key != "kind" and key not in allowed:
            _fail(f"{path}.{key}", f"unknown key for preset '{kind}'")
    if kind == "constant" and "value" in spec:
        value = spec["value"]
        entries = value if isinstance(value, list) else [value]
        for i, entry in enumerate(entries):
            _check_number(entry, f"{path}.value[{i}]")
    if kind == "sine":
        if "amplitude" in spec:
            _check_number(spec["amplitude"], f"{path}.amplitude")
        if "wavenumber" in spec:
            _check_int(spec["wavenumber"], f"{path}.wavenumber")
    if kind == "sine_sum":
        terms = spec.get("terms", [])
        if not isinstance(terms, list):
            _fail(f"{path}.terms", "expected a list of sine terms")
        for i, term in enumerate(terms):
            if not isinstance(term, dict):
                _fail(f"{path}.terms[{i}]", "expected a mapping")
            for key in term:
                if key not in ("amplitude", "wavenumber"):
                    _fail(f"{path}.terms[{i}].{key}", "unknown sine-term key")
            _check_number(term.get("amplitude", 0.0), f"{path}.terms[{i}].amplitude")
            _check_int(term.get("wavenumber", 1), f"{path}.terms[{i}].wavenumber")
    if kind == "file":
        if "path" not in spec:
            _fail(f"{path}.path", "file preset needs a path")
        if not isinstance(spec["path"], str):
            _fail(f"{path}.path", "expected a string path")
    return copy.deepcopy(spec)


def _merge(data: dict) -> dict:
    merged = copy.deepcopy(DEFAULT_CONFIG)
    if data is None:
        return merged
    if not isinstance(data, dict):
        raise ConfigError("top level: expected a mapping of sections")
    for section, body in data.items():
        if section not in merged:
            _fail(section, "unknown configuration section")
        if body is None:
            continue
        if not isinstance(body, dict):
            _fail(section, "expected a mapping")
        for key, value in body.items():
            if key not in merged[section]:
                _fail(f"{section}.{key}", "unknown configuration key")
            merged[section][key] = copy.deepcopy(value)
    return merged


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description.

    Sections are stored as plain dicts so the canonical YAML dump is a
    faithful image of the object; accessor methods materialize the typed
    objects the solvers consume.
    """

    problem: dict
    grid: dict
    mc: dict
    picard: dict
    oracle: dict
    outputs: dict

    @classmethod
    def from_dict(cls, data: dict | None) -> "ExperimentConfig":
        tree = _merge(data)

        p = tree["problem"]
        _check_int(p["n"], "problem.n", minimum=1)
        _check_number(p["nu"], "problem.nu", positive=True)
        _check_number(p["T"], "problem.T", positive=True)
        p["h"] = _check_preset(p["h"], "problem.h")
        p["F"] = _check_preset(p["F"], "problem.F")

        g = tree["grid"]
        n_pts = _check_int(g["N"], "grid.N", minimum=8)
        if n_pts % 2:
            _fail("grid.N", f"must be even, got {n_pts}")
        _check_int(g["J"], "grid.J", minimum=2)

        m = tree["mc"]
        _check_int(m["M"], "mc.M", minimum=1)
        _check_int(m["seed"], "mc.seed", minimum=0)
        if m["seed"] >= 2**64:
            _fail("mc.seed", "must fit in 64 bits")
        _check_choice(m["mode"], "mc.mode", ("independent", "common"))
        _check_bool(m["antithetic"], "mc.antithetic")
        if m["antithetic"] and m["M"] % 2:
            _fail("mc.antithetic", "requires an even path count mc.M")
        _check_choice(m["engine"], "mc.engine", ("auto", "numba", "numpy"))
        _check_int(m["restart_stride"], "mc.restart_stride", minimum=1)

        pi = tree["picard"]
        _check_number(pi["tol"], "picard.tol", positive=True)
        _check_int(pi["max_iter"], "picard.max_iter", minimum=1)

        o = tree["oracle"]
        _check_number(o["dt"], "oracle.dt", positive=True)
        _check_bool(o["dealias"], "oracle.dealias")

        out = tree["outputs"]
        if not isinstance(out["directory"], str) or not out["directory"]:
            _fail("outputs.directory", "expected a non-empty string")
        formats = out["formats"]
        if not isinstance(formats, list):
            _fail("outputs.formats", "expected a list")
        for i, fmt in enumerate(formats):
            _check_choice(fmt, f"outputs.formats[{i}]", ("json", "csv"))
        if len(set(formats)) != len(formats):
            _fail("outputs.formats", "duplicate entries")

        return cls(**tree)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = yaml.safe_load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file is not valid YAML: {exc}")
        return cls.from_dict(data)

    def as_dict(self) -> dict:
        return {
            "problem": copy.deepcopy(self.problem),
            "grid": copy.deepcopy(self.grid),
            "mc": copy.deepcopy(self.mc),
            "picard": copy.deepcopy(self.picard),
            "oracle": copy.deepcopy(self.oracle),
            "outputs": copy.deepcopy(self.outputs),
        }

    def to_yaml(self) -> str:
        return yaml.safe_dump(
            self.as_dict(), sort_keys=True, default_flow_style=False
        )

    def with_overrides(self, **sections) -> "ExperimentConfig":
        """New config with per-section key overrides, revalidated."""
        tree = self.as_dict()
        for section, patch in sections.items():
            if section not in tree:
                _fail(section, "unknown configuration section")
            tree[section].update(patch)
        return ExperimentConfig.from_dict(tree)

    # typed accessors

    def grid_spec(self) -> GridSpec:
        return GridSpec(dim=self.problem["n"], points_per_axis=self.grid["N"])

    def times(self) -> np.ndarray:
        return uniform_times(self.problem["T"], self.grid["J"])

    def terminal(self) -> PeriodicField:
        return terminal_from_spec(self.grid_spec(), self.problem["h"])

    def forcing(self) -> SpaceTimeField:
        return forcing_from_spec(self.grid_spec(), self.times(), self.problem["F"])

    def forcing_on(self, times: np.ndarray) -> SpaceTimeField:
        """Forcing preset materialized on an arbitrary time grid."""
        return forcing_from_spec(self.grid_spec(), np.asarray(times), self.problem["F"])

    def mc_config(self) -> MCConfig:
        m = self.mc
        return MCConfig(
            num_paths=m["M"],
            seed=m["seed"],
            mode=m["mode"],
            antithetic=m["antithetic"],
            engine=m["engine"],
            restart_stride=m["restart_stride"],
        )

    def oracle_config(self) -> OracleConfig:
        return OracleConfig(
            grid=self.grid_spec(),
            nu=self.problem["nu"],
            T=self.problem["T"],
            dt=self.oracle["dt"],
            dealias=self.oracle["dealias"],
        )

    def oracle_times(self) -> np.ndarray:
        cfg = self.oracle_config()
        return np.linspace(0.0, cfg.T, cfg.num_steps + 1)
