"""Built-in function library for terminal and forcing data.

Problem data enters experiments as named presets with numeric
parameters, or as tabulated grid files, never as parsed expressions;
that keeps configs portable and the expected values exact. A preset
spec is a mapping with a "kind" key:

    {"kind": "zero"}
    {"kind": "constant", "value": 0.3}            # scalar or per-component list
    {"kind": "sine", "amplitude": 0.5, "wavenumber": 1}
    {"kind": "sine_sum", "terms": [{"amplitude": a, "wavenumber": k}, ...]}
    {"kind": "file", "path": "field.json"}

The sine kinds set component i to the sum of a * sin(k * theta_i), the
same axis-aligned lift in every dimension. Forcing specs reuse the same
library and are constant in time; a tabulated forcing file may instead
hold a full space-time history on the matching time grid.
"""

from __future__ import annotations

import numpy as np

from .grid import GridSpec, PeriodicField, SpaceTimeField
from .serialization import load_field, load_spacetime_field

__all__ = ["PRESET_KINDS", "terminal_from_spec", "forcing_from_spec"]

PRESET_KINDS = ("zero", "constant", "sine", "sine_sum", "file")


def _require_kind(spec: dict, where: str) -> str:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValueError(f"{where}: preset spec must be a mapping with a 'kind'")
    kind = spec["kind"]
    if kind not in PRESET_KINDS:
        raise ValueError(
            f"{where}: unknown preset kind '{kind}' (choose from {PRESET_KINDS})"
        )
    return kind


def _check_keys(spec: dict, allowed: set, where: str) -> None:
    extra = set(spec) - allowed - {"kind"}
    if extra:
        raise ValueError(f"{where}: unexpected preset keys {sorted(extra)}")


def _constant_values(grid: GridSpec, value, where: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full(grid.dim, float(arr))
    if arr.shape != (grid.dim,):
        raise ValueError(
            f"{where}: constant value must be a scalar or length-{grid.dim} list"
        )
    out = np.empty(grid.shape + (grid.dim,))
    out[...] = arr
    return out


def _sine_values(grid: GridSpec, terms, where: str) -> np.ndarray:
    nodes = grid.nodes()
    out = np.zeros(grid.shape + (grid.dim,))
    for term in terms:
        if not isinstance(term, dict) or set(term) - {"amplitude", "wavenumber"}:
            raise ValueError(
                f"{where}: sine terms need exactly amplitude and wavenumber"
            )
        a = float(term["amplitude"])
        k = int(term["wavenumber"])
        out += a * np.sin(k * nodes)
    return out


def _field_from_library(grid: GridSpec, spec: dict, where: str) -> PeriodicField:
    kind = _require_kind(spec, where)
    if kind == "zero":
        _check_keys(spec, set(), where)
        return PeriodicField.zeros(grid)
    if kind == "constant":
        _check_keys(spec, {"value"}, where)
        return PeriodicField(grid, _constant_values(grid, spec.get("value", 0.0), where))
    if kind == "sine":
        _check_keys(spec, {"amplitude", "wavenumber"}, where)
        terms = [{
            "amplitude": spec.get("amplitude", 1.0),
            "wavenumber": spec.get("wavenumber", 1),
        }]
        return PeriodicField(grid, _sine_values(grid, terms, where))
    if kind == "sine_sum":
        _check_keys(spec, {"terms"}, where)
        return PeriodicField(grid, _sine_values(grid, spec.get("terms", []), where))
    _check_keys(spec, {"path"}, where)
    field = load_field(spec["path"])
    if field.grid != grid:
        raise ValueError(f"{where}: tabulated file grid does not match the config")
    return field


def terminal_from_spec(grid: GridSpec, spec: dict) -> PeriodicField:
    """Materialize a terminal-condition preset on the grid."""
    return _field_from_library(grid, spec, "terminal preset")


def forcing_from_spec(
    grid: GridSpec, times: np.ndarray, spec: dict
) -> SpaceTimeField:
    """Materialize a forcing preset on the grid and time slices.

    Library presets are constant in time; a file preset may carry either
    a single field (lifted to all slices) or a full space-time history
    whose times must match the requested grid.
    """
    where = "forcing preset"
    kind = _require_kind(spec, where)
    if kind == "file":
        _check_keys(spec, {"path"}, where)
        path = str(spec["path"])
        try:
            history = load_spacetime_field(path)
        except ValueError:
            history = None
        if history is not None:
            if history.grid != grid:
                raise ValueError(
                    f"{where}: tabulated file grid does not match the config"
                )
            if len(history.times) != len(times) or np.max(
                np.abs(history.times - times)
            ) > 1e-12:
                raise ValueError(
                    f"{where}: tabulated time grid does not match the config"
                )
            return history
        snapshot = load_field(path)
        if snapshot.grid != grid:
            raise ValueError(f"{where}: tabulated file grid does not match the config")
        return SpaceTimeField.constant_in_time(snapshot, times)
    snapshot = _field_from_library(grid, spec, where)
    return SpaceTimeField.constant_in_time(snapshot, times)
