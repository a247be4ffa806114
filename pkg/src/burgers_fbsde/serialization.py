"""File formats for fields, reports, and characteristic path dumps.

Two field representations:

* CSV (human-readable): one row per node with integer grid indices, node
  coordinates, and component values, printed at %.17g so float64 values
  survive a decimal round trip.
* JSON header + raw little-endian float64 blob: bit-exact round trips,
  used for run outputs and the determinism checks.

Reports are canonical JSON (sorted keys, 2-space indent, trailing newline)
so identical results produce identical bytes.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .grid import GridSpec, PeriodicField, SpaceTimeField

__all__ = [
    "write_json",
    "field_to_csv",
    "field_from_csv",
    "save_field",
    "save_spacetime_field",
    "load_field",
    "load_spacetime_field",
    "paths_to_csv",
    "ensure_run_dir",
]

FIELD_FORMAT = "torus-field-v1"
SPACETIME_FORMAT = "spacetime-field-v1"


def write_json(obj, path) -> None:
    """Canonical JSON: sorted keys, indent 2, newline-terminated."""
    path = Path(path)
    text = json.dumps(obj, sort_keys=True, indent=2)
    path.write_text(text + "\n")


def field_to_csv(field: PeriodicField, path) -> None:
    grid = field.grid
    idx = np.indices(grid.shape).reshape(grid.dim, -1).T
    coords = grid.nodes().reshape(-1, grid.dim)
    comps = field.values.reshape(-1, grid.dim)
    header = ",".join(
        [f"i{a}" for a in range(grid.dim)]
        + [f"theta{a}" for a in range(grid.dim)]
        + [f"u{c}" for c in range(grid.dim)]
    )
    table = np.hstack([idx.astype(np.float64), coords, comps])
    fmt = ["%d"] * grid.dim + ["%.17g"] * (2 * grid.dim)
    np.savetxt(path, table, fmt=fmt, delimiter=",", header=header, comments="")


def field_from_csv(path, grid: GridSpec) -> PeriodicField:
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    idx = table[:, : grid.dim].astype(np.int64)
    comps = table[:, 2 * grid.dim :]
    values = np.zeros(grid.shape + (grid.dim,))
    values[tuple(idx.T)] = comps
    return PeriodicField(grid, values)


def _blob_path(json_path: Path) -> Path:
    return json_path.with_suffix(".f8")


def save_field(field: PeriodicField, json_path) -> None:
    """Header JSON plus a sibling .f8 blob of C-ordered little-endian values."""
    json_path = Path(json_path)
    blob = _blob_path(json_path)
    header = {
        "format": FIELD_FORMAT,
        "dim": field.grid.dim,
        "points_per_axis": field.grid.points_per_axis,
        "blob": blob.name,
        "dtype": "<f8",
        "order": "C",
    }
    write_json(header, json_path)
    blob.write_bytes(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def save_spacetime_field(field: SpaceTimeField, json_path) -> None:
    """Like save_field; the blob stores the time grid then the slice values."""
    json_path = Path(json_path)
    blob = _blob_path(json_path)
    header = {
        "format": SPACETIME_FORMAT,
        "dim": field.grid.dim,
        "points_per_axis": field.grid.points_per_axis,
        "num_times": len(field.times),
        "blob": blob.name,
        "dtype": "<f8",
        "order": "C",
        "layout": "times-then-values",
    }
    write_json(header, json_path)
    payload = (
        np.ascontiguousarray(field.times, dtype="<f8").tobytes()
        + np.ascontiguousarray(field.values, dtype="<f8").tobytes()
    )
    blob.write_bytes(payload)


def _read_header(json_path: Path) -> dict:
    header = json.loads(json_path.read_text())
    if header.get("dtype") != "<f8" or header.get("order") != "C":
        raise ValueError(f"unsupported field encoding in {json_path}")
    return header


def load_field(json_path) -> PeriodicField:
    json_path = Path(json_path)
    header = _read_header(json_path)
    if header.get("format") != FIELD_FORMAT:
        raise ValueError(f"{json_path} is not a {FIELD_FORMAT} file")
    grid = GridSpec(header["dim"], header["points_per_axis"])
    raw = np.frombuffer(
        (json_path.parent / header["blob"]).read_bytes(), dtype="<f8"
    )
    values = raw.reshape(grid.shape + (grid.dim,))
    return PeriodicField(grid, values)


def load_spacetime_field(json_path) -> SpaceTimeField:
    json_path = Path(json_path)
    header = _read_header(json_path)
    if header.get("format") != SPACETIME_FORMAT:
        raise ValueError(f"{json_path} is not a {SPACETIME_FORMAT} file")
    grid = GridSpec(header["dim"], header["points_per_axis"])
    num_times = int(header["num_times"])
    raw = np.frombuffer(
        (json_path.parent / header["blob"]).read_bytes(), dtype="<f8"
    )
    times = raw[:num_times]
    values = raw[num_times:].reshape((num_times,) + grid.shape + (grid.dim,))
    return SpaceTimeField(grid, times, values)


def paths_to_csv(
    times: np.ndarray,
    positions: np.ndarray,
    path,
    start_index: int = 0,
    max_paths: int = 64,
) -> None:
    """Dump a small characteristic ensemble as CSV.

    Args:
        times: (num_steps + 1,) time points.
        positions: (num_steps + 1, num_paths, dim) path positions.
        path: output file.
        start_index: index of the launch time within the run's time grid.
        max_paths: refuse to dump more paths than this (guards runaway files).
    """
    num_paths = positions.shape[1]
    if num_paths > max_paths:
        raise ValueError(
            f"refusing to dump {num_paths} paths (limit {max_paths}); "
            "raise max_paths explicitly for larger ensembles"
        )
    dim = positions.shape[2]
    header = ",".join(
        ["path", "start_index", "step", "time"] + [f"x{a}" for a in range(dim)]
    )
    rows = []
    for m in range(num_paths):
        for j, t in enumerate(times):
            rows.append(
                [float(m), float(start_index), float(j), float(t)]
                + [positions[j, m, a] for a in range(dim)]
            )
    fmt = ["%d", "%d", "%d", "%.17g"] + ["%.17g"] * dim
    np.savetxt(
        path, np.asarray(rows), fmt=fmt, delimiter=",", header=header, comments=""
    )


def ensure_run_dir(path) -> Path:
    """Create an output directory (parents included) and return it."""
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p
