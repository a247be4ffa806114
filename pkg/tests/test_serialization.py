"""Tests for on-disk formats.

Validates bitwise round trips of the JSON-plus-blob field files, the CSV
table layout, format guards on load, and the path dump limits.
"""

import json

import numpy as np
import pytest

from burgers_fbsde import (
    GridSpec,
    PeriodicField,
    SpaceTimeField,
    field_from_csv,
    field_to_csv,
    load_field,
    load_spacetime_field,
    paths_to_csv,
    save_field,
    save_spacetime_field,
    uniform_times,
    write_json,
)
from burgers_fbsde.serialization import ensure_run_dir


class TestJsonWriter:
    def test_canonical_layout(self, tmp_path):
        """Sorted keys and a trailing newline make byte-stable files."""
        p = tmp_path / "a.json"
        write_json({"b": 1, "a": [1, 2]}, p)
        text = p.read_text()
        assert text.endswith("\n")
        assert text.index('"a"') < text.index('"b"')
        assert json.loads(text) == {"b": 1, "a": [1, 2]}

    def test_identical_bytes_for_identical_objects(self, tmp_path):
        p1, p2 = tmp_path / "x.json", tmp_path / "y.json"
        obj = {"k": 3, "vals": [0.1, 0.2]}
        write_json(obj, p1)
        write_json(dict(reversed(list(obj.items()))), p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestFieldBlob:
    def test_round_trip_bitwise(self, tmp_path):
        np.random.seed(0)
        grid = GridSpec(1, 16)
        f = PeriodicField(grid, np.random.randn(16))
        save_field(f, tmp_path / "f.json")
        back = load_field(tmp_path / "f.json")
        assert back.grid == grid
        assert np.array_equal(back.values, f.values)

    def test_round_trip_2d(self, tmp_path):
        np.random.seed(1)
        grid = GridSpec(2, 8)
        f = PeriodicField(grid, np.random.randn(8, 8, 2))
        save_field(f, tmp_path / "f.json")
        assert np.array_equal(load_field(tmp_path / "f.json").values, f.values)

    def test_header_content(self, tmp_path):
        grid = GridSpec(1, 16)
        save_field(PeriodicField.zeros(grid), tmp_path / "f.json")
        header = json.loads((tmp_path / "f.json").read_text())
        assert header["format"] == "torus-field-v1"
        assert header["dtype"] == "<f8"
        assert header["blob"] == "f.f8"
        assert (tmp_path / "f.f8").exists()

    def test_wrong_format_rejected(self, tmp_path):
        grid = GridSpec(1, 16)
        f = SpaceTimeField.zeros(grid, uniform_times(1.0, 2))
        save_spacetime_field(f, tmp_path / "st.json")
        with pytest.raises(ValueError):
            load_field(tmp_path / "st.json")
        save_field(PeriodicField.zeros(grid), tmp_path / "f.json")
        with pytest.raises(ValueError):
            load_spacetime_field(tmp_path / "f.json")


class TestSpacetimeBlob:
    def test_round_trip_bitwise(self, tmp_path):
        np.random.seed(2)
        grid = GridSpec(1, 8)
        t = uniform_times(0.5, 4)
        f = SpaceTimeField(grid, t, np.random.randn(5, 8, 1))
        save_spacetime_field(f, tmp_path / "y.json")
        back = load_spacetime_field(tmp_path / "y.json")
        assert np.array_equal(back.times, f.times)
        assert np.array_equal(back.values, f.values)

    def test_blob_stores_times_then_values(self, tmp_path):
        grid = GridSpec(1, 8)
        t = uniform_times(0.5, 2)
        f = SpaceTimeField.zeros(grid, t)
        save_spacetime_field(f, tmp_path / "y.json")
        raw = np.frombuffer((tmp_path / "y.f8").read_bytes(), dtype="<f8")
        assert np.array_equal(raw[:3], t)
        assert raw.size == 3 + 3 * 8


class TestFieldCsv:
    def test_round_trip(self, tmp_path):
        np.random.seed(3)
        grid = GridSpec(1, 16)
        f = PeriodicField(grid, np.random.randn(16))
        field_to_csv(f, tmp_path / "f.csv")
        back = field_from_csv(tmp_path / "f.csv", grid)
        assert np.max(np.abs(back.values - f.values)) < 1e-15

    def test_header_names_columns(self, tmp_path):
        grid = GridSpec(2, 8)
        field_to_csv(PeriodicField.zeros(grid), tmp_path / "f.csv")
        first = (tmp_path / "f.csv").read_text().splitlines()[0]
        assert first == "i0,i1,theta0,theta1,u0,u1"

    def test_17_digits_preserve_doubles(self, tmp_path):
        """%.17g survives a text round trip exactly."""
        grid = GridSpec(1, 8)
        vals = np.array([np.pi, 1.0 / 3.0, 1e-300, 0.1, -2.5e17, 0.0, 1.0, -1.0])
        f = PeriodicField(grid, vals)
        field_to_csv(f, tmp_path / "f.csv")
        back = field_from_csv(tmp_path / "f.csv", grid)
        assert np.array_equal(back.values, f.values)


class TestPathsCsv:
    def test_layout(self, tmp_path):
        times = uniform_times(1.0, 2)
        positions = np.zeros((3, 2, 1))
        positions[:, 1, 0] = [1.0, 2.0, 3.0]
        paths_to_csv(times, positions, tmp_path / "p.csv", start_index=4)
        lines = (tmp_path / "p.csv").read_text().splitlines()
        assert lines[0] == "path,start_index,step,time,x0"
        assert len(lines) == 1 + 2 * 3
        assert lines[4].startswith("1,4,0,0,")

    def test_refuses_large_ensembles(self, tmp_path):
        times = uniform_times(1.0, 1)
        positions = np.zeros((2, 100, 1))
        with pytest.raises(ValueError):
            paths_to_csv(times, positions, tmp_path / "p.csv")
        paths_to_csv(times, positions, tmp_path / "p.csv", max_paths=100)
        assert (tmp_path / "p.csv").exists()


class TestEnsureRunDir:
    def test_creates_nested(self, tmp_path):
        p = ensure_run_dir(tmp_path / "a" / "b")
        assert p.is_dir()
        # idempotent
        assert ensure_run_dir(tmp_path / "a" / "b") == p
