"""Tests for the problem-data preset library.

Validates each preset kind, the per-component sine lift, scalar versus
per-component constants, tabulated file inputs, and the time handling
of forcing presets.
"""

import numpy as np
import pytest

from burgers_fbsde import (
    GridSpec,
    PeriodicField,
    SpaceTimeField,
    forcing_from_spec,
    save_field,
    save_spacetime_field,
    terminal_from_spec,
    uniform_times,
)


class TestLibraryKinds:
    def test_zero(self):
        grid = GridSpec(1, 16)
        f = terminal_from_spec(grid, {"kind": "zero"})
        assert np.all(f.values == 0.0)

    def test_constant_scalar(self):
        grid = GridSpec(2, 8)
        f = terminal_from_spec(grid, {"kind": "constant", "value": 1.25})
        assert np.all(f.values == 1.25)

    def test_constant_per_component(self):
        grid = GridSpec(2, 8)
        f = terminal_from_spec(
            grid, {"kind": "constant", "value": [1.0, -2.0]}
        )
        assert np.all(f.component(0) == 1.0)
        assert np.all(f.component(1) == -2.0)

    def test_constant_wrong_length(self):
        grid = GridSpec(1, 8)
        with pytest.raises(ValueError):
            terminal_from_spec(
                grid, {"kind": "constant", "value": [1.0, 2.0]}
            )

    def test_sine(self):
        grid = GridSpec(1, 32)
        x = grid.axis_coordinates()
        f = terminal_from_spec(
            grid, {"kind": "sine", "amplitude": 0.5, "wavenumber": 2}
        )
        assert np.allclose(f.values[:, 0], 0.5 * np.sin(2 * x), atol=1e-14)

    def test_sine_lift_per_component(self):
        """Component i samples theta_i; components do not mix."""
        grid = GridSpec(2, 16)
        pts = grid.nodes()
        f = terminal_from_spec(
            grid, {"kind": "sine", "amplitude": 1.0, "wavenumber": 1}
        )
        assert np.allclose(f.component(0), np.sin(pts[..., 0]), atol=1e-14)
        assert np.allclose(f.component(1), np.sin(pts[..., 1]), atol=1e-14)

    def test_sine_sum(self):
        grid = GridSpec(1, 32)
        x = grid.axis_coordinates()
        f = terminal_from_spec(
            grid,
            {
                "kind": "sine_sum",
                "terms": [
                    {"amplitude": 0.5, "wavenumber": 1},
                    {"amplitude": -0.2, "wavenumber": 3},
                ],
            },
        )
        expected = 0.5 * np.sin(x) - 0.2 * np.sin(3 * x)
        assert np.allclose(f.values[:, 0], expected, atol=1e-14)

    def test_unknown_kind_rejected(self):
        grid = GridSpec(1, 8)
        with pytest.raises(ValueError, match="terminal preset"):
            terminal_from_spec(grid, {"kind": "random"})

    def test_unexpected_keys_rejected(self):
        grid = GridSpec(1, 8)
        with pytest.raises(ValueError):
            terminal_from_spec(grid, {"kind": "zero", "amplitude": 1.0})


class TestFilePresets:
    def test_terminal_from_file_round_trip(self, tmp_path):
        np.random.seed(0)
        grid = GridSpec(1, 16)
        f = PeriodicField(grid, np.random.randn(16))
        save_field(f, tmp_path / "h.json")
        back = terminal_from_spec(
            grid, {"kind": "file", "path": str(tmp_path / "h.json")}
        )
        assert np.array_equal(back.values, f.values)

    def test_terminal_file_grid_mismatch(self, tmp_path):
        grid = GridSpec(1, 16)
        save_field(PeriodicField.zeros(grid), tmp_path / "h.json")
        with pytest.raises(ValueError, match="grid"):
            terminal_from_spec(
                GridSpec(1, 32),
                {"kind": "file", "path": str(tmp_path / "h.json")},
            )


class TestForcing:
    def test_library_preset_constant_in_time(self):
        grid = GridSpec(1, 16)
        t = uniform_times(0.5, 4)
        F = forcing_from_spec(
            grid, t, {"kind": "constant", "value": 0.3}
        )
        assert F.values.shape == (5, 16, 1)
        for j in range(5):
            assert np.all(F.values[j] == 0.3)

    def test_spacetime_file_with_matching_times(self, tmp_path):
        np.random.seed(1)
        grid = GridSpec(1, 8)
        t = uniform_times(0.5, 4)
        hist = SpaceTimeField(grid, t, np.random.randn(5, 8, 1))
        save_spacetime_field(hist, tmp_path / "F.json")
        F = forcing_from_spec(
            grid, t, {"kind": "file", "path": str(tmp_path / "F.json")}
        )
        assert np.array_equal(F.values, hist.values)

    def test_spacetime_file_time_mismatch(self, tmp_path):
        grid = GridSpec(1, 8)
        hist = SpaceTimeField.zeros(grid, uniform_times(0.5, 4))
        save_spacetime_field(hist, tmp_path / "F.json")
        with pytest.raises(ValueError, match="time grid"):
            forcing_from_spec(
                grid,
                uniform_times(0.5, 8),
                {"kind": "file", "path": str(tmp_path / "F.json")},
            )

    def test_snapshot_file_lifted_in_time(self, tmp_path):
        """A single-field file becomes a time-constant forcing."""
        np.random.seed(2)
        grid = GridSpec(1, 8)
        f = PeriodicField(grid, np.random.randn(8))
        save_field(f, tmp_path / "F.json")
        t = uniform_times(0.5, 3)
        F = forcing_from_spec(
            grid, t, {"kind": "file", "path": str(tmp_path / "F.json")}
        )
        assert F.times.size == 4
        for j in range(4):
            assert np.array_equal(F.values[j], f.values)
