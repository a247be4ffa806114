"""Periodic grids and field containers on the flat torus [0, 2*pi)^n."""

from __future__ import annotations

import numpy as np

__all__ = ["TWO_PI", "GridSpec", "PeriodicField", "SpaceTimeField", "uniform_times"]

TWO_PI = 2.0 * np.pi


class GridSpec:
    """Uniform tensor grid on the n-torus with period 2*pi per axis.

    Args:
        dim: spatial dimension n >= 1.
        points_per_axis: nodes per axis N; must be even and >= 8 so that
            the 2/3 dealiasing rule leaves usable modes.
    """

    def __init__(self, dim: int, points_per_axis: int):
        if not isinstance(dim, (int, np.integer)) or dim < 1:
            raise ValueError(f"dim must be a positive integer, got {dim!r}")
        if not isinstance(points_per_axis, (int, np.integer)):
            raise ValueError(f"points_per_axis must be an integer, got {points_per_axis!r}")
        if points_per_axis < 8 or points_per_axis % 2 != 0:
            raise ValueError(
                f"points_per_axis must be even and >= 8, got {points_per_axis}"
            )
        self.dim = int(dim)
        self.points_per_axis = int(points_per_axis)

    @property
    def spacing(self) -> float:
        return TWO_PI / self.points_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def num_nodes(self) -> int:
        return self.points_per_axis ** self.dim

    def axis_coordinates(self) -> np.ndarray:
        """1-D node coordinates j * 2*pi/N, shared by every axis."""
        return np.arange(self.points_per_axis) * self.spacing

    def nodes(self) -> np.ndarray:
        """All grid nodes as an array of shape (*shape, dim): the identity map."""
        axes = [self.axis_coordinates()] * self.dim
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def identity_map(self) -> "PeriodicField":
        """The identity map of the torus as a displacement-zero vector field.

        Returned as position values (node coordinates per component); callers
        that need a periodic representation should work with displacements.
        """
        return PeriodicField(self, self.nodes())

    def wavenumbers(self) -> np.ndarray:
        """Integer wavenumbers along one axis in FFT order."""
        N = self.points_per_axis
        return np.fft.fftfreq(N, d=1.0 / N).astype(np.int64)

    def wavevector_square(self) -> np.ndarray:
        """|k|^2 on the full FFT tensor grid, shape ``shape``."""
        k = self.wavenumbers().astype(np.float64)
        k2 = np.zeros(self.shape)
        for axis in range(self.dim):
            shape = [1] * self.dim
            shape[axis] = self.points_per_axis
            k2 = k2 + (k ** 2).reshape(shape)
        return k2

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, GridSpec)
            and other.dim == self.dim
            and other.points_per_axis == self.points_per_axis
        )

    def __hash__(self):
        return hash((self.dim, self.points_per_axis))

    def __repr__(self):
        return f"GridSpec(dim={self.dim}, points_per_axis={self.points_per_axis})"


def _coerce_values(grid: GridSpec, values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.shape == grid.shape:
        # scalar-style input for vector fields on a 1-component grid
        arr = arr[..., np.newaxis] if grid.dim == 1 else arr
    if arr.shape != grid.shape + (grid.dim,):
        raise ValueError(
            f"values shape {arr.shape} does not match grid shape "
            f"{grid.shape + (grid.dim,)}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError("field values must be finite")
    return arr


class PeriodicField:
    """A real vector field sampled at the nodes of a GridSpec.

    Values have shape (*grid.shape, dim), components last. Values are
    validated as finite at construction and treated as immutable.
    """

    def __init__(self, grid: GridSpec, values):
        if not isinstance(grid, GridSpec):
            raise ValueError("grid must be a GridSpec")
        self.grid = grid
        self.values = _coerce_values(grid, values)
        self.values.flags.writeable = False

    @classmethod
    def zeros(cls, grid: GridSpec) -> "PeriodicField":
        return cls(grid, np.zeros(grid.shape + (grid.dim,)))

    @classmethod
    def constant(cls, grid: GridSpec, value) -> "PeriodicField":
        c = np.broadcast_to(np.asarray(value, dtype=np.float64), (grid.dim,))
        return cls(grid, np.tile(c, grid.shape + (1,)))

    @classmethod
    def from_callable(cls, grid: GridSpec, fn) -> "PeriodicField":
        """Sample ``fn`` at the grid nodes.

        ``fn`` receives the node array of shape (*shape, dim) and must return
        either matching vector values or scalar values (dim = 1 only).
        """
        return cls(grid, np.asarray(fn(grid.nodes()), dtype=np.float64))

    def component(self, i: int) -> np.ndarray:
        return self.values[..., i]

    def __repr__(self):
        return f"PeriodicField(grid={self.grid!r})"


def uniform_times(horizon: float, steps: int) -> np.ndarray:
    """Uniform time grid 0 = t_0 < ... < t_J = horizon with J = steps."""
    if not np.isfinite(horizon) or horizon <= 0:
        raise ValueError(f"horizon must be positive and finite, got {horizon!r}")
    if not isinstance(steps, (int, np.integer)) or steps < 1:
        raise ValueError(f"steps must be a positive integer, got {steps!r}")
    return np.linspace(0.0, float(horizon), int(steps) + 1)


class SpaceTimeField:
    """A time-indexed family of PeriodicFields sharing one grid.

    Values have shape (len(times), *grid.shape, dim). The time grid must be
    strictly increasing; the solver and oracle always use uniform grids, and
    uniformity is required by the finite-difference diagnostics.
    """

    def __init__(self, grid: GridSpec, times, values):
        if not isinstance(grid, GridSpec):
            raise ValueError("grid must be a GridSpec")
        t = np.array(times, dtype=np.float64, copy=True)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("times must be a 1-D array with at least 2 entries")
        if not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")
        arr = np.array(values, dtype=np.float64, copy=True)
        expected = (t.size,) + grid.shape + (grid.dim,)
        if grid.dim == 1 and arr.shape == (t.size,) + grid.shape:
            arr = arr[..., np.newaxis]
        if arr.shape != expected:
            raise ValueError(f"values shape {arr.shape} does not match {expected}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("field values must be finite")
        self.grid = grid
        self.times = t
        self.values = arr
        self.times.flags.writeable = False
        self.values.flags.writeable = False

    @classmethod
    def zeros(cls, grid: GridSpec, times) -> "SpaceTimeField":
        t = np.asarray(times, dtype=np.float64)
        return cls(grid, t, np.zeros((t.size,) + grid.shape + (grid.dim,)))

    @classmethod
    def constant_in_time(cls, field: PeriodicField, times) -> "SpaceTimeField":
        t = np.asarray(times, dtype=np.float64)
        return cls(field.grid, t, np.broadcast_to(
            field.values, (t.size,) + field.values.shape).copy())

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def num_steps(self) -> int:
        return self.times.size - 1

    def time_step(self) -> float:
        """Uniform step size; raises if the grid is not uniform."""
        dt = np.diff(self.times)
        if not np.allclose(dt, dt[0], rtol=1e-10, atol=1e-14):
            raise ValueError("time grid is not uniform")
        return float(dt[0])

    def slice(self, j: int) -> PeriodicField:
        return PeriodicField(self.grid, self.values[j])

    def terminal(self) -> PeriodicField:
        return self.slice(self.times.size - 1)

    def initial(self) -> PeriodicField:
        return self.slice(0)

    def __repr__(self):
        return (f"SpaceTimeField(grid={self.grid!r}, "
                f"times=[{self.times[0]:g}..{self.times[-1]:g}] "
                f"x{self.times.size})")
