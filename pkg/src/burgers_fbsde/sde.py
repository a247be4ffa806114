"""Brownian ensembles and Euler integration of the forward characteristics.

This is the pure-numpy engine used by the diagnostics and by any setting
the compiled 1-d sweep does not cover. Paths launched from several start
points can share one Brownian motion ("common" mode, needed by the
pathwise identity checks) or use independent noise per (sample, start)
pair ("independent" mode, lower variance for plain expectations).

Noise is counter-addressed (see rng): any step of any path can be
regenerated in isolation, so running with more start points, fewer paths,
or a different schedule never changes the draws a given (path, start)
pair sees.
"""

from __future__ import annotations

import numpy as np

from .grid import GridSpec, SpaceTimeField
from .interpolation import ChannelInterpolant
from .rng import counter_normal, draw_counter
from .spectral import spectral_gradient

__all__ = [
    "BrownianEnsemble",
    "CharacteristicEnsemble",
    "TangentEnsemble",
    "sample_brownian",
    "integrate_forward",
    "integrate_tangent",
]

_MODES = ("independent", "common")


class BrownianEnsemble:
    """M sampled Brownian paths on a fixed time grid.

    increments[j, m, :] is the n-vector step of path m over
    (times[j], times[j+1]), variance times[j+1] - times[j] per component.
    """

    def __init__(self, times, increments, mode, seed, materialized=False):
        times = np.asarray(times, dtype=np.float64)
        increments = np.asarray(increments, dtype=np.float64)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("time grid must contain at least two points")
        if np.any(np.diff(times) <= 0):
            raise ValueError("time grid must be strictly increasing")
        if mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
        if increments.shape[0] != times.size - 1:
            raise ValueError(
                f"per-path increment count {increments.shape[0]} does not "
                f"match {times.size - 1} steps"
            )
        if increments.ndim != 3:
            raise ValueError("increments must have shape (steps, paths, dim)")
        if not np.all(np.isfinite(increments)):
            raise ValueError("increments contain non-finite values")
        self.times = times
        self.increments = increments
        self.mode = mode
        self.seed = int(seed)
        # True when the increments came from the caller rather than the
        # counter scheme; such an ensemble cannot be widened on the fly
        self.materialized = bool(materialized)
        self.antithetic = False

    @property
    def num_paths(self) -> int:
        return self.increments.shape[1]

    @property
    def dim(self) -> int:
        return self.increments.shape[2]

    @property
    def num_steps(self) -> int:
        return self.times.size - 1

    @classmethod
    def from_increments(cls, times, increments, mode="common", seed=0):
        """Wrap caller-supplied increments (noise-surgery for tests)."""
        return cls(times, increments, mode, seed, materialized=True)

    def step_increments(self, j: int, num_starts: int) -> np.ndarray:
        """Increments for step j, shaped (paths, num_starts_or_1, dim).

        Common mode always returns the stored path shared across starts.
        Independent mode with several starts regenerates fresh draws per
        (path, start) pair from the counter scheme.
        """
        if self.mode == "common" or num_starts == 1:
            return self.increments[j][:, np.newaxis, :]
        if self.materialized:
            raise ValueError(
                "materialized ensembles cannot widen to independent noise "
                "per start point; sample with sample_brownian instead"
            )
        return _generate_increments(
            self.times, self.num_paths, self.dim, self.seed,
            num_starts=num_starts, step=j, antithetic=self.antithetic,
        )


def _generate_increments(
    times, num_paths, dim, seed, num_starts=1, step=None, antithetic=False
):
    """Counter-addressed increments; one step or the whole schedule.

    Streams are indexed path-major over (path, start); antithetic pairing
    maps the upper half of the path axis onto the lower half with the
    sign flipped.
    """
    times = np.asarray(times, dtype=np.float64)
    num_steps = times.size - 1
    steps = np.arange(num_steps) if step is None else np.asarray([step])
    dts = np.diff(times)[steps]

    path_ids = np.arange(num_paths, dtype=np.uint64)
    signs = np.ones(num_paths)
    if antithetic:
        half = num_paths // 2
        path_ids[half:] = path_ids[half:] - np.uint64(half)
        signs[half:] = -1.0
    streams = (
        path_ids[:, np.newaxis] * np.uint64(num_starts)
        + np.arange(num_starts, dtype=np.uint64)[np.newaxis, :]
    )  # (paths, starts)

    ctr = draw_counter(
        streams[np.newaxis, :, :, np.newaxis],
        np.asarray(steps, dtype=np.uint64)[:, np.newaxis, np.newaxis, np.newaxis],
        np.arange(dim, dtype=np.uint64)[np.newaxis, np.newaxis, np.newaxis, :],
        num_steps,
        dim,
    )
    normals = counter_normal(seed, ctr)  # (len(steps), paths, starts, dim)
    normals *= signs[np.newaxis, :, np.newaxis, np.newaxis]
    out = normals * np.sqrt(dts)[:, np.newaxis, np.newaxis, np.newaxis]
    return out[0] if step is not None else out


def sample_brownian(
    times, M: int, n: int = 1, mode: str = "independent", seed: int = 0,
    antithetic: bool = False,
) -> BrownianEnsemble:
    """Sample M Brownian paths of dimension n on the given time grid.

    Draws are keyed on (seed, path, step, component); identical arguments
    reproduce identical bits on any machine and thread count.
    """
    if M < 1:
        raise ValueError(f"path count must be >= 1, got {M}")
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if antithetic and M % 2 != 0:
        raise ValueError("antithetic pairing needs an even path count")
    times = np.asarray(times, dtype=np.float64)
    if times.ndim != 1 or times.size < 2:
        raise ValueError("time grid must contain at least two points")
    full = _generate_increments(times, M, n, seed, antithetic=antithetic)
    incr = full[:, :, 0, :]
    ens = BrownianEnsemble(times, incr, mode, seed)
    ens.antithetic = antithetic
    return ens


class CharacteristicEnsemble:
    """Forward characteristics from a set of start points.

    positions[j, m, p, :] is path m from start point p at times[j], stored
    unwrapped in R^n (periodicity is applied only when evaluating fields),
    so displacement and monotonicity diagnostics stay well defined.
    """

    def __init__(self, start_time, times, positions, start_points, drift_source):
        self.start_time = float(start_time)
        self.times = np.asarray(times, dtype=np.float64)
        self.positions = positions
        self.start_points = start_points
        self.drift_source = drift_source

    @property
    def num_paths(self) -> int:
        return self.positions.shape[1]

    @property
    def num_starts(self) -> int:
        return self.positions.shape[2]

    @property
    def dim(self) -> int:
        return self.positions.shape[3]

    def terminal_positions(self) -> np.ndarray:
        return self.positions[-1]


class TangentEnsemble:
    """First-order flow derivatives along a characteristic ensemble.

    jacobians[j, m, p] is the n x n matrix of sensitivities of path (m, p)
    at times[j] with respect to its start point.
    """

    def __init__(self, times, jacobians):
        self.times = np.asarray(times, dtype=np.float64)
        self.jacobians = jacobians


def _start_index(drift: SpaceTimeField, t: float) -> int:
    matches = np.nonzero(np.abs(drift.times - t) <= 1e-12)[0]
    if matches.size == 0:
        raise ValueError(
            f"start time {t} is not a grid time of the drift field"
        )
    return int(matches[0])


def _coerce_starts(grid: GridSpec, start_points) -> np.ndarray:
    pts = np.asarray(start_points, dtype=np.float64)
    if grid.dim == 1 and (pts.ndim == 1 or pts.shape[-1] != 1):
        pts = pts.reshape(-1, 1)
    if pts.ndim != 2 or pts.shape[1] != grid.dim:
        raise ValueError(
            f"start points must have shape (P, {grid.dim}), got {pts.shape}"
        )
    if not np.all(np.isfinite(pts)):
        raise ValueError("start points contain non-finite values")
    return pts


def integrate_forward(
    drift: SpaceTimeField,
    t: float,
    start_points,
    noise: BrownianEnsemble,
    nu: float,
) -> CharacteristicEnsemble:
    """Euler step the characteristic SDE from t to the drift's horizon.

    Z_{j+1} = Z_j + drift(t_j, Z_j) dt_j + sqrt(2 nu) dW_j, with the start
    slice equal to the start points exactly. The noise grid must coincide
    with the drift's time grid restricted to [t, T].
    """
    if nu < 0:
        raise ValueError(f"viscosity must be >= 0, got {nu}")
    grid = drift.grid
    starts = _coerce_starts(grid, start_points)
    j0 = _start_index(drift, t)
    local_times = drift.times[j0:]
    if noise.times.size != local_times.size or np.max(
        np.abs(noise.times - local_times)
    ) > 1e-12:
        raise ValueError(
            "noise time grid does not match the drift grid restricted to "
            "the integration window"
        )
    if noise.dim != grid.dim:
        raise ValueError(
            f"noise dimension {noise.dim} does not match grid dim {grid.dim}"
        )

    num_paths = noise.num_paths
    num_starts = starts.shape[0]
    num_steps = local_times.size - 1
    root_2nu = np.sqrt(2.0 * nu)

    positions = np.empty((num_steps + 1, num_paths, num_starts, grid.dim))
    positions[0] = starts[np.newaxis, :, :]

    for j in range(num_steps):
        dt = local_times[j + 1] - local_times[j]
        interp = ChannelInterpolant(grid, drift.slice(j0 + j).values)
        cur = positions[j]
        vel = interp(cur.reshape(-1, grid.dim)).reshape(cur.shape)
        dw = noise.step_increments(j, num_starts)
        positions[j + 1] = cur + vel * dt + root_2nu * dw
        if not np.all(np.isfinite(positions[j + 1])):
            raise FloatingPointError(
                f"characteristic positions became non-finite at step {j + 1}"
            )

    return CharacteristicEnsemble(t, local_times, positions, starts, drift)


def integrate_tangent(
    drift: SpaceTimeField, chars: CharacteristicEnsemble
) -> TangentEnsemble:
    """Propagate start-point sensitivities along existing characteristics.

    dZ_{j+1} = dZ_j + grad_drift(t_j, Z_j) . dZ_j dt_j from the identity,
    using the spectral gradient of each drift slice composed at the stored
    path positions.
    """
    if chars.drift_source is not drift:
        if drift.grid != chars.drift_source.grid or not np.array_equal(
            drift.times, chars.drift_source.times
        ):
            raise ValueError(
                "characteristics were not generated under this drift field"
            )
    grid = drift.grid
    j0 = _start_index(drift, chars.start_time)
    times = chars.times
    num_steps = times.size - 1
    num_paths, num_starts, dim = (
        chars.num_paths, chars.num_starts, chars.dim,
    )

    jacobians = np.empty((num_steps + 1, num_paths, num_starts, dim, dim))
    jacobians[0] = np.eye(dim)

    for j in range(num_steps):
        dt = times[j + 1] - times[j]
        grad = spectral_gradient(drift.slice(j0 + j))  # (*shape, dim, dim)
        interp = ChannelInterpolant(
            grid, grad.reshape(grid.shape + (dim * dim,))
        )
        cur = chars.positions[j].reshape(-1, dim)
        gz = interp(cur).reshape(num_paths, num_starts, dim, dim)
        jac = jacobians[j]
        jacobians[j + 1] = jac + np.einsum("mpij,mpjk->mpik", gz, jac) * dt
        if not np.all(np.isfinite(jacobians[j + 1])):
            raise FloatingPointError(
                f"tangent flow became non-finite at step {j + 1}"
            )

    return TangentEnsemble(times, jacobians)
