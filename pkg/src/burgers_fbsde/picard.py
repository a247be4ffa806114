"""Fixed-point solver: the Monte Carlo restart map and its iteration.

One application of the restart map takes the current velocity field
y_k, launches M diffusive characteristics from every (time, node) pair
under that drift, and replaces the value there by the sampled mean of

    terminal_condition(Z_T) + sum_r forcing(t_r, Z_r) * dt.

Iterating from zero converges geometrically whenever the horizon is
below the contraction bound; successive sup-norm differences and the
budget are recorded alongside the solution.

Two engines compute the same estimator: a compiled chunked sweep for
1-d grids (the production path) and a vectorized numpy fallback for
higher dimensions or non-uniform time grids. Both address their noise
identically, by (seed, iteration, slice) derived keys and per
(path, node, step) counters, so path sets are nested across M and
results do not depend on threads or scheduling.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import _kernels
from .contraction import ContractionBudget, budget_for
from .grid import GridSpec, PeriodicField, SpaceTimeField
from .interpolation import ChannelInterpolant, power_basis_tables
from .rng import counter_normal, derive_key, draw_counter
from .sde import CharacteristicEnsemble
from .spectral import spectral_gradient

__all__ = [
    "MCConfig",
    "PicardState",
    "MartingaleIntegrandField",
    "gamma_map",
    "picard_solve",
    "martingale_integrand",
    "solver_report",
]

_ENGINES = ("auto", "numba", "numpy")
_MODES = ("independent", "common")


@dataclass(frozen=True)
class MCConfig:
    """Monte Carlo sampling plan for the restart map.

    num_paths: characteristics per (time, node) restart; seed: base RNG
    key; mode: independent noise per (path, node) or one Brownian path
    shared by all nodes; antithetic: pair each path with its mirrored
    twin (requires an even path count); engine: "numba" (1-d uniform
    grids), "numpy", or "auto"; restart_stride: launch restarts from
    every c-th time slice and fill skipped slices by linear interpolation
    in time.
    """

    num_paths: int
    seed: int = 0
    mode: str = "independent"
    antithetic: bool = False
    engine: str = "auto"
    restart_stride: int = 1

    def __post_init__(self):
        if self.num_paths < 1:
            raise ValueError(f"path count must be >= 1, got {self.num_paths}")
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if self.antithetic and self.num_paths % 2 != 0:
            raise ValueError("antithetic pairing needs an even path count")
        if self.engine not in _ENGINES:
            raise ValueError(
                f"engine must be one of {_ENGINES}, got {self.engine!r}"
            )
        if self.restart_stride < 1:
            raise ValueError(
                f"restart stride must be >= 1, got {self.restart_stride}"
            )

    def as_dict(self) -> dict:
        return {
            "num_paths": self.num_paths,
            "seed": self.seed,
            "mode": self.mode,
            "antithetic": self.antithetic,
            "engine": self.engine,
            "restart_stride": self.restart_stride,
        }


@dataclass
class PicardState:
    """Iteration record: final iterate, count, and sup-norm differences."""

    iterate: SpaceTimeField
    k: int
    diff_history: list = field(default_factory=list)
    mc_config: MCConfig | None = None
    converged: bool = False


def _streams_and_signs(num_nodes: int, cfg: MCConfig):
    """Per-walker noise stream ids and signs, node-major (w = i*M + m).

    Independent mode gives stream m*P + i so a path keeps its noise when
    M grows (nested ensembles); common mode shares stream m across all
    nodes. Antithetic pairing reuses the lower half of the path axis with
    flipped signs.
    """
    M = cfg.num_paths
    path_ids = np.arange(M, dtype=np.uint64)
    signs_m = np.ones(M)
    if cfg.antithetic:
        half = M // 2
        path_ids[half:] -= np.uint64(half)
        signs_m[half:] = -1.0
    if cfg.mode == "independent":
        streams = (
            path_ids[np.newaxis, :] * np.uint64(num_nodes)
            + np.arange(num_nodes, dtype=np.uint64)[:, np.newaxis]
        )
    else:
        streams = np.broadcast_to(path_ids[np.newaxis, :], (num_nodes, M))
    signs = np.broadcast_to(signs_m[np.newaxis, :], (num_nodes, M))
    return np.ascontiguousarray(streams.ravel()), np.ascontiguousarray(
        signs.ravel()
    )


def _spline_tables(values_stack: np.ndarray):
    """Power-basis tables for a (num_slices, N) stack of 1-d fields."""
    coeffs = ndimage.spline_filter1d(
        np.ascontiguousarray(values_stack), order=3, axis=-1,
        mode="grid-wrap", output=np.float64,
    )
    return power_basis_tables(coeffs)


def _restart_slices(num_steps: int, stride: int):
    slices = list(range(0, num_steps, stride))
    return slices


def _fill_skipped(values: np.ndarray, times: np.ndarray, computed: list) -> None:
    """Linear-in-time fill of slices skipped by a coarse restart stride."""
    anchors = computed + [len(times) - 1]
    for a, b in zip(anchors[:-1], anchors[1:]):
        for j in range(a + 1, b):
            w = (times[j] - times[a]) / (times[b] - times[a])
            values[j] = (1.0 - w) * values[a] + w * values[b]


def gamma_map(
    y_k: SpaceTimeField,
    h: PeriodicField,
    F: SpaceTimeField,
    mc_config: MCConfig,
    nu: float,
    key_salt: int = 0,
) -> SpaceTimeField:
    """One application of the Monte Carlo restart map to the iterate y_k.

    For every retained grid time t_j and node, M characteristics are
    advanced to the horizon under drift y_k and the node value becomes the
    sampled mean of the pathwise payoff. The terminal slice is set to the
    terminal condition exactly, bypassing sampling. key_salt (the
    iteration index) is folded into the noise keys so iterations draw
    fresh paths.
    """
    grid = y_k.grid
    if h.grid != grid or F.grid != grid:
        raise ValueError("iterate, terminal condition, and forcing must share a grid")
    if F.values.shape != y_k.values.shape or np.max(
        np.abs(F.times - y_k.times)
    ) > 1e-12:
        raise ValueError("forcing and iterate must share the time grid")
    if nu < 0:
        raise ValueError(f"viscosity must be >= 0, got {nu}")

    budget = budget_for(h, F, float(y_k.times[-1] - y_k.times[0]))
    if not budget.contracting:
        warnings.warn(
            f"horizon {budget.T:g} is not below the contraction bound "
            f"{budget.T0:g} (gamma = {budget.gamma:g}); iteration may not "
            "converge",
            RuntimeWarning,
        )

    engine = mc_config.engine
    if engine == "auto":
        engine = "numba" if grid.dim == 1 and _uniform_dt(y_k.times) else "numpy"
    if engine == "numba" and (grid.dim != 1 or not _uniform_dt(y_k.times)):
        raise ValueError(
            "the compiled engine requires a 1-d grid and a uniform time grid"
        )

    out_values = np.empty_like(y_k.values)
    out_values[-1] = h.values
    num_steps = len(y_k.times) - 1
    computed = _restart_slices(num_steps, mc_config.restart_stride)

    if engine == "numba":
        _gamma_map_numba(y_k, h, F, mc_config, nu, key_salt, computed, out_values)
    else:
        _gamma_map_numpy(y_k, h, F, mc_config, nu, key_salt, computed, out_values)

    if mc_config.restart_stride > 1:
        _fill_skipped(out_values, y_k.times, computed)

    return SpaceTimeField(grid, y_k.times, out_values)


def _uniform_dt(times: np.ndarray) -> bool:
    dts = np.diff(times)
    return bool(np.all(np.abs(dts - dts[0]) <= 1e-12 * max(1.0, abs(dts[0]))))


def _gamma_map_numba(y_k, h, F, cfg, nu, key_salt, computed, out_values):
    grid = y_k.grid
    npts = grid.points_per_axis
    M = cfg.num_paths
    dt = float(y_k.times[1] - y_k.times[0])
    noise_scale = float(np.sqrt(2.0 * nu * dt))
    inv_dx = npts / _kernels.TWO_PI

    dp0, dp1, dp2, dp3 = _spline_tables(y_k.values[:-1, :, 0])
    has_force = bool(np.any(F.values))
    if has_force:
        fp0, fp1, fp2, fp3 = _spline_tables(F.values[:-1, :, 0])
    else:
        dummy = np.zeros((1, 1))
        fp0 = fp1 = fp2 = fp3 = dummy
    pay = _spline_tables(h.values[:, 0][np.newaxis, :])
    pp0, pp1, pp2, pp3 = (p[0] for p in pay)

    streams, signs = _streams_and_signs(npts, cfg)
    nodes = np.repeat(grid.axis_coordinates(), M)

    for j in computed:
        n_steps = len(y_k.times) - 1 - j
        key = np.uint64(derive_key(cfg.seed, key_salt, j))
        base_ctr = streams * np.uint64(n_steps)
        out = np.empty(npts * M)
        _kernels.sweep_payoff_1d(
            key, nodes, base_ctr, signs,
            dp0[j:], dp1[j:], dp2[j:], dp3[j:],
            fp0[j:] if has_force else fp0,
            fp1[j:] if has_force else fp1,
            fp2[j:] if has_force else fp2,
            fp3[j:] if has_force else fp3,
            has_force,
            pp0, pp1, pp2, pp3,
            dt, noise_scale, inv_dx, out,
        )
        if not np.all(np.isfinite(out)):
            bad = int(np.nonzero(~np.isfinite(out))[0][0])
            raise FloatingPointError(
                f"sampling produced a non-finite payoff at time index {j}, "
                f"node {bad // M}"
            )
        out_values[j, :, 0] = out.reshape(npts, M).mean(axis=1)


def _gamma_map_numpy(y_k, h, F, cfg, nu, key_salt, computed, out_values):
    grid = y_k.grid
    dim = grid.dim
    M = cfg.num_paths
    num_nodes = grid.num_nodes
    times = y_k.times
    root_2nu = np.sqrt(2.0 * nu)

    streams, signs = _streams_and_signs(num_nodes, cfg)
    streams = streams.reshape(num_nodes, M)
    signs = signs.reshape(num_nodes, M)
    nodes = grid.nodes().reshape(num_nodes, dim)
    comps = np.arange(dim, dtype=np.uint64)

    drift_interps = [
        ChannelInterpolant(grid, y_k.slice(j).values)
        for j in range(len(times) - 1)
    ]
    has_force = bool(np.any(F.values))
    if has_force:
        force_interps = [
            ChannelInterpolant(grid, F.slice(j).values)
            for j in range(len(times) - 1)
        ]
    payoff_interp = ChannelInterpolant(grid, h.values)

    for j in computed:
        n_steps = len(times) - 1 - j
        key = derive_key(cfg.seed, key_salt, j)
        cur = np.broadcast_to(
            nodes[:, np.newaxis, :], (num_nodes, M, dim)
        ).copy()
        acc = np.zeros((num_nodes, M, dim))
        for r in range(n_steps):
            dt_r = times[j + r + 1] - times[j + r]
            vel = drift_interps[j + r](cur)
            if has_force:
                acc += force_interps[j + r](cur) * dt_r
            ctr = draw_counter(
                streams[:, :, np.newaxis],
                np.uint64(r),
                comps[np.newaxis, np.newaxis, :],
                n_steps,
                dim,
            )
            g = counter_normal(key, ctr) * signs[:, :, np.newaxis]
            cur = cur + vel * dt_r + root_2nu * np.sqrt(dt_r) * g
        payoff = acc + payoff_interp(cur)
        if not np.all(np.isfinite(payoff)):
            bad = int(np.nonzero(~np.isfinite(payoff).all(axis=(1, 2)))[0][0])
            raise FloatingPointError(
                f"sampling produced a non-finite payoff at time index {j}, "
                f"node {bad}"
            )
        out_values[j] = payoff.mean(axis=1).reshape(grid.shape + (dim,))


def picard_solve(
    h: PeriodicField,
    F: SpaceTimeField,
    nu: float,
    T: float,
    grid: GridSpec,
    mc_config: MCConfig,
    tol: float = 5e-3,
    max_iter: int = 8,
):
    """Iterate the restart map from zero until the sup-norm update is small.

    The time grid is inherited from the forcing field, whose span must be
    [0, T]. Returns (solution, iteration record, contraction budget);
    warns when the horizon exceeds the contraction bound or when the
    update ratios persistently exceed one, and raises on divergence.
    """
    if tol <= 0:
        raise ValueError(f"tolerance must be > 0, got {tol}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    if h.grid != grid or F.grid != grid:
        raise ValueError("terminal condition and forcing must live on the grid")
    if abs(F.times[0]) > 1e-12 or abs(F.times[-1] - T) > 1e-12:
        raise ValueError(
            f"forcing time grid spans [{F.times[0]:g}, {F.times[-1]:g}], "
            f"expected [0, {T:g}]"
        )

    budget = budget_for(h, F, float(T))
    if not budget.contracting:
        warnings.warn(
            f"horizon T = {budget.T:g} is not below the contraction bound "
            f"T0 = {budget.T0:g}; proceeding and reporting measured ratios",
            RuntimeWarning,
        )

    y = SpaceTimeField.zeros(grid, F.times)
    history: list = []
    converged = False
    k = 0
    initial_diff = None
    for k in range(1, max_iter + 1):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            y_next = gamma_map(y, h, F, mc_config, nu, key_salt=k)
        diff = float(np.max(np.abs(y_next.values - y.values)))
        if not np.isfinite(diff):
            raise FloatingPointError(
                f"iteration {k} diverged: non-finite update"
            )
        history.append(diff)
        if initial_diff is None:
            initial_diff = diff
        elif initial_diff > 0 and diff > 1e6 * initial_diff:
            raise FloatingPointError(
                f"iteration {k} diverged: update {diff:g} exceeds 1e6 times "
                f"the first update {initial_diff:g}"
            )
        y = y_next
        if diff < tol:
            converged = True
            break

    ratios = [b / a for a, b in zip(history[:-1], history[1:]) if a > 0]
    if len(ratios) >= 2 and ratios[-1] > 1.0 and ratios[-2] > 1.0:
        warnings.warn(
            "successive update ratios stayed above one; the map is not "
            "contracting at this horizon and sampling budget",
            RuntimeWarning,
        )

    state = PicardState(
        iterate=y, k=k, diff_history=history, mc_config=mc_config,
        converged=converged,
    )
    return y, state, budget


class MartingaleIntegrandField:
    """Space-time Jacobian field of a velocity field.

    Stores the spectral gradient of every time slice on the grid; the
    evaluation rule composes a slice with arbitrary positions, which is
    how the Brownian-term integrand enters the pathwise identities.
    """

    def __init__(self, grid: GridSpec, times: np.ndarray, gradients: np.ndarray):
        times = np.asarray(times, dtype=np.float64)
        gradients = np.asarray(gradients, dtype=np.float64)
        expected = (len(times),) + grid.shape + (grid.dim, grid.dim)
        if gradients.shape != expected:
            raise ValueError(
                f"gradient stack has shape {gradients.shape}, expected {expected}"
            )
        self.grid = grid
        self.times = times
        self.gradients = gradients
        self._interpolants: dict = {}

    @classmethod
    def from_velocity(cls, y: SpaceTimeField) -> "MartingaleIntegrandField":
        grid = y.grid
        stack = np.empty(
            (len(y.times),) + grid.shape + (grid.dim, grid.dim)
        )
        for j in range(len(y.times)):
            stack[j] = spectral_gradient(y.slice(j))
        return cls(grid, y.times, stack)

    def evaluate(self, j: int, positions: np.ndarray) -> np.ndarray:
        """Jacobian of slice j at the given positions, shaped (..., n, n)."""
        dim = self.grid.dim
        interp = self._interpolants.get(j)
        if interp is None:
            interp = ChannelInterpolant(
                self.grid,
                self.gradients[j].reshape(self.grid.shape + (dim * dim,)),
            )
            self._interpolants[j] = interp
        flat = interp(positions)
        return flat.reshape(flat.shape[:-1] + (dim, dim))


def martingale_integrand(
    y: SpaceTimeField, chars: CharacteristicEnsemble, nu: float
) -> np.ndarray:
    """Gradient of the field along the characteristics.

    Returns (num_times, paths, starts, n, n): at each stored step, the
    spectral Jacobian of the matching field slice evaluated at the path
    position. This is the integrand of the Brownian term when the field
    is carried along its own characteristics.
    """
    if nu < 0:
        raise ValueError(f"viscosity must be >= 0, got {nu}")
    grid = y.grid
    if chars.drift_source is not None and chars.drift_source.grid != grid:
        raise ValueError("characteristics were generated on a different grid")
    matches = np.nonzero(np.abs(y.times - chars.start_time) <= 1e-12)[0]
    if matches.size == 0:
        raise ValueError("characteristic start time is not a field grid time")
    j0 = int(matches[0])
    if len(chars.times) > len(y.times) - j0 or np.max(
        np.abs(y.times[j0 : j0 + len(chars.times)] - chars.times)
    ) > 1e-12:
        raise ValueError("characteristic times do not align with field times")

    dim = grid.dim
    num_times = len(chars.times)
    num_paths, num_starts = chars.num_paths, chars.num_starts
    out = np.empty((num_times, num_paths, num_starts, dim, dim))
    for j in range(num_times):
        grad = spectral_gradient(y.slice(j0 + j))
        interp = ChannelInterpolant(grid, grad.reshape(grid.shape + (dim * dim,)))
        flat = chars.positions[j].reshape(-1, dim)
        out[j] = interp(flat).reshape(num_paths, num_starts, dim, dim)
    return out


def solver_report(state: PicardState, budget: ContractionBudget) -> dict:
    """JSON-ready summary of a completed solve.

    Deliberately free of timestamps and timings so the report is a pure
    function of the configuration; volatile entries belong in the run
    header that the command line layer adds.
    """
    return {
        "budget": budget.as_dict(),
        "iterations": state.k,
        "converged": state.converged,
        "diff_history": state.diff_history,
        "mc_config": state.mc_config.as_dict() if state.mc_config else None,
    }
