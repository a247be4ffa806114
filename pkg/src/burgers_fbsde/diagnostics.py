"""Numerical verification of the identities behind the solver.

Every check returns a CheckReport with a scalar statistic, a threshold,
and a pass flag (statistic <= threshold). Monte Carlo checks express
their statistic in standard-error units and pass at three standard
errors; deterministic checks carry absolute tolerances. All randomness
is counter-addressed, so each report is reproducible bit for bit from
its configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from . import _kernels
from .grid import GridSpec, PeriodicField, SpaceTimeField, TWO_PI
from .interpolation import (
    ChannelInterpolant,
    compose,
    eval_spacetime,
    map_displacement,
)
from .picard import MCConfig, MartingaleIntegrandField
from .rng import counter_normal, derive_key, draw_counter
from .sde import BrownianEnsemble, CharacteristicEnsemble, TangentEnsemble, \
    integrate_forward, sample_brownian
from .spectral import spectral_gradient, spectral_laplacian
from .serialization import write_json

__all__ = [
    "CheckReport",
    "pde_residual",
    "flow_consistency",
    "composition_law",
    "bsde_residual",
    "determinism_check",
    "flow_regularity",
    "restart_estimate",
    "render_table",
    "reports_to_json",
]

# purpose tags folded into derived RNG keys so different checks never
# share noise even under one seed
_TAG_FLOW_OUTER = 101
_TAG_FLOW_RESTART = 102
_TAG_COMPOSE = 103
_TAG_BSDE = 104
_TAG_DETERMINISM = 105


@dataclass
class CheckReport:
    """Outcome of one verification check."""

    name: str
    statistic: float
    threshold: float
    standard_error: float | None = None
    passed: bool = dataclass_field(init=False)
    metadata: dict = dataclass_field(default_factory=dict)

    def __post_init__(self):
        self.passed = bool(self.statistic <= self.threshold)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "standard_error": self.standard_error,
            "pass": self.passed,
            "metadata": self.metadata,
        }


def _quadrature_l2(values: np.ndarray) -> float:
    """Normalized L2 norm of one slice: sqrt(mean |v|^2 over nodes)."""
    return float(np.sqrt(np.mean(np.sum(values**2, axis=-1))))


def pde_residual(
    y: SpaceTimeField,
    h: PeriodicField,
    F: SpaceTimeField,
    nu: float,
    threshold: float = 1e-5,
):
    """Residual of the backward equation on the discrete solution.

    The time derivative uses centered differences in the interior and
    second-order one-sided stencils at both endpoints; the spatial part
    is spectral. Returns (per-time L2 norms, CheckReport); the terminal
    mismatch sup|y(T) - h| is reported in the metadata.
    """
    if len(y.times) < 3:
        raise ValueError("residual evaluation needs at least 3 time slices")
    dt = y.time_step()
    grid = y.grid
    v = y.values

    dyds = np.empty_like(v)
    dyds[1:-1] = (v[2:] - v[:-2]) / (2.0 * dt)
    dyds[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dt)
    dyds[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * dt)

    norms = np.empty(len(y.times))
    for j in range(len(y.times)):
        slice_field = y.slice(j)
        jac = spectral_gradient(slice_field)
        adv = np.einsum("...j,...ij->...i", slice_field.values, jac)
        lap = spectral_laplacian(slice_field).values
        residual = dyds[j] + adv + nu * lap + F.values[j]
        norms[j] = _quadrature_l2(residual)

    terminal_gap = float(np.abs(y.values[-1] - h.values).max())
    report = CheckReport(
        name="pde_residual",
        statistic=float(norms.max()),
        threshold=threshold,
        metadata={
            "per_time_l2": norms.tolist(),
            "terminal_sup_difference": terminal_gap,
            "dt": dt,
        },
    )
    return norms, report


def restart_estimate(
    drift: SpaceTimeField | None,
    h: PeriodicField,
    F: SpaceTimeField | None,
    nu: float,
    times: np.ndarray,
    j_start: int,
    starts: np.ndarray,
    num_paths: int,
    key: int,
):
    """Monte Carlo estimate of the pathwise payoff from given start points.

    Advances num_paths independent characteristics per start point from
    times[j_start] to the horizon under the drift (zero when None) and
    averages terminal_condition(Z_T) + sum forcing(t_r, Z_r) dt. Returns
    (means, standard errors), each shaped (num_starts, dim).

    This is the same estimator the solver iterates; here it serves the
    identity checks, so it is keyed independently.
    """
    grid = h.grid
    dim = grid.dim
    starts = np.asarray(starts, dtype=np.float64)
    if dim == 1 and (starts.ndim == 1 or starts.shape[-1] != 1):
        starts = starts.reshape(-1, 1)
    num_starts = starts.shape[0]
    n_steps = len(times) - 1 - j_start
    if n_steps < 1:
        raise ValueError("restart estimates need at least one step")
    dts = np.diff(times)[j_start:]
    uniform = np.all(np.abs(dts - dts[0]) <= 1e-12 * max(1.0, dts[0]))

    if dim == 1 and uniform:
        payoffs = _restart_kernel_1d(
            drift, h, F, nu, float(dts[0]), j_start, n_steps, starts,
            num_paths, key,
        )
    else:
        payoffs = _restart_numpy(
            drift, h, F, nu, times, j_start, starts, num_paths, key,
        )
    means = payoffs.mean(axis=1)
    ses = payoffs.std(axis=1, ddof=1) / np.sqrt(num_paths)
    return means, ses


def _restart_kernel_1d(
    drift, h, F, nu, dt, j_start, n_steps, starts, num_paths, key
):
    from scipy import ndimage

    from .interpolation import power_basis_tables

    grid = h.grid
    npts = grid.points_per_axis

    def tables(stack):
        coeffs = ndimage.spline_filter1d(
            np.ascontiguousarray(stack), order=3, axis=-1, mode="grid-wrap",
            output=np.float64,
        )
        return power_basis_tables(coeffs)

    if drift is None:
        dp0 = np.zeros((n_steps, npts))
        dp1 = dp2 = dp3 = dp0
    else:
        dp0, dp1, dp2, dp3 = tables(
            drift.values[j_start : j_start + n_steps, :, 0]
        )
    has_force = F is not None and bool(np.any(F.values))
    if has_force:
        fp0, fp1, fp2, fp3 = tables(F.values[j_start : j_start + n_steps, :, 0])
    else:
        dummy = np.zeros((1, 1))
        fp0 = fp1 = fp2 = fp3 = dummy
    pay = tables(h.values[:, 0][np.newaxis, :])
    pp0, pp1, pp2, pp3 = (p[0] for p in pay)

    Q = starts.shape[0]
    streams = (
        np.arange(num_paths, dtype=np.uint64)[np.newaxis, :] * np.uint64(Q)
        + np.arange(Q, dtype=np.uint64)[:, np.newaxis]
    ).ravel()
    signs = np.ones(Q * num_paths)
    start_flat = np.ascontiguousarray(
        np.mod(np.repeat(starts[:, 0], num_paths), TWO_PI)
    )
    base_ctr = np.ascontiguousarray(streams) * np.uint64(n_steps)
    out = np.empty(Q * num_paths)
    _kernels.sweep_payoff_1d(
        np.uint64(key), start_flat, base_ctr, signs,
        dp0, dp1, dp2, dp3,
        fp0, fp1, fp2, fp3, has_force,
        pp0, pp1, pp2, pp3,
        dt, float(np.sqrt(2.0 * nu * dt)), npts / TWO_PI, out,
    )
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("restart sampling produced non-finite payoffs")
    return out.reshape(Q, num_paths)[:, :, np.newaxis]


def _restart_numpy(drift, h, F, nu, times, j_start, starts, num_paths, key):
    grid = h.grid
    dim = grid.dim
    Q = starts.shape[0]
    n_steps = len(times) - 1 - j_start
    root_2nu = np.sqrt(2.0 * nu)
    comps = np.arange(dim, dtype=np.uint64)
    streams = (
        np.arange(num_paths, dtype=np.uint64)[np.newaxis, :] * np.uint64(Q)
        + np.arange(Q, dtype=np.uint64)[:, np.newaxis]
    )  # (Q, M)

    payoff_interp = ChannelInterpolant(grid, h.values)
    cur = np.broadcast_to(starts[:, np.newaxis, :], (Q, num_paths, dim)).copy()
    acc = np.zeros((Q, num_paths, dim))
    has_force = F is not None and bool(np.any(F.values))
    for r in range(n_steps):
        dt_r = times[j_start + r + 1] - times[j_start + r]
        if drift is not None:
            vel = ChannelInterpolant(
                grid, drift.slice(j_start + r).values
            )(cur)
        else:
            vel = 0.0
        if has_force:
            acc += ChannelInterpolant(grid, F.slice(j_start + r).values)(cur) * dt_r
        ctr = draw_counter(
            streams[:, :, np.newaxis], np.uint64(r),
            comps[np.newaxis, np.newaxis, :], n_steps, dim,
        )
        g = counter_normal(key, ctr)
        cur = cur + vel * dt_r + root_2nu * np.sqrt(dt_r) * g
    payoffs = acc + payoff_interp(cur)
    if not np.all(np.isfinite(payoffs)):
        raise FloatingPointError("restart sampling produced non-finite payoffs")
    return payoffs


def flow_consistency(
    y: SpaceTimeField,
    nu: float,
    t: float,
    u: float,
    probes,
    mc_config: MCConfig,
    h: PeriodicField | None = None,
    F: SpaceTimeField | None = None,
    num_outer: int = 2,
    field_error: float = 0.0,
    threshold: float = 3.0,
) -> CheckReport:
    """Pathwise value versus restarted expectation at an interior time.

    Common-noise characteristics run from (t, probes) to the probe time u;
    there the field value y(u, Z_u) is compared against a fresh restarted
    estimate of the payoff from (u, Z_u), in standard-error units. The
    identity behind the check says the two agree for the exact solution.

    field_error, when positive, is an a-priori per-node uncertainty of
    the field itself (a sampled solution is one) and widens the band to
    sqrt(se^2 + field_error^2).
    """
    if h is None:
        h = y.terminal()
    if F is None:
        F = SpaceTimeField.zeros(y.grid, y.times)
    j_t = _time_index(y.times, t)
    j_u = _time_index(y.times, u)
    if j_u < j_t:
        raise ValueError("probe time must not precede the launch time")

    key_outer = derive_key(mc_config.seed, _TAG_FLOW_OUTER)
    noise = sample_brownian(
        y.times[j_t:], num_outer, y.grid.dim, "common", key_outer
    )
    chars = integrate_forward(y, t, probes, noise, nu)
    z_u = chars.positions[j_u - j_t]  # (outer, P, n)

    lhs = eval_spacetime(y, u, z_u)

    flat = z_u.reshape(-1, y.grid.dim)
    key_restart = derive_key(mc_config.seed, _TAG_FLOW_RESTART)
    rhs, ses = restart_estimate(
        y, h, F, nu, y.times, j_u, flat, mc_config.num_paths, key_restart,
    )
    rhs = rhs.reshape(lhs.shape)
    ses = ses.reshape(lhs.shape)

    diff = np.abs(lhs - rhs)
    band = np.sqrt(ses**2 + field_error**2)
    # agreement at roundoff level is exact no matter how tight the band;
    # a degenerate (zero-variance) ensemble must not turn one ulp of
    # noise into a failure
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(
            diff <= 1e-12, 0.0, np.where(band > 0, diff / band, np.inf)
        )
    worst = float(ratio.max())
    return CheckReport(
        name="flow_consistency",
        statistic=worst,
        threshold=threshold,
        standard_error=float(ses.max()),
        metadata={
            "field_error": float(field_error),
            "launch_time": float(t),
            "probe_time": float(u),
            "num_probes": int(np.asarray(probes).reshape(-1, y.grid.dim).shape[0])
            if y.grid.dim > 1 else int(np.asarray(probes).size),
            "num_outer": num_outer,
            "restart_paths": mc_config.num_paths,
            "max_abs_difference": float(diff.max()),
            "seed": mc_config.seed,
        },
    )


def composition_law(
    y: SpaceTimeField,
    xi: PeriodicField,
    nu: float,
    t: float,
    mc_config: MCConfig,
    threshold: float = 5e-3,
) -> CheckReport:
    """Starting from a deformed grid versus deforming the flow map.

    Under one shared Brownian path per sample, characteristics launched
    from xi(grid) are compared with the flow map launched from the grid
    and then evaluated at xi, step by step. The discrepancy isolates the
    map-interpolation error; it is identically zero when xi is the
    identity and shrinks under grid refinement.
    """
    grid = y.grid
    if xi.grid != grid:
        raise ValueError("deformation map must live on the solution grid")
    disp = map_displacement(xi)
    jac = spectral_gradient(disp)
    det = np.linalg.det(np.eye(grid.dim) + jac)
    if np.any(det <= 0):
        raise ValueError(
            "map is not a diffeomorphism: nonpositive Jacobian determinant "
            f"(min {det.min():g})"
        )

    j_t = _time_index(y.times, t)
    key = derive_key(mc_config.seed, _TAG_COMPOSE)
    noise = sample_brownian(
        y.times[j_t:], mc_config.num_paths, grid.dim, "common", key
    )
    nodes = grid.nodes().reshape(-1, grid.dim)
    xi_pts = xi.values.reshape(-1, grid.dim)
    chars_e = integrate_forward(y, t, nodes, noise, nu)
    chars_xi = integrate_forward(y, t, xi_pts, noise, nu)

    num_steps = len(chars_e.times)
    per_step = np.empty(num_steps)
    for j in range(num_steps):
        disp_e = chars_e.positions[j] - nodes[np.newaxis, :, :]  # (M, P, n)
        disp_xi = chars_xi.positions[j] - xi_pts[np.newaxis, :, :]
        diffs = np.empty_like(disp_xi)
        for m in range(chars_e.num_paths):
            interp = ChannelInterpolant(
                grid, disp_e[m].reshape(grid.shape + (grid.dim,))
            )
            diffs[m] = interp(xi_pts) - disp_xi[m]
        per_step[j] = np.sqrt(np.mean(np.sum(diffs**2, axis=-1)))

    statistic = float(per_step.max())
    return CheckReport(
        name="composition_law",
        statistic=statistic,
        threshold=threshold,
        metadata={
            "per_step_l2": per_step.tolist(),
            "launch_time": float(t),
            "num_paths": mc_config.num_paths,
            "seed": mc_config.seed,
        },
    )


def bsde_residual(
    y: SpaceTimeField,
    X: MartingaleIntegrandField,
    h: PeriodicField,
    F: SpaceTimeField,
    nu: float,
    mc_config: MCConfig,
    threshold: float = 0.05,
    starts=None,
    t: float | None = None,
) -> CheckReport:
    """Pathwise backward-equation residual along common-noise paths.

    For each path and each time s, compares y(s, Z_s) with the terminal
    payoff plus the remaining forcing integral minus the Brownian
    correction term sqrt(2 nu) sum X . dW. Reports the RMS residual over
    paths and times; the metadata carries the drift-free martingale
    statistic (the empirical mean of y(s, Z_s) plus the accrued forcing
    should be constant in s).
    """
    grid = y.grid
    if X.grid != grid or len(X.times) != len(y.times) or np.max(
        np.abs(X.times - y.times)
    ) > 1e-12:
        raise ValueError("integrand field does not match the solution grid")
    if t is None:
        t = float(y.times[0])
    j_t = _time_index(y.times, t)
    if starts is None:
        starts = grid.nodes().reshape(-1, grid.dim)
    starts = np.asarray(starts, dtype=np.float64).reshape(-1, grid.dim)

    key = derive_key(mc_config.seed, _TAG_BSDE)
    noise = sample_brownian(
        y.times[j_t:], mc_config.num_paths, grid.dim, "common", key
    )
    chars = integrate_forward(y, t, starts, noise, nu)
    S = len(chars.times) - 1
    M, P, dim = chars.num_paths, chars.num_starts, grid.dim
    root_2nu = np.sqrt(2.0 * nu)

    y_vals = np.empty((S + 1, M, P, dim))
    f_vals = np.empty((S, M, P, dim))
    x_dw = np.empty((S, M, P, dim))
    for j in range(S + 1):
        pos = chars.positions[j]
        y_vals[j] = ChannelInterpolant(grid, y.slice(j_t + j).values)(pos)
        if j < S:
            f_vals[j] = ChannelInterpolant(grid, F.slice(j_t + j).values)(pos)
            xv = X.evaluate(j_t + j, pos)  # (M, P, n, n)
            dw = noise.increments[j]  # (M, n) shared across starts
            x_dw[j] = np.einsum("mpij,mj->mpi", xv, dw)
    dts = np.diff(chars.times)

    payoff = compose(h, chars.positions[-1])
    # suffix sums: remaining forcing and remaining Brownian correction
    residuals = np.empty((S + 1, M, P, dim))
    forcing_tail = np.zeros((M, P, dim))
    brownian_tail = np.zeros((M, P, dim))
    residuals[S] = y_vals[S] - payoff
    for j in range(S - 1, -1, -1):
        forcing_tail += f_vals[j] * dts[j]
        brownian_tail += x_dw[j]
        residuals[j] = y_vals[j] - (
            payoff + forcing_tail - root_2nu * brownian_tail
        )

    rms = float(np.sqrt(np.mean(residuals**2)))

    # martingale witness: mean over paths of y(s, Z_s) + accrued forcing
    accrued = np.concatenate(
        [np.zeros((1, M, P, dim)), np.cumsum(f_vals * dts[:, None, None, None], axis=0)]
    )
    witness = y_vals + accrued
    delta = witness - witness[0]
    mart_mean = delta.mean(axis=1)  # (S+1, P, dim)
    mart_se = delta.std(axis=1, ddof=1) / np.sqrt(M)
    # drift at roundoff level is exact no matter how tight the band; a
    # degenerate (zero-variance) ensemble must not turn one ulp of noise
    # into a failure
    with np.errstate(divide="ignore", invalid="ignore"):
        mart_ratio = np.where(
            np.abs(mart_mean) <= 1e-12, 0.0,
            np.where(mart_se > 0, np.abs(mart_mean) / mart_se, np.inf),
        )
    mart_stat = float(mart_ratio.max())

    return CheckReport(
        name="bsde_residual",
        statistic=rms,
        threshold=threshold,
        metadata={
            "martingale_statistic": mart_stat,
            "martingale_threshold": 3.0,
            "martingale_pass": bool(mart_stat <= 3.0),
            "num_paths": M,
            "num_starts": P,
            "launch_time": float(t),
            "seed": mc_config.seed,
        },
    )


def determinism_check(
    h: PeriodicField,
    F: SpaceTimeField,
    nu: float,
    T: float,
    grid: GridSpec,
    path_counts,
    seeds,
    num_probes: int = 8,
    threshold: float = 0.3,
) -> CheckReport:
    """Across-seed variance of the sampled estimate scales like 1/M.

    Runs the zero-drift payoff estimator at a handful of probe nodes for
    every (path count, seed) pair and fits the log-log slope of the
    across-seed variance against the path count; the statistic is the
    distance of the slope from -1. Identically zero variances (constant
    data) are excluded and reported as exact.
    """
    path_counts = sorted(int(m) for m in path_counts)
    seeds = list(seeds)
    if len(path_counts) < 2:
        raise ValueError("need at least 2 path counts")
    if len(seeds) < 8:
        raise ValueError("need at least 8 seeds")
    if abs(F.times[-1] - T) > 1e-12:
        raise ValueError("forcing grid horizon does not match T")

    stride = max(1, grid.points_per_axis // num_probes)
    probe_nodes = grid.nodes().reshape(-1, grid.dim)[::stride]

    variances = []
    for m_count in path_counts:
        estimates = []
        for seed in seeds:
            key = derive_key(int(seed), _TAG_DETERMINISM)
            mean, _ = restart_estimate(
                None, h, F, nu, F.times, 0, probe_nodes, m_count, key,
            )
            estimates.append(mean)
        var = np.var(np.stack(estimates), axis=0, ddof=1)
        variances.append(float(var.mean()))
    variances = np.asarray(variances)

    if np.all(variances == 0.0):
        return CheckReport(
            name="determinism_check",
            statistic=0.0,
            threshold=threshold,
            metadata={
                "exact": True,
                "variances": variances.tolist(),
                "path_counts": path_counts,
            },
        )
    if np.any(variances == 0.0):
        raise ValueError(
            "degenerate zero-variance entries mixed with stochastic ones"
        )

    slope = float(
        np.polyfit(np.log(path_counts), np.log(variances), 1)[0]
    )
    return CheckReport(
        name="determinism_check",
        statistic=abs(slope + 1.0),
        threshold=threshold,
        metadata={
            "slope": slope,
            "variances": variances.tolist(),
            "path_counts": path_counts,
            "num_seeds": len(seeds),
            "num_probes": int(probe_nodes.shape[0]),
        },
    )


def flow_regularity(
    chars: CharacteristicEnsemble,
    tangent: TangentEnsemble,
    p_list=(2, 4),
    threshold: float = 1e-3,
) -> CheckReport:
    """Diffeomorphism witness: Jacobian positivity and moment traces.

    The statistic is the fraction of (path, start) pairs whose Jacobian
    determinant ever fails to stay positive; the metadata carries the
    empirical moments E |grad Z|^p per time for each requested p together
    with their running maxima (a boundedness witness, reported rather
    than asserted).
    """
    jac = tangent.jacobians  # (S+1, M, P, n, n)
    det = np.linalg.det(jac)
    positive = np.all(det > 0.0, axis=0)  # (M, P)
    fraction = float(np.mean(positive))

    moments = {}
    frob = np.sqrt(np.sum(jac**2, axis=(-2, -1)))  # (S+1, M, P)
    for p in p_list:
        trace = np.mean(frob**p, axis=(1, 2))  # per time
        moments[str(p)] = {
            "per_time": trace.tolist(),
            "running_max": float(trace.max()),
        }

    return CheckReport(
        name="flow_regularity",
        statistic=1.0 - fraction,
        threshold=threshold,
        metadata={
            "positivity_fraction": fraction,
            "num_paths": chars.num_paths,
            "num_starts": chars.num_starts,
            "moments": moments,
        },
    )


def _time_index(times: np.ndarray, t: float) -> int:
    hits = np.nonzero(np.abs(times - t) <= 1e-12)[0]
    if hits.size == 0:
        raise ValueError(f"time {t} is not on the grid")
    return int(hits[0])


def render_table(reports) -> str:
    """Fixed-width table of check outcomes for standard output."""
    lines = [
        f"{'check':<22} {'statistic':>14} {'threshold':>12} {'result':>8}"
    ]
    for r in reports:
        lines.append(
            f"{r.name:<22} {r.statistic:>14.6g} {r.threshold:>12.6g} "
            f"{'PASS' if r.passed else 'FAIL':>8}"
        )
    return "\n".join(lines)


def reports_to_json(reports, path) -> None:
    write_json([r.as_dict() for r in reports], path)
