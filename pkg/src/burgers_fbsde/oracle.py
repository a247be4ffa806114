"""Deterministic reference solvers for the backward problem.

The stochastic solver is judged against three deterministic tools:

* a pseudo-spectral method for the backward equation itself, run forward
  in the reversed time variable tau = T - s where it is parabolic and
  stable (4-stage Runge-Kutta in time, 2/3-rule dealiasing in space),
* the 1-d logarithmic-substitution closed form for the classical
  unforced equation, with the heat flow applied exactly in Fourier space,
* the involution bridging classical and backward solutions,
  v(s) = -u(T - s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import GridSpec, PeriodicField, SpaceTimeField
from .spectral import (
    apply_dealias,
    field_to_coeffs,
    spectral_gradient,
    spectral_laplacian,
)

__all__ = [
    "OracleConfig",
    "solve_backward_burgers",
    "cole_hopf_solution",
    "time_reversal",
    "energy_trace",
]

# classical 4-stage Runge-Kutta stability radii
_RK4_REAL_LIMIT = 2.785
_RK4_IMAG_LIMIT = 2.0 * math.sqrt(2.0)
_BLOWUP_SUP = 1.0e6


@dataclass(frozen=True)
class OracleConfig:
    """Deterministic solver settings.

    grid: spatial grid; nu: viscosity, strictly positive; T: horizon;
    dt: requested time step (rounded to an integer count of steps);
    dealias: apply the 2/3 rule to the advection product.
    """

    grid: GridSpec
    nu: float
    T: float
    dt: float
    dealias: bool = True

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError(f"viscosity must be > 0, got {self.nu}")
        if self.T <= 0:
            raise ValueError(f"horizon must be > 0, got {self.T}")
        if self.dt <= 0:
            raise ValueError(f"time step must be > 0, got {self.dt}")

    @property
    def num_steps(self) -> int:
        return max(1, int(round(self.T / self.dt)))

    @property
    def dt_effective(self) -> float:
        return self.T / self.num_steps

    def as_dict(self) -> dict:
        return {
            "dim": self.grid.dim,
            "points_per_axis": self.grid.points_per_axis,
            "nu": self.nu,
            "T": self.T,
            "dt": self.dt,
            "dt_effective": self.dt_effective,
            "num_steps": self.num_steps,
            "dealias": self.dealias,
        }


def _check_stability(config: OracleConfig, sup_initial: float) -> None:
    grid = config.grid
    k_max = grid.points_per_axis // 3 if config.dealias else grid.points_per_axis // 2
    dt = config.dt_effective
    diffusion_limit = _RK4_REAL_LIMIT / (config.nu * grid.dim * k_max**2)
    if dt > diffusion_limit:
        raise ValueError(
            f"time step {dt:g} exceeds the diffusive stability limit "
            f"{diffusion_limit:g} (nu = {config.nu:g}, k_max = {k_max})"
        )
    if sup_initial > 0:
        advective_limit = _RK4_IMAG_LIMIT / (
            sup_initial * k_max * math.sqrt(grid.dim)
        )
        if dt > advective_limit:
            raise ValueError(
                f"time step {dt:g} exceeds the advective stability limit "
                f"{advective_limit:g} (sup |field| = {sup_initial:g})"
            )


class _TimeLerp:
    """Linear-in-time evaluation of a SpaceTimeField's node values."""

    def __init__(self, field: SpaceTimeField):
        self.times = field.times
        self.values = field.values

    def __call__(self, s: float) -> np.ndarray:
        times = self.times
        s = min(max(s, times[0]), times[-1])
        hit = np.nonzero(np.abs(times - s) <= 1e-12)[0]
        if hit.size:
            return self.values[int(hit[0])]
        b = int(np.searchsorted(times, s))
        a = b - 1
        w = (s - times[a]) / (times[b] - times[a])
        return (1.0 - w) * self.values[a] + w * self.values[b]


def _advection(grid: GridSpec, w: np.ndarray, dealias: bool) -> np.ndarray:
    """(w . grad) w with optional 2/3 dealiasing of the product."""
    jac = spectral_gradient(PeriodicField(grid, w))  # (*shape, i, j)
    adv = np.einsum("...j,...ij->...i", w, jac)
    if dealias:
        adv = apply_dealias(adv, grid)
    return adv


def solve_backward_burgers(
    h: PeriodicField, F: SpaceTimeField, config: OracleConfig
) -> SpaceTimeField:
    """Pseudo-spectral reference solution of the backward problem.

    Integrates d/dtau w = (w . grad) w + nu Lap w + F(T - tau) forward in
    the reversed time tau with w(0) equal to the terminal condition, and
    returns the field on the s grid (terminal slice equal to h exactly).
    Raises when the step violates a stability bound or the state blows up.
    """
    grid = config.grid
    if h.grid != grid or F.grid != grid:
        raise ValueError("terminal condition and forcing must live on the grid")
    T = config.T
    if abs(F.times[0]) > 1e-12 or abs(F.times[-1] - T) > 1e-12:
        raise ValueError(
            f"forcing time grid spans [{F.times[0]:g}, {F.times[-1]:g}], "
            f"expected [0, {T:g}]"
        )
    sup0 = float(np.abs(h.values).max())
    _check_stability(config, sup0)

    nu = config.nu
    dt = config.dt_effective
    num_steps = config.num_steps
    force_at = _TimeLerp(F)
    dealias = config.dealias

    def rhs(w: np.ndarray, tau: float) -> np.ndarray:
        lap = spectral_laplacian(PeriodicField(grid, w)).values
        return _advection(grid, w, dealias) + nu * lap + force_at(T - tau)

    states = np.empty((num_steps + 1,) + grid.shape + (grid.dim,))
    states[0] = h.values
    w = h.values.copy()
    for k in range(num_steps):
        tau = k * dt
        k1 = rhs(w, tau)
        k2 = rhs(w + 0.5 * dt * k1, tau + 0.5 * dt)
        k3 = rhs(w + 0.5 * dt * k2, tau + 0.5 * dt)
        k4 = rhs(w + dt * k3, tau + dt)
        w = w + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if dealias:
            # project the state too: roundoff reinjects the masked band,
            # and the diffusion stability check only covers |k| <= N/3
            w = apply_dealias(w, grid)
        sup = float(np.abs(w).max())
        if not np.isfinite(sup) or sup > _BLOWUP_SUP:
            raise FloatingPointError(
                f"state blew up at reversed time {(k + 1) * dt:g} "
                f"(s = {(num_steps - k - 1) * dt:g}): sup = {sup:g}"
            )
        states[k + 1] = w

    # y(s_j) = w(T - s_j); reversing the state order puts s ascending
    times = np.linspace(0.0, T, num_steps + 1)
    values = states[::-1].copy()
    return SpaceTimeField(grid, times, values)


def cole_hopf_solution(
    u0: PeriodicField, nu: float, t: float, grid: GridSpec
) -> PeriodicField:
    """Closed-form classical 1-d unforced solution at time t.

    The logarithmic substitution turns the equation into the heat
    equation for phi = exp(-(2 nu)^{-1} * antiderivative(u0)); the heat
    flow is exact in Fourier space, and u = -2 nu d/dtheta log(phi).
    Requires 1-d, zero-mean initial data and nonnegative t.
    """
    if grid.dim != 1:
        raise ValueError("the closed form is one-dimensional")
    if u0.grid != grid:
        raise ValueError("initial data does not live on the given grid")
    if nu <= 0:
        raise ValueError(f"viscosity must be > 0, got {nu}")
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")
    coeffs = field_to_coeffs(u0).coeffs[:, 0]
    scale = max(1.0, float(np.abs(u0.values).max()))
    if abs(coeffs[0]) > 1e-12 * scale:
        raise ValueError(
            f"initial data must have zero spatial mean, got {coeffs[0].real:g}"
        )

    n = grid.points_per_axis
    k = grid.wavenumbers().astype(np.float64)
    # spectral antiderivative of u0 (k = 0 taken as 0; constants cancel)
    anti = np.zeros(n, dtype=np.complex128)
    nonzero = k != 0
    anti[nonzero] = coeffs[nonzero] / (1j * k[nonzero])
    psi = np.fft.ifft(anti * n).real
    phi0 = np.exp(-psi / (2.0 * nu))

    phi0_hat = np.fft.fft(phi0)
    decay = np.exp(-nu * k**2 * t)
    phi_hat = phi0_hat * decay
    phi = np.fft.ifft(phi_hat).real
    dphi = np.fft.ifft(1j * k * phi_hat).real
    u = -2.0 * nu * dphi / phi
    return PeriodicField(grid, u)


def time_reversal(u: SpaceTimeField, T: float) -> SpaceTimeField:
    """The bridge v(s) = -u(T - s) between classical and backward fields.

    The same transform maps an attached forcing between the two problems.
    When the reflected time set coincides with the original grid (any
    uniform grid spanning [0, T] does), the original time array is reused
    so that applying the transform twice is an exact involution.
    """
    times = u.times
    if abs(times[0]) > 1e-9 or abs(times[-1] - T) > 1e-9:
        raise ValueError(
            f"field spans [{times[0]:g}, {times[-1]:g}], expected [0, {T:g}]"
        )
    reflected = (T - times)[::-1]
    if np.max(np.abs(reflected - times)) <= 1e-12 * max(1.0, T):
        new_times = times
    else:
        new_times = reflected
    return SpaceTimeField(u.grid, new_times, -u.values[::-1])


def energy_trace(field: SpaceTimeField) -> np.ndarray:
    """Normalized L2 norm of each time slice (mean-square quadrature)."""
    return np.sqrt(np.mean(np.sum(field.values**2, axis=-1), axis=tuple(
        range(1, field.values.ndim - 1)
    )))
