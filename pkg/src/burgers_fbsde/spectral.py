"""Spectral differentiation and Sobolev norms for periodic fields.

Fourier convention: c_k = (2*pi)^{-n} * integral f(theta) exp(-i k.theta) dtheta,
so that on the grid c = fftn(values) / N^n and the k = 0 coefficient is the
spatial mean. All operators act componentwise on vector fields.
"""

from __future__ import annotations

import numpy as np

from .grid import GridSpec, PeriodicField

__all__ = [
    "SpectralCoeffs",
    "field_to_coeffs",
    "coeffs_to_field",
    "spectral_gradient",
    "spectral_laplacian",
    "sobolev_norm",
    "dealias_mask",
    "apply_dealias",
]


class SpectralCoeffs:
    """Complex Fourier coefficients of a real vector field.

    Coefficients are stored in numpy fftn layout with shape
    (*grid.shape, dim), indexed by integer wavevectors via
    ``grid.wavenumbers()`` per axis.
    """

    def __init__(self, grid: GridSpec, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.shape != grid.shape + (grid.dim,):
            raise ValueError(
                f"coefficient shape {coeffs.shape} does not match "
                f"{grid.shape + (grid.dim,)}"
            )
        self.grid = grid
        self.coeffs = coeffs

    def conjugate_symmetry_defect(self) -> float:
        """Max |c_{-k} - conj(c_k)|; zero (to roundoff) for real fields."""
        flipped = self.coeffs
        for axis in range(self.grid.dim):
            flipped = np.roll(np.flip(flipped, axis=axis), 1, axis=axis)
        return float(np.abs(flipped - np.conj(self.coeffs)).max())


def field_to_coeffs(field: PeriodicField) -> SpectralCoeffs:
    n_total = field.grid.num_nodes
    axes = tuple(range(field.grid.dim))
    coeffs = np.fft.fftn(field.values, axes=axes) / n_total
    return SpectralCoeffs(field.grid, coeffs)


def coeffs_to_field(coeffs: SpectralCoeffs) -> PeriodicField:
    grid = coeffs.grid
    axes = tuple(range(grid.dim))
    values = np.fft.ifftn(coeffs.coeffs * grid.num_nodes, axes=axes)
    return PeriodicField(grid, values.real)


def spectral_gradient(field: PeriodicField) -> np.ndarray:
    """Jacobian d f_i / d theta_j by differentiation in Fourier space.

    Args:
        field: a finite PeriodicField.

    Returns:
        Array of shape (*grid.shape, dim, dim); entry [..., i, j] is the
        derivative of component i along axis j.
    """
    grid = field.grid
    axes = tuple(range(grid.dim))
    fhat = np.fft.fftn(field.values, axes=axes)
    k = grid.wavenumbers().astype(np.float64)
    out = np.empty(grid.shape + (grid.dim, grid.dim))
    for j in range(grid.dim):
        shape = [1] * (grid.dim + 1)
        shape[j] = grid.points_per_axis
        ik = 1j * k.reshape(shape)
        out[..., j] = np.fft.ifftn(fhat * ik, axes=axes).real
    return out


def spectral_laplacian(field: PeriodicField) -> PeriodicField:
    """Componentwise Laplacian via multiplication by -|k|^2."""
    grid = field.grid
    axes = tuple(range(grid.dim))
    fhat = np.fft.fftn(field.values, axes=axes)
    k2 = grid.wavevector_square()[..., np.newaxis]
    values = np.fft.ifftn(-k2 * fhat, axes=axes).real
    return PeriodicField(grid, values)


def sobolev_norm(field: PeriodicField, alpha: float) -> float:
    """H^alpha norm (sum_k (1+|k|^2)^alpha |c_k|^2)^(1/2) over all components.

    alpha = 0 is the L2 norm under the normalized measure (2*pi)^{-n} dtheta.

    Args:
        field: the field to measure.
        alpha: regularity order, a real number >= 0.
    """
    alpha = float(alpha)
    if not np.isfinite(alpha) or alpha < 0:
        raise ValueError(f"alpha must be a nonnegative real, got {alpha!r}")
    coeffs = field_to_coeffs(field).coeffs
    weight = (1.0 + field.grid.wavevector_square()) ** alpha
    total = np.sum(weight[..., np.newaxis] * np.abs(coeffs) ** 2)
    return float(np.sqrt(total))


def dealias_mask(grid: GridSpec) -> np.ndarray:
    """Boolean 2/3-rule mask: True where |k_axis| <= N/3 on every axis."""
    cutoff = grid.points_per_axis // 3
    k = grid.wavenumbers()
    mask = np.ones(grid.shape, dtype=bool)
    for axis in range(grid.dim):
        shape = [1] * grid.dim
        shape[axis] = grid.points_per_axis
        mask &= (np.abs(k) <= cutoff).reshape(shape)
    return mask


def apply_dealias(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Zero all modes outside the 2/3 mask of a physical-space product."""
    axes = tuple(range(grid.dim))
    fhat = np.fft.fftn(values, axes=axes)
    fhat *= dealias_mask(grid)[..., np.newaxis]
    return np.fft.ifftn(fhat, axes=axes).real
