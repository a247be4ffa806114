"""Lipschitz budget of the data and the solvable-horizon estimate.

The fixed-point map behind the solver contracts when T * exp(T) * K < 1,
where K bounds the spatial Lipschitz constants of the terminal condition
and the forcing. This module computes K from spectral gradients, the
contraction factor gamma(T), and the horizon T0 at which the factor
reaches one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import PeriodicField, SpaceTimeField
from .spectral import spectral_gradient

__all__ = [
    "ContractionBudget",
    "lipschitz_budget",
    "gamma_value",
    "horizon_bound",
    "budget_for",
]

UNBOUNDED = math.inf


@dataclass(frozen=True)
class ContractionBudget:
    """Contraction bookkeeping for one solve.

    K: Lipschitz budget of the data; T: requested horizon;
    gamma: contraction factor T * exp(T) * K; T0: horizon at which the
    factor reaches 1 (infinite when K = 0).
    """

    K: float
    T: float
    gamma: float
    T0: float

    @property
    def contracting(self) -> bool:
        return self.gamma < 1.0

    def as_dict(self) -> dict:
        return {
            "K": self.K,
            "T": self.T,
            "gamma": self.gamma,
            "T0": "unbounded" if math.isinf(self.T0) else self.T0,
            "contracting": self.contracting,
        }


def _max_operator_norm(jacobians: np.ndarray) -> float:
    """Largest spectral norm over a (*shape, n, n) stack of matrices."""
    if jacobians.shape[-1] == 1:
        return float(np.abs(jacobians).max())
    sv = np.linalg.svd(jacobians, compute_uv=False)
    return float(sv.max())


def lipschitz_budget(h: PeriodicField, F: SpaceTimeField) -> float:
    """K = sup |grad h| + sup over time of sup |grad F(s, .)|.

    Gradients are spectral; sup means the largest operator (spectral)
    norm over grid nodes.
    """
    k_h = _max_operator_norm(spectral_gradient(h))
    k_f = 0.0
    for j in range(len(F.times)):
        k_f = max(k_f, _max_operator_norm(spectral_gradient(F.slice(j))))
    return k_h + k_f


def gamma_value(T: float, K: float) -> float:
    """Contraction factor gamma(T) = T * exp(T) * K."""
    if T < 0:
        raise ValueError(f"horizon must be >= 0, got {T}")
    if K < 0:
        raise ValueError(f"Lipschitz budget must be >= 0, got {K}")
    return T * math.exp(T) * K


def horizon_bound(K: float) -> float:
    """The positive root T0 of T * exp(T) * K = 1, to 1e-12 by bisection.

    K = 0 never obstructs contraction, so the bound is unbounded (inf).
    """
    K = float(K)
    if K < 0 or not math.isfinite(K):
        raise ValueError(f"Lipschitz budget must be a finite real >= 0, got {K}")
    if K == 0.0:
        return UNBOUNDED

    def excess(T: float) -> float:
        return T * math.exp(T) * K - 1.0

    lo, hi = 0.0, 1.0
    while excess(hi) < 0.0:
        hi *= 2.0
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if excess(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def budget_for(h: PeriodicField, F: SpaceTimeField, T: float) -> ContractionBudget:
    """Assemble the full budget for data (h, F) on horizon T."""
    K = lipschitz_budget(h, F)
    return ContractionBudget(K=K, T=T, gamma=gamma_value(T, K), T0=horizon_bound(K))
