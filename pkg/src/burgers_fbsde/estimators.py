"""Estimator-style front ends for the two solvers.

Both classes follow the scikit-learn convention: constructor arguments
are plain scalars, fit(terminal, forcing) computes the space-time
solution and stores it on trailing-underscore attributes, and predict
evaluates it at arbitrary (time, point) queries. get_params/set_params
come from the base class, so the solvers drop into parameter sweeps and
pipelines unchanged.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .contraction import ContractionBudget
from .grid import PeriodicField, SpaceTimeField, uniform_times
from .interpolation import eval_spacetime
from .oracle import OracleConfig, solve_backward_burgers
from .picard import MCConfig, picard_solve

__all__ = ["PicardBurgersSolver", "SpectralBurgersSolver"]


class PicardBurgersSolver(BaseEstimator):
    """Monte Carlo fixed-point solver of the backward problem.

    Parameters mirror MCConfig plus the iteration controls; fit expects
    the terminal velocity field and an optional forcing history on the
    matching uniform time grid.
    """

    def __init__(
        self,
        nu: float = 0.1,
        horizon: float = 0.5,
        num_times: int = 64,
        num_paths: int = 1000,
        seed: int = 0,
        mode: str = "independent",
        antithetic: bool = False,
        engine: str = "auto",
        restart_stride: int = 1,
        tol: float = 5e-3,
        max_iter: int = 8,
    ):
        self.nu = nu
        self.horizon = horizon
        self.num_times = num_times
        self.num_paths = num_paths
        self.seed = seed
        self.mode = mode
        self.antithetic = antithetic
        self.engine = engine
        self.restart_stride = restart_stride
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, terminal: PeriodicField, forcing: SpaceTimeField | None = None):
        grid = terminal.grid
        times = uniform_times(self.horizon, self.num_times)
        if forcing is None:
            forcing = SpaceTimeField.zeros(grid, times)
        cfg = MCConfig(
            num_paths=self.num_paths,
            seed=self.seed,
            mode=self.mode,
            antithetic=self.antithetic,
            engine=self.engine,
            restart_stride=self.restart_stride,
        )
        y, state, budget = picard_solve(
            terminal, forcing, self.nu, self.horizon, grid, cfg,
            tol=self.tol, max_iter=self.max_iter,
        )
        self.solution_ = y
        self.state_ = state
        self.budget_: ContractionBudget = budget
        self.n_iter_ = state.k
        return self

    def predict(self, s: float, points: np.ndarray) -> np.ndarray:
        """Velocity at time s and the given torus points."""
        if not hasattr(self, "solution_"):
            raise RuntimeError("call fit before predict")
        return eval_spacetime(self.solution_, s, points)


class SpectralBurgersSolver(BaseEstimator):
    """Pseudo-spectral reference solver with the same front end."""

    def __init__(
        self,
        nu: float = 0.1,
        horizon: float = 0.5,
        dt: float = 1e-3,
        dealias: bool = True,
    ):
        self.nu = nu
        self.horizon = horizon
        self.dt = dt
        self.dealias = dealias

    def fit(self, terminal: PeriodicField, forcing: SpaceTimeField | None = None):
        grid = terminal.grid
        config = OracleConfig(
            grid=grid, nu=self.nu, T=self.horizon, dt=self.dt,
            dealias=self.dealias,
        )
        if forcing is None:
            times = np.linspace(0.0, self.horizon, config.num_steps + 1)
            forcing = SpaceTimeField.zeros(grid, times)
        self.solution_ = solve_backward_burgers(terminal, forcing, config)
        self.config_ = config
        return self

    def predict(self, s: float, points: np.ndarray) -> np.ndarray:
        if not hasattr(self, "solution_"):
            raise RuntimeError("call fit before predict")
        return eval_spacetime(self.solution_, s, points)
