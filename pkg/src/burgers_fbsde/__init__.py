"""Monte Carlo fixed-point solver for the periodic backward Burgers problem.

The package computes the velocity field of the viscous Burgers equation
with terminal data on the n-torus by iterating a sampled Feynman-Kac
restart map, cross-validates it against a pseudo-spectral reference
integrator (and, in one dimension, a closed form), and ships a
verification battery for the pathwise identities the construction rests
on. All sampling is counter-addressed: results are bit-reproducible
under a fixed seed, independent of threads, and nested across path
counts.
"""

from .contraction import (
    ContractionBudget,
    budget_for,
    gamma_value,
    horizon_bound,
    lipschitz_budget,
)
from .estimators import PicardBurgersSolver, SpectralBurgersSolver
from .grid import GridSpec, PeriodicField, SpaceTimeField, TWO_PI, uniform_times
from .interpolation import (
    ChannelInterpolant,
    FieldInterpolant,
    compose,
    compose_map,
    displacement_jacobian_determinant,
    eval_spacetime,
    make_perturbation_diffeo,
    map_displacement,
)
from .oracle import (
    OracleConfig,
    cole_hopf_solution,
    energy_trace,
    solve_backward_burgers,
    time_reversal,
)
from .picard import (
    MartingaleIntegrandField,
    MCConfig,
    PicardState,
    gamma_map,
    martingale_integrand,
    picard_solve,
    solver_report,
)
from .sde import (
    BrownianEnsemble,
    CharacteristicEnsemble,
    TangentEnsemble,
    integrate_forward,
    integrate_tangent,
    sample_brownian,
)
from .spectral import (
    SpectralCoeffs,
    apply_dealias,
    coeffs_to_field,
    dealias_mask,
    field_to_coeffs,
    sobolev_norm,
    spectral_gradient,
    spectral_laplacian,
)
from .rng import (
    counter_normal,
    counter_uniform,
    derive_key,
    draw_counter,
    mix64,
    normal_inverse_cdf,
)
from .serialization import (
    field_from_csv,
    field_to_csv,
    load_field,
    load_spacetime_field,
    paths_to_csv,
    save_field,
    save_spacetime_field,
    write_json,
)
from .diagnostics import (
    CheckReport,
    bsde_residual,
    composition_law,
    determinism_check,
    flow_consistency,
    flow_regularity,
    pde_residual,
    render_table,
    reports_to_json,
    restart_estimate,
)
from .presets import PRESET_KINDS, forcing_from_spec, terminal_from_spec
from .config import DEFAULT_CONFIG, ConfigError, ExperimentConfig

__version__ = "0.1.0"

__all__ = [
    "TWO_PI",
    "GridSpec",
    "PeriodicField",
    "SpaceTimeField",
    "uniform_times",
    "SpectralCoeffs",
    "field_to_coeffs",
    "coeffs_to_field",
    "spectral_gradient",
    "spectral_laplacian",
    "sobolev_norm",
    "dealias_mask",
    "apply_dealias",
    "ChannelInterpolant",
    "FieldInterpolant",
    "compose",
    "compose_map",
    "eval_spacetime",
    "make_perturbation_diffeo",
    "map_displacement",
    "displacement_jacobian_determinant",
    "mix64",
    "counter_uniform",
    "counter_normal",
    "normal_inverse_cdf",
    "derive_key",
    "draw_counter",
    "BrownianEnsemble",
    "CharacteristicEnsemble",
    "TangentEnsemble",
    "sample_brownian",
    "integrate_forward",
    "integrate_tangent",
    "ContractionBudget",
    "budget_for",
    "gamma_value",
    "horizon_bound",
    "lipschitz_budget",
    "MCConfig",
    "PicardState",
    "MartingaleIntegrandField",
    "gamma_map",
    "picard_solve",
    "martingale_integrand",
    "solver_report",
    "OracleConfig",
    "solve_backward_burgers",
    "cole_hopf_solution",
    "time_reversal",
    "energy_trace",
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
    "write_json",
    "field_to_csv",
    "field_from_csv",
    "save_field",
    "save_spacetime_field",
    "load_field",
    "load_spacetime_field",
    "paths_to_csv",
    "PRESET_KINDS",
    "terminal_from_spec",
    "forcing_from_spec",
    "DEFAULT_CONFIG",
    "ConfigError",
    "ExperimentConfig",
    "PicardBurgersSolver",
    "SpectralBurgersSolver",
    "__version__",
]
