"""Command line front end: experiments, comparisons, sweeps, reports.

Subcommands:

    solve     fixed-point solve, field + solver report artifacts
    oracle    pseudo-spectral reference solve only
    compare   both solvers on identical inputs, error tables
    converge  error sweep over M, dt, or N with a fitted slope
    diagnose  solve plus the full verification battery (exit 1 on failure)
    budget    print the contraction certificate and stop

Every artifact a run writes is a pure function of its config file; the
single volatile entry (wall-clock data) is isolated under the "meta"
key of the JSON reports. Exit codes: 0 success, 1 diagnostics failure,
2 configuration error, 3 solver hard error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from datetime import datetime, timezone

import numpy as np

from .config import ConfigError, ExperimentConfig
from .contraction import budget_for
from .diagnostics import (
    bsde_residual,
    composition_law,
    determinism_check,
    flow_consistency,
    flow_regularity,
    pde_residual,
    render_table,
    reports_to_json,
)
from .grid import PeriodicField, SpaceTimeField
from .interpolation import make_perturbation_diffeo
from .oracle import OracleConfig, cole_hopf_solution, solve_backward_burgers
from .picard import MartingaleIntegrandField, MCConfig, picard_solve, solver_report
from .rng import derive_key
from .sde import integrate_forward, integrate_tangent, sample_brownian
from .serialization import (
    ensure_run_dir,
    field_to_csv,
    save_field,
    save_spacetime_field,
    write_json,
)

__all__ = ["main"]


def _resolve_threads(requested: int | None) -> int:
    """Clamp the thread request into the compiled engine.

    Thread count is a performance knob only; per-slot writes in the
    kernels keep every result bit-identical across counts.
    """
    if requested is None:
        env = os.environ.get("BURGERS_FBSDE_THREADS")
        if env:
            try:
                requested = int(env)
            except ValueError:
                raise ConfigError(
                    f"BURGERS_FBSDE_THREADS: expected an integer, got {env!r}"
                )
    if requested is None:
        return 0
    if requested < 1:
        raise ConfigError(f"--threads: must be >= 1, got {requested}")
    import numba

    clamped = min(requested, numba.config.NUMBA_NUM_THREADS)
    numba.set_num_threads(clamped)
    return clamped


def _load_config(args) -> ExperimentConfig:
    config = ExperimentConfig.load(args.config)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["mc"] = {"seed": args.seed}
    if getattr(args, "out", None) is not None:
        overrides["outputs"] = {"directory": args.out}
    if overrides:
        config = config.with_overrides(**overrides)
    return config


def _materialize(config: ExperimentConfig):
    """Build (grid, h, F) from the config; preset failures are config errors."""
    try:
        grid = config.grid_spec()
        h = config.terminal()
        forcing = config.forcing()
    except ValueError as exc:
        raise ConfigError(str(exc))
    return grid, h, forcing


def _meta(timings: dict) -> dict:
    return {
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "timings_seconds": timings,
    }


def _budget_lines(budget) -> list:
    t0 = "inf" if budget.T0 == float("inf") else f"{budget.T0:.12g}"
    return [
        f"K = {budget.K:.12g}",
        f"gamma(T) = {budget.gamma:.12g}",
        f"T0 = {t0}",
    ]


def _print_budget(budget) -> None:
    for line in _budget_lines(budget):
        print(line)
    if budget.T >= budget.T0:
        print(
            "warning: horizon T reaches the contraction bound T0; "
            "the fixed-point iteration may not converge",
            file=sys.stderr,
        )


def _quadrature_l2(values: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.sum(values**2, axis=-1))))


def _values_at_time(field: SpaceTimeField, s: float) -> np.ndarray:
    """Linear-in-time slice values at s, clamped to the stored span."""
    times = field.times
    s = min(max(s, times[0]), times[-1])
    j = int(np.searchsorted(times, s))
    j = min(max(j, 0), len(times) - 1)
    if abs(times[j] - s) <= 1e-12:
        return field.values[j]
    lo = j - 1
    w = (s - times[lo]) / (times[j] - times[lo])
    return (1.0 - w) * field.values[lo] + w * field.values[j]


def _run_picard(config: ExperimentConfig, h, forcing):
    grid = config.grid_spec()
    return picard_solve(
        h, forcing, config.problem["nu"], config.problem["T"], grid,
        config.mc_config(),
        tol=config.picard["tol"], max_iter=config.picard["max_iter"],
    )


def _run_oracle(config: ExperimentConfig, h):
    grid = config.grid_spec()
    oracle_cfg = config.oracle_config()
    times = config.oracle_times()
    try:
        forcing = config.forcing_on(times)
    except ValueError as exc:
        raise ConfigError(str(exc))
    return solve_backward_burgers(h, forcing, oracle_cfg), oracle_cfg


def _compare_table(y: SpaceTimeField, oracle: SpaceTimeField):
    rows = np.empty((len(y.times), 3))
    for j, s in enumerate(y.times):
        ref = _values_at_time(oracle, float(s))
        diff = y.values[j] - ref
        rows[j, 0] = s
        rows[j, 1] = _quadrature_l2(diff)
        rows[j, 2] = np.abs(diff).max()
    ref0 = _values_at_time(oracle, float(y.times[0]))
    ref0_norm = _quadrature_l2(ref0)
    rel_l2_s0 = rows[0, 1] / ref0_norm if ref0_norm > 0 else rows[0, 1]
    return rows, float(rel_l2_s0)


def _write_compare_csv(rows: np.ndarray, path) -> None:
    np.savetxt(
        path, rows, delimiter=",", fmt="%.17g",
        header="s,l2_error,linf_error", comments="",
    )


# subcommands


def _cmd_budget(args) -> int:
    config = _load_config(args)
    _, h, forcing = _materialize(config)
    budget = budget_for(h, forcing, config.problem["T"])
    for line in _budget_lines(budget):
        print(line)
    return 0


def _cmd_solve(args) -> int:
    config = _load_config(args)
    grid, h, forcing = _materialize(config)
    run_dir = ensure_run_dir(config.outputs["directory"])
    (run_dir / "config.yaml").write_text(config.to_yaml(), encoding="utf-8")

    budget = budget_for(h, forcing, config.problem["T"])
    _print_budget(budget)

    start = time.perf_counter()
    y, state, budget = _run_picard(config, h, forcing)
    elapsed = time.perf_counter() - start

    save_spacetime_field(y, run_dir / "solution.json")
    if "csv" in config.outputs["formats"]:
        field_to_csv(y.slice(0), run_dir / "solution_s0.csv")

    report = solver_report(state, budget)
    report["meta"] = _meta({"solve": elapsed})
    write_json(report, run_dir / "solver_report.json")

    print(
        f"solve: {state.k} iterations, "
        f"{'converged' if state.converged else 'not converged'}, "
        f"final diff {state.diff_history[-1]:.3e}"
    )
    print(f"artifacts written to {run_dir}")
    return 0


def _cmd_oracle(args) -> int:
    config = _load_config(args)
    grid, h, forcing = _materialize(config)
    run_dir = ensure_run_dir(config.outputs["directory"])
    (run_dir / "config.yaml").write_text(config.to_yaml(), encoding="utf-8")

    start = time.perf_counter()
    oracle, oracle_cfg = _run_oracle(config, h)
    elapsed = time.perf_counter() - start

    save_spacetime_field(oracle, run_dir / "oracle.json")
    if "csv" in config.outputs["formats"]:
        field_to_csv(oracle.slice(0), run_dir / "oracle_s0.csv")
    report = {
        "oracle": oracle_cfg.as_dict(),
        "meta": _meta({"oracle": elapsed}),
    }
    write_json(report, run_dir / "oracle_report.json")
    print(f"oracle: {oracle_cfg.num_steps} steps of {oracle_cfg.dt_effective:.6g}")
    print(f"artifacts written to {run_dir}")
    return 0


def _cmd_compare(args) -> int:
    config = _load_config(args)
    grid, h, forcing = _materialize(config)
    run_dir = ensure_run_dir(config.outputs["directory"])
    (run_dir / "config.yaml").write_text(config.to_yaml(), encoding="utf-8")

    budget = budget_for(h, forcing, config.problem["T"])
    _print_budget(budget)

    timings = {}
    start = time.perf_counter()
    y, state, budget = _run_picard(config, h, forcing)
    timings["solve"] = time.perf_counter() - start
    start = time.perf_counter()
    oracle, _ = _run_oracle(config, h)
    timings["oracle"] = time.perf_counter() - start

    rows, rel_l2_s0 = _compare_table(y, oracle)
    if "csv" in config.outputs["formats"]:
        _write_compare_csv(rows, run_dir / "compare.csv")
    summary = {
        "relative_l2_at_start": rel_l2_s0,
        "max_l2_error": float(rows[:, 1].max()),
        "max_linf_error": float(rows[:, 2].max()),
        "iterations": state.k,
        "converged": state.converged,
        "meta": _meta(timings),
    }
    write_json(summary, run_dir / "compare.json")
    print(f"relative L2 error at s = 0: {rel_l2_s0:.6g}")
    print(f"artifacts written to {run_dir}")
    return 0


def _parse_sweep_values(sweep: str, raw: str):
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if len(parts) < 3:
        raise ConfigError(
            f"--values: a sweep needs at least 3 points, got {len(parts)}"
        )
    try:
        if sweep == "dt":
            return [float(p) for p in parts]
        return [int(float(p)) for p in parts]
    except ValueError:
        raise ConfigError(f"--values: could not parse {raw!r}")


def _cmd_converge(args) -> int:
    config = _load_config(args)
    sweep = args.sweep
    values = _parse_sweep_values(sweep, args.values)
    grid, h, forcing = _materialize(config)
    run_dir = ensure_run_dir(config.outputs["directory"])
    (run_dir / "config.yaml").write_text(config.to_yaml(), encoding="utf-8")

    timings = {}
    start = time.perf_counter()
    errors = []
    resolutions = []
    if sweep == "M":
        oracle, _ = _run_oracle(config, h)
        for m_paths in values:
            sub = config.with_overrides(mc={"M": int(m_paths)})
            y, _, _ = _run_picard(sub, h, forcing)
            _, rel = _compare_table(y, oracle)
            errors.append(rel)
            resolutions.append(float(m_paths))
    elif sweep == "dt":
        T = config.problem["T"]
        nu = config.problem["nu"]
        if grid.dim != 1 or np.any(forcing.values):
            raise ConfigError(
                "a dt sweep checks the reference integrator against the "
                "closed form, which needs a 1-d unforced problem"
            )
        u0 = PeriodicField(grid, -h.values)
        u_end = cole_hopf_solution(u0, nu, T, grid)
        y0_exact = -u_end.values
        for dt in values:
            sub = config.with_overrides(oracle={"dt": float(dt)})
            oracle, _ = _run_oracle(sub, h)
            err = float(np.abs(oracle.values[0] - y0_exact).max())
            errors.append(err)
            resolutions.append(T / float(dt))
    else:  # N sweep
        for n_pts in values:
            sub = config.with_overrides(grid={"N": int(n_pts)})
            sub_grid, sub_h, sub_forcing = _materialize(sub)
            y, _, _ = _run_picard(sub, sub_h, sub_forcing)
            oracle, _ = _run_oracle(sub, sub_h)
            _, rel = _compare_table(y, oracle)
            errors.append(rel)
            resolutions.append(float(n_pts))
    timings["sweep"] = time.perf_counter() - start

    log_res = np.log(np.asarray(resolutions))
    log_err = np.log(np.maximum(np.asarray(errors), 1e-300))
    slope = float(np.polyfit(log_res, log_err, 1)[0])

    rows = np.column_stack([values, resolutions, errors])
    if "csv" in config.outputs["formats"]:
        np.savetxt(
            run_dir / "converge.csv", rows, delimiter=",", fmt="%.17g",
            header="parameter,resolution,error", comments="",
        )
    summary = {
        "sweep": sweep,
        "values": [float(v) for v in values],
        "errors": errors,
        "slope_vs_resolution": slope,
        "meta": _meta(timings),
    }
    write_json(summary, run_dir / "converge.json")
    print(f"fitted slope against resolution: {slope:.4g}")
    print(f"artifacts written to {run_dir}")
    return 0


def _diagnostic_battery(config, grid, h, forcing, y, state):
    nu = config.problem["nu"]
    T = config.problem["T"]
    seed = config.mc["seed"]
    m_total = config.mc["M"]
    reports = []

    probe_idx = np.linspace(0, grid.num_nodes, 5, endpoint=False).astype(int)
    probes = grid.nodes().reshape(-1, grid.dim)[probe_idx]
    mid = float(y.times[len(y.times) // 2])
    # the sampled solution carries its own noise floor; fold a third of
    # the final update size into the comparison band
    floor = min(config.picard["tol"], state.diff_history[-1]) / 3.0
    reports.append(flow_consistency(
        y, nu, 0.0, mid, probes,
        MCConfig(num_paths=min(m_total, 10000), seed=seed),
        h=h, F=forcing, field_error=floor,
    ))

    xi = make_perturbation_diffeo(grid, 0.3, 1)
    reports.append(composition_law(
        y, xi, nu, 0.0, MCConfig(num_paths=min(m_total, 32), seed=seed),
    ))

    bsde_starts = grid.nodes().reshape(-1, grid.dim)[
        :: max(1, grid.num_nodes // 8)
    ]
    reports.append(bsde_residual(
        y, MartingaleIntegrandField.from_velocity(y), h, forcing, nu,
        MCConfig(num_paths=min(m_total, 256), seed=seed),
        starts=bsde_starts,
    ))

    reports.append(determinism_check(
        h, forcing, nu, T, grid,
        path_counts=(1000, 4000, 16000), seeds=range(10),
    ))

    reg_paths = min(m_total, 2000)
    noise = sample_brownian(
        y.times, reg_paths, grid.dim, "common",
        derive_key(seed, 7001),
    )
    reg_starts = grid.nodes().reshape(-1, grid.dim)[
        :: max(1, grid.num_nodes // 4)
    ]
    chars = integrate_forward(y, float(y.times[0]), reg_starts, noise, nu)
    tangent = integrate_tangent(y, chars)
    reports.append(flow_regularity(chars, tangent))

    try:
        oracle, _ = _run_oracle(config, h)
        oracle_forcing = config.forcing_on(oracle.times)
        _, residual_report = pde_residual(
            oracle, h, oracle_forcing, nu, threshold=1e-4
        )
        reports.append(residual_report)
    except (ValueError, FloatingPointError) as exc:
        print(f"note: reference residual check skipped ({exc})", file=sys.stderr)

    return reports


def _cmd_diagnose(args) -> int:
    config = _load_config(args)
    grid, h, forcing = _materialize(config)
    run_dir = ensure_run_dir(config.outputs["directory"])
    (run_dir / "config.yaml").write_text(config.to_yaml(), encoding="utf-8")

    budget = budget_for(h, forcing, config.problem["T"])
    _print_budget(budget)

    timings = {}
    start = time.perf_counter()
    y, state, budget = _run_picard(config, h, forcing)
    timings["solve"] = time.perf_counter() - start

    save_spacetime_field(y, run_dir / "solution.json")
    report = solver_report(state, budget)

    start = time.perf_counter()
    reports = _diagnostic_battery(config, grid, h, forcing, y, state)
    timings["diagnostics"] = time.perf_counter() - start

    report["meta"] = _meta(timings)
    write_json(report, run_dir / "solver_report.json")
    reports_to_json(reports, run_dir / "diagnostics.json")

    print(render_table(reports))
    print(f"artifacts written to {run_dir}")
    failed = [r.name for r in reports if not r.passed]
    if failed:
        print(f"diagnostics failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="burgers-fbsde",
        description=(
            "Monte Carlo fixed-point solver for the periodic backward "
            "Burgers problem, with a spectral reference solver and a "
            "verification battery."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="YAML experiment file")
        p.add_argument("--seed", type=int, default=None,
                       help="override mc.seed")
        p.add_argument("--threads", type=int, default=None,
                       help="compiled-engine threads (results unchanged)")
        p.add_argument("--out", default=None,
                       help="override outputs.directory")

    p = sub.add_parser("solve", help="run the fixed-point solver")
    common(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("oracle", help="run the spectral reference solver")
    common(p)
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("compare", help="error tables, solver vs reference")
    common(p)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("converge", help="error sweep with fitted slope")
    common(p)
    p.add_argument("--sweep", required=True, choices=("M", "dt", "N"))
    p.add_argument("--values", required=True,
                   help="comma-separated sweep points (at least 3)")
    p.set_defaults(func=_cmd_converge)

    p = sub.add_parser("diagnose", help="solve plus verification battery")
    common(p)
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("budget", help="print the contraction certificate")
    common(p)
    p.set_defaults(func=_cmd_budget)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        _resolve_threads(args.threads)
        return int(args.func(args) or 0)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (FloatingPointError, ValueError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
