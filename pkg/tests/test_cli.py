"""Tests for the command line front end.

Runs main() in process with argv lists and checks exit codes, printed
output, and the artifact files each subcommand writes.
"""

import json
import warnings

import numpy as np
import pytest
import yaml

from burgers_fbsde.cli import main


def write_config(path, tree):
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(tree, fh)
    return str(path)


@pytest.fixture
def small_solve_config(tmp_path):
    """Fast converging problem with artifacts under tmp_path."""
    out = tmp_path / "run"
    cfg = write_config(tmp_path / "exp.yaml", {
        "problem": {"T": 0.25},
        "grid": {"N": 16, "J": 8},
        "mc": {"M": 256, "seed": 1},
        "picard": {"tol": 5e-3, "max_iter": 4},
        "outputs": {"directory": str(out)},
    })
    return cfg, out


class TestBudget:
    def test_prints_three_certificate_lines(self, tmp_path, capsys):
        """The budget subcommand prints K, gamma(T), and T0."""
        cfg = write_config(tmp_path / "exp.yaml", {})
        assert main(["budget", "--config", cfg]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 3
        assert lines[0] == "K = 0.5"
        assert lines[1].startswith("gamma(T) = 0.412180")
        assert lines[2].startswith("T0 = 0.852605502")

    def test_unbounded_horizon_prints_inf(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "exp.yaml", {
            "problem": {"h": {"kind": "zero"}},
        })
        assert main(["budget", "--config", cfg]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "K = 0"
        assert lines[2] == "T0 = inf"


class TestSolve:
    def test_artifacts(self, small_solve_config, capsys):
        """A solve run writes config echo, solution, csv slice, report."""
        cfg, out = small_solve_config
        assert main(["solve", "--config", cfg]) == 0
        names = sorted(p.name for p in out.iterdir())
        assert names == [
            "config.yaml",
            "solution.f8",
            "solution.json",
            "solution_s0.csv",
            "solver_report.json",
        ]
        echoed = yaml.safe_load((out / "config.yaml").read_text())
        assert echoed["mc"]["seed"] == 1
        assert echoed["grid"] == {"N": 16, "J": 8}
        report = json.loads((out / "solver_report.json").read_text())
        assert report["iterations"] == len(report["diff_history"])
        assert set(report["meta"]) == {"timestamp", "timings_seconds"}

    def test_json_only_format_skips_csv(self, tmp_path):
        out = tmp_path / "run"
        cfg = write_config(tmp_path / "exp.yaml", {
            "grid": {"N": 16, "J": 4},
            "mc": {"M": 32},
            "picard": {"max_iter": 1},
            "outputs": {"directory": str(out), "formats": ["json"]},
        })
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            assert main(["solve", "--config", cfg]) == 0
        assert not (out / "solution_s0.csv").exists()
        assert (out / "solution.json").exists()

    def test_repeat_runs_identical_apart_from_meta(self, tmp_path):
        """Same config and seed give byte-identical fields and reports."""
        tree = {
            "grid": {"N": 16, "J": 8},
            "mc": {"M": 256, "seed": 7},
            "picard": {"max_iter": 2},
        }
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / tag
            tree["outputs"] = {"directory": str(out)}
            cfg = write_config(tmp_path / f"{tag}.yaml", tree)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                assert main(["solve", "--config", cfg]) == 0
            outs.append(out)
        a, b = outs
        assert (a / "solution.f8").read_bytes() == (b / "solution.f8").read_bytes()
        assert (a / "solution.json").read_bytes() == (b / "solution.json").read_bytes()
        ra = json.loads((a / "solver_report.json").read_text())
        rb = json.loads((b / "solver_report.json").read_text())
        ra.pop("meta")
        rb.pop("meta")
        assert ra == rb

    def test_seed_flag_changes_paths(self, small_solve_config, tmp_path):
        cfg, out = small_solve_config
        other = tmp_path / "other"
        assert main(["solve", "--config", cfg]) == 0
        assert main(["solve", "--config", cfg, "--seed", "2",
                     "--out", str(other)]) == 0
        assert (out / "solution.f8").read_bytes() != \
            (other / "solution.f8").read_bytes()
        echoed = yaml.safe_load((other / "config.yaml").read_text())
        assert echoed["mc"]["seed"] == 2


class TestOracleCommand:
    def test_artifacts_and_step_count(self, tmp_path, capsys):
        out = tmp_path / "run"
        cfg = write_config(tmp_path / "exp.yaml", {
            "problem": {"T": 0.25},
            "grid": {"N": 32, "J": 8},
            "oracle": {"dt": 2e-3},
            "outputs": {"directory": str(out)},
        })
        assert main(["oracle", "--config", cfg]) == 0
        assert "oracle: 125 steps" in capsys.readouterr().out
        names = sorted(p.name for p in out.iterdir())
        assert names == [
            "config.yaml",
            "oracle.f8",
            "oracle.json",
            "oracle_report.json",
            "oracle_s0.csv",
        ]
        report = json.loads((out / "oracle_report.json").read_text())
        assert report["oracle"]["num_steps"] == 125


class TestCompare:
    def test_small_problem_close_to_reference(self, tmp_path, capsys):
        """Solver and reference agree to a fraction of a percent."""
        out = tmp_path / "run"
        cfg = write_config(tmp_path / "exp.yaml", {
            "problem": {"T": 0.25},
            "grid": {"N": 32, "J": 8},
            "mc": {"M": 2000, "seed": 1, "antithetic": True},
            "picard": {"tol": 5e-3, "max_iter": 6},
            "oracle": {"dt": 2e-3},
            "outputs": {"directory": str(out)},
        })
        assert main(["compare", "--config", cfg]) == 0
        assert "relative L2 error at s = 0" in capsys.readouterr().out
        summary = json.loads((out / "compare.json").read_text())
        assert summary["converged"] is True
        assert summary["relative_l2_at_start"] < 0.02
        header = (out / "compare.csv").read_text().splitlines()[0]
        assert header == "s,l2_error,linf_error"
        rows = np.loadtxt(out / "compare.csv", delimiter=",", skiprows=1)
        assert rows.shape == (9, 3)
        assert np.allclose(rows[:, 0], np.linspace(0.0, 0.25, 9))


class TestConverge:
    def test_dt_sweep_reference_order(self, tmp_path, capsys):
        """Refining the reference step shows at least second order."""
        out = tmp_path / "run"
        cfg = write_config(tmp_path / "exp.yaml", {
            "grid": {"N": 128, "J": 8},
            "mc": {"M": 8},
            "outputs": {"directory": str(out)},
        })
        assert main(["converge", "--config", cfg, "--sweep", "dt",
                     "--values", "0.008,0.004,0.002"]) == 0
        summary = json.loads((out / "converge.json").read_text())
        assert summary["sweep"] == "dt"
        assert summary["slope_vs_resolution"] < -2.0
        header = (out / "converge.csv").read_text().splitlines()[0]
        assert header == "parameter,resolution,error"

    def test_path_sweep_structure(self, tmp_path):
        out = tmp_path / "run"
        cfg = write_config(tmp_path / "exp.yaml", {
            "problem": {"T": 0.25},
            "grid": {"N": 16, "J": 8},
            "mc": {"M": 64, "seed": 1, "mode": "common"},
            "picard": {"tol": 1e-9, "max_iter": 3},
            "oracle": {"dt": 2e-3},
            "outputs": {"directory": str(out)},
        })
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            assert main(["converge", "--config", cfg, "--sweep", "M",
                         "--values", "64,128,256"]) == 0
        summary = json.loads((out / "converge.json").read_text())
        assert summary["values"] == [64.0, 128.0, 256.0]
        assert len(summary["errors"]) == 3
        assert all(0 < e < 0.1 for e in summary["errors"])

    def test_too_few_values_is_config_error(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "exp.yaml", {})
        rc = main(["converge", "--config", cfg, "--sweep", "dt",
                   "--values", "0.008,0.004"])
        assert rc == 2
        err = capsys.readouterr().err
        assert "config error" in err
        assert "--values" in err

    def test_forced_dt_sweep_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "exp.yaml", {
            "problem": {"F": {"kind": "constant", "value": 0.1}},
            "grid": {"N": 16, "J": 4},
        })
        rc = main(["converge", "--config", cfg, "--sweep", "dt",
                   "--values", "0.008,0.004,0.002"])
        assert rc == 2
        assert "unforced" in capsys.readouterr().err


class TestDiagnose:
    def test_converged_solve_passes_battery(self, tmp_path, capsys):
        """A converged solve passes every check and exits 0."""
        out = tmp_path / "run"
        cfg = write_config(tmp_path / "exp.yaml", {
            "problem": {"T": 0.25},
            "grid": {"N": 16, "J": 8},
            "mc": {"M": 2000, "seed": 0, "antithetic": True},
            "picard": {"tol": 5e-3, "max_iter": 6},
            "oracle": {"dt": 2e-3},
            "outputs": {"directory": str(out)},
        })
        assert main(["diagnose", "--config", cfg]) == 0
        text = capsys.readouterr().out
        for name in (
            "flow_consistency", "composition_law", "bsde_residual",
            "determinism_check", "flow_regularity", "pde_residual",
        ):
            assert name in text
        assert "FAIL" not in text
        battery = json.loads((out / "diagnostics.json").read_text())
        assert len(battery) == 6
        assert all(entry["pass"] for entry in battery)

    def test_unconverged_solve_fails_battery(self, tmp_path, capsys):
        """Stopping after one sweep leaves a detectable inconsistency."""
        out = tmp_path / "run"
        cfg = write_config(tmp_path / "exp.yaml", {
            "problem": {"T": 0.5},
            "grid": {"N": 16, "J": 8},
            "mc": {"M": 2000, "seed": 0, "antithetic": True},
            "picard": {"tol": 1e-9, "max_iter": 1},
            "oracle": {"dt": 2e-3},
            "outputs": {"directory": str(out)},
        })
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rc = main(["diagnose", "--config", cfg])
        assert rc == 1
        captured = capsys.readouterr()
        assert "FAIL" in captured.out
        assert "diagnostics failed" in captured.err
        assert "flow_consistency" in captured.err


class TestErrorExits:
    def test_missing_config_file(self, tmp_path, capsys):
        rc = main(["budget", "--config", str(tmp_path / "absent.yaml")])
        assert rc == 2
        assert "not found" in capsys.readouterr().err

    def test_unknown_key_names_dotted_path(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "exp.yaml", {"mc": {"paths": 10}})
        assert main(["budget", "--config", cfg]) == 2
        assert "mc.paths" in capsys.readouterr().err

    def test_unstable_reference_step_is_solver_error(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "exp.yaml", {
            "problem": {"h": {"kind": "sine", "amplitude": 0.01}},
            "grid": {"N": 128, "J": 4},
            "oracle": {"dt": 0.02},
            "outputs": {"directory": str(tmp_path / "run")},
        })
        rc = main(["oracle", "--config", cfg])
        assert rc == 3
        err = capsys.readouterr().err
        assert "solver error" in err
        assert "diffusive stability limit" in err


class TestThreads:
    def test_env_override_accepted(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("BURGERS_FBSDE_THREADS", "2")
        cfg = write_config(tmp_path / "exp.yaml", {})
        assert main(["budget", "--config", cfg]) == 0

    def test_env_override_must_be_integer(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("BURGERS_FBSDE_THREADS", "abc")
        cfg = write_config(tmp_path / "exp.yaml", {})
        assert main(["budget", "--config", cfg]) == 2
        assert "BURGERS_FBSDE_THREADS" in capsys.readouterr().err

    def test_thread_flag_lower_bound(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "exp.yaml", {})
        assert main(["budget", "--config", cfg, "--threads", "0"]) == 2
        assert "--threads" in capsys.readouterr().err
