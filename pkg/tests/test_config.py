"""Tests for the experiment configuration schema.

Validates default merging, strict rejection of unknown keys with dotted
paths, preset validation, byte-stable YAML round trips, overrides, and
the typed accessors the solvers consume.
"""

import numpy as np
import pytest

from burgers_fbsde import (
    DEFAULT_CONFIG,
    ConfigError,
    ExperimentConfig,
    GridSpec,
)


class TestDefaults:
    def test_empty_input_gives_defaults(self):
        cfg = ExperimentConfig.from_dict({})
        assert cfg.problem["nu"] == 0.1
        assert cfg.problem["T"] == 0.5
        assert cfg.grid["N"] == 64
        assert cfg.grid["J"] == 64
        assert cfg.mc["M"] == 1000
        assert cfg.picard["tol"] == 5e-3
        assert cfg.oracle["dt"] == 1e-3
        assert cfg.outputs["formats"] == ["json", "csv"]

    def test_none_input_gives_defaults(self):
        cfg = ExperimentConfig.from_dict(None)
        assert cfg.as_dict() == ExperimentConfig.from_dict({}).as_dict()

    def test_defaults_are_not_shared(self):
        """Each config owns a deep copy; mutating one never leaks."""
        a = ExperimentConfig.from_dict({})
        a.problem["nu"] = 99.0
        b = ExperimentConfig.from_dict({})
        assert b.problem["nu"] == 0.1
        assert DEFAULT_CONFIG["problem"]["nu"] == 0.1

    def test_partial_section_merges(self):
        cfg = ExperimentConfig.from_dict({"mc": {"M": 777}})
        assert cfg.mc["M"] == 777
        assert cfg.mc["seed"] == 0
        assert cfg.grid["N"] == 64


class TestStrictness:
    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError, match="problems"):
            ExperimentConfig.from_dict({"problems": {}})

    def test_unknown_key_names_dotted_path(self):
        with pytest.raises(ConfigError, match=r"problem\.nux"):
            ExperimentConfig.from_dict({"problem": {"nux": 0.1}})
        with pytest.raises(ConfigError, match=r"mc\.paths"):
            ExperimentConfig.from_dict({"mc": {"paths": 100}})

    def test_type_errors_name_the_key(self):
        with pytest.raises(ConfigError, match=r"grid\.N"):
            ExperimentConfig.from_dict({"grid": {"N": "many"}})
        with pytest.raises(ConfigError, match=r"problem\.nu"):
            ExperimentConfig.from_dict({"problem": {"nu": -0.1}})
        with pytest.raises(ConfigError, match=r"picard\.max_iter"):
            ExperimentConfig.from_dict({"picard": {"max_iter": 0}})

    def test_grid_constraints(self):
        with pytest.raises(ConfigError, match="even"):
            ExperimentConfig.from_dict({"grid": {"N": 65}})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"grid": {"N": 4}})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"grid": {"J": 1}})

    def test_mc_constraints(self):
        with pytest.raises(ConfigError, match=r"mc\.seed"):
            ExperimentConfig.from_dict({"mc": {"seed": 2**64}})
        with pytest.raises(ConfigError, match=r"mc\.antithetic"):
            ExperimentConfig.from_dict(
                {"mc": {"M": 101, "antithetic": True}}
            )
        with pytest.raises(ConfigError, match=r"mc\.mode"):
            ExperimentConfig.from_dict({"mc": {"mode": "shared"}})
        with pytest.raises(ConfigError, match=r"mc\.engine"):
            ExperimentConfig.from_dict({"mc": {"engine": "gpu"}})

    def test_booleans_are_not_integers(self):
        with pytest.raises(ConfigError, match=r"grid\.N"):
            ExperimentConfig.from_dict({"grid": {"N": True}})
        with pytest.raises(ConfigError, match=r"oracle\.dealias"):
            ExperimentConfig.from_dict({"oracle": {"dealias": 1}})

    def test_output_format_constraints(self):
        with pytest.raises(ConfigError, match=r"outputs\.formats\[0\]"):
            ExperimentConfig.from_dict({"outputs": {"formats": ["hdf5"]}})
        with pytest.raises(ConfigError, match="duplicate"):
            ExperimentConfig.from_dict(
                {"outputs": {"formats": ["json", "json"]}}
            )


class TestPresets:
    def test_unknown_kind(self):
        with pytest.raises(ConfigError, match=r"problem\.h\.kind"):
            ExperimentConfig.from_dict(
                {"problem": {"h": {"kind": "gaussian"}}}
            )

    def test_missing_kind(self):
        with pytest.raises(ConfigError, match=r"problem\.h\.kind"):
            ExperimentConfig.from_dict({"problem": {"h": {"amplitude": 1.0}}})

    def test_foreign_key_for_kind(self):
        with pytest.raises(ConfigError, match=r"problem\.h\.value"):
            ExperimentConfig.from_dict(
                {"problem": {"h": {"kind": "sine", "value": 1.0}}}
            )

    def test_sine_sum_term_paths(self):
        with pytest.raises(ConfigError, match=r"problem\.F\.terms\[1\]"):
            ExperimentConfig.from_dict(
                {
                    "problem": {
                        "F": {
                            "kind": "sine_sum",
                            "terms": [
                                {"amplitude": 0.1, "wavenumber": 1},
                                {"amplitude": 0.1, "frequency": 2},
                            ],
                        }
                    }
                }
            )

    def test_file_preset_needs_path(self):
        with pytest.raises(ConfigError, match=r"problem\.h\.path"):
            ExperimentConfig.from_dict({"problem": {"h": {"kind": "file"}}})

    def test_valid_presets_accepted(self):
        cfg = ExperimentConfig.from_dict(
            {
                "problem": {
                    "h": {"kind": "constant", "value": 1.5},
                    "F": {
                        "kind": "sine_sum",
                        "terms": [{"amplitude": 0.2, "wavenumber": 3}],
                    },
                }
            }
        )
        assert cfg.problem["h"]["kind"] == "constant"


class TestRoundTrip:
    def test_yaml_round_trip_bytewise(self, tmp_path):
        """dump -> load -> dump produces identical text."""
        cfg = ExperimentConfig.from_dict(
            {"mc": {"M": 4000, "seed": 11, "antithetic": True}}
        )
        text = cfg.to_yaml()
        p = tmp_path / "cfg.yaml"
        p.write_text(text)
        again = ExperimentConfig.load(p)
        assert again.to_yaml() == text
        assert again.as_dict() == cfg.as_dict()

    def test_from_dict_of_as_dict_identity(self):
        cfg = ExperimentConfig.from_dict({"grid": {"N": 32, "J": 16}})
        assert ExperimentConfig.from_dict(cfg.as_dict()).as_dict() == (
            cfg.as_dict()
        )

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            ExperimentConfig.load(tmp_path / "absent.yaml")

    def test_load_invalid_yaml(self, tmp_path):
        p = tmp_path / "broken.yaml"
        p.write_text("problem: [unclosed\n")
        with pytest.raises(ConfigError, match="YAML"):
            ExperimentConfig.load(p)


class TestOverrides:
    def test_override_applies_and_revalidates(self):
        cfg = ExperimentConfig.from_dict({})
        new = cfg.with_overrides(mc={"seed": 9}, grid={"N": 32})
        assert new.mc["seed"] == 9
        assert new.grid["N"] == 32
        assert cfg.mc["seed"] == 0

    def test_bad_override_rejected(self):
        cfg = ExperimentConfig.from_dict({})
        with pytest.raises(ConfigError):
            cfg.with_overrides(mc={"seed": -1})
        with pytest.raises(ConfigError):
            cfg.with_overrides(nonsense={"a": 1})


class TestAccessors:
    def test_grid_spec_and_times(self):
        cfg = ExperimentConfig.from_dict({"grid": {"N": 32, "J": 16}})
        assert cfg.grid_spec() == GridSpec(1, 32)
        t = cfg.times()
        assert t.size == 17
        assert t[-1] == 0.5

    def test_terminal_materializes_preset(self):
        cfg = ExperimentConfig.from_dict({})
        h = cfg.terminal()
        x = cfg.grid_spec().axis_coordinates()
        assert np.allclose(h.values[:, 0], 0.5 * np.sin(x), atol=1e-14)

    def test_forcing_zero_by_default(self):
        cfg = ExperimentConfig.from_dict({})
        F = cfg.forcing()
        assert np.all(F.values == 0.0)
        assert F.times.size == 65

    def test_forcing_on_custom_grid(self):
        cfg = ExperimentConfig.from_dict({})
        t = np.linspace(0.0, 0.5, 11)
        F = cfg.forcing_on(t)
        assert F.times.size == 11

    def test_mc_and_oracle_configs(self):
        cfg = ExperimentConfig.from_dict(
            {"mc": {"M": 256, "antithetic": True, "seed": 5}}
        )
        mc = cfg.mc_config()
        assert mc.num_paths == 256
        assert mc.antithetic
        assert mc.seed == 5
        oc = cfg.oracle_config()
        assert oc.num_steps == 500
        ot = cfg.oracle_times()
        assert ot.size == 501
        assert ot[-1] == 0.5
