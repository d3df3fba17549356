"""
Tests for the config module.
"""

import tempfile
from pathlib import Path

import pytest

from cordes.coefficients import Formulation
from cordes.config import (
    RunConfig,
    load_config_file,
    normalize_settings,
    parse_assignments,
    resolve_config,
)
from cordes.errors import ParameterError


@pytest.fixture
def temp_dir():
    """Create a temporary directory."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


class TestRunConfig:
    """Tests for RunConfig."""

    def test_defaults(self):
        """Test the default run."""
        config = RunConfig().validate()
        assert config.solver == "bfs"
        assert config.formulation is Formulation.LS
        assert config.mesh_family == "quad"
        assert config.max_ndof == 20000
        assert config.out == "results.csv"

    def test_taylor_hood_ns(self):
        """Test the derived properties of th-ns."""
        config = RunConfig(method="th-ns")
        assert config.solver == "taylor_hood"
        assert config.formulation is Formulation.NS
        assert config.mesh_family == "tri"
        assert config.adaptive_config().formulation is Formulation.NS

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"method": "lagrange"},
            {"experiment": 4},
            {"quad_order": 0},
            {"tri_degree": 11},
            {"theta": 0.0},
            {"method": "bfs-ns", "lambda_": 1.8},
            {"method": "th-ns", "mu": 4.0},
            {"experiment": 2, "matching": False},
        ],
    )
    def test_invalid(self, kwargs):
        """Test rejected settings."""
        with pytest.raises(ParameterError):
            RunConfig(**kwargs).validate()

    def test_ns_lambda_inside_range(self):
        """Test that lambda = 1.7 is admissible for NS."""
        RunConfig(method="bfs-ns", lambda_=1.7).validate()

    def test_as_dict_uses_public_names(self):
        """Test the exported key for lambda."""
        data = RunConfig().as_dict()
        assert "lambda" in data
        assert "lambda_" not in data


class TestSettings:
    """Tests for setting normalization."""

    def test_aliases_and_types(self):
        """Test key spellings and value coercion."""
        settings = normalize_settings(
            {"Max-Ndof": "500", "lambda": "0.5", "order": 3, "matching": "no", "mu": "none"}
        )
        assert settings == {
            "max_ndof": 500,
            "lambda_": 0.5,
            "quad_order": 3,
            "matching": False,
            "mu": None,
        }

    @pytest.mark.parametrize(
        "settings",
        [
            {"colour": "red"},
            {"max_ndof": "many"},
            {"experiment": "1.5"},
            {"matching": "maybe"},
            {"theta": ""},
        ],
    )
    def test_invalid(self, settings):
        """Test rejected keys and values."""
        with pytest.raises(ParameterError):
            normalize_settings(settings)

    def test_parse_assignments(self):
        """Test KEY=VALUE parsing with comments."""
        lines = ["# comment", "", "theta = 0.5  # bulk", "out=a=b.csv"]
        assert parse_assignments(lines) == {"theta": "0.5", "out": "a=b.csv"}

    def test_parse_assignments_error(self):
        """Test a line without an equals sign."""
        with pytest.raises(ParameterError, match="overrides:1"):
            parse_assignments(["theta"])


class TestLoading:
    """Tests for config files and layering."""

    def test_yaml_file(self, temp_dir):
        """Test a YAML config file."""
        path = temp_dir / "run.yaml"
        path.write_text("experiment: 2\nmethod: th-ls\ntheta: 0.5\n")
        assert load_config_file(path) == {"experiment": 2, "method": "th-ls", "theta": 0.5}

    def test_key_value_file(self, temp_dir):
        """Test a key=value config file."""
        path = temp_dir / "run.cfg"
        path.write_text("# run\nexperiment = 3\nrefinement = uniform\n")
        assert load_config_file(path) == {"experiment": 3, "refinement": "uniform"}

    def test_yaml_must_be_mapping(self, temp_dir):
        """Test that a YAML list is rejected."""
        path = temp_dir / "run.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ParameterError):
            load_config_file(path)

    def test_invalid_yaml(self, temp_dir):
        """Test that malformed YAML is rejected."""
        path = temp_dir / "run.yml"
        path.write_text("experiment: [1\n")
        with pytest.raises(ParameterError):
            load_config_file(path)

    def test_precedence(self, temp_dir):
        """Test preset < file < overrides < flags."""
        path = temp_dir / "run.yaml"
        path.write_text("theta: 0.4\nmax_ndof: 1000\nmarking: maximum\n")
        config = resolve_config(
            preset="exp1-bfs-uniform",
            config_file=path,
            overrides=["max_ndof=2000", "subdivision=1"],
            flags={"subdivision": 2},
        )
        assert config.refinement == "uniform"
        assert config.theta == 0.4
        assert config.marking == "maximum"
        assert config.max_ndof == 2000
        assert config.subdivision == 2

    def test_unknown_preset(self):
        """Test that an unknown preset lists the available ones."""
        with pytest.raises(ParameterError, match="exp1-bfs-uniform"):
            resolve_config(preset="nonexistent")
