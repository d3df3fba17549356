"""
Tests for the CLI commands.
"""

import os
import tempfile

import pytest
from click.testing import CliRunner

from cordes.cli import main
from cordes.errors import AdaptiveRunError
from cordes.experiments import ErrorReport


@pytest.fixture
def runner():
    """Create a CLI runner."""
    return CliRunner()


@pytest.fixture
def temp_dir():
    """Create a temporary directory."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield tmpdir


def read_rows(path):
    with open(path, encoding="utf-8") as f:
        return [line.rstrip("\n").split(",") for line in f]


class TestMainCommand:
    """Tests for the main CLI command."""

    def test_version(self, runner):
        """Test --version flag."""
        result = runner.invoke(main, ["--version"])
        assert result.exit_code == 0
        assert "cordes" in result.output
        assert "version" in result.output

    def test_help(self, runner):
        """Test --help flag."""
        result = runner.invoke(main, ["--help"])
        assert result.exit_code == 0
        assert "Cordes" in result.output
        assert "run" in result.output
        assert "constants" in result.output
        assert "preset" in result.output

    def test_no_command_prints_help(self, runner):
        """Test that the bare group prints its help."""
        result = runner.invoke(main, [])
        assert result.exit_code == 0
        assert "Usage" in result.output


class TestRunCommand:
    """Tests for the run command."""

    def test_run_basic(self, runner, temp_dir):
        """Test a small BFS run."""
        output = os.path.join(temp_dir, "exp1.csv")
        result = runner.invoke(
            main, ["run", "-e", "1", "-m", "bfs-ls", "--max-ndof", "100", "-o", output]
        )
        assert result.exit_code == 0, result.output
        rows = read_rows(output)
        assert rows[0] == [
            "level",
            "ndof",
            "h_max",
            "err_h2",
            "err_grad",
            "err_l2",
            "eta",
            "efficiency",
        ]
        assert len(rows) >= 3
        assert all(cell != "" for cell in rows[1])

    def test_run_with_artifacts(self, runner, temp_dir):
        """Test mesh dump and plots of a Taylor-Hood run."""
        output = os.path.join(temp_dir, "exp1.csv")
        mesh = os.path.join(temp_dir, "mesh.txt")
        prefix = os.path.join(temp_dir, "figs", "exp1")
        result = runner.invoke(
            main,
            [
                "run",
                "-m",
                "th-ls",
                "-r",
                "uniform",
                "--max-ndof",
                "300",
                "-o",
                output,
                "--dump-mesh",
                mesh,
                "--plot",
                prefix,
            ],
        )
        assert result.exit_code == 0, result.output
        with open(mesh, encoding="utf-8") as f:
            assert f.readline().startswith("VERTICES")
        assert os.path.exists(prefix + "_convergence.svg")
        assert os.path.exists(prefix + "_mesh_00.svg")

    def test_run_experiment3_leaves_errors_empty(self, runner, temp_dir):
        """Test the table of a run without an exact solution."""
        output = os.path.join(temp_dir, "exp3.csv")
        result = runner.invoke(main, ["run", "-e", "3", "--max-ndof", "60", "-o", output])
        assert result.exit_code == 0, result.output
        for row in read_rows(output)[1:]:
            assert row[3:6] == ["", "", ""]
            assert row[6] != ""
            assert row[7] == ""

    def test_run_ns_lambda_out_of_range(self, runner, temp_dir):
        """Test that an inadmissible lambda is a usage error."""
        output = os.path.join(temp_dir, "r.csv")
        result = runner.invoke(main, ["run", "-m", "bfs-ns", "--lambda", "1.8", "-o", output])
        assert result.exit_code == 2
        assert not os.path.exists(output)

    def test_run_unknown_method(self, runner):
        """Test that an unknown method is rejected by click."""
        result = runner.invoke(main, ["run", "-m", "lagrange"])
        assert result.exit_code == 2

    def test_run_nonmatching_experiment2(self, runner):
        """Test that a non-matching mesh needs experiment 1."""
        result = runner.invoke(main, ["run", "-e", "2", "--non-matching"])
        assert result.exit_code == 2

    def test_run_config_with_overrides(self, runner, temp_dir):
        """Test a config file combined with --set and flags."""
        config = os.path.join(temp_dir, "run.yaml")
        output = os.path.join(temp_dir, "r.csv")
        with open(config, "w") as f:
            f.write("experiment: 1\nmethod: bfs-ls\nmax_ndof: 100000\nrefinement: uniform\n")
        result = runner.invoke(
            main,
            ["run", "--config", config, "--set", "max_ndof=50", "--max-levels", "2", "-o", output],
        )
        assert result.exit_code == 0, result.output
        assert len(read_rows(output)) == 3

    def test_run_unknown_setting(self, runner):
        """Test that an unknown --set key is a usage error."""
        result = runner.invoke(main, ["run", "--set", "colour=red"])
        assert result.exit_code == 2

    def test_run_preset(self, runner, temp_dir):
        """Test running from a preset with a size override."""
        output = os.path.join(temp_dir, "r.csv")
        result = runner.invoke(
            main, ["run", "-p", "exp1-bfs-uniform", "--max-ndof", "50", "-o", output]
        )
        assert result.exit_code == 0, result.output
        assert os.path.exists(output)

    def test_run_solver_failure(self, runner, temp_dir, monkeypatch):
        """Test that a solver failure writes partial results and exits 1."""
        output = os.path.join(temp_dir, "r.csv")

        def failing(*args, **kwargs):
            raise AdaptiveRunError("singular", [ErrorReport(0, 16, 1.4, eta=1.0)], 1e18)

        monkeypatch.setattr("cordes.cli.run_adaptive", failing)
        result = runner.invoke(main, ["run", "-o", output])
        assert result.exit_code == 1
        assert "Solver failed" in result.output
        assert len(read_rows(output)) == 2


class TestConstantsCommand:
    """Tests for the constants command."""

    def test_default_coefficient(self, runner):
        """Test the constants of the sign coefficient."""
        result = runner.invoke(main, ["constants"])
        assert result.exit_code == 0
        assert "0.918861" in result.output
        assert "0.649733" in result.output
        assert "passed" in result.output

    def test_ns(self, runner):
        """Test the NS constants."""
        result = runner.invoke(main, ["constants", "-f", "ns"])
        assert result.exit_code == 0
        assert "3.75" in result.output

    def test_ns_lambda_out_of_range(self, runner):
        """Test an inadmissible lambda."""
        result = runner.invoke(main, ["constants", "-f", "ns", "--lambda", "1.8"])
        assert result.exit_code == 2


class TestPresetCommands:
    """Tests for preset commands."""

    def test_preset_list(self, runner):
        """Test listing presets."""
        result = runner.invoke(main, ["preset", "list"])
        assert result.exit_code == 0
        assert "exp1-bfs-uniform" in result.output

    def test_preset_info(self, runner):
        """Test showing preset info."""
        result = runner.invoke(main, ["preset", "info", "exp2-bfs-ns"])
        assert result.exit_code == 0
        assert "bfs-ns" in result.output

    def test_preset_info_nonexistent(self, runner):
        """Test showing info for nonexistent preset."""
        result = runner.invoke(main, ["preset", "info", "nonexistent"])
        assert result.exit_code == 1

    def test_preset_init(self, runner, temp_dir):
        """Test writing a preset as a config file."""
        output = os.path.join(temp_dir, "run.yaml")
        result = runner.invoke(main, ["preset", "init", "exp3-th-adaptive", "-o", output])
        assert result.exit_code == 0
        assert os.path.exists(output)
        with open(output) as f:
            assert "th-ls" in f.read()

    def test_preset_init_nonexistent(self, runner, temp_dir):
        """Test writing a nonexistent preset."""
        output = os.path.join(temp_dir, "run.yaml")
        result = runner.invoke(main, ["preset", "init", "nonexistent", "-o", output])
        assert result.exit_code == 1
        assert not os.path.exists(output)
