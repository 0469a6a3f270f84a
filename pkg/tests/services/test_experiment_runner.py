"""Tests for experiment orchestration and run directories."""

import json
from pathlib import Path

import numpy as np
import pytest

from couette3d.core import CFLViolationError, ConfigurationError
from couette3d.services.checkpoint import read_checkpoint
from couette3d.services.experiment_runner import (
    ExperimentRunner,
    Table,
    cascade_window,
    load_experiment_config,
    validate_config,
    write_csv,
)

SMALL = {"Nx": 8, "Ny": 16, "Nz": 8}


@pytest.fixture
def runner(tmp_path):
    return ExperimentRunner(output_root=tmp_path)


def _config(**values):
    return validate_config({**SMALL, **values})


def _read_csv(path):
    header = path.read_text().splitlines()[0].split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


class TestConfigLoading:
    def test_toml_with_overrides(self, tmp_path):
        path = tmp_path / "exp.toml"
        path.write_text('kind = "sim3d"\nNx = 8\nNy = 16\nNz = 8\nseed = 1\nnu = 0.01\n')
        config = load_experiment_config(path, kind="sim3d", seed=42, output_dir=None)
        assert config.seed == 42
        assert config.nu == 0.01
        assert config.output_dir is None

    def test_kind_from_command_line(self, tmp_path):
        path = tmp_path / "exp.toml"
        path.write_text("Nx = 8\nNy = 16\nNz = 8\n")
        assert load_experiment_config(path, kind="linear").kind == "linear"

    def test_kind_mismatch(self, tmp_path):
        path = tmp_path / "exp.toml"
        path.write_text('kind = "toy"\n')
        with pytest.raises(ConfigurationError):
            load_experiment_config(path, kind="sim3d")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_experiment_config(tmp_path / "missing.toml")

    def test_invalid_toml(self, tmp_path):
        path = tmp_path / "exp.toml"
        path.write_text("kind = \n")
        with pytest.raises(ConfigurationError):
            load_experiment_config(path)

    def test_validation_errors_are_configuration_errors(self):
        with pytest.raises(ConfigurationError) as excinfo:
            validate_config({"kind": "sim3d", "Nx": 7})
        assert "Nx" in excinfo.value.message
        assert excinfo.value.exit_code == 2

    def test_shipped_experiments_validate(self):
        root = Path(__file__).resolve().parents[2] / "experiments"
        files = sorted(root.glob("*.toml"))
        assert files
        for path in files:
            load_experiment_config(path)


def test_write_csv_precision(tmp_path):
    table = Table("x.csv", ["t", "value"])
    table.append(0.1, 1.0 / 3.0)
    write_csv(tmp_path / "x.csv", table)
    lines = (tmp_path / "x.csv").read_text().splitlines()
    assert lines[0] == "t,value"
    assert float(lines[1].split(",")[1]) == 1.0 / 3.0


class TestLinearRuns:
    def test_single_mode(self, runner):
        config = _config(kind="linear", nu=1e-3, t_end=5.0, dt_out=1.0, mode={"k": 1, "eta": 0.0, "l": 0, "u2": 1.0})
        result = runner.run(config)
        assert result.run_id.startswith("linear_") and result.run_id.endswith("_001")
        header, data = _read_csv(result.run_dir / "mode.csv")
        assert header[0] == "t" and header[-1] == "closed_form_error"
        assert data.shape == (6, len(header))
        assert result.manifest["fits"]["max_closed_form_error"] < 1e-6

    def test_field(self, runner):
        result = runner.run(_config(kind="linear", eps=1e-3, t_end=3.0, dt_out=1.0))
        names = {p.name for p in result.artifacts}
        assert {"timeseries.csv", "timeseries.gp", "manifest.json"} <= names
        assert "u2_neq_decay" not in result.manifest["fits"]


def test_streak_run(runner):
    config = validate_config(
        {"kind": "streak", "Nx": 8, "Ny": 16, "Nz": 16, "Ly": 6.283185307179586, "initial": "streak_cos",
         "eps": 1.0, "nu": 0.01, "t_end": 2.0, "dt_out": 0.5, "dt": 0.05}
    )
    result = runner.run(config)
    header, data = _read_csv(result.run_dir / "streak.csv")
    assert header == ["t", "E1", "E23", "grad23_sq", "liftup_error"]
    assert data.shape[0] == 5
    assert result.manifest["fits"]["max_liftup_error"] < 1e-8


class TestSim3dRuns:
    @pytest.fixture
    def config(self):
        return _config(kind="sim3d", eps=1e-3, nu=0.01, seed=5, t_end=2.0, dt_out=0.5, dt=0.05, checkpoint_every=2)

    def test_artifacts_and_diagnostics(self, runner, config):
        result = runner.run(config)
        header, data = _read_csv(result.run_dir / "timeseries.csv")
        assert header == ["t", "E_total", "E_neq", "E0_1", "E0_2", "E0_3", "Hs_u1", "Hs_u3", "div_residual", "budget_residual"]
        assert data[:, 0] == pytest.approx([0.0, 0.5, 1.0, 1.5, 2.0])
        assert np.all(data[:, 8] < 1e-9)
        assert result.manifest["fits"]["max_budget_residual"] < 1e-6

        names = {p.name for p in result.artifacts}
        assert {"checkpoint_0000.bin", "checkpoint_0002.bin", "checkpoint_0004.bin", "checkpoint_final.bin"} <= names
        assert "cascade.csv" in names
        final = read_checkpoint(result.run_dir / "checkpoint_final.bin")
        assert final.t == pytest.approx(2.0)

    def test_manifest(self, runner, config):
        result = runner.run(config)
        manifest = json.loads((result.run_dir / "manifest.json").read_text())
        assert manifest["kind"] == "sim3d"
        assert manifest["parameter_hash"] == config.parameter_hash
        assert manifest["run_id"] == result.run_id
        assert manifest["regime"] == "below-threshold"
        assert "manifest.json" in manifest["artifacts"]
        assert manifest["config"]["seed"] == 5

    def test_reruns_are_reproducible(self, runner, config):
        first = runner.run(config)
        second = runner.run(config)
        assert first.run_id.endswith("_001")
        assert second.run_id.endswith("_002")
        assert first.run_id[:-4] == second.run_id[:-4]
        assert (first.run_dir / "timeseries.csv").read_bytes() == (second.run_dir / "timeseries.csv").read_bytes()

    def test_cascade_fits(self, runner):
        config = _config(kind="sim3d", eps=1e-3, nu=1e-5, seed=3, t_end=10.0, dt_out=0.25, dt=0.05)
        assert cascade_window(config) == (5.0, 10.0)
        result = runner.run(config)
        header, data = _read_csv(result.run_dir / "cascade.csv")
        assert header == ["t", "H1_u1", "H2_u1", "u2_neq"]
        assert data.shape[0] == 41
        fits = result.manifest["fits"]
        for key in ("Hs_u1_growth", "H1_u1_growth", "H2_u1_growth"):
            assert fits[key]["samples"] == 16
            assert np.isfinite(fits[key]["exponent"])
        assert 0.0 < fits["u2_growth_constant"] < np.inf

    def test_cascade_window_is_capped(self):
        config = _config(kind="sim3d", nu=1e-3, t_end=100.0)
        assert cascade_window(config) == pytest.approx((5.0, 2.5))

    def test_short_runs_skip_growth_fits(self, runner, config):
        fits = runner.run(config).manifest["fits"]
        assert "H1_u1_growth" not in fits
        assert fits["u2_growth_constant"] > 0.0

    def test_failed_run_leaves_nothing(self, runner, tmp_path):
        config = _config(kind="sim3d", eps=1e3, nu=0.01, t_end=1.0, dt_out=0.5, dt=0.5)
        with pytest.raises(CFLViolationError):
            runner.run(config)
        assert list(tmp_path.iterdir()) == []


def test_toy_run(runner):
    result = runner.run(_config(kind="toy", etas=[25.0], t_end=2.0, dt_out=0.2))
    header, data = _read_csv(result.run_dir / "toy_sweep.csv")
    assert header[:6] == ["eta", "k", "t_start", "t_end", "K", "growth"]
    assert data.shape[0] == 1
    fits = result.manifest["fits"]
    assert fits["K"] > 0
    assert 1.9 < fits["stirling_slope"] < 2.05
    assert (result.run_dir / "toy_trajectory.csv").exists()


def test_multiplier_table_run(runner):
    result = runner.run(_config(kind="multiplier-table", etas=[100.0, 400.0, 1600.0, 6400.0]))
    fits = result.manifest["fits"]
    assert fits["wL_total_variation_sup"] <= np.pi + 1e-9
    assert fits["wL_ode_mismatch"] < 1e-8
    assert fits["mu"] > 0
    assert 1.0 <= fits["dtw_band_B"] < 10.0
    assert 0.0 < fits["w_ratio_K"] < np.inf
    header, data = _read_csv(result.run_dir / "multipliers.csv")
    assert header == ["eta", "log_inv_w", "log_inv_w_bar", "normalized_loss"]
    assert np.all(data[:, 1] >= data[:, 2])


def test_coord_run(runner):
    config = _config(kind="coord", eps=1e-3, nu=0.01, seed=2, t_end=3.0, dt_out=0.5, dt=0.05)
    result = runner.run(config)
    header, data = _read_csv(result.run_dir / "coord.csv")
    assert header[:4] == ["t", "C_norm", "g_norm", "identity_residual"]
    assert data[0, 0] == pytest.approx(1.0)
    assert data[-1, 0] == pytest.approx(3.0)
    assert result.manifest["fits"]["max_identity_residual"] < 1e-4
    assert result.manifest["notes"]["forcing_gradient"] == "shear-frame"


def test_coord_run_from_checkpoints(runner, tmp_path):
    sim = runner.run(_config(kind="sim3d", eps=1e-3, nu=0.01, seed=2, t_end=2.0, dt_out=0.5, dt=0.05, checkpoint_every=1))
    config = _config(
        kind="coord", eps=1e-3, nu=0.01, seed=2, t_end=2.0, dt_out=0.5, dt=0.05, checkpoint_dir=str(sim.run_dir)
    )
    result = runner.run(config)
    _, data = _read_csv(result.run_dir / "coord.csv")
    assert data[:, 0] == pytest.approx([1.0, 1.5, 2.0])


def test_coord_run_without_checkpoints(runner, tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    config = _config(kind="coord", t_end=2.0, dt_out=0.5, checkpoint_dir=str(empty))
    with pytest.raises(ConfigurationError):
        runner.run(config)
