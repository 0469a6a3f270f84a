"""Acceptance-scale runs of the shipped experiment files (``pytest -m slow``)."""

import math
from pathlib import Path

import numpy as np
import pytest

from couette3d.schemas.grid import GridSpec
from couette3d.services.checkpoint import read_checkpoint
from couette3d.services.diagnostics import fit_scaling, plane_l2
from couette3d.services.experiment_runner import ExperimentRunner, load_experiment_config
from couette3d.services.initial_data import random_initial_data
from couette3d.services.nonlinear_solver import ShearFrameSolver, SimState
from couette3d.services.spectral_core import SpectralGrid
from couette3d.services.streak_solver import lift_up_reference, streak_from_3d, streak_to_3d

EXPERIMENTS = Path(__file__).resolve().parents[1] / "experiments"

pytestmark = pytest.mark.slow


@pytest.fixture
def run(tmp_path):
    runner = ExperimentRunner(output_root=tmp_path)

    def _run(name: str, **overrides):
        return runner.run(load_experiment_config(EXPERIMENTS / f"{name}.toml", **overrides))

    return _run


def test_viscous_mode_decay(run):
    result = run("linear_mode")
    data = np.loadtxt(result.run_dir / "mode.csv", delimiter=",", skiprows=1)
    t, q2 = data[:, 0], data[:, 7]
    np.testing.assert_allclose(q2, np.exp(-1e-3 * (t + t ** 3 / 3.0)), rtol=1e-8)


def test_inviscid_damping_rate(run):
    fit = run("linear_damping").manifest["fits"]["u2_neq_decay"]
    assert fit["exponent"] == pytest.approx(-2.0, abs=0.15)


def test_exact_streak(run):
    result = run("streak_exact")
    state = read_checkpoint(result.run_dir / "checkpoint_final.bin")
    grid = state.grid
    _, _, z = grid.coordinates()
    u1 = grid.inverse(state.uhat.coeffs)[0]
    expected = np.broadcast_to(-5.0 * math.exp(-0.05) * np.cos(z), u1.shape)
    np.testing.assert_allclose(u1, expected, atol=1e-6)


def test_multiplier_gevrey_law(run):
    fits = run("multipliers").manifest["fits"]
    assert fits["gevrey_exponent"]["exponent"] == pytest.approx(0.5, abs=0.02)
    assert fits["gevrey_exponent"]["r2"] >= 0.999
    assert fits["wL_total_variation_sup"] <= math.pi + 1e-6
    assert fits["wL_ode_mismatch"] < 1e-8


def test_toy_envelope(run):
    fits = run("toy").manifest["fits"]
    assert fits["stirling_slope"] == pytest.approx(2.0, abs=0.05)
    assert math.isfinite(fits["K"])


def test_liftup_error_is_quadratic_in_amplitude(run):
    errors = [run("streak_liftup", eps=eps).manifest["fits"]["max_liftup_error"] for eps in (1e-2, 5e-3)]
    assert 3.2 <= errors[0] / errors[1] <= 4.8


def test_liftup_through_the_shear_frame_solver():
    grid = SpectralGrid(GridSpec(Nx=8, Ny=64, Nz=64, Ly=2.0 * math.pi))
    nu, t_end = 1e-3, 10.0

    def deviation(amplitude):
        initial = streak_from_3d(random_initial_data(3, grid, amplitude, envelope="bandlimited", kappa0=6.0), nu)
        state = SimState(streak_to_3d(initial), nu, amplitude)
        final = ShearFrameSolver(grid, nu).run(state, t_end, 0.1, t_end)
        return plane_l2(grid, streak_from_3d(final.uhat, nu).u1 - lift_up_reference(initial, t_end, nu))

    assert 3.2 <= deviation(1e-2) / deviation(5e-3) <= 4.8


def test_enhanced_dissipation_time_scale(run):
    runs = {5e-3: "nu5e-3", 1e-3: "nu1e-3", 2e-4: "nu2e-4"}
    nus = list(runs)
    t_stars = [run(f"enhanced_dissipation_{name}").manifest["fits"]["t_star"] for name in runs.values()]
    assert all(t is not None for t in t_stars)
    assert fit_scaling(np.array(nus), np.array(t_stars)).exponent == pytest.approx(-1.0 / 3.0, abs=0.1)


def test_direct_cascade(run):
    fits = run("cascade").manifest["fits"]
    assert fits["H1_u1_growth"]["exponent"] == pytest.approx(1.0, rel=0.15)
    assert fits["H2_u1_growth"]["exponent"] == pytest.approx(2.0, rel=0.15)
    assert 0.0 < fits["u2_growth_constant"] < np.inf


def test_toy_majorant_is_uniform_in_eta(run):
    result = run("toy")
    data = np.loadtxt(result.run_dir / "toy_sweep.csv", delimiter=",", skiprows=1, ndmin=2)
    K = result.manifest["fits"]["K"]
    assert data[:, 0] == pytest.approx([25.0, 100.0, 400.0])
    assert math.isfinite(K)
    assert np.all(data[:, 4] >= 1.0 - 1e-12)
    assert np.all(data[:, 4] <= K)


def test_coordinate_diagnostics(run):
    fits = run("coord").manifest["fits"]
    assert fits["max_identity_residual"] <= 1e-6
    assert fits["psi_decay"]["exponent"] == pytest.approx(-1.0, abs=0.2)
