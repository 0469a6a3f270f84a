"""Tests for the mode-exact linearized evolution."""

import math
from dataclasses import replace

import numpy as np
import pytest

from couette3d.core import DivergenceError, ParameterRangeError, ZeroWavevectorError
from couette3d.services.initial_data import random_initial_data
from couette3d.services.linear_theory import (
    LinearMode,
    damping_envelope,
    evolve_linear_field,
    evolve_linear_mode,
    linear_mode_exact,
    q2_closed_form,
    u2_from_q2,
)


def _oblique_mode(nu=1e-3):
    """k = 1, eta = 5, l = 1 with u2 = 1, u3 = 0.5 and u1 from the constraint."""
    return LinearMode(1, 5.0, 1, (-5.5 + 0j, 1.0 + 0j, 0.5 + 0j), nu=nu)


def _q2(mode):
    kv = mode.wavevector()
    return -float(kv @ kv) * mode.vector[1]


class TestClosedForm:
    def test_inviscid_q2_is_conserved(self):
        mode = _oblique_mode(nu=0.0)
        q0 = _q2(mode)
        for t in (1.0, 5.0, 17.0, 50.0):
            assert _q2(linear_mode_exact(mode, t)) == pytest.approx(q0, rel=1e-12)

    def test_viscous_decay_of_streamwise_mode(self):
        """(1, 0, 0) with u2 = 1: Q2 decays like exp(-nu (t + t^3 / 3))."""
        nu = 0.01
        for t in (1.0, 4.0, 9.0):
            assert q2_closed_form(1, 0.0, 0, 1.0, t, nu) == pytest.approx(math.exp(-nu * (t + t ** 3 / 3.0)))

    def test_inviscid_damping_of_u2(self):
        """|U2| falls like 1 / (1 + t^2) for the (1, 0, 0) mode."""
        mode = LinearMode(1, 0.0, 0, (0j, 1.0 + 0j, 0j))
        for t in (2.0, 10.0, 40.0):
            assert abs(linear_mode_exact(mode, t).vector[1]) == pytest.approx(1.0 / (1.0 + t * t))

    def test_lift_up_of_x_independent_mode(self):
        """k = 0: u1 = -t e^{-nu |eta, l|^2 t} u2."""
        nu = 0.02
        mode = LinearMode(0, 0.0, 1, (0j, 1.0 + 0j, 0j), nu=nu)
        for t in (1.0, 3.0, 8.0):
            out = linear_mode_exact(mode, t).vector
            assert out[0] == pytest.approx(-t * math.exp(-nu * t))
            assert out[1] == pytest.approx(math.exp(-nu * t))

    def test_constraint_is_preserved(self):
        mode = _oblique_mode()
        for t in (0.5, 5.0, 12.0):
            assert linear_mode_exact(mode, t).divergence_residual() < 1e-12

    def test_backwards_evolution_rejected(self):
        with pytest.raises(ParameterRangeError):
            linear_mode_exact(replace(_oblique_mode(), t=2.0), 1.0)


class TestEvolveLinearMode:
    def test_matches_closed_form(self):
        mode = _oblique_mode()
        numeric = evolve_linear_mode(mode, 0.0, 10.0)
        exact = linear_mode_exact(mode, 10.0)
        np.testing.assert_allclose(numeric.vector, exact.vector, rtol=1e-5, atol=1e-6)

    def test_k0_mode_matches_closed_form(self):
        mode = LinearMode(0, 0.0, 1, (0.2 + 0j, 1.0 + 0j, 0j), nu=0.01)
        numeric = evolve_linear_mode(mode, 0.0, 6.0, dt=0.05)
        exact = linear_mode_exact(mode, 6.0)
        np.testing.assert_allclose(numeric.vector, exact.vector, atol=1e-10)

    def test_fourth_order_in_dt(self):
        mode = _oblique_mode(nu=0.01)
        exact = linear_mode_exact(mode, 10.0).vector

        def error(dt):
            return float(np.max(np.abs(evolve_linear_mode(mode, 0.0, 10.0, dt=dt).vector - exact)))

        assert 13.0 < error(0.2) / error(0.1) < 19.0

    def test_rejects_non_solenoidal_mode(self):
        mode = LinearMode(1, 0.0, 0, (1.0 + 0j, 0j, 0j))
        with pytest.raises(DivergenceError):
            evolve_linear_mode(mode, 0.0, 1.0)

    def test_rejects_bad_interval(self):
        with pytest.raises(ParameterRangeError):
            evolve_linear_mode(_oblique_mode(), 2.0, 1.0)


class TestHelpers:
    def test_u2_from_q2(self):
        assert u2_from_q2(1, 3.0, 2, 1.0, -9.0) == pytest.approx(1.0)

    def test_u2_from_q2_at_zero_wavevector(self):
        with pytest.raises(ZeroWavevectorError):
            u2_from_q2(0, 0.0, 0, 3.0, 1.0)

    def test_damping_envelope(self):
        assert damping_envelope(2, 2.0, 1e-3, 0.25) == pytest.approx(math.exp(-0.25 * 8e-3) / 5.0)
        assert damping_envelope(1, 2.0, 1e-3, 0.25) == pytest.approx(math.exp(-0.25 * 8e-3))

    def test_damping_envelope_admits_exact_rate(self):
        assert damping_envelope(3, 10.0, 1e-3, 1.0 / 3.0) == pytest.approx(math.exp(-1.0 / 3.0))
        assert damping_envelope(2, 1.0, 0.0, 0.1) == pytest.approx(0.5)

    @pytest.mark.parametrize("component,t,c", [(4, 2.0, 0.1), (1, 0.5, 0.1), (1, 2.0, 0.5), (2, 2.0, 0.0)])
    def test_damping_envelope_ranges(self, component, t, c):
        with pytest.raises(ParameterRangeError):
            damping_envelope(component, t, 1e-3, c)


class TestEvolveLinearField:
    def test_agrees_with_single_mode_evolution(self, small_grid):
        nu = 0.01
        field = random_initial_data(11, small_grid, 1.0)
        evolved = evolve_linear_field(field, 3.0, nu)
        n = 2
        eta = float(small_grid.eta[0, n, 0])
        for k, l_index in ((1, 1), (2, 0), (0, 2)):
            uhat = tuple(complex(c) for c in field.coeffs[:, k, n, l_index])
            mode = LinearMode(k, eta, int(small_grid.l[0, 0, l_index]), uhat, nu=nu)
            expected = linear_mode_exact(mode, 3.0).vector
            np.testing.assert_allclose(evolved.coeffs[:, k, n, l_index], expected, rtol=1e-10, atol=1e-14)

    def test_keeps_divergence_free(self, small_grid):
        field = random_initial_data(5, small_grid, 1.0)
        assert evolve_linear_field(field, 7.0, 1e-3).divergence_residual() < 1e-10

    def test_requires_shear_frame(self, small_grid):
        field = random_initial_data(5, small_grid, 1.0)
        lab = replace(field, frame="lab")
        with pytest.raises(ParameterRangeError):
            evolve_linear_field(lab, 1.0, 1e-3)
