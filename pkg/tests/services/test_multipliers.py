"""Tests for critical times, the resonance weights and the Gevrey radius."""

import json
import math
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate

from couette3d.core import ParameterRangeError
from couette3d.schemas.params import MultiplierParams
from couette3d.services import multipliers
from couette3d.services.diagnostics import sobolev_norm
from couette3d.services.initial_data import random_initial_data
from couette3d.services.spectral_core import inner_product

GOLDEN = Path(__file__).resolve().parent.parent / "golden"


class TestCriticalTimes:
    def test_values(self):
        assert multipliers.critical_time(0, 64.0) == 128.0
        assert multipliers.critical_time(1, 64.0) == pytest.approx(48.0)
        assert multipliers.critical_time(2, 64.0) == pytest.approx(80.0 / 3.0)

    def test_empty_intervals(self):
        assert multipliers.critical_time(9, 64.0) is None
        assert multipliers.critical_time(-1, 64.0) is None

    def test_schedule_is_decreasing(self):
        sched = multipliers.critical_schedule(400.0)
        assert sched.kmax == 20
        assert all(a > b for a, b in zip(sched.times, sched.times[1:]))
        assert sched.interval(1) == pytest.approx((sched.times[1], 800.0))
        assert sched.interval(21) is None

    def test_resonant_intervals_start_after_two_sqrt_eta(self):
        sched = multipliers.critical_schedule(400.0)
        for k in range(1, sched.kmax + 1):
            interval = sched.resonant_interval(k)
            if interval is not None:
                assert interval[0] >= 40.0


class TestResonanceWeight:
    def test_golden_profile(self):
        golden = json.loads((GOLDEN / "w_bar_eta64.json").read_text())
        for sample in golden["log2_w_bar"]:
            value = float(multipliers.log_w_bar(sample["t"], golden["eta"], golden["kappa"])) / math.log(2.0)
            assert value == pytest.approx(sample["value"], abs=1e-9)

    def test_w_bar_is_non_decreasing(self):
        t = np.linspace(1.0, 300.0, 4000)
        values = multipliers.log_w_bar(t, 100.0, 4.0)
        assert np.all(np.diff(values) >= -1e-12)
        assert values[-1] == 0.0

    def test_derivative_matches_finite_difference(self):
        eta, kappa, t, h = 64.0, 4.0, 40.0, 1e-6
        fd = (multipliers.log_w(t + h, eta, kappa) - multipliers.log_w(t - h, eta, kappa)) / (2.0 * h)
        assert float(multipliers.dtw_log_derivative(t, eta, kappa)) == pytest.approx(float(fd), rel=1e-5)

    def test_gevrey_two_loss(self):
        """log 1/w(1, eta) grows like sqrt(eta)."""
        etas = [100.0 * 2 ** j for j in range(14)]
        fit = multipliers.fit_total_loss(4.0, etas)
        assert 0.48 < fit.exponent < 0.53
        assert fit.r2 > 0.99


class TestPressureWeight:
    @pytest.mark.parametrize("k,eta,l", [(1, 10.0, 1), (2, -50.0, 0), (4, 100.0, 4)])
    def test_closed_form_matches_ode(self, k, eta, l):
        horizon = 2.0 * abs(eta) + 50.0
        closed = float(multipliers.log_w_L(horizon, k, eta, l, 4.0))
        assert closed == pytest.approx(math.log(multipliers.w_L_by_ode(horizon, k, eta, l, 4.0)), abs=1e-8)

    def test_total_variation_is_bounded(self):
        for k in (1, 2, 4):
            for eta in (-50.0, 0.0, 10.0, 100.0):
                for l in (0, 1, 4):
                    assert multipliers.wL_total_variation(k, eta, l) <= math.pi + 1e-12

    def test_normalized_at_one(self):
        assert float(multipliers.w_L_value(1.0, 3, 7.0, 2, 4.0)) == pytest.approx(1.0)
        with pytest.raises(ParameterRangeError):
            multipliers.w_L_value(0.5, 3, 7.0, 2, 4.0)


class TestGevreyRadius:
    def test_radius_drop_matches_quadrature(self):
        for t in (1.5, 10.0, 250.0):
            assert float(multipliers.radius_drop(t, 0.6)) == pytest.approx(
                multipliers.radius_drop_by_quadrature(t, 0.6), abs=1e-10
            )

    def test_limit_at_infinity(self):
        params = MultiplierParams()
        p = min(2.0 * params.s, 1.5)
        total, _ = integrate.quad(lambda x: (1.0 + x * x) ** (-0.5 * p), 1.0, np.inf)
        expected = multipliers.lambda_initial(params) - params.delta_lambda * total
        assert multipliers.lambda_at_infinity(params) == pytest.approx(expected, rel=1e-8)
        assert multipliers.lambda_at_infinity(params) > params.lambda_prime

    def test_radius_is_decreasing(self):
        params = MultiplierParams()
        values = multipliers.lambda_of_t(np.array([1.0, 5.0, 50.0]), params)
        assert np.all(np.diff(values) < 0)
        with pytest.raises(ParameterRangeError):
            multipliers.lambda_of_t(0.5, params)


class TestFamilies:
    def test_dissipation_families_vanish_at_k0(self):
        params = MultiplierParams(mu=10.0)
        assert multipliers.log_A_value("nu", 2.0, 0, 3.0, 1, params) == -np.inf
        assert np.isfinite(multipliers.log_A_value("nu", 2.0, 1, 3.0, 1, params))

    def test_unknown_family(self):
        with pytest.raises(ParameterRangeError):
            multipliers.log_A_value("Z", 2.0, 1, 3.0, 1, MultiplierParams(mu=10.0))

    def test_ck_functionals_are_non_negative(self, small_grid):
        field = random_initial_data(3, small_grid, 1e-2)
        field = field.with_coeffs(field.coeffs, time=2.0)
        ck = multipliers.ck_functionals(field, "Q", 2.0, MultiplierParams(mu=10.0), component=1)
        for value in (ck.CK_lambda, ck.CK_w, ck.CK_wL, ck.CK_L, ck.dissipation):
            assert value >= 0.0
        assert ck.dissipation > 0.0


class TestWeights:
    def test_w_full_never_exceeds_w_bar(self):
        t = np.linspace(1.0, 250.0, 2000)
        assert np.all(multipliers.w_full(t, 100.0, 4.0) <= multipliers.w_bar(t, 100.0, 4.0) + 1e-15)

    def test_weights_are_one_after_the_last_interval(self):
        t = np.array([200.0, 250.0, 1000.0])
        np.testing.assert_allclose(multipliers.w_bar(t, 100.0, 4.0), 1.0)
        np.testing.assert_allclose(multipliers.w_full(t, -100.0, 4.0), 1.0)

    def test_early_times_are_penalized(self):
        assert float(multipliers.w_full(1.0, 100.0, 4.0)) < float(multipliers.w_bar(1.0, 100.0, 4.0)) < 1.0


class TestDissipationScale:
    def test_zero_frequency(self):
        t = np.array([0.0, 2.0, 10.0])
        np.testing.assert_allclose(multipliers.D_value(t, 0.0, 0.01, 2.0), 0.01 * t ** 3 / 48.0)

    def test_constant_before_two_eta(self):
        eta, nu, alpha = 5.0, 1e-3, 3.0
        expected = nu * eta ** 3 / (3.0 * alpha)
        np.testing.assert_allclose(multipliers.D_value([1.0, 5.0, 10.0], -eta, nu, alpha), expected)
        assert float(multipliers.D_value(20.0, eta, nu, alpha)) > expected


class TestMultiplierValues:
    def test_value_is_exp_of_log(self):
        params = MultiplierParams(mu=10.0)
        for family in ("Q", "A", "2", "nu"):
            value = multipliers.A_value(family, 3.0, 1, 4.0, 2, params)
            log_value = multipliers.log_A_value(family, 3.0, 1, 4.0, 2, params)
            assert float(value) == pytest.approx(math.exp(float(log_value)))
            assert 0.0 < float(value) < np.inf

    def test_rejects_early_times(self):
        with pytest.raises(ParameterRangeError):
            multipliers.A_value("Q", 0.5, 1, 4.0, 2, MultiplierParams(mu=10.0))


class TestGevreyNorm:
    def test_unweighted_norm_is_scaled_l2(self, small_grid):
        field = random_initial_data(6, small_grid, 1e-2)
        f = field.coeffs[0]
        gevrey = multipliers.gevrey_norm(f, small_grid, 0.0, 0.0, 0.5)
        assert 2.0 * small_grid.spec.deta * gevrey ** 2 == pytest.approx(inner_product(small_grid, f, f), rel=1e-12)

    def test_weights_increase_the_norm(self, small_grid):
        f = random_initial_data(6, small_grid, 1e-2).coeffs[0]
        base = multipliers.gevrey_norm(f, small_grid, 0.0, 0.0, 0.5)
        assert multipliers.gevrey_norm(f, small_grid, 0.5, 0.0, 0.5) > base
        assert multipliers.gevrey_norm(f, small_grid, 0.0, 2.0, 0.5) > base

    def test_unweighted_gevrey_norm_matches_sobolev_norm(self, small_grid):
        """Both brackets use the l1 magnitude of (k, eta, l)."""
        field = random_initial_data(6, small_grid, 1e-2)
        for sigma in (1.0, 2.0):
            for component in range(3):
                gevrey = multipliers.gevrey_norm(field.coeffs[component], small_grid, 0.0, sigma, 0.5)
                assert gevrey == pytest.approx(sobolev_norm(field, sigma, component), rel=1e-12)

    def test_single_mode(self, small_grid):
        coeffs = np.zeros(small_grid.spec.spectral_shape, dtype=complex)
        coeffs[1, 0, 0] = 1.0
        lam, sigma = 0.7, 1.5
        expected = math.exp(lam) * 2.0 ** (sigma / 2.0)
        assert multipliers.gevrey_norm(coeffs, small_grid, lam, sigma, 0.5) == pytest.approx(expected)


def test_japanese_bracket_uses_l1_magnitude():
    assert float(multipliers.japanese(3.0, -4.0)) == pytest.approx(math.sqrt(50.0))
    assert float(multipliers.japanese(-2.0)) == pytest.approx(math.sqrt(5.0))


class TestFamilyRelations:
    @pytest.fixture
    def params(self):
        return MultiplierParams(mu=10.0)

    def test_a3_over_a2(self, params):
        """At k != 0 and t >= <eta, l> the ratio is <eta, l> / t."""
        eta, l = 3.0, 2.0
        bracket = float(multipliers.japanese(eta, l))
        for t in (bracket, 8.0, 40.0):
            ratio = multipliers.A_value("3", t, 1, eta, l, params) / multipliers.A_value("2", t, 1, eta, l, params)
            assert float(ratio) == pytest.approx(bracket / t, rel=1e-10)

    @pytest.mark.parametrize("k,eta,l", [(2, 7.0, 3), (1, -40.0, 0), (3, 0.5, 1)])
    def test_sign_symmetry(self, params, k, eta, l):
        for family in multipliers.FAMILIES:
            for t in (1.5, 7.0, 30.0):
                plus = float(multipliers.log_A_value(family, t, k, eta, l, params))
                minus = float(multipliers.log_A_value(family, t, -k, -eta, -l, params))
                assert minus == pytest.approx(plus, rel=1e-12, abs=1e-12)

    def test_resonance_weight_is_even_in_eta(self):
        t = np.linspace(1.0, 120.0, 500)
        np.testing.assert_array_equal(multipliers.log_w(t, 50.0, 4.0), multipliers.log_w(t, -50.0, 4.0))

    def test_dissipation_scale_lower_bound(self):
        """max(nu |eta|^3, nu t^3) <= 24 alpha D on a dense sample."""
        nu, alpha = 1e-3, 2.0
        t, eta = np.meshgrid(np.linspace(0.0, 100.0, 201), np.linspace(-30.0, 30.0, 61))
        d = multipliers.D_value(t, eta, nu, alpha)
        lower = np.maximum(nu * np.abs(eta) ** 3, nu * t ** 3)
        assert np.all(lower <= 24.0 * alpha * d * (1.0 + 1e-12))


class TestWeightConstants:
    def test_dtw_band_is_uniform_in_eta(self):
        single = multipliers.dtw_band(4.0, [100.0])
        wide = multipliers.dtw_band(4.0, [100.0, 400.0, 1600.0, 6400.0])
        assert 1.0 <= single <= wide < 10.0
        assert wide <= 1.5 * single

    def test_dtw_band_without_resonant_intervals(self):
        assert math.isnan(multipliers.dtw_band(4.0, [0.5]))

    def test_w_ratio_constant(self):
        loss = -float(multipliers.log_w(1.0, 400.0, 4.0))
        assert multipliers.w_ratio_constant(4.0, [(1.0, 0.0, 400.0)]) == pytest.approx(loss / 20.0)
        assert multipliers.w_ratio_constant(4.0, [(1.0, 50.0, 50.0)]) == 0.0

    def test_w_ratio_constant_bounds_every_sample(self):
        samples = [(t, eta, xi) for t in (1.0, 10.0, 100.0) for eta in (0.0, 50.0, 200.0) for xi in (0.0, 50.0, 200.0)]
        constant = multipliers.w_ratio_constant(4.0, samples)
        assert constant > 0.0
        for t, eta, xi in samples:
            gap = float(multipliers.log_w(t, eta, 4.0) - multipliers.log_w(t, xi, 4.0))
            assert gap <= constant * math.sqrt(abs(eta - xi)) + 1e-12

    def test_fit_mu(self):
        etas = [100.0, 400.0]
        ratios = [-2.0 * float(multipliers.log_w(1.0, eta, 4.0)) / math.sqrt(eta) for eta in etas]
        assert multipliers.fit_mu(4.0, etas) == pytest.approx(1.1 * max(ratios))
        assert multipliers.fit_mu(4.0, etas, margin=0.0) == pytest.approx(max(ratios))
        assert multipliers.resolved_mu(MultiplierParams(mu=3.0)) == 3.0
