import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, optimize

from cavityspin import (
    DiracDeltaDensity,
    LorentzianDensity,
    QGaussianDensity,
    angular_to_mhz,
    delta_from_fwhm,
    fwhm_relation,
    grid_for_density,
    lamb_shift,
    mhz_to_angular,
    normalize,
    qgauss_eval,
    sokhotski_split,
)
from cavityspin.spectral import qgauss_norm
from conftest import FWHM, OMEGA_C, Q_SHAPE


@pytest.fixture(scope="module")
def qg(ensemble):
    return ensemble


class TestQGaussianShape:
    def test_norm_constant_against_adaptive_quadrature(self, qg):
        # Oracle: integrate the *unnormalized* shape and invert.
        p = 1.0 / (qg.q - 1.0)
        raw = lambda x: (1.0 + (qg.q - 1.0) * (x / qg.delta) ** 2) ** (-p)
        mass, _ = integrate.quad(raw, -np.inf, np.inf, limit=400)
        assert qgauss_norm(qg.q, qg.delta) == pytest.approx(1.0 / mass, rel=1e-9)

    def test_half_maximum_sits_at_half_fwhm(self, qg):
        peak = qg.pdf(qg.omega_s)
        for sign in (+1, -1):
            val = qg.pdf(qg.omega_s + sign * qg.fwhm / 2.0)
            assert abs(val - peak / 2.0) < 1e-10 * peak

    def test_delta_from_fwhm_against_root_find(self):
        # Independent oracle: find the half-maximum crossing numerically.
        delta = delta_from_fwhm(Q_SHAPE, FWHM)
        d = QGaussianDensity(omega_s=0.0, q=Q_SHAPE, delta=delta)
        peak = d.pdf(0.0)
        half_cross = optimize.brentq(
            lambda x: d.pdf(x) - peak / 2.0, 1e-6, 10.0 * delta, xtol=1e-14
        )
        assert 2.0 * half_cross == pytest.approx(FWHM, rel=1e-10)
        assert angular_to_mhz(delta) == pytest.approx(5.2684, rel=5e-4)

    def test_fwhm_round_trip(self):
        gamma_q = mhz_to_angular(9.4)
        delta = delta_from_fwhm(1.39, gamma_q)
        assert fwhm_relation(1.39, delta) == pytest.approx(gamma_q, rel=1e-12)

    @given(st.floats(min_value=1.01, max_value=2.99),
           st.floats(min_value=1e-4, max_value=10.0))
    def test_fwhm_round_trip_property(self, q, gamma_q):
        assert fwhm_relation(q, delta_from_fwhm(q, gamma_q)) == pytest.approx(
            gamma_q, rel=1e-12
        )

    def test_gaussian_limit_rejected(self):
        with pytest.raises(ValueError):
            delta_from_fwhm(1.0, 1.0)
        with pytest.raises(ValueError):
            QGaussianDensity(omega_s=0.0, q=3.0, delta=1.0)

    def test_q2_is_exactly_lorentzian(self):
        qg2 = QGaussianDensity(omega_s=5.0, q=2.0, delta=0.3)
        lor = LorentzianDensity(omega_s=5.0, delta=0.3)
        x = np.linspace(-50, 50, 1001) + 5.0
        assert np.allclose(qg2.pdf(x), lor.pdf(x), rtol=1e-12)

    def test_symmetry_and_positivity(self, qg):
        x = np.geomspace(1e-6, 1e3, 400)
        left = qg.pdf(qg.omega_s - x)
        right = qg.pdf(qg.omega_s + x)
        np.testing.assert_allclose(left, right, rtol=1e-13)
        assert (right > 0).all()

    def test_tail_slope_matches_exponent(self, qg):
        # log-log slope of the far tail is -2/(q-1), checked between
        # 10 and 100 FWHM from the line center.
        x = np.geomspace(10 * qg.fwhm, 100 * qg.fwhm, 50)
        slope = np.polyfit(np.log(x), np.log(qg.pdf(qg.omega_s + x)), 1)[0]
        assert slope == pytest.approx(-2.0 / (qg.q - 1.0), rel=0.05)

    def test_eval_outside_support_is_analytic(self, qg):
        lo, hi = qg.support
        outside = hi + 5.0 * qg.fwhm
        p = 1.0 / (qg.q - 1.0)
        expected = qg.norm_constant * (
            1.0 + (qg.q - 1.0) * ((outside - qg.omega_s) / qg.delta) ** 2
        ) ** (-p)
        assert qgauss_eval(qg, outside) == pytest.approx(expected, rel=1e-14)
        assert qgauss_eval(qg, outside) > 0


class TestNormalization:
    def test_qgaussian_unit_mass(self, qg):
        assert normalize(qg) == pytest.approx(qg.norm_constant, rel=1e-14)

    def test_lorentzian_truncation_policy(self):
        # At the default +-200 delta support the enclosed mass is ~0.9968;
        # the analytic arctan tail makes the check exact.
        lor = LorentzianDensity(omega_s=0.0, delta=0.05)
        grid = grid_for_density(lor)
        enclosed = lor.pdf(grid.omegas) @ grid.weights
        assert enclosed == pytest.approx(0.99682, abs=2e-4)
        assert normalize(lor) == pytest.approx(lor.delta / math.pi, rel=1e-14)

    def test_lorentzian_strict_tail_target_exceeds_cap(self):
        with pytest.raises(ValueError):
            LorentzianDensity(omega_s=0.0, delta=0.05, tail_target=1e-6)

    def test_dirac_delta(self):
        assert normalize(DiracDeltaDensity(omega_s=1.0)) == 1.0

    def test_grid_mass_matches_tail_prediction(self, qg):
        grid = grid_for_density(qg)
        mass = qg.pdf(grid.omegas) @ grid.weights
        # Trapezoid error on this grid is O(d_omega^2) ~ 5e-6; the missing
        # tail is the configured 1e-6.
        assert abs(mass - (1.0 - qg.tail_mass())) < 2e-5


class TestFrequencyGrid:
    def test_grid_covers_support_with_center_node(self, qg):
        grid = grid_for_density(qg)
        lo, hi = qg.support
        assert grid.omegas[0] <= lo and grid.omegas[-1] >= hi
        assert np.abs(grid.omegas - qg.omega_s).min() < 1e-9 * abs(qg.omega_s)
        assert (grid.weights > 0).all()
        assert np.allclose(np.diff(grid.omegas), grid.d_omega, rtol=1e-12)

    def test_time_horizon_refines_spacing(self, qg):
        coarse = grid_for_density(qg)
        t_max = 10_000.0
        fine = grid_for_density(qg, t_max=t_max)
        assert fine.d_omega <= coarse.d_omega
        assert fine.d_omega * t_max < math.pi / 4.0 + 1e-12

    def test_dirac_grid_is_single_atom(self):
        grid = grid_for_density(DiracDeltaDensity(omega_s=2.0))
        assert grid.n == 1
        assert grid.omegas[0] == 2.0
        assert grid.weights[0] == 1.0


class TestLambShift:
    def test_zero_at_center(self, qg):
        grid = grid_for_density(qg)
        assert abs(lamb_shift(qg, grid, qg.omega_s)) < 1e-10

    def test_odd_symmetry(self, qg):
        grid = grid_for_density(qg)
        for x in (0.3 * qg.fwhm, qg.fwhm, 8.0 * qg.fwhm):
            plus = lamb_shift(qg, grid, qg.omega_s + x)
            minus = lamb_shift(qg, grid, qg.omega_s - x)
            assert plus == pytest.approx(-minus, rel=1e-9, abs=1e-12)

    def test_lorentzian_hilbert_transform_oracle(self):
        # P-integral of a Lorentzian has the closed form
        # (omega - omega_s) / ((omega - omega_s)^2 + delta^2).
        delta = mhz_to_angular(4.6)
        lor = LorentzianDensity(omega_s=OMEGA_C, delta=delta)
        grid = grid_for_density(lor, points_per_fwhm=2000)
        w = OMEGA_C + delta
        expected = delta / (delta**2 + delta**2)
        assert lamb_shift(lor, grid, w) == pytest.approx(expected, rel=1e-6)

    def test_far_field_approaches_inverse_distance(self, qg):
        grid = grid_for_density(qg)
        x = 100.0 * qg.delta
        val = lamb_shift(qg, grid, qg.omega_s + x)
        assert val == pytest.approx(1.0 / x, rel=1e-2)

    def test_vector_evaluation_matches_scalar(self, qg):
        grid = grid_for_density(qg)
        xs = qg.omega_s + np.array([-2.0, -0.5, 0.17, 3.3]) * qg.fwhm
        vec = lamb_shift(qg, grid, xs)
        scalars = np.array([lamb_shift(qg, grid, float(x)) for x in xs])
        np.testing.assert_allclose(vec, scalars, rtol=1e-13)

    def test_dirac_pole(self):
        d = DiracDeltaDensity(omega_s=3.0)
        grid = grid_for_density(d)
        assert lamb_shift(d, grid, 4.0) == pytest.approx(1.0)


class TestSokhotskiSplit:
    def test_pv_of_symmetric_density_vanishes(self, qg):
        grid = grid_for_density(qg)
        pv, half_residue = sokhotski_split(qg, grid, qg.pdf)
        assert abs(pv) < 1e-9
        assert half_residue == pytest.approx(1j * math.pi * qg.pdf(qg.omega_s))

    def test_pv_of_shifted_lorentzian(self):
        # f(omega) = rho(omega + delta) breaks the symmetry. Substituting
        # y = omega + delta gives P int rho(y)/(y - delta) dy, which is
        # minus the Hilbert-transform closed form at delta: -1/(2 delta).
        delta = 0.04
        lor = LorentzianDensity(omega_s=0.0, delta=delta)
        grid = grid_for_density(lor, points_per_fwhm=2000)
        f = lambda w: lor.pdf(np.asarray(w) + delta)
        pv, _ = sokhotski_split(lor, grid, f)
        assert pv == pytest.approx(-1.0 / (2.0 * delta), rel=1e-3)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=-1e3, max_value=1e3))
def test_qgaussian_positive_everywhere(x):
    d = QGaussianDensity(omega_s=0.0, q=1.39, delta=0.033)
    assert d.pdf(x) > 0
