import math

import numpy as np
import pytest

from reconstab import hermite
from reconstab.errors import DegenerateSpectrum, QuadratureNonconvergent
from reconstab.hermite import (
    ActivationSpec,
    gamma_ntk_closed_form,
    gamma_rf_lower_bound,
    get_activation,
    hermite_coefficients,
    hermite_polynomial,
    series_tail_bound,
)


class TestHermitePolynomial:
    def test_h1(self):
        assert hermite_polynomial(1, 2.0) == pytest.approx(2.0)

    def test_h2_at_zero(self):
        assert hermite_polynomial(2, 0.0) == pytest.approx(-1.0 / math.sqrt(2.0))

    def test_h4_at_zero(self):
        assert hermite_polynomial(4, 0.0) == pytest.approx(3.0 / math.sqrt(24.0))

    def test_first_five_closed_forms(self):
        rho = np.linspace(-3, 3, 31)
        closed = [
            np.ones_like(rho),
            rho,
            (rho**2 - 1) / math.sqrt(2),
            (rho**3 - 3 * rho) / math.sqrt(6),
            (rho**4 - 6 * rho**2 + 3) / math.sqrt(24),
        ]
        for l, expected in enumerate(closed):
            assert np.allclose(hermite_polynomial(l, rho), expected, atol=1e-12)

    def test_orthonormality_under_quadrature(self):
        x, w = hermite._gauss_hermite_nodes(120)
        basis = hermite._hermite_matrix(8, x)
        gram = (basis * w) @ basis.T
        assert np.max(np.abs(gram - np.eye(9))) <= 1e-10


class TestHermiteCoefficients:
    def test_hermite_combo_returns_exact_list(self):
        spec = hermite_coefficients(get_activation("h1+h2"), order=6)
        assert np.allclose(spec.coefficients, [0, 1, 1, 0, 0, 0, 0], atol=0)
        assert spec.exact and spec.tail_power == 0.0

    def test_identity_activation(self):
        spec = hermite_coefficients(get_activation("identity"), order=5)
        assert np.allclose(spec.coefficients, [0, 1, 0, 0, 0, 0], atol=0)

    def test_relu_low_order_coefficients(self):
        # mu_0 = E[relu(rho)] = 1/sqrt(2 pi), mu_1 = E[rho relu(rho)] = 1/2
        spec = hermite_coefficients(get_activation("relu"))
        assert abs(spec.coefficients[0] - 1.0 / math.sqrt(2 * math.pi)) <= 1e-6
        assert abs(spec.coefficients[1] - 0.5) <= 1e-6

    def test_relu_against_monte_carlo_oracle(self):
        rng = np.random.default_rng(1234)
        rho = rng.standard_normal(1_000_000)
        relu = np.maximum(rho, 0.0)
        spec = hermite_coefficients(get_activation("relu"))
        for l in range(3):
            mc = float(np.mean(relu * hermite_polynomial(l, rho)))
            assert abs(spec.coefficients[l] - mc) <= 5e-3

    def test_callable_identity_matches_combo(self):
        callable_spec = ActivationSpec(name="lin", fn=lambda u: u, lipschitz=1.0)
        spec = hermite_coefficients(callable_spec, order=8)
        assert abs(spec.coefficients[1] - 1.0) <= 1e-10
        assert np.max(np.abs(np.delete(spec.coefficients, 1))) <= 1e-10

    def test_parseval_inequality_and_convergence(self):
        relu = get_activation("relu")
        second_moment = 0.5  # E[relu(rho)^2] = E[rho^2 1(rho>0)]
        captured_10 = float(np.sum(hermite_coefficients(relu, order=10).coefficients ** 2))
        captured_40 = float(np.sum(hermite_coefficients(relu, order=40).coefficients ** 2))
        assert captured_10 <= second_moment + 1e-8
        assert captured_40 <= second_moment + 1e-8
        assert captured_40 >= captured_10
        assert second_moment - captured_40 <= 2e-4

    def test_nonconvergent_quadrature_raises(self):
        square_wave = ActivationSpec(
            name="square-wave", fn=lambda u: np.sign(np.sin(10.0 * u)), lipschitz=10.0
        )
        with pytest.raises(QuadratureNonconvergent):
            hermite_coefficients(square_wave, order=10)


class TestGammaRfLowerBound:
    def test_alpha_zero(self):
        spec = hermite_coefficients(get_activation("relu"))
        assert gamma_rf_lower_bound(spec, 0.0) == 0.0

    def test_h1_plus_h2_values(self):
        spec = hermite_coefficients(get_activation("h1+h2"))
        assert gamma_rf_lower_bound(spec, 0.5) == pytest.approx(0.125)
        assert gamma_rf_lower_bound(spec, 0.25) == pytest.approx(0.03125)

    def test_monotone_in_alpha(self):
        for name in ("h1+h2", "h1+h4", "relu"):
            spec = hermite_coefficients(get_activation(name))
            values = [gamma_rf_lower_bound(spec, a) for a in np.linspace(0, 0.98, 25)]
            assert all(b >= a for a, b in zip(values, values[1:]))

    def test_range(self):
        spec = hermite_coefficients(get_activation("h1+h4"))
        for alpha in np.linspace(0.0, 0.99, 12):
            assert 0.0 <= gamma_rf_lower_bound(spec, alpha) < 1.0

    def test_degenerate_spectrum(self):
        constant = ActivationSpec(name="const", coeffs=(1.0,))
        with pytest.raises(DegenerateSpectrum):
            gamma_rf_lower_bound(hermite_coefficients(constant), 0.5)


class TestGammaNtkClosedForm:
    def test_h0_plus_h1_values(self):
        spec = hermite_coefficients(get_activation("h0+h1"))
        assert gamma_ntk_closed_form(spec, 0.5) == pytest.approx(0.25)
        assert gamma_ntk_closed_form(spec, 0.25) == pytest.approx(0.0625)

    def test_h0_plus_h3(self):
        spec = hermite_coefficients(get_activation("h0+h3"))
        assert gamma_ntk_closed_form(spec, 0.5) == pytest.approx(0.0625)

    def test_alpha_one_limit(self):
        for name in ("h0+h1", "h0+h3"):
            spec = hermite_coefficients(get_activation(name))
            assert gamma_ntk_closed_form(spec, 1.0) == pytest.approx(1.0)

    def test_strictly_increasing_on_grid(self):
        grid = np.linspace(0.01, 0.99, 50)
        for name in ("h0+h1", "h0+h3"):
            spec = hermite_coefficients(get_activation(name))
            values = [gamma_ntk_closed_form(spec, a) for a in grid]
            assert all(b > a for a, b in zip(values, values[1:]))

    def test_open_interval_range(self):
        spec = hermite_coefficients(get_activation("h0+h1"))
        for alpha in np.linspace(0.05, 0.95, 10):
            assert 0.0 < gamma_ntk_closed_form(spec, alpha) < 1.0


class TestSeriesTailBound:
    def test_exact_combo_has_no_tail(self):
        spec = hermite_coefficients(get_activation("h1+h4"))
        assert series_tail_bound(spec, 0.7) == 0.0

    def test_alpha_zero(self):
        spec = hermite_coefficients(get_activation("relu"))
        assert series_tail_bound(spec, 0.0) == 0.0

    def test_dominates_explicit_long_truncation(self):
        relu = get_activation("relu")
        alpha = 0.5
        spec20 = hermite_coefficients(relu, order=20)
        spec60 = hermite_coefficients(relu, order=60)
        bound = series_tail_bound(spec20, alpha)
        captured20 = float(np.sum(spec20.coefficients**2))
        cap_expr = alpha**21 * captured20 / (1 - alpha)
        explicit_tail = float(
            np.sum(spec60.coefficients[21:] ** 2 * alpha ** np.arange(21, 61))
        )
        assert bound <= cap_expr + 1e-300
        assert bound >= explicit_tail


class TestActivationSpec:
    def test_derivative_of_combo(self):
        # d/drho (h1 + h2) = h0 + sqrt(2) h1
        deriv = get_activation("h1+h2").derivative()
        assert np.allclose(deriv.coeffs, (1.0, math.sqrt(2.0)))

    def test_derivative_of_tanh_matches_finite_differences(self):
        act = get_activation("tanh")
        deriv = act.derivative()
        u = np.linspace(-2, 2, 9)
        eps = 1e-6
        fd = (act(u + eps) - act(u - eps)) / (2 * eps)
        assert np.allclose(deriv(u), fd, atol=1e-9)

    def test_rejects_both_kinds(self):
        with pytest.raises(ValueError):
            ActivationSpec(name="bad", coeffs=(1.0,), fn=lambda u: u)
