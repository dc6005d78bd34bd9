#!/usr/bin/env python3
"""
Tests for the special-function adapters (specfun.py)
"""

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from models import SpecialFunctionDomainError
from specfun import (
    Hyp2F1Params,
    airy_expr,
    bessel,
    bessel_derivative,
    bessel_expr,
    hyp2f1,
    hyp2f1_expr,
)


def test_terminating_series_is_a_polynomial():
    """🧪 ₂F₁(−2, 1; 1; z) = (1 − z)² everywhere, |z| ≥ 1 included"""
    params = Hyp2F1Params(-2, 1, 1)
    assert params.polynomial_degree == 2
    assert hyp2f1(params, 3.0) == pytest.approx(4.0)
    z = sp.Symbol("z")
    assert sp.expand(hyp2f1_expr(params, z) - (1 - z) ** 2) == 0


def test_series_matches_scipy_inside_unit_disc():
    """🧪 Non-terminating series agrees with scipy.special.hyp2f1"""
    params = Hyp2F1Params(0.5, 1.5, 2.5)
    z = np.array([-0.7, 0.0, 0.3, 0.9])
    assert np.allclose(hyp2f1(params, z), special.hyp2f1(0.5, 1.5, 2.5, z), rtol=1e-10)


def test_pole_before_termination_raises():
    """🧪 c a non-positive integer reached before the series stops"""
    with pytest.raises(SpecialFunctionDomainError):
        Hyp2F1Params(1, 2, -1)
    assert Hyp2F1Params(-1, 2, -3).polynomial_degree == 1


def test_non_terminating_series_outside_disc_raises():
    """🧪 |z| ≥ 1 without termination is a domain error"""
    with pytest.raises(SpecialFunctionDomainError):
        hyp2f1(Hyp2F1Params(0.5, 1.5, 2.5), 1.0)


def test_degenerate_parameters_reduce_to_a_power():
    """🧪 a = c gives (1 − z)^(−b)"""
    params = Hyp2F1Params(2.5, 0.75, 2.5)
    assert params.degenerate
    assert hyp2f1(params, -3.0) == pytest.approx(4.0 ** -0.75)


def test_hyp2f1_expression_derivative():
    """🧪 d/dz ₂F₁ = (ab/c)·₂F₁(a+1, b+1; c+1) inside sympy"""
    z = sp.Symbol("z")
    params = Hyp2F1Params(1 / 3, 2 / 3, 5 / 3)
    derivative = sp.lambdify(z, sp.diff(hyp2f1_expr(params, z), z), modules="numpy")
    x = 0.4
    expected = (1 / 3) * (2 / 3) / (5 / 3) * special.hyp2f1(4 / 3, 5 / 3, 8 / 3, x)
    assert float(derivative(x)) == pytest.approx(expected, rel=1e-9)


@pytest.mark.parametrize("kind,reference", [
    ("I", special.iv), ("K", special.kv), ("J", special.jv), ("Y", special.yv),
])
def test_bessel_kinds_match_scipy(kind, reference):
    """🧪 Every supported kind at orders 2 and 2/3"""
    x = np.array([0.3, 1.0, 4.5])
    for order in (2.0, 2.0 / 3.0):
        assert np.allclose(bessel(kind, order, x), reference(order, x))


def test_bessel_derivative_matches_scipy():
    """🧪 First and second derivatives of I₂"""
    x = np.array([0.5, 2.0])
    assert np.allclose(bessel_derivative("I", 2.0, x), special.ivp(2.0, x, 1))
    assert np.allclose(bessel_derivative("I", 2.0, x, 2), special.ivp(2.0, x, 2))


def test_bessel_domain_errors():
    """🧪 Unsupported order, unknown kind and x ≤ 0 are rejected"""
    with pytest.raises(SpecialFunctionDomainError):
        bessel("I", 1.0, 1.0)
    with pytest.raises(SpecialFunctionDomainError):
        bessel("H", 2.0, 1.0)
    with pytest.raises(SpecialFunctionDomainError):
        bessel("K", 2.0, np.array([1.0, 0.0]))


def test_bessel_expression_differentiates():
    """🧪 sympy derivative of K₂(x) evaluates to K₂'(x)"""
    x = sp.Symbol("x", positive=True)
    fn = sp.lambdify(x, sp.diff(bessel_expr("K", 2.0, x), x), modules="numpy")
    assert float(fn(1.3)) == pytest.approx(special.kvp(2.0, 1.3, 1))


def test_airy_expression_satisfies_airy_equation():
    """🧪 Ai'' = x·Ai through the sympy wrapper"""
    x = sp.Symbol("x", real=True)
    second = sp.lambdify(x, sp.diff(airy_expr(x), x, 2), modules="numpy")
    for value in (-2.0, 0.0, 0.7):
        assert float(second(value)) == pytest.approx(value * special.airy(value)[0], abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 8), st.floats(0.1, 4.0), st.floats(0.5, 6.0), st.floats(-0.95, 0.95))
def test_terminating_series_agrees_with_scipy(n, b, c, z):
    """🧪 ₂F₁(−n, b; c; z) against scipy for random parameters"""
    params = Hyp2F1Params(-n, b, c)
    assert params.polynomial_degree == n
    assert hyp2f1(params, z) == pytest.approx(special.hyp2f1(-n, b, c, z), rel=1e-9, abs=1e-12)


def test_hypergeometric_ode_oracle():
    """🧪 RK45 along z(1−z)w'' + [c − (a+b+1)z]w' − abw = 0 lands on ₂F₁"""
    a, b, c = 0.5, 1.5, 2.5
    params = Hyp2F1Params(a, b, c)
    shifted = Hyp2F1Params(a + 1, b + 1, c + 1)

    def rhs(z, w):
        return [w[1], (a * b * w[0] - (c - (a + b + 1) * z) * w[1]) / (z * (1 - z))]

    z0, z1 = 0.1, 0.6
    w0 = [hyp2f1(params, z0), a * b / c * hyp2f1(shifted, z0)]
    sol = integrate.solve_ivp(rhs, (z0, z1), w0, method="RK45", rtol=1e-10, atol=1e-12)
    assert sol.success
    assert sol.y[0, -1] == pytest.approx(hyp2f1(params, z1), rel=1e-7)


@pytest.mark.parametrize("kind,sign", [("I", 1.0), ("J", -1.0)])
def test_bessel_ode_oracle(kind, sign):
    """🧪 RK45 along x²y'' + xy' ∓ (x² ± ν²)y = 0 lands on the order-2 Bessel value"""
    nu = 2.0

    def rhs(x, y):
        return [y[1], (-x * y[1] + (sign * x ** 2 + nu ** 2) * y[0]) / x ** 2]

    y0 = [float(bessel(kind, nu, 1.0)), float(bessel_derivative(kind, nu, 1.0))]
    sol = integrate.solve_ivp(rhs, (1.0, 3.0), y0, method="RK45", rtol=1e-10, atol=1e-12)
    assert sol.success
    assert sol.y[0, -1] == pytest.approx(float(bessel(kind, nu, 3.0)), rel=1e-7)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
