import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from circuit_dilation.functions import (DomainError, Poly2, ScalarFunction, bracket,
                                        hessian_det)

coeff = st.floats(-5, 5, allow_nan=False)
coeffs = st.lists(coeff, min_size=0, max_size=5)


def test_polynomial_evaluation_and_trimming():
    f = ScalarFunction.poly([1.0, 2.0, 0.0, 0.0])
    assert f.coeffs == (1.0, 2.0)
    assert f(3.0) == pytest.approx(7.0)
    assert f.degree == 1


def test_domain_violation_raises():
    f = ScalarFunction.poly([0, 1], domain=(-1, 1))
    with pytest.raises(DomainError):
        f(1.5)
    assert f.raw(1.5) == pytest.approx(1.5)


def test_sinusoid_derivative_and_antiderivative_exact():
    f = ScalarFunction.sine(2.0, 3.0, 0.4)
    x = np.linspace(-2, 2, 11)
    assert np.allclose(f.derivative()(x), 6.0 * np.cos(3 * x + 0.4))
    F = f.antiderivative()
    assert F(0.0) == pytest.approx(0.0, abs=1e-15)
    assert np.allclose(F(x), (2 / 3) * (math.cos(0.4) - np.cos(3 * x + 0.4)))


def test_zero_frequency_sinusoid_is_constant():
    f = ScalarFunction.sine(2.0, 0.0, math.pi / 2)
    assert f.is_constant and f.constant_value() == pytest.approx(2.0)


@given(coeffs)
def test_antiderivative_inverts_derivative(c):
    f = ScalarFunction.poly(c)
    g = f.antiderivative().derivative()
    x = np.linspace(-2, 2, 7)
    assert np.allclose(g(x), f(x), atol=1e-10)
    assert f.antiderivative()(0.0) == 0.0


@given(coeffs, st.floats(-3, 3).filter(lambda a: abs(a) > 0.1))
def test_compose_linear(c, a):
    f = ScalarFunction.poly(c, domain=(-10, 10))
    g = f.compose_linear(a)
    x = np.linspace(-1, 1, 5)
    assert np.allclose(g(x), f(a * x), atol=1e-9)


@given(st.lists(coeff, min_size=1, max_size=5), st.floats(-5, 0), st.floats(0.1, 5))
def test_minimum_bounds_samples(c, lo, width):
    f = ScalarFunction.poly(c, domain=(lo, lo + width))
    x = np.linspace(lo, lo + width, 2001)
    assert f.minimum() <= f(x).min() + 1e-9
    assert f.minimum() >= f(x).min() - 1e-2 * (1 + np.abs(f(x)).max())


def test_serialization_round_trip():
    f = ScalarFunction((1.0, -2.0), (0.5, 2.0, 0.1), (-3.0, 4.0))
    assert ScalarFunction.from_dict(f.to_dict()) == f


def test_poly2_bracket_canonical_pair():
    q, p = Poly2.q(), Poly2.p()
    assert bracket(q, p).allclose(Poly2.const(1.0))
    assert bracket(p, q).allclose(Poly2.const(-1.0))


def test_hessian_det_examples():
    q, p = Poly2.q(), Poly2.p()
    assert hessian_det(0.5 * (q * q + p * p)).allclose(Poly2.const(1.0))
    assert hessian_det(q * p).allclose(Poly2.const(-1.0))


poly2 = st.lists(st.lists(coeff, min_size=1, max_size=3), min_size=1, max_size=3).map(
    lambda rows: Poly2.from_list([r + [0.0] * (3 - len(r)) for r in rows]))


@given(poly2, poly2, poly2)
def test_bracket_jacobi_identity(f, g, h):
    total = bracket(f, bracket(g, h)) + bracket(g, bracket(h, f)) + bracket(h, bracket(f, g))
    Q, P = np.meshgrid(np.linspace(-1, 1, 5), np.linspace(-1, 1, 5))
    assert np.allclose(total(Q, P), 0.0, atol=1e-8)


@given(poly2, poly2)
def test_product_rule_for_partials(f, g):
    Q, P = np.meshgrid(np.linspace(-1, 1, 4), np.linspace(-1, 1, 4))
    assert np.allclose((f * g).dq()(Q, P), (f.dq() * g + f * g.dq())(Q, P), atol=1e-9)
