import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from circuit_dilation.circuit import (PhaseSpaceModel, constant_model, dissipation, drift_field,
                                      kinetic_from_inductance)
from circuit_dilation.dilation import (DilationError, build_symplectic_dilation,
                                       build_wiener_dilation, check_dilation_drift,
                                       compact_drift, covariation, default_grid,
                                       dissipator_poly, hessian_dissipation, itov_drift,
                                       lc_example_system, pair_dissipation, residual_report,
                                       residuals_eq0_eqv, u_field, xi_condition)
from circuit_dilation.functions import Poly2, ScalarFunction as SF

q, p = Poly2.q(), Poly2.p()
GRID = default_grid()


def _at(field, x, y):
    return np.ravel(np.array(field(0.0, np.array([x]), np.array([y])), dtype=float))


def test_wiener_reference_example(reference_model):
    dil, sys = build_wiener_dilation(reference_model)
    assert dil.W.coeffs == pytest.approx((0, 0, 0.1))
    assert dil.G.coeffs == pytest.approx((0, 0, 0.15))
    expected_H = p * p / 2 + q * q / 2 + 0.1 * p * q + 0.15 * q * p
    assert dil.H.allclose(expected_H)
    assert np.allclose(_at(sys.drift, 1.0, 1.0), (1.0, -1.5), atol=1e-12)
    assert np.allclose(_at(sys.drift, 1.0, 1.0), drift_field(reference_model, 0, 1.0, 1.0))
    assert sys.channels.labels == ("resistance", "memristance")


def test_wiener_lossless_is_hamiltonian(lc_model):
    dil, sys = build_wiener_dilation(lc_model, c=2.0, ell=0.5)
    assert dil.F[0].allclose(q * q / 4)
    assert dil.F[1].allclose(p * p)
    assert dil.H.allclose(dil.H_circuit)
    Q, P = GRID
    assert np.allclose(np.array(sys.drift(0, Q, P)), np.array([P, -Q]), atol=1e-12)


def test_wiener_diffusion_column(reference_model):
    _, sys = build_wiener_dilation(reference_model, c=1.0)
    assert np.allclose(_at(sys.diffusion[0], 2.0, 3.0), (0.6, -2.0))


def test_wiener_rejects_nonconstant_inductance_and_parallel():
    nl = PhaseSpaceModel(kinetic_from_inductance(SF.poly([1.0, 0, 1.0], domain=(-5, 5))),
                         resistance=SF.const(0.1))
    with pytest.raises(DilationError, match="constant inductance"):
        build_wiener_dilation(nl)
    par = PhaseSpaceModel(kinetic_from_inductance(SF.const(1.0)),
                          parallel=((SF.const(0.2), SF.const(0.3)),))
    with pytest.raises(DilationError, match="series"):
        build_symplectic_dilation(par)
    with pytest.raises(DilationError):
        build_wiener_dilation(constant_model(), c=0.0)
    with pytest.raises(DilationError):
        build_symplectic_dilation(constant_model(), gamma=0.0)


def test_symplectic_reference_example(reference_model):
    dil, sys = build_symplectic_dilation(reference_model, gamma=1.0)
    assert dil.rho.coeffs == pytest.approx((0, 0.2))
    assert dil.mu.coeffs == pytest.approx((0, 0.3))
    assert dil.u[0].allclose(Poly2())
    assert dil.u[1].allclose(-0.5 * p)
    x, y = 0.7, -1.1
    cols = [_at(s, x, y) for s in sys.diffusion]
    # dq: rho'(p) on Q1, 1 on Q2; dp: bracket-derived +1 on P1, +mu'(q) on P2
    assert np.allclose(cols[0], (0.2, 0.0)) and np.allclose(cols[2], (1.0, 0.0))
    assert np.allclose(cols[1], (0.0, 1.0)) and np.allclose(cols[3], (0.0, 0.3))
    assert np.allclose(_at(sys.drift, x, y), drift_field(reference_model, 0, x, y), atol=1e-12)
    assert sys.channels.pairs == ((0, 1), (2, 3))


def test_symplectic_printed_variant_differs_only_in_p_noise(reference_model):
    _, printed = build_symplectic_dilation(reference_model, variant="printed")
    assert np.allclose(_at(printed.diffusion[1], 0.3, 0.4), (0.0, -1.0))
    assert np.allclose(_at(printed.diffusion[3], 0.3, 0.4), (0.0, 0.0))  # M' = 0 for constant M


def test_lc_example():
    gamma = 0.7
    sys = lc_example_system(2.0, 0.5, gamma)
    x, y = 0.4, -0.9
    assert np.allclose(_at(sys.drift, x, y), (y / 2.0, -(x / 0.5 + gamma * y)))
    assert np.allclose(_at(sys.diffusion[0], x, y), (1.0, 0.0))
    assert np.allclose(_at(sys.diffusion[1], x, y), (0.0, 1.0))


def test_symplectic_lossless_is_hamiltonian(lc_model):
    dil, sys = build_symplectic_dilation(lc_model, gamma=2.0)
    assert dil.u[0].is_zero and dil.u[1].is_zero
    Q, P = GRID
    assert np.allclose(np.array(sys.drift(0, Q, P)), np.array([P, -Q]), atol=1e-12)
    assert np.allclose(dil.dissipation()(Q, P), 0.0)
    # rho = mu = 0 removes the state-dependent channels Q1, P2; the unit
    # channels of G1 = -q and F2 = p are structural and stay
    assert np.allclose(np.array(sys.diffusion[0](0, Q, P)), 0.0)
    assert np.allclose(np.array(sys.diffusion[3](0, Q, P)), 0.0)
    assert np.allclose(np.array(sys.diffusion[1](0, Q, P))[1], 1.0)
    assert np.allclose(np.array(sys.diffusion[2](0, Q, P))[0], 1.0)


def test_u_field_forms():
    uq, up = u_field([p], [-q], 1.0, "corollary")
    assert uq.allclose(Poly2()) and up.allclose(-p)
    u0q, u0p = u_field([p], [-q], 1.0, "particular")
    assert u0q.allclose(-0.5 * q) and u0p.allclose(-0.5 * p)
    assert (u0q.dq() + u0p.dp()).allclose(Poly2.const(-1.0))
    zq, zp = u_field([Poly2()], [Poly2()], 3.0)
    assert zq.is_zero and zp.is_zero
    with pytest.raises(ValueError):
        u_field([p], [q], 1.0, "other")


def test_residuals_examples(reference_model):
    dil, _ = build_wiener_dilation(reference_model)
    r0, rv = residuals_eq0_eqv(dil.F, dissipator_poly(reference_model), GRID, dil.H_correction)
    assert r0 < 1e-10 and rv < 1e-10
    r0, _ = residuals_eq0_eqv([q * p], 0.0, GRID)
    assert r0 == pytest.approx(2.0)
    box = np.meshgrid(np.linspace(-3, 3, 13), np.linspace(-1, 1, 9), indexing="ij")
    r0, _ = residuals_eq0_eqv([q * p], 0.0, box)
    assert r0 == pytest.approx(3.0)  # eq:0 left side of F = qp is q
    assert residuals_eq0_eqv([Poly2()], 0.0, GRID) == (0.0, 0.0)


def test_xi_condition_examples():
    grid = np.meshgrid(np.linspace(-2, 2, 21), np.linspace(0.5, 2, 21), indexing="ij")
    res = xi_condition(q * q / 2 + 0.1 * p * p, grid)
    assert not res.ok and res.max_variation > 1.0
    lam, mu = 0.7, 1.3
    F = (lambda Q, P: lam * np.exp(lam * Q + mu * P), lambda Q, P: mu * np.exp(lam * Q + mu * P))
    res = xi_condition(F, grid)
    assert res.ok and np.allclose(res.xi, lam / mu)
    assert res.fit.constant_value() == pytest.approx(lam / mu)
    with pytest.raises(DilationError):
        xi_condition(q * q, grid)


def test_hessian_dissipation_examples(reference_model):
    dil, _ = build_wiener_dilation(reference_model)
    assert np.allclose(hessian_dissipation(dil.F, *GRID), 0.5)
    assert hessian_dissipation([(q * q + p * p) / 2], 0.3, 0.1) == pytest.approx(1.0)
    assert hessian_dissipation([q * p], 0.3, 0.1) == pytest.approx(-1.0)


def test_residual_report_json(reference_model, tmp_path):
    rep = residual_report(reference_model)
    json.dumps(rep)
    assert max(rep["wiener"].values()) < 1e-12
    assert max(rep["symplectic"].values()) < 1e-12


_pos = st.floats(0.1, 3.0)


@st.composite
def series_models(draw):
    L0 = draw(_pos)
    r = draw(st.lists(st.floats(0, 1), min_size=1, max_size=3))
    m0, m2 = draw(st.floats(0, 1)), draw(st.floats(0, 1))
    v = [0.0, draw(_pos), 0.0, draw(st.floats(0, 0.3))]
    R = SF.poly([r[0], 0, r[1] if len(r) > 1 else 0.0])
    M = SF.poly([m0, 0, m2])
    drive = SF.const(draw(st.floats(-1, 1)), (-np.inf, np.inf))
    return PhaseSpaceModel(kinetic_from_inductance(SF.const(L0)), capacitor=SF.poly(v),
                           resistance=R, memristance=M, drive=drive)


@given(series_models(), _pos, _pos)
def test_wiener_drift_matches_circuit(model, c, ell):
    dil, sys = build_wiener_dilation(model, c, ell)
    assert check_dilation_drift(sys, model, GRID) < 1e-10
    vq, vp = itov_drift(dil.H, dil.F)
    Q, P = GRID
    comp = compact_drift(dil.H, dil.F, Q, P)
    assert np.allclose(comp, np.array([vq(Q, P), vp(Q, P)]), atol=1e-12, rtol=1e-12)
    # Itô drift without forcing equals the componentwise formula
    v = np.array(sys.drift(0.0, Q, P)) - np.array([0 * Q, 0 * Q + model.drive(0.0)])
    assert np.allclose(v, np.array([vq(Q, P), vp(Q, P)]), atol=1e-10)


@given(series_models(), _pos, _pos)
def test_wiener_covariation_identity(model, c, ell):
    dil, sys = build_wiener_dilation(model, c, ell)
    Q, P = GRID
    cols = [np.array(s(0, Q, P)) for s in sys.diffusion]
    rate = sum(col[0] * col[1] for col in cols)
    W1, G1 = dil.W.derivative()(P), dil.G.derivative()(Q)
    assert np.allclose(rate, -(Q * W1 + P * G1), atol=1e-10)
    assert np.allclose(rate, covariation(dil.F)(Q, P), atol=1e-10)
    assert np.allclose(hessian_dissipation(dil.F, Q, P), dissipation(model, Q, P), atol=1e-10)


@given(series_models(), _pos)
def test_symplectic_identities(model, gamma):
    dil, sys = build_symplectic_dilation(model, gamma)
    Q, P = GRID
    g = dissipation(model, Q, P)
    assert np.allclose(dil.dissipation()(Q, P), g, atol=1e-12)
    div = (dil.u[0].dq() + dil.u[1].dp())(Q, P)
    assert np.allclose(div, -g, atol=1e-12)
    assert np.allclose(pair_dissipation(dil.F, dil.G, gamma)(Q, P), g, atol=1e-12)
    for form in ("particular", "corollary"):
        uq, up = u_field(dil.F, dil.G, gamma, form)
        assert np.allclose((uq.dq() + up.dp())(Q, P), -g, atol=1e-12)
    assert check_dilation_drift(sys, model, GRID) < 1e-10
