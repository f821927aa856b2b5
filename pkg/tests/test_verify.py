import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from circuit_dilation.circuit import PhaseSpaceModel, dissipation, kinetic_from_inductance
from circuit_dilation.dilation import (build_symplectic_dilation, build_wiener_dilation,
                                       circuit_drift, lc_example_system)
from circuit_dilation.functions import Poly2, ScalarFunction as SF
from circuit_dilation.noise import ChannelSpec, CounterNoise
from circuit_dilation.sde import PolyField, SdeSystem, simulate_ensemble
from circuit_dilation.verify import (VerificationReport, bracket_series_csv, empirical_covariation,
                                     empirical_drift, extended_bracket,
                                     extended_bracket_explicit, liouville_defect, plain_bracket,
                                     propagate_tangent)

q, p = Poly2.q(), Poly2.p()
NONE = PolyField(Poly2(), Poly2())


def _increments(system, dt, n_steps, paths, seed=0):
    return CounterNoise(seed, system.channels, dt).block(range(paths), n_steps)


def test_tangent_of_harmonic_flow_is_rotation():
    sys = SdeSystem.from_stratonovich(PolyField.hamiltonian((q * q + p * p) / 2), [NONE])
    dt, n = 1e-3, 1000
    state = propagate_tangent(sys, np.zeros((n, 1, 1)), [1.0, 0.0], dt)
    t = n * dt
    rot = np.array([[np.cos(t), np.sin(t)], [-np.sin(t), np.cos(t)]])
    assert np.allclose(state.J[:, :, 0], rot, atol=1e-6)
    assert plain_bracket(state)[0] == pytest.approx(1.0, abs=1e-9)


def test_sensitivities_match_transition_matrix():
    A = np.array([[0.0, 1.0], [-1.0, -0.5]])
    sigma = np.array([0.3, 0.7])
    sys = SdeSystem.from_ito(PolyField(p, -q - 0.5 * p),
                             [PolyField(Poly2.const(0.3), Poly2.const(0.7))])
    dt, n = 1e-3, 500
    state = propagate_tangent(sys, _increments(sys, dt, n, 1), [0.2, 0.1], dt,
                              keep_history=True)
    S = state.sensitivities()
    for k in (0, 100, 499):
        oracle = expm(A * (n - k) * dt) @ sigma
        assert np.allclose(S[k, 0, :, 0], oracle, atol=2e-3)
    assert np.allclose(state.J[:, :, 0], expm(A * n * dt), atol=1e-6)


def test_one_step_euler_jacobian():
    sys = SdeSystem.from_ito(PolyField(p * q, -q * q), [PolyField(q * p, p * p * 0.5)])
    x0, dW, dt = np.array([0.4, -0.3]), 0.05, 0.01
    state = propagate_tangent(sys, np.array([[[dW]]]), x0, dt, scheme="euler")
    Dv = np.array([[x0[1], x0[0]], [-2 * x0[0], 0.0]])
    Ds = np.array([[x0[1], x0[0]], [0.0, x0[1]]])
    assert np.allclose(state.J[:, :, 0], np.eye(2) + Dv * dt + Ds * dW)


def test_wiener_plain_bracket_converges(reference_model):
    _, sys = build_wiener_dilation(reference_model)
    defects = []
    for dt in (1e-3, 5e-4, 2.5e-4):
        n = int(round(1.0 / dt))
        inc = CounterNoise(3, sys.channels, 2.5e-4).block(range(20), 4000)
        inc = inc.reshape(n, -1, 2, 20).sum(axis=1)
        state = propagate_tangent(sys, inc, [1.0, 0.0], dt)
        defects.append(np.median(np.abs(plain_bracket(state) - 1)))
    assert defects[0] > defects[1] > defects[2]
    assert defects[2] < 5e-3


def test_symplectic_constants_plain_and_extended(reference_model):
    _, sys = build_symplectic_dilation(reference_model, gamma=1.0)
    dt = 1e-3
    state = propagate_tangent(sys, _increments(sys, dt, 1000, 10), [1.0, 0.0], dt,
                              record_every=100, keep_history=True)
    assert np.allclose(plain_bracket(state), np.exp(-0.5), atol=1e-4)
    assert np.allclose(extended_bracket(state), 1.0, atol=1e-2)
    assert np.allclose(extended_bracket_explicit(state), extended_bracket(state), atol=1e-10)


def test_printed_variant_is_not_canonical(reference_model):
    model = PhaseSpaceModel(reference_model.kinetic, capacitor=reference_model.capacitor,
                            resistance=reference_model.resistance,
                            memristance=SF.poly([0.3, 0.2], domain=(-1.5, 1000)))
    _, good = build_symplectic_dilation(model)
    _, bad = build_symplectic_dilation(model, variant="printed")
    dt = 1e-3
    inc = _increments(good, dt, 1000, 5)
    e_good = extended_bracket(propagate_tangent(good, inc, [1.0, 0.0], dt))
    e_bad = extended_bracket(propagate_tangent(bad, inc, [1.0, 0.0], dt))
    assert np.all(np.abs(e_good - 1) < 1e-2)
    assert np.all(np.abs(e_bad - 1) > 0.1)


@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0])
def test_lc_example_extended_bracket_closed_form(gamma):
    sys = lc_example_system(1.0, 1.0, gamma)
    dt, n = 1e-3, 1000
    state = propagate_tangent(sys, _increments(sys, dt, n, 3), [0.0, 1.0], dt)
    # linear flow: det J = e^{-gamma t}, noise term gamma int_0^t e^{-gamma s} ds
    assert np.allclose(plain_bracket(state), np.exp(-gamma), atol=1e-5)
    assert np.allclose(extended_bracket(state), 1.0, atol=5e-4)


def test_zero_diffusion_extended_equals_plain():
    w = PolyField.hamiltonian((q * q + p * p) / 2) + PolyField(Poly2(), -0.3 * p)
    sys = SdeSystem.from_stratonovich(w, [NONE, NONE], ChannelSpec(("Q", "P"), ((0, 1),), 1.0))
    dt = 1e-3
    state = propagate_tangent(sys, _increments(sys, dt, 200, 2), [1.0, 1.0], dt)
    assert np.allclose(extended_bracket(state), plain_bracket(state))


def test_extended_bracket_requires_pairs(reference_model):
    _, sys = build_wiener_dilation(reference_model)
    state = propagate_tangent(sys, _increments(sys, 1e-2, 5, 1), [1.0, 0.0], 1e-2)
    with pytest.raises(ValueError, match="pairs"):
        extended_bracket(state)


def test_non_finite_tangent_raises():
    sys = SdeSystem.from_ito(PolyField(Poly2(), p * p * p * 100.0), [NONE])
    with pytest.raises(FloatingPointError), np.errstate(all="ignore"):
        propagate_tangent(sys, np.zeros((200, 1)), [0.0, 5.0], 0.1, scheme="euler")


@settings(max_examples=15)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 0.5), st.floats(-1, 1))
def test_liouville_formula_along_nonlinear_flow(r0, r2, m2, q0):
    model = PhaseSpaceModel(kinetic_from_inductance(SF.const(1.0)), capacitor=SF.poly([0, 1]),
                            resistance=SF.poly([r0, 0, r2]), memristance=SF.poly([0.1, 0, m2]))
    sys = SdeSystem.from_stratonovich(circuit_drift(model), [NONE])
    defect = liouville_defect(sys, lambda a, b: dissipation(model, a, b), [q0, 1.0], 1.0, 1e-3)
    assert defect < 1e-5


def test_empirical_drift_deterministic_and_pure_noise():
    det = SdeSystem.from_stratonovich(PolyField(p, -q - 0.5 * p), [NONE])
    rng = np.random.default_rng(0)
    x0 = rng.normal(size=(5000, 2))
    store = simulate_ensemble(det, x0, 1e-4, 1e-4, 5000, seed=0, scheme="heun")
    field = empirical_drift(store, bins=10, min_count=5)
    res = field.compare(lambda a, b: np.array([b, -a - 0.5 * b]))
    assert res["fraction_within"] == 1.0
    exact = field.bin_average(lambda a, b: np.array([b, -a - 0.5 * b]))
    ok = field.valid
    assert np.allclose(field.mean[:, ok], exact[:, ok], atol=1e-3)

    noise = SdeSystem.from_ito(NONE, [PolyField(Poly2.const(1.0), Poly2()),
                                      PolyField(Poly2(), Poly2.const(1.0))])
    store = simulate_ensemble(noise, x0, 1e-2, 1e-2, 5000, seed=1)
    res = empirical_drift(store, bins=5).compare(lambda a, b: np.zeros((2, a.size)))
    assert res["fraction_within"] >= 0.9
    cov = empirical_covariation(store, bins=5).compare(lambda a, b: np.zeros(a.size))
    assert cov["fraction_within"] >= 0.9
    zero = empirical_covariation(simulate_ensemble(det, x0, 1e-4, 1e-4, 5000, seed=0), bins=5)
    assert np.allclose(zero.mean[:, zero.valid], 0.0, atol=2e-3)  # O(h) = v^q v^p h


def test_report_and_csv(tmp_path, reference_model):
    _, sys = build_symplectic_dilation(reference_model)
    state = propagate_tangent(sys, _increments(sys, 1e-2, 10, 2), [1.0, 0.0], 1e-2,
                              record_every=5)
    bracket_series_csv(state, tmp_path / "b.csv")
    rows = (tmp_path / "b.csv").read_text().splitlines()
    assert rows[0] == "t,path,plain,extended" and len(rows) == 1 + 3 * 2
    rep = VerificationReport()
    rep.add("bracket", 1.0, np.float64(0.999), 1e-2, True)
    rep.add("other", 0.0, np.array([1.0]), 0.1, False)
    data = json.loads(rep.to_json(tmp_path / "r.json"))
    assert data["passed"] is False and data["checks"][0]["estimate"] == 0.999
