import numpy as np
import pytest
from hypothesis import given, strategies as st

from circuit_dilation.functions import Poly2
from circuit_dilation.noise import ChannelSpec, CounterNoise, standard_normals
from circuit_dilation.sde import (FunctionField, IntegrationError, PolyField, SdeSystem,
                                  euler_maruyama_linearized, heun_linearized, integrate_path,
                                  ito_to_strat, simulate_ensemble, strat_to_ito)

Q, P = Poly2.q(), Poly2.p()
ZERO = PolyField(Poly2(), Poly2())


def _multiplicative(c=0.5):
    """dp = c p o dW, dq = 0."""
    return SdeSystem.from_stratonovich(ZERO, [PolyField(Poly2(), P * c)])


def _ou(theta=1.0, s=0.5):
    """dp = -theta p dt + s dW (Itô = Stratonovich)."""
    return SdeSystem.from_ito(PolyField(Poly2(), P * -theta), [PolyField(Poly2(), Poly2.const(s))])


def test_increment_addressable_by_counter():
    noise = CounterNoise(7, ChannelSpec.plain(3), 0.01)
    block = noise.block([4, 9], 50, start_step=10)
    assert noise.increment(9, 2, 33) == block[23, 2, 1]
    assert np.array_equal(noise.path(4, 50, 10).increments, block[:, :, 0])
    z = standard_normals(1, 0, 10)
    assert np.array_equal(standard_normals(1, 0, 4, start=6), z[6:])


def test_increment_statistics():
    z = standard_normals(3, 0, 200_000)
    assert abs(z.mean()) < 0.01 and abs(z.var() - 1) < 0.01


def test_ensemble_independent_of_chunking_and_threads():
    sys = _ou()
    a = simulate_ensemble(sys, [0.0, 1.0], 0.5, 0.01, 37, seed=5, chunk_size=4, threads=1)
    b = simulate_ensemble(sys, [0.0, 1.0], 0.5, 0.01, 37, seed=5, chunk_size=16, threads=3)
    c = simulate_ensemble(sys, [0.0, 1.0], 0.5, 0.01, 10, seed=5, path_offset=20)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.states[20:30], c.states)


def test_integrate_path_matches_ensemble():
    sys = _multiplicative()
    store = simulate_ensemble(sys, [0.0, 1.0], 0.2, 0.01, 3, seed=2, scheme="heun")
    inc = CounterNoise(2, sys.channels, 0.01).block([0, 1, 2], 20)
    out = integrate_path(sys, [0.0, 1.0], inc, 0.01, "heun")
    assert np.allclose(out[-1].T, store.states[:, -1])


def test_strat_to_ito_multiplicative_correction():
    sys = _multiplicative(0.5)
    q, p = np.array([0.3]), np.array([2.0])
    assert np.allclose(np.ravel(sys.drift(0, q, p)), (0.0, 0.5 * 0.25 * 2.0))


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-1, 1), st.floats(-1, 1))
def test_ito_strat_round_trip(a, b, q, p):
    w = PolyField(Q * a + P * P, Q * P * b)
    sig = [PolyField(Q * 0.3, P * a), PolyField(Q * Q * b, Poly2.const(1.0))]
    back = ito_to_strat(strat_to_ito(w, sig), sig)
    assert np.allclose(back(0, q, p), w(0, q, p), atol=1e-12)
    generic = [FunctionField(lambda t, q, p, s=s: s(t, q, p)) for s in sig]
    num = strat_to_ito(w, generic)(0, np.array([q]), np.array([p]))
    assert np.allclose(np.ravel(num), np.ravel(strat_to_ito(w, sig)(0, q, p)), atol=1e-6)


def test_heun_strong_convergence_to_exact_stratonovich():
    c, T = 0.5, 1.0
    sys = _multiplicative(c)
    errs = []
    for n in (50, 200, 800):
        dt = T / n
        inc = CounterNoise(11, sys.channels, dt).block(range(200), n)
        out = integrate_path(sys, [0.0, 1.0], inc, dt, "heun")
        exact = np.exp(c * inc[:, 0, :].sum(axis=0))
        errs.append(np.sqrt(np.mean((out[-1, 1] - exact) ** 2)))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3


def test_euler_maruyama_weak_mean_ou():
    theta, T = 1.0, 1.0
    store = simulate_ensemble(_ou(theta), [0.0, 1.0], T, 0.01, 4000, seed=3)
    p = store.states[:, -1, 1]
    se = p.std() / np.sqrt(p.size)
    assert abs(p.mean() - np.exp(-theta * T)) < 4 * se + 0.01
    var_exact = 0.25 * (1 - np.exp(-2 * theta * T)) / (2 * theta)
    assert abs(p.var() - var_exact) < 0.1 * var_exact


@pytest.mark.parametrize("stepper,scheme", [(euler_maruyama_linearized, "euler"),
                                            (heun_linearized, "heun")])
def test_linearized_step_matches_finite_differences(stepper, scheme):
    sys = SdeSystem.from_stratonovich(PolyField(P, -Q - P * 0.2),
                                      [PolyField(Q * 0.1, P * P * 0.3), PolyField(Poly2(), Q)])
    x = np.array([[0.7], [-0.4]])
    dW = np.array([[0.05], [-0.03]])
    dt = 0.01
    out, M, sens = stepper(sys, x, 0.0, dW, dt)
    step = {"euler": lambda x, d: stepper(sys, x, 0.0, d, dt)[0],
            "heun": lambda x, d: stepper(sys, x, 0.0, d, dt)[0]}[scheme]
    h = 1e-7
    for j in range(2):
        e = np.zeros((2, 1))
        e[j] = h
        col = (step(x + e, dW) - step(x - e, dW)) / (2 * h)
        assert np.allclose(M[:, j], col, atol=1e-7)
    for a in range(2):
        e = np.zeros((2, 1))
        e[a] = h
        col = (step(x, dW + e) - step(x, dW - e)) / (2 * h)
        assert np.allclose(sens[a], col, atol=1e-7)


def test_divergence_raises_integration_error():
    sys = SdeSystem.from_ito(PolyField(Poly2(), P * P * P * 50.0), [PolyField(Poly2(), Poly2())])
    with pytest.raises(IntegrationError, match="step"), np.errstate(all="ignore"):
        simulate_ensemble(sys, [0.0, 10.0], 1.0, 0.1, 2, seed=0)


def test_non_multiple_horizon_rejected():
    with pytest.raises(ValueError):
        simulate_ensemble(_ou(), [0, 1], 1.0, 0.3, 2, seed=0)


def test_trajectory_csv(tmp_path):
    store = simulate_ensemble(_ou(), [0.0, 1.0], 0.1, 0.01, 2, seed=0, save_stride=5)
    path = tmp_path / "traj.csv"
    store.to_csv(path)
    rows = path.read_text().splitlines()
    assert rows[0] == "t,q,p,path"
    assert len(rows) == 1 + 2 * 3
