"""Fixed-step SDE integration for two-dimensional phase-space systems.

States are arrays of shape (2, n_paths) holding (q, p); all schemes are
vectorized over paths.  Itô systems are stepped by Euler-Maruyama,
Stratonovich systems by the stochastic Heun predictor-corrector.  Both
steppers have ``*_linearized`` twins returning the exact derivative of
the discrete step map, used by the tangent-flow certificates.
"""
from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .functions import Poly2, ScalarFunction
from .noise import ChannelSpec, CounterNoise

FD_STEP = 1e-6


class IntegrationError(RuntimeError):
    def __init__(self, message, step=None, paths=None):
        self.step = step
        self.paths = paths
        where = []
        if step is not None:
            where.append(f"step {step}")
        if paths is not None:
            where.append(f"paths {list(paths)[:5]}")
        super().__init__(message + (f" at {', '.join(where)}" if where else ""))


# vector fields -----------------------------------------------------------

class VectorField:
    """(f^q, f^p)(t, q, p) with Jacobian jac[i, j] = d f_i / d x_j."""

    def __call__(self, t, q, p):
        raise NotImplementedError

    def jacobian(self, t, q, p) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        hq = FD_STEP * np.maximum(1.0, np.abs(q))
        hp = FD_STEP * np.maximum(1.0, np.abs(p))
        fq_plus = np.array(self(t, q + hq, p))
        fq_minus = np.array(self(t, q - hq, p))
        fp_plus = np.array(self(t, q, p + hp))
        fp_minus = np.array(self(t, q, p - hp))
        dq = (fq_plus - fq_minus) / (2 * hq)
        dp = (fp_plus - fp_minus) / (2 * hp)
        return np.stack([dq, dp], axis=1)

    @property
    def time_dependent(self) -> bool:
        return True


class FunctionField(VectorField):
    """Field from a callable; Jacobian by central differences."""

    def __init__(self, func, time_dependent: bool = True):
        self.func = func
        self._td = time_dependent

    def __call__(self, t, q, p):
        fq, fp = self.func(t, q, p)
        return np.broadcast_to(fq, np.shape(q)) * 1.0, np.broadcast_to(fp, np.shape(p)) * 1.0

    @property
    def time_dependent(self) -> bool:
        return self._td


class PolyField(VectorField):
    """Polynomial field, plus an optional time forcing e(t) on the p component."""

    def __init__(self, fq: Poly2, fp: Poly2, forcing: ScalarFunction | None = None):
        self.fq = fq
        self.fp = fp
        self.forcing = None if forcing is None or forcing.is_zero else forcing
        self._jac = ((fq.dq(), fq.dp()), (fp.dq(), fp.dp()))

    @classmethod
    def hamiltonian(cls, h: Poly2, forcing: ScalarFunction | None = None) -> "PolyField":
        """{., h} (+ forcing): components (dh/dp, -dh/dq + e(t))."""
        return cls(h.dp(), -h.dq(), forcing)

    def __call__(self, t, q, p):
        fq = self.fq(q, p)
        fp = self.fp(q, p)
        if self.forcing is not None:
            fp = fp + self.forcing(t)
        return fq, fp

    def jacobian(self, t, q, p) -> np.ndarray:
        shape = np.shape(q)
        out = np.empty((2, 2) + shape)
        for i in range(2):
            for j in range(2):
                out[i, j] = self._jac[i][j](q, p)
        return out

    @property
    def time_dependent(self) -> bool:
        return self.forcing is not None

    def divergence(self) -> Poly2:
        return self.fq.dq() + self.fp.dp()

    def __add__(self, other: "PolyField") -> "PolyField":
        if self.forcing is not None and other.forcing is not None:
            forcing = self.forcing + other.forcing
        else:
            forcing = self.forcing or other.forcing
        return PolyField(self.fq + other.fq, self.fp + other.fp, forcing)

    def scaled(self, a: float) -> "PolyField":
        return PolyField(self.fq * a, self.fp * a,
                         None if self.forcing is None else self.forcing.scale(a))


def _directional(sigma: PolyField) -> tuple[Poly2, Poly2]:
    """(sigma . grad) sigma."""
    s_q, s_p = sigma.fq, sigma.fp
    return (s_q * s_q.dq() + s_p * s_q.dp(), s_q * s_p.dq() + s_p * s_p.dp())


def ito_correction(sigmas) -> VectorField:
    """1/2 sum_alpha (sigma_alpha . grad) sigma_alpha."""
    if all(isinstance(s, PolyField) for s in sigmas):
        cq, cp = Poly2(), Poly2()
        for s in sigmas:
            dq, dp = _directional(s)
            cq = cq + dq
            cp = cp + dp
        return PolyField(cq * 0.5, cp * 0.5)

    def corr(t, q, p):
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        out = np.zeros((2,) + q.shape)
        for s in sigmas:
            vec = np.array(s(t, q, p))
            jac = s.jacobian(t, q, p)
            out += np.einsum("ij...,j...->i...", jac, vec)
        return 0.5 * out[0], 0.5 * out[1]

    return FunctionField(corr, time_dependent=False)


def strat_to_ito(w: VectorField, sigmas) -> VectorField:
    """Itô drift v = w + 1/2 sum (sigma . grad) sigma."""
    corr = ito_correction(sigmas)
    if isinstance(w, PolyField) and isinstance(corr, PolyField):
        return w + corr

    def v(t, q, p):
        a = w(t, q, p)
        b = corr(t, q, p)
        return a[0] + b[0], a[1] + b[1]

    return FunctionField(v)


def ito_to_strat(v: VectorField, sigmas) -> VectorField:
    corr = ito_correction(sigmas)
    if isinstance(v, PolyField) and isinstance(corr, PolyField):
        return v + corr.scaled(-1.0)

    def w(t, q, p):
        a = v(t, q, p)
        b = corr(t, q, p)
        return a[0] - b[0], a[1] - b[1]

    return FunctionField(w)


@dataclass(frozen=True, eq=False)
class SdeSystem:
    """Itô drift, Stratonovich drift and per-channel diffusion fields."""

    drift: VectorField
    strat_drift: VectorField
    diffusion: tuple[VectorField, ...]
    channels: ChannelSpec

    def __post_init__(self):
        if len(self.diffusion) != self.channels.n:
            raise ValueError("one diffusion field per channel required")

    @classmethod
    def from_stratonovich(cls, w, sigmas, channels=None) -> "SdeSystem":
        sigmas = tuple(sigmas)
        channels = channels or ChannelSpec.plain(len(sigmas))
        return cls(strat_to_ito(w, sigmas), w, sigmas, channels)

    @classmethod
    def from_ito(cls, v, sigmas, channels=None) -> "SdeSystem":
        sigmas = tuple(sigmas)
        channels = channels or ChannelSpec.plain(len(sigmas))
        return cls(v, ito_to_strat(v, sigmas), sigmas, channels)

    @property
    def n_channels(self) -> int:
        return self.channels.n


# steppers ----------------------------------------------------------------

def _check(x, step):
    if not np.all(np.isfinite(x)):
        bad = np.where(~np.all(np.isfinite(x), axis=0))[0]
        raise IntegrationError("non-finite state", step, bad)


def _noise_term(system, x, dW):
    out = np.zeros_like(x)
    for a, sig in enumerate(system.diffusion):
        sq, sp = sig(0.0, x[0], x[1])
        out[0] += sq * dW[a]
        out[1] += sp * dW[a]
    return out


def euler_maruyama_step(system: SdeSystem, x, t, dW, dt, step=None):
    """x' = x + v dt + sum sigma_alpha dW_alpha."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    vq, vp = system.drift(t, x[0], x[1])
    out = x + np.array([vq, vp]) * dt + _noise_term(system, x, np.asarray(dW))
    _check(out, step)
    return out


def heun_stratonovich_step(system: SdeSystem, x, t, dW, dt, step=None):
    """Predictor with (w, sigma) at x, corrector averaging both ends."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    dW = np.asarray(dW)
    w0 = np.array(system.strat_drift(t, x[0], x[1]))
    n0 = _noise_term(system, x, dW)
    pred = x + w0 * dt + n0
    w1 = np.array(system.strat_drift(t + dt, pred[0], pred[1]))
    n1 = _noise_term(system, pred, dW)
    out = x + 0.5 * (w0 + w1) * dt + 0.5 * (n0 + n1)
    _check(out, step)
    return out


def _mv(jac, vec):
    return np.einsum("ij...,j...->i...", jac, vec)


def _mm(a, b):
    return np.einsum("ij...,jk...->ik...", a, b)


def euler_maruyama_linearized(system: SdeSystem, x, t, dW, dt):
    """Step plus d x'/d x (2, 2, n) and d x'/d dW_alpha (n_ch, 2, n)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[1:]
    M = np.zeros((2, 2) + n)
    M[0, 0] = 1.0
    M[1, 1] = 1.0
    M += system.drift.jacobian(t, x[0], x[1]) * dt
    sens = np.empty((system.n_channels, 2) + n)
    out = x + np.array(system.drift(t, x[0], x[1])) * dt
    for a, sig in enumerate(system.diffusion):
        s = np.array(sig(0.0, x[0], x[1]))
        sens[a] = s
        out += s * dW[a]
        M += sig.jacobian(0.0, x[0], x[1]) * dW[a]
    return out, M, sens


def heun_linearized(system: SdeSystem, x, t, dW, dt):
    x = np.asarray(x, dtype=float)
    n = x.shape[1:]
    eye = np.zeros((2, 2) + n)
    eye[0, 0] = 1.0
    eye[1, 1] = 1.0
    sig0 = [np.array(s(0.0, x[0], x[1])) for s in system.diffusion]
    jac0 = [s.jacobian(0.0, x[0], x[1]) for s in system.diffusion]
    w0 = np.array(system.strat_drift(t, x[0], x[1]))
    Dw0 = system.strat_drift.jacobian(t, x[0], x[1])
    pred = x + w0 * dt
    A = eye + Dw0 * dt
    for a in range(system.n_channels):
        pred = pred + sig0[a] * dW[a]
        A = A + jac0[a] * dW[a]
    sig1 = [np.array(s(0.0, pred[0], pred[1])) for s in system.diffusion]
    jac1 = [s.jacobian(0.0, pred[0], pred[1]) for s in system.diffusion]
    w1 = np.array(system.strat_drift(t + dt, pred[0], pred[1]))
    Dw1 = system.strat_drift.jacobian(t + dt, pred[0], pred[1])

    out = x + 0.5 * (w0 + w1) * dt
    M = eye + 0.5 * (Dw0 + _mm(Dw1, A)) * dt
    # B = d(corrector)/d(pred) contribution applied to d(pred)/d dW_beta
    B = 0.5 * Dw1 * dt
    for a in range(system.n_channels):
        out = out + 0.5 * (sig0[a] + sig1[a]) * dW[a]
        M = M + 0.5 * (jac0[a] + _mm(jac1[a], A)) * dW[a]
        B = B + 0.5 * jac1[a] * dW[a]
    sens = np.empty((system.n_channels, 2) + n)
    for b in range(system.n_channels):
        sens[b] = 0.5 * (sig0[b] + sig1[b]) + _mv(B, sig0[b])
    return out, M, sens


STEPPERS = {"euler": euler_maruyama_step, "heun": heun_stratonovich_step}
LINEARIZED = {"euler": euler_maruyama_linearized, "heun": heun_linearized}


# ensembles ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TrajectoryStore:
    times: np.ndarray          # (n_save,)
    states: np.ndarray         # (n_paths, n_save, 2)
    path_indices: np.ndarray   # (n_paths,)
    seed: int
    dt: float
    scheme: str

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    def to_csv(self, path, with_path: bool = True) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "q", "p"] + (["path"] if with_path else []))
            for j, idx in enumerate(self.path_indices):
                for k, t in enumerate(self.times):
                    row = [repr(float(t)), repr(float(self.states[j, k, 0])),
                           repr(float(self.states[j, k, 1]))]
                    if with_path:
                        row.append(int(idx))
                    w.writerow(row)


def _n_steps(T, dt):
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    return n


def _simulate_chunk(system, x0, t0, dt, n_steps, noise, paths, scheme, save_stride):
    step = STEPPERS[scheme]
    x = np.array(x0, dtype=float)
    saves = [x.T.copy()]
    # generate noise in blocks to bound memory
    block = max(1, min(n_steps, 2_000_000 // max(1, len(paths) * noise.channels.n)))
    k = 0
    while k < n_steps:
        m = min(block, n_steps - k)
        dW = noise.block(paths, m, start_step=k)
        for j in range(m):
            try:
                x = step(system, x, t0 + (k + j) * dt, dW[j], dt, step=k + j)
            except IntegrationError as exc:
                bad = [paths[i] for i in (exc.paths if exc.paths is not None else [])]
                raise IntegrationError("non-finite state", k + j, bad) from exc
            if (k + j + 1) % save_stride == 0:
                saves.append(x.T.copy())
        k += m
    return np.stack(saves, axis=1)


def simulate_ensemble(system: SdeSystem, x0, T: float, dt: float, n_paths: int,
                      seed: int, scheme: str = "euler", save_stride: int = 1,
                      threads: int | None = None, chunk_size: int = 4096,
                      t0: float = 0.0, path_offset: int = 0) -> TrajectoryStore:
    """Integrate ``n_paths`` independent paths; output depends only on the seed.

    ``x0`` is a single state (2,) or per-path states (n_paths, 2).
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if scheme not in STEPPERS:
        raise ValueError(f"unknown scheme {scheme!r}")
    n_steps = _n_steps(T, dt)
    x0 = np.asarray(x0, dtype=float)
    x0 = np.broadcast_to(x0, (n_paths, 2)) if x0.ndim == 1 else x0
    if x0.shape != (n_paths, 2):
        raise ValueError("x0 must have shape (2,) or (n_paths, 2)")
    noise = CounterNoise(seed, system.channels, dt)
    indices = np.arange(path_offset, path_offset + n_paths)
    chunks = [indices[i:i + chunk_size] for i in range(0, n_paths, chunk_size)]

    def work(idx):
        local = idx - path_offset
        return _simulate_chunk(system, x0[local].T, t0, dt, n_steps, noise,
                               [int(i) for i in idx], scheme, save_stride)

    threads = threads or os.cpu_count() or 1
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    states = np.concatenate(parts, axis=0)
    times = t0 + dt * np.arange(0, n_steps + 1, save_stride)
    return TrajectoryStore(times, states, indices, seed, dt, scheme)


def integrate_path(system: SdeSystem, x0, increments: np.ndarray, dt: float,
                   scheme: str = "heun", t0: float = 0.0) -> np.ndarray:
    """Integrate on given increments (n_steps, n_ch[, n_paths]); returns all states."""
    step = STEPPERS[scheme]
    inc = np.asarray(increments, dtype=float)
    squeeze = inc.ndim == 2
    if squeeze:
        inc = inc[:, :, None]
    x = np.asarray(x0, dtype=float).reshape(2, -1) * np.ones((1, inc.shape[2]))
    out = np.empty((inc.shape[0] + 1, 2, inc.shape[2]))
    out[0] = x
    for k in range(inc.shape[0]):
        x = step(system, x, t0 + k * dt, inc[k], dt, step=k)
        out[k + 1] = x
    return out[:, :, 0] if squeeze else out
