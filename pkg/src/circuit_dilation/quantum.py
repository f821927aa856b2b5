"""Truncated Fock-space realization of the quantum dilation.

Operators live on levels 0..N-1.  Ladder truncation corrupts the top few
levels of any product, so operator identities are asserted only after
projecting onto the interior levels 0..N-1-m.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .circuit import PhaseSpaceModel
from .dilation import DilationError, build_symplectic_dilation
from .functions import Poly2, ScalarFunction

HERMITIAN_TOL = 1e-12


class TruncationError(RuntimeError):
    pass


def ladder(N: int) -> np.ndarray:
    """Annihilation operator on N levels: a|n> = sqrt(n)|n-1>."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return np.diag(np.sqrt(np.arange(1, N, dtype=float)), 1).astype(complex)


def dagger(A: np.ndarray) -> np.ndarray:
    return A.conj().T


def comm(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return A @ B - B @ A


@dataclass(frozen=True, eq=False)
class FockModel:
    N: int
    m: int
    hbar: float
    L0: float
    C0: float
    a: np.ndarray = field(repr=False)
    q: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)

    @property
    def omega0(self) -> float:
        return 1.0 / np.sqrt(self.L0 * self.C0)

    @property
    def adag(self) -> np.ndarray:
        return dagger(self.a)

    @property
    def number(self) -> np.ndarray:
        return self.adag @ self.a

    @property
    def eye(self) -> np.ndarray:
        return np.eye(self.N, dtype=complex)

    @property
    def interior(self) -> int:
        return self.N - self.m

    def project(self, X: np.ndarray) -> np.ndarray:
        k = self.interior
        return X[:k, :k]

    def pnorm(self, X: np.ndarray) -> float:
        """Spectral norm of the interior block."""
        return float(np.linalg.norm(self.project(X), 2))

    def coherent(self, alpha: complex) -> np.ndarray:
        """Truncated, renormalized coherent state vector."""
        n = np.arange(self.N)
        from scipy.special import gammaln
        logamp = -0.5 * abs(alpha) ** 2 - 0.5 * gammaln(n + 1)
        with np.errstate(divide="ignore"):
            psi = np.exp(logamp) * (alpha ** n if alpha != 0 else (n == 0).astype(float))
        psi = psi.astype(complex)
        return psi / np.linalg.norm(psi)


def fock_model(N: int, m: int | None = None, hbar: float = 1.0, L0: float = 1.0,
               C0: float = 1.0) -> FockModel:
    if m is None:
        m = N // 4
    if N < 8:
        raise ValueError("N must be >= 8")
    if not (1 <= m < N / 2):
        raise ValueError("interior margin m must satisfy 1 <= m < N/2")
    if hbar <= 0 or L0 <= 0 or C0 <= 0:
        raise ValueError("hbar, L0, C0 must be positive")
    a = ladder(N)
    ad = dagger(a)
    w0 = 1.0 / np.sqrt(L0 * C0)
    q = np.sqrt(hbar * w0 * C0 / 2) * (a + ad)
    p = 1j * np.sqrt(hbar * w0 * L0 / 2) * (ad - a)
    return FockModel(N, m, hbar, L0, C0, a, q, p)


def operator_function(A: np.ndarray, phi: ScalarFunction) -> np.ndarray:
    """phi(A) for Hermitian A.

    Polynomials are evaluated as matrix polynomials (Horner), which keeps
    truncated-space products consistent with the algebra used elsewhere;
    other functions go through the spectral decomposition.
    """
    A = np.asarray(A)
    if np.linalg.norm(A - dagger(A)) > HERMITIAN_TOL * max(1.0, np.linalg.norm(A)):
        raise ValueError("operator_function needs a Hermitian argument")
    n = A.shape[0]
    if phi.is_polynomial:
        out = np.zeros((n, n), dtype=complex)
        eye = np.eye(n, dtype=complex)
        for c in reversed(phi.coeffs):
            out = out @ A + c * eye
        return out
    w, V = np.linalg.eigh(A)
    return (V * phi(w, check=False)) @ dagger(V)


def _sym(A, B):
    return 0.5 * (A @ B + B @ A)


@dataclass(frozen=True, eq=False)
class QuantumDilation:
    fock: FockModel
    f: ScalarFunction            # 1/2 Psi_R'
    g: ScalarFunction            # g' = M / (2 L0), g(0) = 0
    H0: np.ndarray               # p^2/2L0 + Phi_C(q), drive excluded
    K: np.ndarray
    L: tuple
    drive: ScalarFunction
    model: PhaseSpaceModel = field(repr=False)

    @property
    def H(self) -> np.ndarray:
        return self.H0 + self.K

    def hamiltonian(self, t: float = 0.0) -> np.ndarray:
        e = float(self.drive(t, check=False)) if not self.drive.is_zero else 0.0
        return self.H - e * self.fock.q

    def target_vp(self, t: float = 0.0) -> np.ndarray:
        fk, md = self.fock, self.model
        e = float(self.drive(t, check=False)) if not self.drive.is_zero else 0.0
        return (-operator_function(fk.q, md.capacitor)
                - operator_function(fk.p, md.resistor_voltage)
                - _sym(operator_function(fk.q, md.memristance), fk.p) / fk.L0
                + e * fk.eye)


def build_quantum_dilation(model: PhaseSpaceModel, fock: FockModel) -> QuantumDilation:
    if not model.series or not model.constant_inductance:
        raise DilationError("quantum dilation needs a series model with constant L0")
    if abs(model.kinetic.L0 - fock.L0) > 1e-12:
        raise DilationError("Fock model L0 differs from the circuit inductance")
    psi = model.resistor_voltage
    for fn in (psi, model.memristance, model.capacitor):
        if not fn.is_polynomial:
            raise DilationError("quantum dilation needs polynomial characteristics")
    hbar = fock.hbar
    f = psi.scale(0.5)
    g = model.memristance.scale(1.0 / (2 * fock.L0)).antiderivative()
    q, p = fock.q, fock.p
    fp = operator_function(p, f)
    gq = operator_function(q, g)
    H0 = p @ p / (2 * fock.L0) + operator_function(q, model.potential)
    K = _sym(fp, q) + _sym(p, gq)
    L1 = q + 1j / hbar * fp
    L2 = gq / hbar + 1j * p
    return QuantumDilation(fock, f, g, H0, K, (L1, L2), model.drive, model)


def lindblad_heisenberg(H, L_list, X, hbar: float = 1.0) -> np.ndarray:
    """1/2 sum [L*, X] L + 1/2 sum L* [X, L] + (1/i hbar) [X, H]."""
    H, X = np.asarray(H), np.asarray(X)
    if H.shape != X.shape or any(np.shape(L) != X.shape for L in L_list):
        raise ValueError("operator dimensions disagree")
    out = comm(X, H) / (1j * hbar)
    for L in L_list:
        Ld = dagger(L)
        out = out + 0.5 * comm(Ld, X) @ L + 0.5 * Ld @ comm(X, L)
    return out


def lindblad_adjoint(H, L_list, rho, hbar: float = 1.0) -> np.ndarray:
    """-(i/hbar)[H, rho] + sum (L rho L* - 1/2 {L* L, rho})."""
    out = -1j / hbar * comm(H, rho)
    for L in L_list:
        Ld = dagger(L)
        LdL = Ld @ L
        out = out + L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL)
    return out


def _rel(D, ref, fock) -> float:
    den = fock.pnorm(ref)
    num = fock.pnorm(D)
    return num / den if den > 0 else num


def coherent_defect(dil: QuantumDilation, alpha: float = 3.0, t: float = 0.0) -> dict:
    """||D psi|| / ||X psi|| for the drift defects D in a fixed coherent state.

    With the physical state held fixed, the defect measures how much of the
    state reaches the corrupted top levels, and so falls as N grows.
    """
    fk = dil.fock
    psi = fk.coherent(alpha)
    H = dil.hamiltonian(t)
    Lq = lindblad_heisenberg(H, dil.L, fk.q, fk.hbar)
    Lp = lindblad_heisenberg(H, dil.L, fk.p, fk.hbar)
    Dq = Lq - fk.p / fk.L0
    Dp = Lp - dil.target_vp(t)
    return {"q": float(np.linalg.norm(Dq @ psi) / np.linalg.norm(fk.p @ psi)),
            "p": float(np.linalg.norm(Dp @ psi) / np.linalg.norm(Lp @ psi))}


def verify_thm3(dil: QuantumDilation, t: float = 0.0, tol: float = 1e-10) -> dict:
    """Interior-projected drift and noise-coefficient identities."""
    fk = dil.fock
    hbar = fk.hbar
    q, p = fk.q, fk.p
    H = dil.hamiltonian(t)
    L1, L2 = dil.L
    Lq = lindblad_heisenberg(H, dil.L, q, hbar)
    Lp = lindblad_heisenberg(H, dil.L, p, hbar)
    Dq = Lq - p / fk.L0
    Dp = Lp - dil.target_vp(t)
    fprime = operator_function(p, dil.f.derivative())
    gprime = operator_function(q, dil.g.derivative())
    I = fk.eye
    noise = {
        # dQ1 coefficient of q: -f'(p), through both commutator orders
        "q_dQ1": max(_rel(comm(q, L1) + fprime, fprime, fk),
                     _rel(comm(dagger(L1), q) + fprime, fprime, fk)),
        "q_dQ2": max(_rel(comm(q, L2) + hbar * I, hbar * I, fk),
                     _rel(comm(dagger(L2), q) + hbar * I, hbar * I, fk)),
        # dP1 coefficient of p: -hbar, dP2: -g'(q)
        "p_dP1": max(_rel(comm(p, L1) + 1j * hbar * I, hbar * I, fk),
                     _rel(comm(dagger(L1), p) - 1j * hbar * I, hbar * I, fk)),
        "p_dP2": max(_rel(comm(p, L2) + 1j * gprime, gprime, fk),
                     _rel(comm(dagger(L2), p) - 1j * gprime, gprime, fk)),
    }
    herm = max(np.linalg.norm(H - dagger(H)), np.linalg.norm(Lq - dagger(Lq)),
               np.linalg.norm(Lp - dagger(Lp)))
    ccr = fk.pnorm(comm(q, p) - 1j * hbar * I)
    report = {
        "N": fk.N, "m": fk.m, "hbar": hbar, "t": t,
        "drift_q_rel": _rel(Dq, Lq, fk),
        "drift_p_rel": _rel(Dp, Lp, fk),
        "noise": noise,
        "hermiticity": float(herm),
        "ccr_interior": ccr,
        "coherent_defect": coherent_defect(dil, 3.0, t),
        "tolerance": tol,
    }
    report["pass"] = bool(report["drift_q_rel"] < tol and report["drift_p_rel"] < tol
                          and max(noise.values()) < tol and herm < 1e-10 and ccr < 1e-12)
    return report


def classical_correspondence(model: PhaseSpaceModel, dil: QuantumDilation) -> dict:
    """Compare L1, L2 with the operators built from the Gamma = 2 classical pairs.

    The classical pairs are (F1, G1) = (rho(p), -q), (F2, G2) = (p, -mu(q));
    the operators are -G1 + (i/hbar) F1 and -(1/hbar) G2 + i F2.
    """
    sd, _ = build_symplectic_dilation(model, 2.0)
    fk = dil.fock
    hbar = fk.hbar
    lift_F1 = operator_function(fk.p, sd.rho)
    lift_G2 = -operator_function(fk.q, sd.mu)
    op1 = fk.q + 1j / hbar * lift_F1
    op2 = -lift_G2 / hbar + 1j * fk.p
    d1 = float(np.linalg.norm(op1 - dil.L[0]))
    d2 = float(np.linalg.norm(op2 - dil.L[1]))
    return {"Gamma": 2.0, "L1_diff": d1, "L2_diff": d2,
            "G1_is_minus_q": bool(sd.G[0].allclose(-Poly2.q())),
            "F2_is_p": bool(sd.F[1].allclose(Poly2.p()))}


# master equation ---------------------------------------------------------

@dataclass
class MasterSeries:
    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    n: np.ndarray
    purity: np.ndarray
    min_eig: np.ndarray
    trace: np.ndarray
    rho: np.ndarray = field(repr=False)   # final state

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "q", "p", "N", "purity", "min_eig"])
            for row in zip(self.t, self.q, self.p, self.n, self.purity, self.min_eig):
                w.writerow([f"{v:.12g}" for v in row])

    def trace_drift_rate(self) -> float:
        T = self.t[-1] - self.t[0]
        return float(np.max(np.abs(self.trace - 1.0)) / max(T, 1e-300))


def master_equation_evolve(dil: QuantumDilation, rho0: np.ndarray, T: float, dt: float,
                           record_every: int = 1, t0: float = 0.0,
                           positivity_floor: float = -1e-6) -> MasterSeries:
    """RK4 on the Schrödinger-picture Lindblad equation.

    The drive is evaluated at each RK4 stage time; rho is symmetrized after
    every step.
    """
    fk = dil.fock
    rho = np.array(rho0, dtype=complex)
    if np.linalg.norm(rho - dagger(rho)) > 1e-10:
        raise ValueError("rho0 must be Hermitian")
    if abs(np.trace(rho) - 1) > 1e-10:
        raise ValueError("rho0 must have unit trace")
    if np.linalg.eigvalsh(rho).min() < -1e-12:
        raise ValueError("rho0 must be positive semidefinite")
    hbar = fk.hbar
    Ls = dil.L
    const_H = dil.drive.is_zero
    H_fixed = dil.hamiltonian(0.0)

    def rhs(t, r):
        H = H_fixed if const_H else dil.hamiltonian(t)
        return lindblad_adjoint(H, Ls, r, hbar)

    n_steps = int(round(T / dt))
    rec = {k: [] for k in ("t", "q", "p", "n", "purity", "min_eig", "trace")}
    N_op = fk.number

    def record(t, r):
        ev = np.linalg.eigvalsh(r)
        rec["t"].append(t)
        rec["q"].append(np.trace(fk.q @ r).real)
        rec["p"].append(np.trace(fk.p @ r).real)
        rec["n"].append(np.trace(N_op @ r).real)
        rec["purity"].append(np.trace(r @ r).real)
        rec["min_eig"].append(ev.min())
        rec["trace"].append(np.trace(r).real)
        if ev.min() < positivity_floor:
            raise TruncationError(f"rho lost positivity (min eig {ev.min():.3g} at t={t:.4g}); "
                                  "increase the truncation N")

    record(t0, rho)
    for k in range(n_steps):
        t = t0 + k * dt
        k1 = rhs(t, rho)
        k2 = rhs(t + dt / 2, rho + dt / 2 * k1)
        k3 = rhs(t + dt / 2, rho + dt / 2 * k2)
        k4 = rhs(t + dt, rho + dt * k3)
        rho = rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        rho = 0.5 * (rho + dagger(rho))
        if (k + 1) % record_every == 0 or k + 1 == n_steps:
            record(t0 + (k + 1) * dt, rho)
    arr = {k: np.array(v) for k, v in rec.items()}
    return MasterSeries(arr["t"], arr["q"], arr["p"], arr["n"], arr["purity"],
                        arr["min_eig"], arr["trace"], rho)


def classical_linear_oracle(L0, C0, R0, M0, x0, t) -> np.ndarray:
    """(q, p)(t) of L0 q'' + (R0 + M0) q' + q/C0 = 0 with p = L0 q'."""
    A = np.array([[0.0, 1.0 / L0], [-1.0 / C0, -(R0 + M0) / L0]])
    return np.array([expm(A * s) @ np.asarray(x0, dtype=float) for s in np.atleast_1d(t)])


def ehrenfest_error(series: MasterSeries, oracle: np.ndarray) -> float:
    """sup |<x>(t) - x_cl(t)| / sup |x_cl(t)| over both components."""
    est = np.stack([series.q, series.p], axis=1)
    return float(np.max(np.abs(est - oracle)) / np.max(np.abs(oracle)))


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")
