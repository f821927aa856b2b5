"""Canonical stochastic dilations of series R-M circuits with constant inductance.

Two constructions realise the circuit drift as the Itô drift of a
canonical (Poisson-bracket preserving) diffusion:

* Wiener dilation: Hamiltonian H plus noise generators F1 (resistive) and
  F2 (memristive), each driving one independent Wiener channel.
* Symplectic dilation: pairs (F_a, G_a) driving conjugate noise pairs
  (Q_a, P_a) with extended bracket {Q_a(t), P_a(s)} = Gamma min(t, s), plus
  the divergence-carrying drift u.

Noise fields are Hamiltonian: the channel driven by F has field {., F} =
(dF/dp, -dF/dq).  All algebra is exact on ``Poly2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import PhaseSpaceModel, RepresentationError
from .functions import Poly2, ScalarFunction, bracket, hessian_det
from .noise import ChannelSpec
from .sde import PolyField, SdeSystem


class DilationError(ValueError):
    pass


def _require_polynomial_series(model: PhaseSpaceModel) -> float:
    if not model.series:
        raise DilationError("dilations need a series-decomposable dissipator "
                            "(parallel R||M is outside this class)")
    if not model.constant_inductance:
        raise DilationError("dilations need a constant inductance L0")
    for f in (model.capacitor, model.resistance, model.memristance):
        if not f.is_polynomial:
            raise DilationError("characteristics must be polynomial")
    return model.kinetic.L0


def _circuit_parts(model: PhaseSpaceModel):
    L0 = _require_polynomial_series(model)
    kinetic = Poly2.of_p(model.kinetic.kinetic_poly())
    potential = Poly2.of_q(model.potential)
    psi = model.resistor_voltage  # exact ScalarFunction of p for constant L0
    return L0, kinetic, potential, psi


def circuit_drift(model: PhaseSpaceModel) -> PolyField:
    """v^q = p/L0, v^p = -Phi_C'(q) - Psi_R'(p) - M(q) p / L0 + e(t)."""
    L0, _, _, psi = _circuit_parts(model)
    vq = Poly2.p() / L0
    vp = -Poly2.of_q(model.capacitor) - Poly2.of_p(psi) - Poly2.of_q(model.memristance) * Poly2.p() / L0
    return PolyField(vq, vp, model.drive)


def dissipator_poly(model: PhaseSpaceModel) -> Poly2:
    L0, _, _, psi = _circuit_parts(model)
    return Poly2.of_p(psi) + Poly2.of_q(model.memristance) * Poly2.p() / L0


# Wiener dilation ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WienerDilation:
    H: Poly2                      # without the -e(t) q term
    drive: ScalarFunction
    F: tuple[Poly2, Poly2]
    W: ScalarFunction
    G: ScalarFunction
    c: float
    ell: float
    H_circuit: Poly2              # K(p) + Phi_C(q)

    @property
    def H_correction(self) -> Poly2:
        """1/2 W'(p) q + 1/2 G'(q) p."""
        return self.H - self.H_circuit

    def to_dict(self) -> dict:
        return {"kind": "wiener", "c": self.c, "ell": self.ell,
                "H": self.H.to_list(), "drive": self.drive.to_dict() | {"domain": None},
                "F": [f.to_list() for f in self.F],
                "W": self.W.to_dict(), "G": self.G.to_dict(),
                "channels": ["resistance", "memristance"]}


def build_wiener_dilation(model: PhaseSpaceModel, c: float = 1.0, ell: float = 1.0):
    """Canonical dilation driven by two independent Wiener processes."""
    if c <= 0 or ell <= 0:
        raise DilationError("c and ell must be positive")
    L0, kinetic, potential, psi = _circuit_parts(model)
    W = psi.antiderivative()
    G = model.memristance.scale(1.0 / L0).antiderivative(2)
    Wp = Poly2.of_p(psi)
    Gp = Poly2.of_q(G.derivative())
    q, p = Poly2.q(), Poly2.p()
    H_circuit = kinetic + potential
    H = H_circuit + 0.5 * Wp * q + 0.5 * Gp * p
    F1 = q * q / (2 * c) + c * Poly2.of_p(W)
    F2 = p * p / (2 * ell) + ell * Poly2.of_q(G)
    dil = WienerDilation(H, model.drive, (F1, F2), W, G, c, ell, H_circuit)
    w = PolyField.hamiltonian(H, model.drive)
    sigmas = (PolyField.hamiltonian(F1), PolyField.hamiltonian(F2))
    system = SdeSystem.from_stratonovich(w, sigmas, ChannelSpec(("resistance", "memristance")))
    return dil, system


# symplectic dilation -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class SymplecticDilation:
    H: Poly2
    drive: ScalarFunction
    F: tuple[Poly2, ...]
    G: tuple[Poly2, ...]
    u: tuple[Poly2, Poly2]
    gamma: float
    rho: ScalarFunction
    mu: ScalarFunction

    def dissipation(self) -> Poly2:
        """Gamma sum {F_a, G_a}."""
        out = Poly2()
        for f, g in zip(self.F, self.G):
            out = out + bracket(f, g)
        return out * self.gamma

    def to_dict(self) -> dict:
        return {"kind": "symplectic", "Gamma": self.gamma,
                "H": self.H.to_list(), "drive": self.drive.to_dict() | {"domain": None},
                "F": [f.to_list() for f in self.F], "G": [g.to_list() for g in self.G],
                "u": [self.u[0].to_list(), self.u[1].to_list()],
                "channels": ["Q1", "P1", "Q2", "P2"], "pairs": [[0, 1], [2, 3]]}


def u_field(F_list, G_list, gamma: float, form: str = "corollary") -> tuple[Poly2, Poly2]:
    """A drift u with div u = -gamma sum {F_a, G_a}."""
    uq, up = Poly2(), Poly2()
    for F, G in zip(F_list, G_list):
        if form == "particular":
            uq = uq + 0.5 * gamma * (G * F.dp() - F * G.dp())
            up = up + 0.5 * gamma * (F * G.dq() - G * F.dq())
        elif form == "corollary":
            uq = uq - gamma * F * G.dp()
            up = up + gamma * F * G.dq()
        else:
            raise ValueError("form must be 'particular' or 'corollary'")
    return uq, up


def build_symplectic_dilation(model: PhaseSpaceModel, gamma: float = 1.0,
                              variant: str = "bracket"):
    """Canonical dilation driven by two symplectic pairs (Q1, P1), (Q2, P2).

    ``variant="bracket"`` uses the noise coefficients {x, F_a}, {x, G_a}
    (dp picks up +dP1 + mu'(q) dP2).  ``variant="printed"`` uses the signs
    and M'(q) factor as typeset in the source derivation; it is kept only
    so that the extended-bracket certificate can discriminate the two.
    """
    if gamma <= 0:
        raise DilationError("Gamma must be positive")
    L0, kinetic, potential, psi = _circuit_parts(model)
    rho = psi.scale(1.0 / gamma)
    mu = model.memristance.scale(1.0 / (gamma * L0)).antiderivative()
    q, p = Poly2.q(), Poly2.p()
    H = kinetic + potential
    F = (Poly2.of_p(rho), p)
    G = (-q, -Poly2.of_q(mu))
    uq, up = u_field(F, G, gamma, "corollary")
    dil = SymplecticDilation(H, model.drive, F, G, (uq, up), gamma, rho, mu)
    w = PolyField.hamiltonian(H, model.drive) + PolyField(uq, up)
    fields = [PolyField.hamiltonian(F[0]), PolyField.hamiltonian(G[0]),
              PolyField.hamiltonian(F[1]), PolyField.hamiltonian(G[1])]
    if variant == "printed":
        mprime = Poly2.of_q(model.memristance.derivative()) / (gamma * L0)
        fields[1] = PolyField(Poly2(), Poly2.const(-1.0))
        fields[3] = PolyField(Poly2(), -mprime)
    elif variant != "bracket":
        raise ValueError("variant must be 'bracket' or 'printed'")
    channels = ChannelSpec(("Q1", "P1", "Q2", "P2"), pairs=((0, 1), (2, 3)), gamma=gamma)
    system = SdeSystem.from_stratonovich(w, fields, channels)
    return dil, system


def lc_example_system(L0=1.0, C0=1.0, gamma=1.0, drive: ScalarFunction | None = None):
    """LC circuit with F = p, G = -q and u = (0, -gamma p)."""
    q, p = Poly2.q(), Poly2.p()
    H = p * p / (2 * L0) + q * q / (2 * C0)
    uq, up = u_field([p], [-q], gamma, "corollary")
    w = PolyField.hamiltonian(H, drive) + PolyField(uq, up)
    fields = [PolyField.hamiltonian(p), PolyField.hamiltonian(-q)]
    return SdeSystem.from_stratonovich(w, fields, ChannelSpec(("Q", "P"), ((0, 1),), gamma))


# structural checks -------------------------------------------------------

def itov_drift(H: Poly2, F_list) -> tuple[Poly2, Poly2]:
    """Componentwise Itô drift of the canonical Wiener model."""
    vq = H.dp()
    vp = -H.dq()
    for F in F_list:
        vq = vq + 0.5 * F.dp() * F.dq().dp() - 0.5 * F.dq() * F.dp().dp()
        vp = vp - 0.5 * F.dp() * F.dq().dq() + 0.5 * F.dq() * F.dp().dq()
    return vq, vp


J_SYMPLECTIC = np.array([[0.0, 1.0], [-1.0, 0.0]])


def compact_drift(H: Poly2, F_list, q, p) -> np.ndarray:
    """v = J grad H + 1/2 sum J F'' J grad F at the points (q, p)."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    grad = np.array([H.dq()(q, p), H.dp()(q, p)])
    v = np.einsum("ij,j...->i...", J_SYMPLECTIC, grad)
    for F in F_list:
        hess = np.array([[F.dq().dq()(q, p), F.dq().dp()(q, p)],
                         [F.dp().dq()(q, p), F.dp().dp()(q, p)]])
        gF = np.array([F.dq()(q, p), F.dp()(q, p)])
        JgF = np.einsum("ij,j...->i...", J_SYMPLECTIC, gF)
        HJgF = np.einsum("ij...,j...->i...", hess, JgF)
        v = v + 0.5 * np.einsum("ij,j...->i...", J_SYMPLECTIC, HJgF)
    return v


def hessian_dissipation(F_list, q, p):
    """Sum of Hessian determinants of the noise generators."""
    total = Poly2()
    for F in F_list:
        total = total + hessian_det(F)
    return total(q, p)


def pair_dissipation(F_list, G_list, gamma: float) -> Poly2:
    """sum {F_q, F_p} + {G_q, G_p} + gamma {F, G}."""
    out = Poly2()
    for F, G in zip(F_list, G_list):
        out = out + bracket(F.dq(), F.dp()) + bracket(G.dq(), G.dp()) + gamma * bracket(F, G)
    return out


def covariation(F_list) -> Poly2:
    """Quadratic covariation rate dq dp / dt = -sum dF/dp dF/dq."""
    out = Poly2()
    for F in F_list:
        out = out - F.dp() * F.dq()
    return out


def default_grid(box=(-2.0, 2.0), n: int = 41):
    g = np.linspace(box[0], box[1], n)
    return np.meshgrid(g, g, indexing="ij")


def residuals_eq0_eqv(F_list, V_D, grid=None, H_correction: Poly2 | None = None):
    """Max-abs residuals of the two drift-matching equations on a grid.

    r0 = |2 K_p + sum(F_p F_qp - F_q F_pp)|
    rv = |2 K_q + sum(F_p F_qq - F_q F_pq) - 2 V_D|
    where K is the part of the dilation Hamiltonian beyond the circuit
    Hamiltonian (zero for the plain equations).
    """
    Q, P = default_grid() if grid is None else grid
    lhs0 = np.zeros_like(Q)
    lhsv = np.zeros_like(Q)
    for F in F_list:
        Fq, Fp = F.dq(), F.dp()
        lhs0 += Fp(Q, P) * Fq.dp()(Q, P) - Fq(Q, P) * Fp.dp()(Q, P)
        lhsv += Fp(Q, P) * Fq.dq()(Q, P) - Fq(Q, P) * Fp.dq()(Q, P)
    if H_correction is not None:
        lhs0 += 2 * H_correction.dp()(Q, P)
        lhsv += 2 * H_correction.dq()(Q, P)
    vd = V_D(Q, P) if callable(V_D) else np.full_like(Q, float(V_D))
    return float(np.max(np.abs(lhs0))), float(np.max(np.abs(lhsv - 2 * vd)))


@dataclass(frozen=True)
class XiResult:
    ok: bool
    q: np.ndarray
    xi: np.ndarray            # ratio averaged over p, per q node
    max_variation: float      # max over q of the ratio's spread in p
    fit: ScalarFunction | None = None


def xi_condition(F, grid=None, tol: float = 1e-8, max_degree: int = 8) -> XiResult:
    """Test whether (dF/dq)/(dF/dp) depends on q only.

    ``F`` is a Poly2 or a pair of callables (dF/dq, dF/dp).
    """
    Q, P = default_grid() if grid is None else grid
    if isinstance(F, Poly2):
        Fq, Fp = F.dq()(Q, P), F.dp()(Q, P)
    else:
        Fq, Fp = F[0](Q, P), F[1](Q, P)
    if np.any(np.abs(Fp) < 1e-12):
        raise DilationError("dF/dp vanishes on the grid")
    ratio = Fq / Fp
    spread = ratio.max(axis=1) - ratio.min(axis=1)
    var = float(spread.max())
    q_nodes = Q[:, 0]
    xi = ratio.mean(axis=1)
    fit = None
    ok = var < tol
    if ok:
        for deg in range(max_degree + 1):
            c = np.polynomial.polynomial.polyfit(q_nodes, xi, deg)
            if np.max(np.abs(np.polynomial.polynomial.polyval(q_nodes, c) - xi)) < 1e-8:
                fit = ScalarFunction.poly(c)
                break
    return XiResult(ok, q_nodes, xi, var, fit)


def check_dilation_drift(system: SdeSystem, model: PhaseSpaceModel, grid=None) -> float:
    """Max-abs difference between the system's Itô drift and the circuit drift."""
    Q, P = default_grid() if grid is None else grid
    target = circuit_drift(model)
    a = np.array(system.drift(0.0, Q, P))
    b = np.array(target(0.0, Q, P))
    return float(np.max(np.abs(a - b)))


def residual_report(model: PhaseSpaceModel, c: float = 1.0, ell: float = 1.0,
                    gamma: float = 1.0, box=(-2.0, 2.0), n: int = 41) -> dict:
    """JSON-ready residual report for both constructions."""
    grid = default_grid(box, n)
    Q, P = grid
    wd, wsys = build_wiener_dilation(model, c, ell)
    sd, ssys = build_symplectic_dilation(model, gamma)
    vd = dissipator_poly(model)
    r0, rv = residuals_eq0_eqv(wd.F, vd, grid, wd.H_correction)
    from .circuit import dissipation
    gamma_circuit = dissipation(model, Q, P)
    return {
        "grid": {"box": list(box), "n": n},
        "wiener": {
            "r0": r0, "rv": rv,
            "drift_error": check_dilation_drift(wsys, model, grid),
            "hessian_dissipation_error": float(np.max(np.abs(
                hessian_dissipation(wd.F, Q, P) - gamma_circuit))),
        },
        "symplectic": {
            "drift_error": check_dilation_drift(ssys, model, grid),
            "gamma_error": float(np.max(np.abs(sd.dissipation()(Q, P) - gamma_circuit))),
            "divergence_error": float(np.max(np.abs(
                (sd.u[0].dq() + sd.u[1].dp())(Q, P) + sd.dissipation()(Q, P)))),
        },
    }


__all__ = [
    "DilationError", "RepresentationError", "WienerDilation", "SymplecticDilation",
    "build_wiener_dilation", "build_symplectic_dilation", "lc_example_system",
    "u_field", "residuals_eq0_eqv", "xi_condition", "hessian_dissipation",
    "pair_dissipation", "covariation", "itov_drift", "compact_drift", "circuit_drift",
    "dissipator_poly", "residual_report", "check_dilation_drift", "default_grid",
]
