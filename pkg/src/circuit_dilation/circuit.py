"""Ideal circuit elements and the deterministic phase-space circuit equations.

A series circuit (inductor, optional capacitor, resistors, memristors and
optional resistor||memristor dissipators, driven by e(t)) is described in
canonical coordinates (q, p): q is charge and p is the canonical momentum
conjugate to q, identified with the inductor flux.  The flux itself is
never an independent variable here.

Stored-energy part:  H(q, p, t) = K(p) + Phi_C(q) - e(t) q
Dissipator voltage:  V_D(q, p)  = Psi_R'(p) + M(q) I(p) [+ parallel terms]
Equations:           dq/dt = I(p),  dp/dt = -Phi_C'(q) - V_D(q, p) + e(t)
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .functions import DEFAULT_DOMAIN, DomainError, ScalarFunction

PASSIVITY_TOL = 1e-12  # round-off allowance at a domain endpoint where R or M vanishes


class PassivityError(ValueError):
    """A characteristic violates passivity (L, C > 0; R, M >= 0; gamma >= 0)."""


class RepresentationError(ValueError):
    """A requested closed form is not representable in the function algebra."""


ELEMENT_KINDS = ("Inductor", "Capacitor", "Resistor", "Memristor")


@dataclass(frozen=True)
class Element:
    """Characteristic per kind: L(I), capacitor voltage Phi_C'(q), R(I), M(q)."""

    kind: str
    characteristic: ScalarFunction

    def __post_init__(self):
        if self.kind not in ELEMENT_KINDS:
            raise ValueError(f"unknown element kind {self.kind!r}")
        f = self.characteristic
        if not f.is_polynomial or f.is_zero:
            return
        if self.kind == "Capacitor":
            # capacitor voltage Phi_C' must increase: Phi_C'' = 1/C > 0
            if f.derivative().minimum() <= 0.0:
                raise PassivityError("capacitance must be > 0 (Phi_C' must be increasing)")
            return
        low = f.minimum()
        if self.kind == "Inductor" and low <= 0.0:
            raise PassivityError(f"inductance must be > 0 on {f.domain}, min {low:g}")
        if self.kind in ("Resistor", "Memristor") and low < -PASSIVITY_TOL:
            raise PassivityError(
                f"{self.kind.lower()} characteristic must be >= 0 on {f.domain}, min {low:g}")


def _monotone_inverse(fun, deriv, y, lo, hi, tol=1e-12):
    """Vectorized inverse of a strictly increasing function on [lo, hi]."""
    y = np.asarray(y, dtype=float)
    flo, fhi = fun(lo), fun(hi)
    if np.any(y < flo) or np.any(y > fhi):
        raise DomainError(f"momentum outside the image [{flo:g}, {fhi:g}] of K'")
    a = np.full(y.shape, float(lo))
    b = np.full(y.shape, float(hi))
    while True:
        m = 0.5 * (a + b)
        if np.all(b - a <= tol * np.maximum(1.0, np.abs(m))):
            break
        left = fun(m) < y
        a = np.where(left, m, a)
        b = np.where(left, b, m)
    x = 0.5 * (a + b)
    # Newton polish; the bracket guarantees we start in the basin
    for _ in range(2):
        x = np.clip(x - (fun(x) - y) / deriv(x), lo, hi)
    return x if x.ndim else float(x)


@dataclass(frozen=True)
class KineticData:
    """Legendre data of the inductor: K(I), its transform K(p) and I(p)."""

    K: ScalarFunction
    L: ScalarFunction

    @property
    def constant(self) -> bool:
        return self.L.is_constant

    @property
    def L0(self) -> float:
        if not self.constant:
            raise RepresentationError("inductance is not constant")
        return self.L.constant_value()

    def current(self, p):
        """I(p), the inverse of K'."""
        if self.constant:
            return np.asarray(p, dtype=float) / self.L0 if np.ndim(p) else float(p) / self.L0
        dK = self.K.derivative()
        lo, hi = self.K.domain
        return _monotone_inverse(dK.raw, self.L.raw, p, lo, hi)

    def current_derivative(self, p):
        """dI/dp = 1 / L(I(p))."""
        return 1.0 / self.inductance(p)

    def kinetic(self, p):
        """K(p) = p I(p) - K(I(p))."""
        i = self.current(p)
        return np.asarray(p) * i - self.K(i)

    def inductance(self, p):
        """L(I(p))."""
        return self.L(self.current(p))

    def kinetic_poly(self) -> ScalarFunction:
        """Closed form p^2 / (2 L0) in the constant-inductance case."""
        L0 = self.L0
        return ScalarFunction.poly((0.0, 0.0, 0.5 / L0), _scaled_domain(self.K.domain, L0))

    def current_poly(self) -> ScalarFunction:
        L0 = self.L0
        return ScalarFunction.poly((0.0, 1.0 / L0), _scaled_domain(self.K.domain, L0))


def _scaled_domain(current_domain, L0):
    lo, hi = current_domain
    return (min(L0 * lo, L0 * hi), max(L0 * lo, L0 * hi))


def legendre(K: ScalarFunction, L: ScalarFunction | None = None) -> KineticData:
    """Legendre data for the inductor energy function K(I) with K'' = L > 0."""
    if L is None:
        L = K.derivative(2)
    if not L.is_polynomial:
        raise RepresentationError("inductance must be polynomial")
    if L.minimum() <= 0.0:
        raise PassivityError("K' is not strictly increasing on the domain (L(I) <= 0)")
    if K.is_polynomial and not _poly_close(K.derivative(2), L):
        raise ValueError("K'' does not match the supplied inductance")
    return KineticData(K=K, L=L)


def _poly_close(a: ScalarFunction, b: ScalarFunction, rtol: float = 1e-12) -> bool:
    n = max(len(a.coeffs), len(b.coeffs))
    ca = np.pad(np.asarray(a.coeffs, float), (0, n - len(a.coeffs)))
    cb = np.pad(np.asarray(b.coeffs, float), (0, n - len(b.coeffs)))
    scale = max(np.abs(ca).max(initial=0.0), np.abs(cb).max(initial=0.0), 1.0)
    return bool(np.all(np.abs(ca - cb) <= rtol * scale))


def kinetic_from_inductance(L: ScalarFunction) -> KineticData:
    """K = double antiderivative of L with K(0) = K'(0) = 0."""
    return legendre(L.antiderivative(2), L)


def capacitor_potential(C: ScalarFunction | None = None,
                        voltage: ScalarFunction | None = None) -> ScalarFunction:
    """Phi_C with Phi_C(0) = 0, from a constant capacitance or a supplied Phi_C'."""
    if voltage is None:
        if C is None:
            raise ValueError("give a capacitance or the capacitor voltage Phi_C'")
        voltage = capacitor_voltage(C)
    return voltage.antiderivative()


def capacitor_voltage(C: ScalarFunction) -> ScalarFunction:
    """Phi_C'(q) = q / C0; only constant capacitance has a polynomial reciprocal."""
    if not C.is_constant:
        raise RepresentationError(
            "1/C(q) is not polynomial; supply the capacitor voltage Phi_C'(q) directly")
    C0 = C.constant_value()
    if C0 <= 0.0:
        raise PassivityError("capacitance must be > 0")
    return ScalarFunction.poly((0.0, 1.0 / C0), C.domain)


class Composition:
    """x -> outer(inner(x)) with a chain-rule derivative."""

    def __init__(self, outer: ScalarFunction, kinetic: KineticData):
        self.outer = outer
        self.kinetic = kinetic

    def __call__(self, p):
        return self.outer(self.kinetic.current(p))

    def derivative_at(self, p):
        i = self.kinetic.current(p)
        return self.outer.derivative()(i) * self.kinetic.current_derivative(p)


def resistor_potential(R: ScalarFunction, kinetic: KineticData):
    """Psi_R'(p) = D_R'(I(p)) with D_R'(I) = int_0^I R.

    Exact ScalarFunction when the inductance is constant, otherwise a
    ``Composition`` evaluated through the numerical current map.
    """
    DR = R.antiderivative()
    if kinetic.constant:
        L0 = kinetic.L0
        return DR.compose_linear(1.0 / L0, _scaled_domain(R.domain, L0))
    return Composition(DR, kinetic)


def parallel_voltage(vr, vm):
    """(V_R^-1 + V_M^-1)^-1, continuous limit 0 where either voltage vanishes."""
    vr = np.asarray(vr, dtype=float)
    vm = np.asarray(vm, dtype=float)
    num = vr * vm
    den = vr + vm
    safe = np.where(num == 0.0, 1.0, den)
    out = np.where(num == 0.0, 0.0, num / safe)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PhaseSpaceModel:
    """Hamiltonor (K, Phi_C, e) plus dissipator voltage V_D(q, p)."""

    kinetic: KineticData
    capacitor: ScalarFunction = field(default_factory=ScalarFunction.zero)  # Phi_C'(q)
    resistance: ScalarFunction = field(default_factory=ScalarFunction.zero)  # summed R(I)
    memristance: ScalarFunction = field(default_factory=ScalarFunction.zero)  # summed M(q)
    parallel: tuple[tuple[ScalarFunction, ScalarFunction], ...] = ()
    drive: ScalarFunction = field(default_factory=ScalarFunction.zero)

    def __post_init__(self):
        Element("Inductor", self.kinetic.L)
        Element("Capacitor", self.capacitor)
        Element("Resistor", self.resistance)
        Element("Memristor", self.memristance)
        for r, m in self.parallel:
            Element("Resistor", r)
            Element("Memristor", m)

    @property
    def series(self) -> bool:
        return not self.parallel

    @property
    def constant_inductance(self) -> bool:
        return self.kinetic.constant

    @property
    def has_dissipation(self) -> bool:
        return not (self.resistance.is_zero and self.memristance.is_zero and not self.parallel)

    # derived characteristics -------------------------------------------
    @property
    def potential(self) -> ScalarFunction:
        return capacitor_potential(voltage=self.capacitor)

    @property
    def resistor_voltage(self):
        """Psi_R'(p)."""
        return resistor_potential(self.resistance, self.kinetic)

    def dissipator_voltage(self, q, p):
        """V_D(q, p)."""
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        i = self.kinetic.current(p)
        v = self.resistor_voltage(p) + self.memristance(q) * i
        for r, m in self.parallel:
            vr = resistor_potential(r, self.kinetic)(p)
            v = v + parallel_voltage(vr, m(q) * i)
        return v

    def hamiltonian_field(self, t, q, p):
        return self.kinetic.current(p), -self.capacitor(q) + self.drive(t)

    def to_dict(self) -> dict:
        return model_to_dict(self)


def constant_model(L0=1.0, C0=1.0, R0=0.0, M0=0.0, drive: ScalarFunction | None = None,
                   domain=DEFAULT_DOMAIN) -> PhaseSpaceModel:
    """Series L-C-R-M circuit with constant characteristics."""
    kin = kinetic_from_inductance(ScalarFunction.const(L0, domain))
    cap = capacitor_voltage(ScalarFunction.const(C0, domain)) if C0 else ScalarFunction.zero(domain)
    return PhaseSpaceModel(
        kinetic=kin, capacitor=cap,
        resistance=ScalarFunction.const(R0, domain),
        memristance=ScalarFunction.const(M0, domain),
        drive=drive if drive is not None else ScalarFunction.zero((-np.inf, np.inf)))


def drift_field(model: PhaseSpaceModel, t, q, p):
    """Deterministic circuit velocity (dq/dt, dp/dt)."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    qdot = model.kinetic.current(p)
    pdot = -model.capacitor(q) - model.dissipator_voltage(q, p) + model.drive(t)
    return qdot, pdot


def dissipation(model: PhaseSpaceModel, q, p, check: bool = True):
    """gamma(q, p) = dV_D/dp, the negative divergence of the circuit flow."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if model.series:
        inv_L = model.kinetic.current_derivative(p)
        i = model.kinetic.current(p)
        g = (model.resistance(i) + model.memristance(q)) * inv_L
    else:
        h = 1e-6 * np.maximum(1.0, np.abs(p))
        g = (model.dissipator_voltage(q, p + h) - model.dissipator_voltage(q, p - h)) / (2 * h)
    if check and np.any(np.asarray(g) < -1e-9):
        bad = np.argwhere(np.atleast_1d(g) < -1e-9).ravel()[:5]
        raise PassivityError(f"negative dissipation at sample indices {bad.tolist()}")
    return g


def dissipation_parts(model: PhaseSpaceModel, q, p):
    """Series split gamma = gamma_R(p) + gamma_M(q, p)."""
    if not model.series:
        raise RepresentationError("parallel dissipators have no series split")
    inv_L = model.kinetic.current_derivative(p)
    i = model.kinetic.current(p)
    return model.resistance(i) * inv_L, model.memristance(q) * inv_L


def energy(model: PhaseSpaceModel, t, q, p):
    """H(q, p, t) = K(p) + Phi_C(q) - e(t) q."""
    q = np.asarray(q, dtype=float)
    return model.kinetic.kinetic(p) + model.potential(q) - model.drive(t) * q


def resonant_frequency(L0: float, C0: float) -> float:
    return (L0 * C0) ** -0.5


# JSON -------------------------------------------------------------------

MODEL_FORMAT = "circuit-dilation/model"


def model_to_dict(model: PhaseSpaceModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": 1,
        "inductance": model.kinetic.L.to_dict(),
        "capacitor_voltage": model.capacitor.to_dict(),
        "resistance": model.resistance.to_dict(),
        "memristance": model.memristance.to_dict(),
        "parallel": [{"resistance": r.to_dict(), "memristance": m.to_dict()}
                     for r, m in model.parallel],
        "drive": _drive_dict(model.drive),
        "flags": {"series": model.series, "constant_inductance": model.constant_inductance},
        "metadata": {"gamma": ("(R(I(p)) + M(q)) / L(I(p))" if model.series
                               else "dV_D/dp (parallel dissipator, finite difference)")},
    }


def _drive_dict(f: ScalarFunction) -> dict:
    d = f.to_dict()
    d["domain"] = [None if not np.isfinite(x) else x for x in f.domain]
    return d


def model_from_dict(d: dict) -> PhaseSpaceModel:
    if d.get("format") != MODEL_FORMAT:
        raise ValueError(f"not a {MODEL_FORMAT} document")
    drive = dict(d["drive"])
    drive["domain"] = [(-np.inf if i == 0 else np.inf) if x is None else x
                       for i, x in enumerate(drive.get("domain", [None, None]))]
    model = PhaseSpaceModel(
        kinetic=kinetic_from_inductance(ScalarFunction.from_dict(d["inductance"])),
        capacitor=ScalarFunction.from_dict(d["capacitor_voltage"]),
        resistance=ScalarFunction.from_dict(d["resistance"]),
        memristance=ScalarFunction.from_dict(d["memristance"]),
        parallel=tuple((ScalarFunction.from_dict(x["resistance"]),
                        ScalarFunction.from_dict(x["memristance"])) for x in d["parallel"]),
        drive=ScalarFunction.from_dict(drive))
    return model


def dumps_model(model: PhaseSpaceModel) -> str:
    return json.dumps(model_to_dict(model), indent=2)


def loads_model(text: str) -> PhaseSpaceModel:
    return model_from_dict(json.loads(text))
