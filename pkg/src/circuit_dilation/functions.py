"""One- and two-variable function algebra with exact calculus.

``ScalarFunction`` carries every element characteristic (L(I), R(I), M(q),
capacitor voltage, drive e(t), potentials).  It is a polynomial plus an
optional single sinusoid, a class closed under differentiation and
integration.  ``Poly2`` is a bivariate polynomial in (q, p) used for
Hamiltonians, noise generators and vector fields, so that every bracket,
Hessian and divergence is computed exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.signal import convolve2d

DEFAULT_DOMAIN = (-1.0e3, 1.0e3)


class DomainError(ValueError):
    """Evaluation outside a function's declared interval of validity."""


def _trim(coeffs) -> tuple[float, ...]:
    c = [float(x) for x in coeffs]
    while c and c[-1] == 0.0:
        c.pop()
    return tuple(c)


@dataclass(frozen=True)
class ScalarFunction:
    """f(x) = sum_k coeffs[k] x**k + amp * sin(omega * x + phase).

    ``domain`` is the closed interval on which evaluation is allowed.
    """

    coeffs: tuple[float, ...] = ()
    sinusoid: tuple[float, float, float] | None = None
    domain: tuple[float, float] = DEFAULT_DOMAIN

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _trim(self.coeffs))
        lo, hi = (float(v) for v in self.domain)
        if not lo <= hi:
            raise ValueError(f"empty domain [{lo}, {hi}]")
        object.__setattr__(self, "domain", (lo, hi))
        if self.sinusoid is not None:
            amp, omega, phase = (float(v) for v in self.sinusoid)
            if amp == 0.0:
                object.__setattr__(self, "sinusoid", None)
            elif omega == 0.0:
                # degenerate sinusoid is a constant
                c = list(self.coeffs) or [0.0]
                c[0] += amp * math.sin(phase)
                object.__setattr__(self, "coeffs", _trim(c))
                object.__setattr__(self, "sinusoid", None)
            else:
                object.__setattr__(self, "sinusoid", (amp, omega, phase))

    # constructors -------------------------------------------------------
    @classmethod
    def poly(cls, coeffs, domain=DEFAULT_DOMAIN) -> "ScalarFunction":
        return cls(tuple(coeffs), None, domain)

    @classmethod
    def const(cls, value: float, domain=DEFAULT_DOMAIN) -> "ScalarFunction":
        return cls((value,), None, domain)

    @classmethod
    def zero(cls, domain=DEFAULT_DOMAIN) -> "ScalarFunction":
        return cls((), None, domain)

    @classmethod
    def sine(cls, amp: float, omega: float, phase: float = 0.0,
             domain=DEFAULT_DOMAIN) -> "ScalarFunction":
        return cls((), (amp, omega, phase), domain)

    # queries ------------------------------------------------------------
    @property
    def is_polynomial(self) -> bool:
        return self.sinusoid is None

    @property
    def is_constant(self) -> bool:
        return self.sinusoid is None and len(self.coeffs) <= 1

    @property
    def is_zero(self) -> bool:
        return self.sinusoid is None and not self.coeffs

    @property
    def degree(self) -> int:
        if self.sinusoid is not None:
            raise ValueError("degree undefined for sinusoidal terms")
        return max(len(self.coeffs) - 1, 0)

    def constant_value(self) -> float:
        if not self.is_constant:
            raise ValueError("function is not constant")
        return self.coeffs[0] if self.coeffs else 0.0

    def check_domain(self, x) -> None:
        lo, hi = self.domain
        x = np.asarray(x, dtype=float)
        if x.size and (np.nanmin(x) < lo or np.nanmax(x) > hi):
            raise DomainError(
                f"argument range [{np.nanmin(x):.6g}, {np.nanmax(x):.6g}] "
                f"outside domain [{lo:.6g}, {hi:.6g}]")

    def __call__(self, x, check: bool = True):
        if check:
            self.check_domain(x)
        return self.raw(x)

    def raw(self, x):
        """Evaluate without the domain check (operator lifts, internal use)."""
        x = np.asarray(x, dtype=float)
        out = npoly.polyval(x, self.coeffs) if self.coeffs else np.zeros_like(x)
        if self.sinusoid is not None:
            amp, omega, phase = self.sinusoid
            out = out + amp * np.sin(omega * x + phase)
        return out if out.ndim else float(out)

    # calculus -----------------------------------------------------------
    def derivative(self, order: int = 1) -> "ScalarFunction":
        f = self
        for _ in range(order):
            c = tuple(npoly.polyder(f.coeffs)) if len(f.coeffs) > 1 else ()
            s = None
            if f.sinusoid is not None:
                amp, omega, phase = f.sinusoid
                s = (amp * omega, omega, phase + math.pi / 2)
            f = ScalarFunction(c, s, f.domain)
        return f

    def antiderivative(self, order: int = 1) -> "ScalarFunction":
        """Exact antiderivative fixed to vanish at the origin."""
        f = self
        for _ in range(order):
            c = list(npoly.polyint(f.coeffs)) if f.coeffs else [0.0]
            s = None
            if f.sinusoid is not None:
                amp, omega, phase = f.sinusoid
                # int_0^x amp sin(w t + phi) dt = (amp/w)(cos phi - cos(w x + phi))
                s = (amp / omega, omega, phase - math.pi / 2)
                c[0] += (amp / omega) * math.cos(phase)
            c[0] -= ScalarFunction(tuple(c), s, f.domain).raw(0.0)
            f = ScalarFunction(tuple(c), s, f.domain)
        return f

    # algebra ------------------------------------------------------------
    def with_domain(self, domain) -> "ScalarFunction":
        return ScalarFunction(self.coeffs, self.sinusoid, domain)

    def __add__(self, other) -> "ScalarFunction":
        if isinstance(other, (int, float)):
            other = ScalarFunction.const(other, self.domain)
        if self.sinusoid is not None and other.sinusoid is not None:
            a1, w1, f1 = self.sinusoid
            a2, w2, f2 = other.sinusoid
            if w1 != w2:
                raise ValueError("sum of sinusoids with different frequencies")
            z = a1 * np.exp(1j * f1) + a2 * np.exp(1j * f2)
            s = (abs(z), w1, float(np.angle(z)))
        else:
            s = self.sinusoid or other.sinusoid
        c = npoly.polyadd(self.coeffs or (0.0,), other.coeffs or (0.0,))
        lo = max(self.domain[0], other.domain[0])
        hi = min(self.domain[1], other.domain[1])
        return ScalarFunction(tuple(c), s, (lo, hi))

    __radd__ = __add__

    def scale(self, factor: float) -> "ScalarFunction":
        s = None
        if self.sinusoid is not None:
            amp, omega, phase = self.sinusoid
            s = (amp * factor, omega, phase)
        return ScalarFunction(tuple(factor * c for c in self.coeffs), s, self.domain)

    def __neg__(self) -> "ScalarFunction":
        return self.scale(-1.0)

    def __sub__(self, other) -> "ScalarFunction":
        return self + (-other if isinstance(other, ScalarFunction) else -float(other))

    def __mul__(self, other) -> "ScalarFunction":
        if isinstance(other, (int, float)):
            return self.scale(float(other))
        if not (self.is_polynomial and other.is_polynomial):
            raise ValueError("products are supported for polynomials only")
        c = npoly.polymul(self.coeffs or (0.0,), other.coeffs or (0.0,))
        lo = max(self.domain[0], other.domain[0])
        hi = min(self.domain[1], other.domain[1])
        return ScalarFunction(tuple(c), None, (lo, hi))

    __rmul__ = __mul__

    def compose_linear(self, a: float, domain=None) -> "ScalarFunction":
        """x -> f(a x), exact for both representations."""
        c = tuple(ck * a**k for k, ck in enumerate(self.coeffs))
        s = None
        if self.sinusoid is not None:
            amp, omega, phase = self.sinusoid
            s = (amp, omega * a, phase)
        if domain is None:
            lo, hi = sorted((self.domain[0] / a, self.domain[1] / a))
            domain = (lo, hi)
        return ScalarFunction(c, s, domain)

    def minimum(self) -> float:
        """Exact minimum of a polynomial over its domain."""
        if not self.is_polynomial:
            raise ValueError("minimum implemented for polynomials only")
        lo, hi = self.domain
        pts = [lo, hi]
        if len(self.coeffs) > 2:
            for r in npoly.polyroots(npoly.polyder(self.coeffs)):
                if abs(r.imag) < 1e-12 and lo <= r.real <= hi:
                    pts.append(r.real)
        return float(min(self.raw(np.array(pts))))

    # serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        return {"coeffs": list(self.coeffs),
                "sinusoid": list(self.sinusoid) if self.sinusoid else None,
                "domain": list(self.domain)}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalarFunction":
        s = d.get("sinusoid")
        return cls(tuple(d.get("coeffs", ())), tuple(s) if s else None,
                   tuple(d.get("domain", DEFAULT_DOMAIN)))

    def describe(self, var: str = "x") -> str:
        terms = []
        for k, c in enumerate(self.coeffs):
            if c == 0.0:
                continue
            terms.append(f"{c:g}" if k == 0 else f"{c:g}*{var}" + (f"^{k}" if k > 1 else ""))
        if self.sinusoid is not None:
            a, w, ph = self.sinusoid
            terms.append(f"{a:g}*sin({w:g}*{var}+{ph:g})")
        return " + ".join(terms) if terms else "0"


@dataclass(frozen=True, eq=False)
class Poly2:
    """Bivariate polynomial sum_ij c[i, j] q**i p**j."""

    c: np.ndarray = field(default_factory=lambda: np.zeros((1, 1)))

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.c, dtype=float))
        # drop trailing zero rows / columns
        nz = np.argwhere(c != 0.0)
        if nz.size == 0:
            c = np.zeros((1, 1))
        else:
            c = c[: nz[:, 0].max() + 1, : nz[:, 1].max() + 1]
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @classmethod
    def const(cls, value: float) -> "Poly2":
        return cls(np.array([[value]]))

    @classmethod
    def q(cls) -> "Poly2":
        return cls(np.array([[0.0], [1.0]]))

    @classmethod
    def p(cls) -> "Poly2":
        return cls(np.array([[0.0, 1.0]]))

    @classmethod
    def of_q(cls, f: ScalarFunction) -> "Poly2":
        if not f.is_polynomial:
            raise ValueError("of_q requires a polynomial")
        return cls(np.array(f.coeffs or (0.0,)).reshape(-1, 1))

    @classmethod
    def of_p(cls, f: ScalarFunction) -> "Poly2":
        if not f.is_polynomial:
            raise ValueError("of_p requires a polynomial")
        return cls(np.array(f.coeffs or (0.0,)).reshape(1, -1))

    def __call__(self, q, p):
        return npoly.polyval2d(q, p, self.c)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.c)

    def dq(self) -> "Poly2":
        return Poly2(npoly.polyder(self.c, axis=0)) if self.c.shape[0] > 1 else Poly2()

    def dp(self) -> "Poly2":
        return Poly2(npoly.polyder(self.c, axis=1)) if self.c.shape[1] > 1 else Poly2()

    def _coerce(self, other) -> "Poly2":
        return other if isinstance(other, Poly2) else Poly2.const(float(other))

    def __add__(self, other) -> "Poly2":
        other = self._coerce(other)
        n = max(self.c.shape[0], other.c.shape[0])
        m = max(self.c.shape[1], other.c.shape[1])
        out = np.zeros((n, m))
        out[: self.c.shape[0], : self.c.shape[1]] += self.c
        out[: other.c.shape[0], : other.c.shape[1]] += other.c
        return Poly2(out)

    __radd__ = __add__

    def __neg__(self) -> "Poly2":
        return Poly2(-self.c)

    def __sub__(self, other) -> "Poly2":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Poly2":
        return self._coerce(other) - self

    def __mul__(self, other) -> "Poly2":
        if isinstance(other, Poly2):
            return Poly2(convolve2d(self.c, other.c))
        return Poly2(self.c * float(other))

    __rmul__ = __mul__

    def __truediv__(self, value: float) -> "Poly2":
        return Poly2(self.c / float(value))

    def allclose(self, other, atol: float = 1e-12) -> bool:
        d = self - other
        return bool(np.all(np.abs(d.c) <= atol))

    def to_list(self) -> list:
        return self.c.tolist()

    @classmethod
    def from_list(cls, rows) -> "Poly2":
        return cls(np.array(rows, dtype=float))

    def __repr__(self) -> str:
        terms = []
        for (i, j), v in np.ndenumerate(self.c):
            if v:
                mono = "".join(s for s in (f"q^{i}" if i > 1 else ("q" if i else ""),
                                           f"p^{j}" if j > 1 else ("p" if j else "")))
                terms.append(f"{v:g}{'*' + mono if mono else ''}")
        return "Poly2(" + (" + ".join(terms) or "0") + ")"


def bracket(f: Poly2, g: Poly2) -> Poly2:
    """Poisson bracket {f, g} = f_q g_p - g_q f_p."""
    return f.dq() * g.dp() - g.dq() * f.dp()


def hamiltonian_field(h: Poly2) -> tuple[Poly2, Poly2]:
    """Components (dh/dp, -dh/dq) of the Hamiltonian vector field {., h}."""
    return h.dp(), -h.dq()


def hessian_det(f: Poly2) -> Poly2:
    return f.dq().dq() * f.dp().dp() - f.dq().dp() * f.dq().dp()
