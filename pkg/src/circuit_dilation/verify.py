"""Numerical certificates of canonicity and of the drift/fluctuation identities.

The tangent flow is propagated with the exact linearization of the
stepping scheme.  For the extended bracket only the running quantity

    C_n = sum_k gamma dt det[S^Q_k(t_n), S^P_k(t_n)]

is needed, and since every sensitivity is pushed forward by the same per
step map M, det[M a, M b] = det(M) det[a, b] gives the O(1) update
C <- det(M) C + gamma dt sum_pairs det[s^Q, s^P].
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .noise import NoisePath
from .sde import LINEARIZED, STEPPERS, SdeSystem, TrajectoryStore


def _det2(m) -> np.ndarray:
    return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]


def _cross(a, b) -> np.ndarray:
    """a[q] b[p] - a[p] b[q] for vectors of shape (2, ...)."""
    return a[0] * b[1] - a[1] * b[0]


@dataclass
class TangentFlowState:
    """Linearized flow of an ensemble along fixed noise paths.

    Arrays carry a trailing path axis.  ``history`` (optional) keeps every
    per-step map and new sensitivity so that the propagated sensitivities
    S_k(t) = M_n ... M_{k+1} s_k can be reconstructed.
    """

    x: np.ndarray                # (2, n_paths)
    J: np.ndarray                # (2, 2, n_paths)
    noise_bracket: np.ndarray    # (n_paths,) accumulated gamma dt det[S^Q, S^P]
    t: float
    step: int
    dt: float
    pairs: tuple = ()
    gamma: float | None = None
    times: list = field(default_factory=list)
    plain_series: list = field(default_factory=list)
    extended_series: list = field(default_factory=list)
    history: list | None = None  # [(M, s)] with M (2,2,n), s (n_ch,2,n)

    def sensitivities(self) -> np.ndarray:
        """S[k, alpha] = d x_t / d dW^alpha_k, shape (n_steps, n_ch, 2, n_paths)."""
        if self.history is None:
            raise ValueError("history was not recorded")
        n_steps = len(self.history)
        n_ch, _, n_paths = self.history[0][1].shape
        out = np.empty((n_steps, n_ch, 2, n_paths))
        prop = np.zeros((2, 2, n_paths))
        prop[0, 0] = prop[1, 1] = 1.0
        for k in range(n_steps - 1, -1, -1):
            M, s = self.history[k]
            out[k] = np.einsum("ijn,ajn->ain", prop, s)
            prop = np.einsum("ijn,jkn->ikn", prop, M)
        return out


def _as_increments(noise) -> np.ndarray:
    if isinstance(noise, NoisePath):
        return noise.increments[:, :, None]
    inc = np.asarray(noise, dtype=float)
    if inc.ndim == 2:
        inc = inc[:, :, None]
    return inc


def propagate_tangent(system: SdeSystem, noise, x0, dt: float | None = None,
                      scheme: str = "heun", t0: float = 0.0, record_every: int = 0,
                      keep_history: bool = False) -> TangentFlowState:
    """Run the scheme together with its linearization.

    ``noise`` is a NoisePath or an increment array (n_steps, n_ch[, n_paths]).
    """
    if isinstance(noise, NoisePath) and dt is None:
        dt = noise.dt
    if dt is None:
        raise ValueError("dt required for raw increments")
    inc = _as_increments(noise)
    n_steps, n_ch, n_paths = inc.shape
    if n_ch != system.n_channels:
        raise ValueError("noise channel count does not match system")
    x = np.array(x0, dtype=float)
    if x.ndim == 1:
        x = np.repeat(x[:, None], n_paths, axis=1)
    channels = system.channels
    pairs = channels.pairs if channels is not None else ()
    gamma = channels.gamma if channels is not None else None
    J = np.zeros((2, 2, n_paths))
    J[0, 0] = J[1, 1] = 1.0
    C = np.zeros(n_paths)
    lin = LINEARIZED[scheme]
    state = TangentFlowState(x, J, C, t0, 0, dt, tuple(pairs), gamma,
                             history=[] if keep_history else None)

    def record():
        state.times.append(state.t)
        state.plain_series.append(_det2(state.J).copy())
        state.extended_series.append(_det2(state.J) + state.noise_bracket)

    if record_every:
        record()
    for k in range(n_steps):
        t = t0 + k * dt
        x_new, M, sens = lin(system, state.x, t, inc[k], dt)
        J_new = np.einsum("ijn,jkn->ikn", M, state.J)
        if not (np.all(np.isfinite(J_new)) and np.all(np.isfinite(x_new))):
            raise FloatingPointError(f"non-finite tangent flow at step {k}")
        if pairs:
            local = np.zeros(n_paths)
            for a, b in pairs:
                local += _cross(sens[a], sens[b])
            state.noise_bracket = _det2(M) * state.noise_bracket + gamma * dt * local
        state.x, state.J = x_new, J_new
        state.step = k + 1
        state.t = t0 + (k + 1) * dt
        if keep_history:
            state.history.append((M, sens))
        if record_every and (k + 1) % record_every == 0:
            record()
    return state


def plain_bracket(state: TangentFlowState) -> np.ndarray:
    """{q_t, p_t} with respect to the initial point: det J_t per path."""
    return _det2(state.J)


def extended_bracket(state: TangentFlowState) -> np.ndarray:
    """det J_t plus the gamma-weighted noise-pair contribution."""
    if not state.pairs:
        raise ValueError("no symplectic pairs declared for this system")
    return _det2(state.J) + state.noise_bracket


def extended_bracket_explicit(state: TangentFlowState) -> np.ndarray:
    """Same quantity summed over reconstructed sensitivities (history needed)."""
    if not state.pairs:
        raise ValueError("no symplectic pairs declared for this system")
    S = state.sensitivities()
    total = _det2(state.J).copy()
    for a, b in state.pairs:
        total += state.gamma * state.dt * _cross(S[:, a].transpose(1, 0, 2),
                                                 S[:, b].transpose(1, 0, 2)).sum(axis=0)
    return total


def bracket_series_csv(state: TangentFlowState, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "path", "plain", "extended"])
        for t, pl, ex in zip(state.times, state.plain_series, state.extended_series):
            for j in range(pl.shape[0]):
                w.writerow([f"{t:.10g}", j, f"{pl[j]:.15g}",
                            f"{ex[j]:.15g}" if state.pairs else ""])


def liouville_defect(system: SdeSystem, gamma_fn, x0, T: float, dt: float,
                     scheme: str = "heun") -> float:
    """|det J_T - exp(-int gamma ds)| along a deterministic trajectory.

    ``system`` must have no diffusion; gamma_fn(q, p) is integrated by the
    trapezoid rule on the step grid.
    """
    n = int(round(T / dt))
    inc = np.zeros((n, system.n_channels, 1))
    step = STEPPERS[scheme]
    x = np.array(x0, dtype=float)[:, None]
    g = np.empty(n + 1)
    g[0] = np.ravel(gamma_fn(x[0], x[1]))[0]
    for k in range(n):
        x = step(system, x, k * dt, inc[k], dt)
        g[k + 1] = np.ravel(gamma_fn(x[0], x[1]))[0]
    state = propagate_tangent(system, inc, x0, dt, scheme)
    return abs(float(plain_bracket(state)[0]) - np.exp(-trapezoid(g, dx=dt)))


# binned estimators --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BinnedField:
    """Per-bin mean and standard error of a sampled quantity."""

    q_edges: np.ndarray
    p_edges: np.ndarray
    count: np.ndarray          # (nb, nb)
    mean: np.ndarray           # (k, nb, nb)
    se: np.ndarray             # (k, nb, nb)
    valid: np.ndarray          # (nb, nb) bool
    samples_q: np.ndarray = field(repr=False)
    samples_p: np.ndarray = field(repr=False)
    bin_index: np.ndarray = field(repr=False)  # flat bin id per sample, -1 outside

    def bin_average(self, func) -> np.ndarray:
        """Average of func(q, p) -> (k, n_samples) over each bin's samples."""
        vals = np.atleast_2d(np.asarray(func(self.samples_q, self.samples_p), dtype=float))
        nb = self.count.shape
        ok = self.bin_index >= 0
        out = np.zeros((vals.shape[0], nb[0] * nb[1]))
        for c in range(vals.shape[0]):
            out[c] = np.bincount(self.bin_index[ok], weights=vals[c][ok], minlength=nb[0] * nb[1])
        with np.errstate(invalid="ignore", divide="ignore"):
            out = out / self.count.reshape(1, -1)
        return out.reshape((vals.shape[0],) + nb)

    def compare(self, target, n_se: float = 3.0) -> dict:
        """Fraction of valid bins (over all components) within n_se standard errors."""
        tgt = self.bin_average(target)
        z = np.abs(self.mean - tgt) / np.where(self.se > 0, self.se, np.inf)
        within = (z <= n_se) | (np.abs(self.mean - tgt) <= 1e-12)
        mask = np.broadcast_to(self.valid, within.shape)
        n_valid = int(mask.sum())
        frac = float(within[mask].mean()) if n_valid else float("nan")
        return {"valid_bins": int(self.valid.sum()), "fraction_within": frac,
                "max_z": float(np.max(np.where(mask, z, 0.0))) if n_valid else float("nan")}


def _pairs_from_store(store: TrajectoryStore):
    x0 = store.states[:, :-1, :].reshape(-1, 2)
    x1 = store.states[:, 1:, :].reshape(-1, 2)
    h = float(store.times[1] - store.times[0])
    return x0, x1 - x0, h


def _binned(q, p, values, bins: int, min_count: int, box=None) -> BinnedField:
    if box is None:
        box = (np.percentile(q, [1, 99]), np.percentile(p, [1, 99]))
    q_edges = np.linspace(box[0][0], box[0][1], bins + 1)
    p_edges = np.linspace(box[1][0], box[1][1], bins + 1)
    iq = np.searchsorted(q_edges, q, side="right") - 1
    ip = np.searchsorted(p_edges, p, side="right") - 1
    inside = (iq >= 0) & (iq < bins) & (ip >= 0) & (ip < bins)
    idx = np.where(inside, iq * bins + ip, -1)
    ok = idx >= 0
    count = np.bincount(idx[ok], minlength=bins * bins).astype(float)
    k = values.shape[0]
    mean = np.zeros((k, bins * bins))
    se = np.zeros((k, bins * bins))
    with np.errstate(invalid="ignore", divide="ignore"):
        for c in range(k):
            s1 = np.bincount(idx[ok], weights=values[c][ok], minlength=bins * bins)
            s2 = np.bincount(idx[ok], weights=values[c][ok] ** 2, minlength=bins * bins)
            m = s1 / count
            var = (s2 / count - m * m) * count / np.maximum(count - 1, 1)
            mean[c] = m
            se[c] = np.sqrt(np.maximum(var, 0.0) / count)
    valid = (count >= min_count).reshape(bins, bins)
    shape = (k, bins, bins)
    return BinnedField(q_edges, p_edges, count.reshape(bins, bins), mean.reshape(shape),
                       se.reshape(shape), valid, q, p, idx)


def empirical_drift(store: TrajectoryStore, bins: int = 20, min_count: int = 30,
                    box=None) -> BinnedField:
    """Binned E[dx | x] / h from consecutive saved states."""
    x, dx, h = _pairs_from_store(store)
    return _binned(x[:, 0], x[:, 1], (dx / h).T, bins, min_count, box)


def empirical_covariation(store: TrajectoryStore, bins: int = 20, min_count: int = 30,
                          box=None) -> BinnedField:
    """Binned E[dq dp | x] / h."""
    x, dx, h = _pairs_from_store(store)
    return _binned(x[:, 0], x[:, 1], (dx[:, 0] * dx[:, 1] / h)[None, :], bins, min_count, box)


# reports ---------------------------------------------------------------

def check(name: str, target, estimate, tolerance, passed: bool) -> dict:
    def clean(v):
        if isinstance(v, np.generic):
            return v.item()
        if isinstance(v, np.ndarray):
            return v.tolist()
        return v
    return {"check": name, "target": clean(target), "estimate": clean(estimate),
            "tolerance": clean(tolerance), "pass": bool(passed)}


@dataclass
class VerificationReport:
    checks: list = field(default_factory=list)

    def add(self, *args, **kw) -> dict:
        item = check(*args, **kw)
        self.checks.append(item)
        return item

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks)

    def to_json(self, path=None) -> str:
        text = json.dumps({"passed": self.passed, "checks": self.checks}, indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text
