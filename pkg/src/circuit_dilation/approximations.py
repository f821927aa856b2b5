"""Hamiltonian approximations of the noise.

Two routes to the stochastic dilations:

* Wong-Zakai: replace dB by the derivative of a piecewise-linear
  interpolant B^(n); the random ODEs converge to the Stratonovich SDE.
* Transmission-line assembly: partial sums of thermal oscillator
  coordinates, Q^(N)(t) = N^{-1/2} sum_{k <= Nt} q_k, tend to Wiener
  processes with bracket {Q^(N)(t), P^(N)(t)} = floor(Nt)/N.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np
from scipy import stats
from scipy.integrate import trapezoid

from .functions import Poly2
from .noise import ChannelSpec, CounterNoise, NoisePath
from .sde import PolyField, SdeSystem, integrate_path


# Wong-Zakai ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SmoothNoise:
    """Piecewise-linear interpolant of a base path on n equal intervals."""

    base: NoisePath
    n: int

    def __post_init__(self):
        if self.base.n_steps % self.n:
            raise ValueError("refinement must divide the base step count")

    @property
    def T(self) -> float:
        return self.base.dt * self.base.n_steps

    @property
    def h(self) -> float:
        return self.T / self.n

    def nodes(self) -> np.ndarray:
        """B at t_j = j T / n, shape (n + 1, n_ch)."""
        return self.base.coarsen(self.base.n_steps // self.n).brownian()

    def slopes(self) -> np.ndarray:
        """dB/dt on each interval, shape (n, n_ch)."""
        return np.diff(self.nodes(), axis=0) / self.h

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        nodes = self.nodes()
        grid = np.linspace(0.0, self.T, self.n + 1)
        return np.stack([np.interp(t, grid, nodes[:, a]) for a in range(nodes.shape[1])], axis=-1)


def _rk4_random_ode(w: PolyField, sigmas, slopes, h, x0, substeps):
    """RK4 for x' = w(x) + sum_a sigma_a(x) slope_a on each interval.

    ``slopes`` has shape (n, n_ch, n_paths); returns node states (n + 1, 2, n_paths).
    """
    n = slopes.shape[0]
    x = np.array(x0, dtype=float)
    out = np.empty((n + 1,) + x.shape)
    out[0] = x
    dt = h / substeps

    def f(t, y, s):
        v = np.array(w(t, y[0], y[1]))
        for a, sig in enumerate(sigmas):
            v = v + np.array(sig(t, y[0], y[1])) * s[a]
        return v

    t = 0.0
    for j in range(n):
        s = slopes[j]
        for _ in range(substeps):
            k1 = f(t, x, s)
            k2 = f(t + dt / 2, x + dt / 2 * k1, s)
            k3 = f(t + dt / 2, x + dt / 2 * k2, s)
            k4 = f(t + dt, x + dt * k3, s)
            x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += dt
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"RK4 blow-up at refinement n={n}")
        out[j + 1] = x
    return out


@dataclass
class WongZakaiResult:
    n_list: list
    errors: np.ndarray          # (len(n_list), n_paths) sup over nodes vs Stratonovich
    terminal_errors: np.ndarray  # (len(n_list), n_paths)
    ito_gap: np.ndarray         # (n_paths,) terminal |x^(n_max) - x_Ito|
    correction_integral: np.ndarray  # (n_paths,) |int of Ito correction| along the path

    def monotone_fraction(self) -> float:
        """Fraction of paths with e_{2n} < e_n at every doubling."""
        ok = np.all(np.diff(self.errors, axis=0) < 0, axis=0)
        return float(ok.mean())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "median_error", "mean_error", "max_error"])
            for n, e in zip(self.n_list, self.errors):
                w.writerow([n, f"{np.median(e):.10g}", f"{e.mean():.10g}", f"{e.max():.10g}"])


def wong_zakai_compare(H: Poly2, F, x0, T: float = 1.0, n_list=(8, 16, 32, 64, 128),
                       seeds=range(50), base_steps: int = 2**14, substeps: int = 20,
                       seed: int = 0, drive=None, paths: np.ndarray | None = None) -> WongZakaiResult:
    """Random-ODE solutions against the Stratonovich and Itô SDE solutions.

    ``F`` is one generator or a list.  The base Wiener paths (one per entry
    of ``seeds``) come from the counter noise with ``seed`` unless explicit
    increments ``paths`` (base_steps, n_ch, n_paths) are given.  Errors are
    sup-norms over the interpolation nodes t_j = j T / n; the references
    use the Heun scheme on the base grid.
    """
    n_list = sorted(int(n) for n in n_list)
    F_list = [F] if isinstance(F, Poly2) else list(F)
    w = PolyField.hamiltonian(H, drive)
    sigmas = [PolyField.hamiltonian(f) for f in F_list]
    channels = ChannelSpec.plain(len(sigmas))
    strat = SdeSystem.from_stratonovich(w, sigmas, channels)
    # the Itô SDE with the same coefficients, in Stratonovich form
    ito = SdeSystem.from_stratonovich(_ito_as_strat(w, sigmas), sigmas, channels)
    dt = T / base_steps
    if paths is None:
        noise = CounterNoise(seed, channels, dt)
        inc = noise.block(list(seeds), base_steps)
    else:
        inc = np.asarray(paths, dtype=float)
    n_paths = inc.shape[2]
    x0 = np.broadcast_to(np.asarray(x0, dtype=float).reshape(2, -1), (2, n_paths)).copy()
    ref = integrate_path(strat, x0, inc, dt, "heun")
    ref_ito = integrate_path(ito, x0, inc, dt, "heun")
    brown = np.concatenate([np.zeros((1,) + inc.shape[1:]), np.cumsum(inc, axis=0)])
    errors, terminal = [], []
    x_last = None
    for n in n_list:
        if base_steps % n:
            raise ValueError("every n must divide base_steps")
        stride = base_steps // n
        nodes = brown[::stride]
        slopes = np.diff(nodes, axis=0) / (T / n)
        xs = _rk4_random_ode(w, sigmas, slopes, T / n, x0, substeps)
        diff = np.abs(xs - ref[::stride]).max(axis=1)
        errors.append(diff.max(axis=0))
        terminal.append(np.linalg.norm(xs[-1] - ref[-1], axis=0))
        x_last = xs[-1]
    gap = np.linalg.norm(x_last - ref_ito[-1], axis=0)
    corr = ito_correction_integral(sigmas, ref, dt)
    return WongZakaiResult(n_list, np.array(errors), np.array(terminal), gap, corr)


def _ito_as_strat(w: PolyField, sigmas) -> PolyField:
    """Stratonovich drift of the Itô SDE dx = w dt + sigma dW."""
    out = w
    for s in sigmas:
        cq = s.fq * s.fq.dq() + s.fp * s.fq.dp()
        cp = s.fq * s.fp.dq() + s.fp * s.fp.dp()
        out = out + PolyField(-0.5 * cq, -0.5 * cp)
    return out


def ito_correction_integral(sigmas, traj: np.ndarray, dt: float) -> np.ndarray:
    """|int_0^T 1/2 sum (sigma . grad) sigma dt| along each path of ``traj`` (n+1, 2, n_paths)."""
    total = np.zeros(traj.shape[1:])
    for s in sigmas:
        cq = s.fq * s.fq.dq() + s.fp * s.fq.dp()
        cp = s.fq * s.fp.dq() + s.fp * s.fp.dp()
        vals = np.array([cq(traj[:, 0], traj[:, 1]), cp(traj[:, 0], traj[:, 1])])
        total += 0.5 * trapezoid(vals, dx=dt, axis=1)
    return np.linalg.norm(total, axis=0)


# transmission-line assembly -------------------------------------------------

@dataclass(frozen=True)
class AssemblyParams:
    L0: float = 1.0
    C0: float = 1.0
    kT: float = 1.0        # k_B times temperature
    marginal: str = "gaussian"   # or "uniform" (same variance)

    @property
    def var_q(self) -> float:
        return self.C0 * self.kT

    @property
    def var_p(self) -> float:
        return self.L0 * self.kT


def _draw(rng: np.random.Generator, var: float, shape, marginal: str) -> np.ndarray:
    sd = np.sqrt(var)
    if marginal == "gaussian":
        return rng.normal(0.0, sd, size=shape)
    if marginal == "uniform":
        a = np.sqrt(3.0) * sd
        return rng.uniform(-a, a, size=shape)
    raise ValueError(f"unknown marginal {marginal!r}")


def bracket_value(N: int, t) -> np.ndarray:
    """{Q^(N)(t), P^(N)(t)} = floor(N t) / N."""
    return np.floor(N * np.asarray(t, dtype=float) + 1e-12) / N


def bracket_sup_error(N: int) -> Fraction:
    """sup_{t <= 1} |floor(N t)/N - t|, exact.

    On [k/N, (k+1)/N) the gap t - k/N rises to its supremum 1/N at the left
    limit of each jump, so the sup is the largest left-limit gap.
    """
    return max(Fraction(j, N) - Fraction(j - 1, N) for j in range(1, N + 1))


@dataclass(frozen=True, eq=False)
class OscillatorAssembly:
    N: int
    q: np.ndarray
    p: np.ndarray
    params: AssemblyParams

    @property
    def count(self) -> int:
        return self.q.shape[-1]

    def Q(self, t) -> np.ndarray:
        return _partial(self.q, self.N, t)

    def P(self, t) -> np.ndarray:
        return _partial(self.p, self.N, t)

    def bracket(self, t) -> np.ndarray:
        return bracket_value(self.N, t)


def _partial(x, N, t):
    k = np.floor(N * np.asarray(t, dtype=float) + 1e-12).astype(int)
    if np.any(k > x.shape[-1]):
        raise ValueError("time beyond the assembly horizon")
    cs = np.concatenate([np.zeros(x.shape[:-1] + (1,)), np.cumsum(x, axis=-1)], axis=-1)
    return cs[..., k] / np.sqrt(N)


def sample_assembly(N: int, horizon: float, params: AssemblyParams = AssemblyParams(),
                    seed: int = 0, replicates: int | None = None) -> OscillatorAssembly:
    """floor(N horizon) thermal oscillators (per replicate if ``replicates``)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    count = int(np.floor(N * horizon + 1e-12))
    rng = np.random.default_rng([seed, N])
    shape = (count,) if replicates is None else (replicates, count)
    q = _draw(rng, params.var_q, shape, params.marginal)
    p = _draw(rng, params.var_p, shape, params.marginal)
    return OscillatorAssembly(N, q, p, params)


@dataclass
class CltReport:
    N: int
    replicates: int
    horizon: int
    marginal: str
    var_target: float
    var_direct: float          # Var(Q(1)) across replicates
    var_pooled: float          # from all unit increments
    var_rel_error: float       # pooled estimate vs target
    corr_QP: float             # correlation of Q(1), P(1) across replicates
    corr_tolerance: float
    ks_statistic: float        # normalized unit increments vs N(0, 1)
    ks_pvalue: float
    lag1_corr: float
    bracket_sup_error: float   # sup_{t<=1} |b(t) - t|

    def to_dict(self) -> dict:
        return {k: (float(v) if isinstance(v, (np.floating, float)) else v)
                for k, v in asdict(self).items()}


def clt_tests(N: int, params: AssemblyParams = AssemblyParams(), replicates: int = 1000,
              horizon: int = 1, seed: int = 0, chunk: int = 100) -> CltReport:
    """Statistics of Q^(N), P^(N) over independent assemblies.

    Each replicate covers ``horizon`` unit time intervals; the unit
    increments Q(j+1) - Q(j) are i.i.d. within and across replicates, so
    they are pooled for the variance, KS and lag-1 statistics.
    """
    if replicates < 1000:
        raise ValueError("at least 1000 replicates required")
    incs, Q1, P1, lag = [], [], [], []
    for c0 in range(0, replicates, chunk):
        r = min(chunk, replicates - c0)
        rng = np.random.default_rng([seed, N, c0])
        q = _draw(rng, params.var_q, (r, horizon, N), params.marginal)
        p = _draw(rng, params.var_p, (r, horizon, N), params.marginal)
        dq = q.sum(axis=2) / np.sqrt(N)         # (r, horizon) unit increments
        dp = p.sum(axis=2) / np.sqrt(N)
        Q1.append(dq[:, 0])
        P1.append(dp[:, 0])
        incs.append(dq.ravel())
        if horizon > 1:
            lag.append(np.stack([dq[:, :-1].ravel(), dq[:, 1:].ravel()]))
    Q1 = np.concatenate(Q1)
    P1 = np.concatenate(P1)
    inc = np.concatenate(incs)
    target = params.var_q * float(bracket_value(N, 1.0))
    var_pooled = float(np.mean(inc ** 2))
    ks = stats.kstest(inc / np.sqrt(params.var_q), "norm")
    lag1 = float(np.corrcoef(np.concatenate(lag, axis=1))[0, 1]) if lag else float("nan")
    return CltReport(
        N=N, replicates=replicates, horizon=horizon, marginal=params.marginal,
        var_target=target, var_direct=float(np.var(Q1, ddof=1)), var_pooled=var_pooled,
        var_rel_error=abs(var_pooled - target) / target,
        corr_QP=float(np.corrcoef(Q1, P1)[0, 1]), corr_tolerance=3.0 / np.sqrt(replicates),
        ks_statistic=float(ks.statistic), ks_pvalue=float(ks.pvalue), lag1_corr=lag1,
        bracket_sup_error=float(bracket_sup_error(N)),
    )


def clt_study(N_list=(4, 16, 64), params: AssemblyParams = AssemblyParams(marginal="uniform"),
              replicates: int = 1000, horizon: int = 2000, seed: int = 0) -> dict:
    reports = [clt_tests(N, params, replicates, horizon, seed) for N in N_list]
    ks = [r.ks_statistic for r in reports]
    return {"reports": [r.to_dict() for r in reports],
            "ks_strictly_decreasing": bool(all(b < a for a, b in zip(ks, ks[1:])))}


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")
