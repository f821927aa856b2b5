"""Command-line front end.

Exit codes: 0 all checks passed, 1 a check failed, 2 input could not be
parsed, 3 I/O error.  Every run writes ``manifest.json`` with the resolved
configuration next to its artifacts.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .circuit import PhaseSpaceModel, dumps_model, loads_model
from .netlist import REFERENCE_NETLIST, NetlistError, compile_text

log = logging.getLogger("circuit_dilation")

EXIT_OK, EXIT_CHECK, EXIT_PARSE, EXIT_IO = 0, 1, 2, 3
OUT_ENV = "CIRCUIT_DILATION_OUT"


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    command: str = "compile"
    netlist: str | None = None
    out: str = "out"
    seed: int = 0
    threads: int | None = None
    scheme: str = "heun"
    dt: float = 1e-3
    T: float = 1.0
    n_paths: int = 100
    x0: list = field(default_factory=lambda: [1.0, 0.0])
    save_stride: int = 1
    dilation: str = "wiener"
    c: float = 1.0
    ell: float = 1.0
    gamma: float = 1.0
    drift_paths: int = 0
    N: int = 40
    m: int | None = None
    hbar: float = 1.0
    alpha: float = 1.0
    qdt: float = 0.01
    approx: str | None = None
    case: str = "multiplicative"
    seeds: int = 50
    replicates: int = 1000
    horizon: int = 2000


def _load_model(path: str | None) -> tuple[PhaseSpaceModel, str]:
    if path is None:
        return compile_text(REFERENCE_NETLIST), "<reference>"
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(str(exc)) from exc
    if text.lstrip().startswith("{"):
        try:
            return loads_model(text), path
        except (ValueError, KeyError, TypeError) as exc:
            raise NetlistError(f"invalid model JSON: {exc}") from exc
    return compile_text(text), path


def _write(out_dir: str, name: str, text: str) -> str:
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


# subcommands ---------------------------------------------------------------

def cmd_compile(cfg: RunConfig, model, outputs) -> bool:
    outputs.append(_write(cfg.out, "model.json", dumps_model(model) + "\n"))
    return True


def _system_for(cfg: RunConfig, model):
    from .circuit import drift_field
    from .dilation import (DilationError, build_symplectic_dilation, build_wiener_dilation,
                           circuit_drift)
    from .sde import FunctionField, SdeSystem
    if cfg.dilation == "wiener":
        return build_wiener_dilation(model, cfg.c, cfg.ell)[1]
    if cfg.dilation == "symplectic":
        return build_symplectic_dilation(model, cfg.gamma)[1]
    if cfg.dilation == "none":
        try:
            return SdeSystem.from_ito(circuit_drift(model), [])
        except DilationError:
            return SdeSystem.from_ito(FunctionField(lambda t, q, p: drift_field(model, t, q, p)), [])
    raise ValueError(f"unknown dilation {cfg.dilation!r}")


def cmd_simulate(cfg: RunConfig, model, outputs) -> bool:
    from .sde import simulate_ensemble
    system = _system_for(cfg, model)
    store = simulate_ensemble(system, cfg.x0, cfg.T, cfg.dt, cfg.n_paths, cfg.seed,
                              cfg.scheme, cfg.save_stride, cfg.threads)
    path = os.path.join(cfg.out, "trajectories.csv")
    store.to_csv(path)
    outputs.append(path)
    return True


def cmd_dilate(cfg: RunConfig, model, outputs) -> bool:
    from .dilation import build_symplectic_dilation, build_wiener_dilation, residual_report
    wd, _ = build_wiener_dilation(model, cfg.c, cfg.ell)
    sd, _ = build_symplectic_dilation(model, cfg.gamma)
    outputs.append(_write(cfg.out, "dilation.json",
                          _dump({"wiener": wd.to_dict(), "symplectic": sd.to_dict()})))
    rep = residual_report(model, cfg.c, cfg.ell, cfg.gamma)
    tol = 1e-10
    vals = [rep["wiener"]["r0"], rep["wiener"]["rv"], rep["wiener"]["drift_error"],
            rep["symplectic"]["drift_error"], rep["symplectic"]["divergence_error"]]
    rep["tolerance"] = tol
    rep["pass"] = bool(max(vals) < tol)
    outputs.append(_write(cfg.out, "residuals.json", _dump(rep)))
    return rep["pass"]


def cmd_verify(cfg: RunConfig, model, outputs) -> bool:
    from .circuit import dissipation
    from .noise import CounterNoise, standard_normals
    from .sde import simulate_ensemble
    from .verify import (VerificationReport, bracket_series_csv, empirical_covariation,
                         empirical_drift, extended_bracket, plain_bracket, propagate_tangent)
    if cfg.dilation not in ("wiener", "symplectic"):
        raise ValueError("verify needs --dilation wiener or symplectic")
    system = _system_for(cfg, model)
    n_steps = int(round(cfg.T / cfg.dt))
    noise = CounterNoise(cfg.seed, system.channels, cfg.dt)
    inc = noise.block(range(cfg.n_paths), n_steps)
    stride = max(1, n_steps // 200)
    state = propagate_tangent(system, inc, cfg.x0, cfg.dt, cfg.scheme, record_every=stride)
    bracket_path = os.path.join(cfg.out, "brackets.csv")
    bracket_series_csv(state, bracket_path)
    outputs.append(bracket_path)
    report = VerificationReport()
    pb = plain_bracket(state)
    if cfg.dilation == "wiener":
        report.add("plain_bracket", 1.0, float(np.max(np.abs(pb - 1))), 5e-3,
                   bool(np.max(np.abs(pb - 1)) < 5e-3))
    else:
        eb = extended_bracket(state)
        report.add("extended_bracket", 1.0, float(np.max(np.abs(eb - 1))), 1e-2,
                   bool(np.max(np.abs(eb - 1)) < 1e-2))
        g = dissipation(model, np.linspace(-2, 2, 9), np.linspace(-2, 2, 9))
        if np.ptp(g) < 1e-12:
            target = float(np.exp(-g[0] * cfg.T))
            err = float(np.max(np.abs(pb - target)))
            report.add("plain_bracket_liouville", target, err, 5e-3, err < 5e-3)
    if cfg.drift_paths > 0:
        from .dilation import circuit_drift, covariation
        n = cfg.drift_paths
        x0 = standard_normals(cfg.seed + 1, 0, 2 * n).reshape(n, 2)
        store = simulate_ensemble(system, x0, 20 * 1e-3, 1e-3, n, cfg.seed, "heun",
                                  threads=cfg.threads)
        v = circuit_drift(model)
        res = empirical_drift(store).compare(lambda q, p: np.array(v(0.0, q, p)))
        report.add("empirical_drift", ">=0.95 of bins within 3 SE", res["fraction_within"],
                   0.95, res["fraction_within"] >= 0.95)
        target = covariation(_dilation_F(cfg, model))
        res = empirical_covariation(store).compare(lambda q, p: target(q, p))
        report.add("empirical_covariation", ">=0.95 of bins within 3 SE",
                   res["fraction_within"], 0.95, res["fraction_within"] >= 0.95)
    outputs.append(_write(cfg.out, "verify_report.json", report.to_json() + "\n"))
    return report.passed


def _dilation_F(cfg, model):
    from .dilation import build_symplectic_dilation, build_wiener_dilation
    if cfg.dilation == "wiener":
        return build_wiener_dilation(model, cfg.c, cfg.ell)[0].F
    sd = build_symplectic_dilation(model, cfg.gamma)[0]
    return list(sd.F) + list(sd.G)


def cmd_quantum(cfg: RunConfig, model, outputs) -> bool:
    from .quantum import (build_quantum_dilation, fock_model, master_equation_evolve,
                          verify_thm3)
    fk = fock_model(cfg.N, cfg.m, cfg.hbar, model.kinetic.L0, _capacitance(model))
    dil = build_quantum_dilation(model, fk)
    rep = verify_thm3(dil)
    ok = rep["pass"]
    if cfg.T > 0:
        psi = fk.coherent(cfg.alpha)
        series = master_equation_evolve(dil, np.outer(psi, psi.conj()), cfg.T, cfg.qdt)
        path = os.path.join(cfg.out, "expectations.csv")
        series.to_csv(path)
        outputs.append(path)
        rep["master"] = {"trace_drift_rate": series.trace_drift_rate(),
                         "min_eig": float(series.min_eig.min()),
                         "pass": bool(series.trace_drift_rate() < 1e-9
                                      and series.min_eig.min() >= -1e-6)}
        ok = ok and rep["master"]["pass"]
    outputs.append(_write(cfg.out, "quantum_report.json", _dump(rep)))
    return bool(ok)


def _capacitance(model) -> float:
    """C0 for a linear capacitor (Phi_C' = q / C0); 1 when there is none."""
    f = model.capacitor
    if f.is_zero or f.degree != 1 or abs(f.coeffs[0]) > 0:
        return 1.0
    return 1.0 / f.coeffs[1]


def cmd_approx(cfg: RunConfig, model, outputs) -> bool:
    from .approximations import AssemblyParams, clt_study, wong_zakai_compare
    from .functions import Poly2
    if cfg.approx == "wz":
        q, p = Poly2.q(), Poly2.p()
        H = 0.5 * (q * q + p * p)
        F = q if cfg.case == "additive" else 0.5 * q * q + 0.1 * p * p
        res = wong_zakai_compare(H, F, cfg.x0, seeds=range(cfg.seeds), seed=cfg.seed)
        path = os.path.join(cfg.out, "wz_errors.csv")
        res.to_csv(path)
        outputs.append(path)
        frac = res.monotone_fraction()
        rep = {"case": cfg.case, "n_list": res.n_list, "monotone_fraction": frac,
               "median_errors": np.median(res.errors, axis=1).tolist(),
               "per_doubling_fraction": (np.diff(res.errors, axis=0) < 0).mean(axis=1).tolist(),
               "median_ito_gap": float(np.median(res.ito_gap)), "pass": frac >= 0.9}
        if cfg.case != "additive":
            gap_ok = bool(np.all(res.ito_gap > 5 * res.errors[-1]))
            rep["ito_gap_ok"] = gap_ok
            rep["pass"] = rep["pass"] and gap_ok
        outputs.append(_write(cfg.out, "wz_report.json", _dump(rep)))
        return rep["pass"]
    if cfg.approx == "clt":
        rep = clt_study(params=AssemblyParams(marginal="uniform"), replicates=cfg.replicates,
                        horizon=cfg.horizon, seed=cfg.seed)
        ok = rep["ks_strictly_decreasing"] and all(
            r["var_rel_error"] < 0.05 and abs(r["corr_QP"]) < r["corr_tolerance"]
            for r in rep["reports"])
        rep["pass"] = bool(ok)
        outputs.append(_write(cfg.out, "clt_report.json", _dump(rep)))
        return bool(ok)
    raise ValueError("approx needs 'wz' or 'clt'")


COMMANDS = {"compile": cmd_compile, "simulate": cmd_simulate, "dilate": cmd_dilate,
            "verify": cmd_verify, "quantum": cmd_quantum, "approx": cmd_approx}


# argument handling -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./out)")
    common.add_argument("--config", help="JSON file whose keys override the flags")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--scheme", choices=["heun", "euler"])
    sim.add_argument("--dt", type=float)
    sim.add_argument("--T", type=float)
    sim.add_argument("--n-paths", dest="n_paths", type=int)
    sim.add_argument("--x0", type=float, nargs=2)
    sim.add_argument("--dilation", choices=["none", "wiener", "symplectic"])
    sim.add_argument("--c", type=float)
    sim.add_argument("--ell", type=float)
    sim.add_argument("--gamma", type=float)

    ap = argparse.ArgumentParser(prog="circuit-dilation", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    net = lambda p: p.add_argument("netlist", nargs="?", help="netlist or model JSON "
                                   "(default: built-in reference circuit)")
    net(sub.add_parser("compile", parents=[common], help="netlist -> model JSON"))
    s = sub.add_parser("simulate", parents=[common, sim], help="trajectory ensemble CSV")
    net(s)
    s.add_argument("--save-stride", dest="save_stride", type=int)
    d = sub.add_parser("dilate", parents=[common, sim], help="dilation JSON and residuals")
    net(d)
    v = sub.add_parser("verify", parents=[common, sim], help="bracket/drift/covariation report")
    net(v)
    v.add_argument("--drift-paths", dest="drift_paths", type=int,
                   help="ensemble size for the binned drift check (0 = skip)")
    qp = sub.add_parser("quantum", parents=[common], help="Fock-space identity report")
    net(qp)
    qp.add_argument("--N", type=int)
    qp.add_argument("--m", type=int)
    qp.add_argument("--hbar", type=float)
    qp.add_argument("--T", type=float, help="master-equation horizon (0 = skip)")
    qp.add_argument("--dt", dest="qdt", type=float)
    qp.add_argument("--alpha", type=float)
    a = sub.add_parser("approx", parents=[common], help="Wong-Zakai or CLT study")
    a.add_argument("approx", choices=["wz", "clt"])
    a.add_argument("--case", choices=["multiplicative", "additive"])
    a.add_argument("--seeds", type=int)
    a.add_argument("--x0", type=float, nargs=2)
    a.add_argument("--replicates", type=int)
    a.add_argument("--horizon", type=int)
    return ap


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=ns.command)
    cfg.out = os.environ.get(OUT_ENV, cfg.out)
    if ns.command == "quantum":
        cfg.T = 5.0
    known = set(asdict(cfg))
    for k, v in vars(ns).items():
        if k in known and v is not None:
            setattr(cfg, k, v)
    if getattr(ns, "config", None):
        try:
            with open(ns.config, encoding="utf-8") as fh:
                overrides = json.load(fh)
        except OSError as exc:
            raise InputError(str(exc)) from exc
        except json.JSONDecodeError as exc:
            raise NetlistError(f"config is not valid JSON: {exc}") from exc
        unknown = set(overrides) - known
        if unknown:
            raise NetlistError(f"unknown config keys: {sorted(unknown)}")
        for k, v in overrides.items():
            setattr(cfg, k, v)
    if cfg.threads is None:
        cfg.threads = os.cpu_count() or 1
    return cfg


def run(cfg: RunConfig) -> int:
    started = time.strftime("%Y-%m-%dT%H:%M:%S")
    try:
        model, source = _load_model(cfg.netlist)
    except NetlistError as exc:
        print(f"{cfg.netlist or '<reference>'}:{exc}", file=sys.stderr)
        return EXIT_PARSE
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    outputs: list[str] = []
    try:
        os.makedirs(cfg.out, exist_ok=True)
        ok = COMMANDS[cfg.command](cfg, model, outputs)
        manifest = {"version": __version__, "started": started, "source": source,
                    "config": asdict(cfg), "seed": cfg.seed, "outputs": outputs,
                    "passed": bool(ok)}
        _write(cfg.out, "manifest.json", _dump(manifest))
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK
    for p in outputs:
        log.info("wrote %s", p)
    if not ok:
        print(f"{cfg.command}: checks failed (see {cfg.out})", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(ns)
    except NetlistError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
