"""Binned drift and covariation estimates against the circuit identities."""
import argparse
import json
import os

import numpy as np

from circuit_dilation.circuit import constant_model
from circuit_dilation.dilation import (build_symplectic_dilation, build_wiener_dilation,
                                       circuit_drift, covariation, lc_example_system)
from circuit_dilation.noise import standard_normals
from circuit_dilation.sde import simulate_ensemble
from circuit_dilation.verify import empirical_covariation, empirical_drift


def ensemble(system, n, seed):
    x0 = standard_normals(99, 0, 2 * n).reshape(n, 2)
    return simulate_ensemble(system, x0, 0.02, 1e-3, n, seed, "heun")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", default="out/drift")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    model = constant_model(1.0, 1.0, 0.2, 0.3)
    v = circuit_drift(model)
    report = {}
    wd, wsys = build_wiener_dilation(model)
    _, ssys = build_symplectic_dilation(model)
    for name, system in (("wiener", wsys), ("symplectic", ssys)):
        store = ensemble(system, args.paths, args.seed)
        report[f"{name}_drift"] = empirical_drift(store).compare(lambda q, p: np.array(v(0, q, p)))
        if name == "wiener":
            cov = covariation(wd.F)
            report["wiener_covariation"] = empirical_covariation(store).compare(
                lambda q, p: cov(q, p))
    store = ensemble(lc_example_system(), args.paths, args.seed)
    report["lc_covariation"] = empirical_covariation(store).compare(lambda q, p: 0 * q)
    for k, r in report.items():
        print(f"{k:22s} {r['fraction_within']:.3f} of {r['valid_bins']} bins, max z {r['max_z']:.2f}")
    with open(os.path.join(args.out, "drift_report.json"), "w") as fh:
        json.dump(report, fh, indent=2)


if __name__ == "__main__":
    main()
