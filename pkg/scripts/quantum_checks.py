"""Lindblad identity residuals over truncation sizes and a master-equation run."""
import argparse
import os

import numpy as np

from circuit_dilation.circuit import PhaseSpaceModel, constant_model
from circuit_dilation.functions import ScalarFunction
from circuit_dilation.quantum import (build_quantum_dilation, classical_linear_oracle,
                                      ehrenfest_error, fock_model, master_equation_evolve,
                                      verify_thm3)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/quantum")
    ap.add_argument("--T", type=float, default=5.0)
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    model = constant_model(1.0, 1.0, 0.2, 0.3)
    nonlinear = PhaseSpaceModel(model.kinetic, capacitor=model.capacitor,
                                resistance=model.resistance,
                                memristance=ScalarFunction.poly([0.3, 0.2], domain=(-1.5, 1000)))
    for label, m in (("constant", model), ("M=0.3+0.2q", nonlinear)):
        for N in (20, 40, 60):
            rep = verify_thm3(build_quantum_dilation(m, fock_model(N)))
            print(f"{label:11s} N={N}: drift q {rep['drift_q_rel']:.1e} p {rep['drift_p_rel']:.1e} "
                  f"noise {max(rep['noise'].values()):.1e} "
                  f"coherent(3) {rep['coherent_defect']['p']:.1e}")
    fk = fock_model(40)
    dil = build_quantum_dilation(model, fk)
    psi = fk.coherent(1.0)
    series = master_equation_evolve(dil, np.outer(psi, psi.conj()), args.T, 0.01, record_every=10)
    series.to_csv(os.path.join(args.out, "expectations.csv"))
    oracle = classical_linear_oracle(1.0, 1.0, 0.2, 0.3, [series.q[0], series.p[0]], series.t)
    print(f"master equation: Ehrenfest rel err {ehrenfest_error(series, oracle):.1e}, "
          f"trace drift {series.trace_drift_rate():.1e}, min eig {series.min_eig.min():.1e}")


if __name__ == "__main__":
    main()
