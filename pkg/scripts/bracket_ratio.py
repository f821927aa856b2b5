"""Sampling distribution of the median-defect halving ratio of the Wiener dilation.

For linear fields the Heun step map has det M = 1 + det(X)^2 / 4, so the
bracket defect is first order in dt and the halving ratio is 2 up to
sampling noise.  This script splits many paths into blocks of 100 and
prints each block's ratio.
"""
import argparse

import numpy as np

from circuit_dilation.circuit import constant_model
from circuit_dilation.dilation import build_wiener_dilation
from circuit_dilation.noise import CounterNoise
from circuit_dilation.verify import plain_bracket, propagate_tangent


def defects(system, dt, fine_dt, paths, seed):
    factor = int(round(dt / fine_dt))
    n_fine = int(round(1.0 / fine_dt))
    inc = CounterNoise(seed, system.channels, fine_dt).block(paths, n_fine)
    inc = inc.reshape(n_fine // factor, factor, inc.shape[1], len(paths)).sum(axis=1)
    return np.abs(plain_bracket(propagate_tangent(system, inc, [1.0, 0.0], dt)) - 1)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--blocks", type=int, default=10)
    ap.add_argument("--seed", type=int, default=5)
    args = ap.parse_args()
    _, system = build_wiener_dilation(constant_model(1.0, 1.0, 0.2, 0.3))
    paths = list(range(100 * args.blocks))
    a = defects(system, 1e-4, 5e-5, paths, args.seed).reshape(args.blocks, 100)
    b = defects(system, 5e-5, 5e-5, paths, args.seed).reshape(args.blocks, 100)
    ratios = np.median(a, axis=1) / np.median(b, axis=1)
    for k, r in enumerate(ratios):
        print(f"block {k}: ratio {r:.4f} {'>= 2' if r >= 2 else '< 2'}")
    print(f"pooled median ratio {np.median(a) / np.median(b):.4f}, "
          f"mean ratio {a.mean() / b.mean():.4f}, blocks >= 2: {(ratios >= 2).mean():.2f}")


if __name__ == "__main__":
    main()
