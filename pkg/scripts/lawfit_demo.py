"""Fit the scaling law to synthetic noisy observations and report parameter recovery.

Usage: python scripts/lawfit_demo.py [--noise 0.01] [--seed 0]
"""

import argparse
import itertools

import numpy as np

from cooldown.lawfit import DataPoint, LawParams, fit, predict

TRUE = LawParams(400.0, 0.34, 410.0, 0.28, 1.69)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--noise", type=float, default=0.01, help="log-normal sigma of the multiplicative noise")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    ns, ds = np.logspace(7, 9, 5), np.logspace(9, 11, 5)
    pts = [DataPoint(n, d, predict(TRUE, n, d) * float(np.exp(args.noise * rng.standard_normal())))
           for n, d in itertools.product(ns, ds)]
    rep = fit(pts)
    for k, want in zip(("A", "alpha", "B", "beta", "E"), TRUE.as_tuple()):
        got = getattr(rep.params, k)
        print(f"{k:>5}: fitted {got:12.6g}  true {want:10.6g}  rel err {abs(got - want) / want:8.2%}")
    print(f"objective {rep.objective:.3e}, {rep.n_restarts_used} refined starts")
    for w in rep.warnings:
        print("warning:", w)


if __name__ == "__main__":
    main()
