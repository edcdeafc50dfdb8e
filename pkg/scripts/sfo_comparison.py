"""Schedule-free AdamW against the constant + cooldown schedule on the noisy quadratic.

Each method is tuned over a shared LR grid by its mean final loss across seeds.
Usage: python scripts/sfo_comparison.py [--seeds 10]
"""

import argparse

import numpy as np

from cooldown import experiments as ex


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--lrs", default=",".join(str(x) for x in ex.LR_GRID), help="comma-separated LR grid")
    args = ap.parse_args(argv)
    grid = tuple(float(x) for x in args.lrs.split(","))
    study = ex.sfo_study(list(range(args.seeds)), grid)

    print("mean final eval loss per LR")
    print("method".ljust(16) + "".join(f"{lr:>12g}" for lr in grid))
    for name, finals in study.finals.items():
        print(name.ljust(16) + "".join(f"{m:>12.5f}" for m in finals.mean(axis=1)))
    print()
    for name, lr in study.best_lr.items():
        print(f"{name:16s} best lr {lr:g}  finals {np.array2string(study.best(name), precision=5)}")
    lo, hi = study.best("sfo0.9,0.95"), study.best("sfo0.95,0.99")
    cd = study.best("cooldown")
    print(f"\n(0.95, 0.99) beats (0.9, 0.95) in {int(np.sum(hi < lo))}/{args.seeds} seeds")
    print(f"cooldown <= best SFO in {int(np.sum(cd <= np.minimum(lo, hi)))}/{args.seeds} seeds")


if __name__ == "__main__":
    main()
