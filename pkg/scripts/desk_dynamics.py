"""Cooldown dynamics on the noisy quadratic: drop fraction, cosine parity, shapes, SWA.

Usage: python scripts/desk_dynamics.py [--seeds 10] [--csv out.csv]
"""

import argparse
import csv
import sys

import numpy as np

from cooldown import experiments as ex


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--swa-h", type=int, default=ex.SWA_H)
    ap.add_argument("--csv", help="write per-seed results here")
    args = ap.parse_args(argv)

    fields = ["seed", "drop_fraction", "cooldown_1sqrt", "cooldown_linear", "cosine", "swa_final", "swa_rows_below"]
    out = []
    for s in range(args.seeds):
        d = ex.seed_dynamics(s, args.swa_h)
        good, total = d.swa_rows()
        out.append([s, d.drop_fraction, d.cooldown.final.eval_loss, d.linear.final.eval_loss,
                    d.cosine.final.eval_loss, d.trunk.final.swa_eval_loss, f"{good}/{total}"])
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(fields)
    for row in out:
        w.writerow([f"{x:.6g}" if isinstance(x, float) else x for x in row])
    arr = np.array([r[1:6] for r in out], dtype=float)
    print(f"\nmean: drop {arr[:, 0].mean():.3f}  1-sqrt {arr[:, 1].mean():.5f}  linear {arr[:, 2].mean():.5f}  "
          f"cosine {arr[:, 3].mean():.5f}  swa {arr[:, 4].mean():.5f}")
    if args.csv:
        with open(args.csv, "w", newline="") as f:
            cw = csv.writer(f, lineterminator="\n")
            cw.writerow(fields)
            cw.writerows(out)


if __name__ == "__main__":
    main()
