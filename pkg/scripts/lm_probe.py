"""Linear interpolation between pre- and post-cooldown weights of the small language model.

Usage: python scripts/lm_probe.py [--seeds 10] [--points 21]
"""

import argparse

from cooldown import experiments as ex


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--points", type=int, default=21)
    args = ap.parse_args(argv)
    for s in range(args.seeds):
        path, pre = ex.lm_probe(s, args.points)
        losses = [loss for _, loss in path]
        print(f"seed {s}: pre {pre:.4f}  post {losses[-1]:.4f}  path max {max(losses):.4f}  "
              f"monotone {all(a >= b for a, b in zip(losses, losses[1:]))}")
        print("   " + " ".join(f"{loss:.3f}" for loss in losses))


if __name__ == "__main__":
    main()
