"""FLOPs per model and suite savings of cooldown and SWA versus per-length cosine runs.

Usage: python scripts/compute_savings.py [--models data/suite_models.json] [--ratios 10,20,30]
"""

import argparse
import json
from pathlib import Path

from cooldown.compute import flops_per_sequence, load_models, plan_suite, savings

DATA = Path(__file__).resolve().parents[1] / "data"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--models", default=str(DATA / "suite_models.json"))
    ap.add_argument("--ratios", default="10,20,30")
    ap.add_argument("--fraction", type=float, default=0.2, help="cooldown fraction")
    args = ap.parse_args(argv)
    models = load_models(json.loads(Path(args.models).read_text()))
    ratios = [float(x) for x in args.ratios.split(",")]

    print(f"{'model':>8} {'params':>12} {'FLOPs/token':>14} {'/6N':>7}")
    for m in models:
        per_tok = flops_per_sequence(m).total / m.seq_len
        print(f"{m.name:>8} {m.param_count:>12,} {per_tok:>14.4e} {per_tok / (6 * m.param_count):>7.3f}")

    base = plan_suite(models, ratios, "cosine")
    for strat in ("cooldown", "swa"):
        rep = savings(base, plan_suite(models, ratios, strat, args.fraction))
        print(f"{strat:>8}: {rep.alternative_flops:.4e} vs cosine {rep.baseline_flops:.4e} FLOPs, ratio {rep.ratio:.4f}")


if __name__ == "__main__":
    main()
