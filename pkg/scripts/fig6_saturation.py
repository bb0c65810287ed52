"""Fixed group size (N = 10): every scheme saturates as SNR grows.

Writes one CSV per scheme and prints the high-SNR slope of each curve.
"""

import argparse
import pathlib

from ibcdof.cli import RATE_COLUMNS, curve_rows, write_csv
from ibcdof.experiments import ExperimentConfig, dof_slope, run_rate_curve

SCHEMES = ("max-snr", "min-inr", "max-sinr", "min-iam", "random", "two-stage:2:5", "tdma1", "tdma2")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=4)
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path("results/fig6"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for scheme in SCHEMES:
        cfg = ExperimentConfig(K=4, n_r=3, scheme=scheme, schedule="fixed:10", trials=args.trials, seed=args.seed, threads=args.threads)
        curve = run_rate_curve(cfg)
        with open(args.out / f"{scheme.replace(':', '_')}.csv", "w") as f:
            write_csv(f, RATE_COLUMNS, curve_rows(curve), [f"seed={args.seed}"])
        print(f"{scheme:>14s}  slope(last 3 points) = {dof_slope(curve, 3):.3f}")


if __name__ == "__main__":
    main()
