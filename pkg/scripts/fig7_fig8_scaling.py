"""Growing groups: N = P^b lifts MinInr and MaxSinr to slope b; MaxSnr stays flat.

Sweeps 20-40 dB and prints the fitted rate, gain-term and loss-term slopes.
"""

import argparse
import pathlib

from ibcdof.cli import RATE_COLUMNS, curve_rows, write_csv
from ibcdof.experiments import ExperimentConfig, fit_slope, run_rate_curve

SNR = (20.0, 25.0, 30.0, 35.0, 40.0)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=4)
    ap.add_argument("--exponents", default="0.5,1")
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path("results/scaling"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for b in args.exponents.split(","):
        for scheme in ("min-inr", "max-sinr", "max-snr"):
            cfg = ExperimentConfig(
                K=4, n_r=3, scheme=scheme, schedule=f"powerlaw:1:{b}", snr_db=SNR,
                trials=args.trials, seed=args.seed, threads=args.threads,
            )
            c = run_rate_curve(cfg)
            with open(args.out / f"{scheme}_P{b}.csv", "w") as f:
                write_csv(f, RATE_COLUMNS, curve_rows(c), [f"seed={args.seed}"])
            w = len(SNR)
            print(
                f"N=P^{b:<4s} {scheme:>9s}  slope={fit_slope(c.snr_db, c.rate_mean, w):.3f}"
                f"  gain={fit_slope(c.snr_db, c.rate_gain_mean, w):.3f}"
                f"  loss={fit_slope(c.snr_db, c.rate_loss_mean, w):.3f}"
            )


if __name__ == "__main__":
    main()
