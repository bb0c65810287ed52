"""Empirical alignment-measure statistics against their closed-form bounds."""

import argparse

from ibcdof.experiments import validate_bounds


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--K", type=int, default=4)
    ap.add_argument("--Nr", type=int, default=3)
    ap.add_argument("--N-list", default="1,10,100,1000")
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=4)
    args = ap.parse_args()
    rep = validate_bounds(args.K, args.Nr, [int(x) for x in args.N_list.split(",")], args.trials, args.seed, threads=args.threads)
    print(f"{'N':>6s} {'lambda':>6s} {'cdf':>8s} {'bound':>8s} {'mean':>9s} {'bound':>9s}  pass")
    for r in rep.rows:
        print(f"{r.N:6d} {r.lam:6.2f} {r.empirical_cdf:8.4f} {r.bound_cdf:8.4f} {r.empirical_min_mean:9.2e} {r.bound_mean:9.2e}  {r.passed}")
    print(f"\n{'N':>6s} {'SNR':>5s} {'loss':>8s} {'bound':>8s}  pass")
    for r in rep.loss_rows:
        print(f"{r.N:6d} {r.snr_db:5.0f} {r.empirical_loss:8.3f} {r.bound:8.3f}  {r.passed}")
    print("\nall pass:", rep.all_pass)


if __name__ == "__main__":
    main()
