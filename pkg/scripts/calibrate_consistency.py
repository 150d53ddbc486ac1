"""Monte Carlo calibration of the desk-scale consistency thresholds.

Runs every start against every seed (no round-robin) and prints median,
90th percentile and the count of runs off by more than 1, per start.

    python3 scripts/calibrate_consistency.py --seeds 100 --T 5000
    python3 scripts/calibrate_consistency.py --tune 10 --until 10
    python3 scripts/calibrate_consistency.py --fisher 1.3333333333
"""
import argparse
import time

import numpy as np

from recest.engine import run_trajectory
from recest.estimators import TuningSchedule, make_student_ar1
from recest.models import ARModel, StudentInnovation


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, default=3.0)
    ap.add_argument("--theta", type=float, default=0.5)
    ap.add_argument("--T", type=int, default=5000)
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--starts", type=float, nargs="+", default=[-0.2, 0.1, 0.7])
    ap.add_argument("--tune", type=float, default=None, help="constant c_t on a prefix")
    ap.add_argument("--until", type=int, default=10)
    ap.add_argument("--fisher", type=float, default=None, help="override the innovation information")
    ap.add_argument("--burn-in", type=int, default=0)
    args = ap.parse_args()

    tuning = TuningSchedule.constant_prefix([args.tune], args.until) if args.tune else TuningSchedule()
    model = ARModel(1, StudentInnovation(args.alpha), burn_in=args.burn_in)
    proc = make_student_ar1(args.alpha, tuning=tuning, fisher=args.fisher)
    print(f"alpha={args.alpha:g} theta={args.theta:g} T={args.T} seeds={args.seeds} "
          f"tuning={tuning.values[:1] or 'none'} x{tuning.until} fisher={proc.info['fisher']:.6g}")
    print(f"{'start':>7} {'median':>9} {'p90':>9} {'max':>9} {'>1':>4} {'sec':>6}")
    for start in args.starts:
        t0 = time.perf_counter()
        err = np.array([abs(run_trajectory(model, proc, [args.theta], [start], args.T, s)
                            .final.theta_hat[0] - args.theta) for s in range(args.seeds)])
        print(f"{start:7.2f} {np.median(err):9.4f} {np.percentile(err, 90):9.4f} "
              f"{err.max():9.3g} {int(np.sum(err > 1)):4d} {time.perf_counter() - t0:6.1f}")


if __name__ == "__main__":
    main()
