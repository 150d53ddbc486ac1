"""Condition verdicts for the shipped procedures, one line each.

    python3 scripts/condition_report.py [--T-check 2000] [--seed 0]
"""
import argparse
import time

import numpy as np

from recest import conditions as cond
from recest.estimators import (huber_phi, least_squares_ar_spec, make_campbell_robust,
                               make_iid_mle, make_student_ar1, sign_phi, student_phi)
from recest.models import ARModel, GaussianInnovation, StudentInnovation, normal_location, student_location


def show(label, reports, t0):
    cells = "  ".join(f"{k}={r.verdict}" for k, r in reports.items())
    print(f"{label:28s} {cells}  [{time.perf_counter() - t0:.1f}s]")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T-check", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    T, seed = args.T_check, args.seed
    theta = np.array([0.5])
    ar_t = ARModel(1, StudentInnovation(3))
    ar_n = ARModel(1, GaussianInnovation())

    for label, model in (("normal location mle", normal_location()),
                         ("cauchy location mle", student_location(1))):
        t0 = time.perf_counter()
        proc = make_iid_mle(model)
        reps = cond.check_C1_C2_C3(model, proc, [0.0], which=("C1",), seed=seed)
        reps.update(cond.check_corollary41(model, proc, [0.0]))
        show(label, reps, t0)

    t0 = time.perf_counter()
    proc = make_student_ar1(3)
    reps = cond.check_C1_C2_C3(ar_t, proc, theta, T_check=T, seed=seed)
    reps.update(cond.check_ar_conditions(ar_t, proc, theta, T_check=T, seed=seed, student=True))
    reps["G_positivity"] = cond.check_G_positivity(student_phi(3), StudentInnovation(3))
    show("student_ar1 alpha=3", reps, t0)

    t0 = time.perf_counter()
    reps = cond.check_ar_conditions(ar_t, proc.flipped(), theta, T_check=T, seed=seed, student=True)
    reps.update(cond.check_C1_C2_C3(ar_t, proc.flipped(), theta, which=("C1",), seed=seed))
    show("student_ar1 flipped", reps, t0)

    for label, phi, model in (("campbell sign / gaussian", sign_phi, ar_n),
                              ("campbell huber / student", huber_phi(), ar_t)):
        t0 = time.perf_counter()
        reps = cond.check_ar_conditions(model, make_campbell_robust(phi), theta, T_check=T, seed=seed)
        reps["G_positivity"] = cond.check_G_positivity(phi, model.innovation)
        show(label, reps, t0)

    t0 = time.perf_counter()
    path = cond.stationary_path(ar_n, theta, T, seed + 1)
    show("least squares / gaussian", cond.check_corollary42(least_squares_ar_spec(), ar_n, path, theta), t0)


if __name__ == "__main__":
    main()
