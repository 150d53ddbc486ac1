"""Command-line front end.

    recest simulate --config exp.json [--seed N] [--out DIR]
    recest estimate --config exp.json [--seed N] [--out DIR] [--stdin]
    recest check    --config exp.json [--seed N] [--out DIR]
    recest figure1  [--seed N] [--out DIR]

Exit codes: 0 success (all requested checks pass), 1 invalid configuration,
2 failure while running, 3 a requested condition check did not pass.
"""
import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import conditions as cond
from .config import figure1_config, load_config, serialize_config
from .engine import (OnlineEstimator, run_ensemble, write_sidecar,
                     write_trajectory_csv)
from .errors import ConfigError, RecestError

log = logging.getLogger("recest")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CHECK = 0, 1, 2, 3

PLOT_STUB = '''"""Plot the figure1_start*.csv trajectories (needs matplotlib)."""
import csv
import glob
import sys

import matplotlib.pyplot as plt

THETA_TRUE = 0.5

for path in sorted(glob.glob(sys.argv[1] + "/figure1_start*.csv" if len(sys.argv) > 1
                             else "figure1_start*.csv")):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    plt.plot([int(r["t"]) for r in rows], [float(r["theta_hat_1"]) for r in rows],
             marker="o", ms=3, label=path)
plt.axhline(THETA_TRUE, color="k", lw=0.8)
plt.xlabel("t")
plt.ylabel("estimate")
plt.legend()
plt.savefig("figure1.png", dpi=150)
'''


def _fmt(x):
    return repr(float(x))


def _jobs(cfg):
    """(start index, start, seed) in the order run_ensemble returns them."""
    if cfg.pairing == "zip":
        return [(i, s, seed) for i, (s, seed) in enumerate(zip(cfg.starts, cfg.seeds))]
    return [(i, s, seed) for i, s in enumerate(cfg.starts) for seed in cfg.seeds]


def cmd_simulate(cfg, out):
    model = cfg.model.build()
    theta = np.array(cfg.model.theta_true)
    files = []
    for seed in cfg.seeds:
        _, data = model.simulate(theta, cfg.T, np.random.default_rng(seed))
        path = out / f"data_seed{seed}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x"])
            for t, x in enumerate(data, 1):
                w.writerow([t, _fmt(x)])
        files.append(path)
        log.info("wrote %s", path)
    return files


def cmd_estimate(cfg, out):
    model = cfg.model.build()
    proc = cfg.procedure.build(model)
    trajs = run_ensemble(model, proc, cfg.model.theta_true, cfg.starts, cfg.T, cfg.seeds,
                         cfg.pairing, cfg.engine, cfg.name)
    theta = np.array(cfg.model.theta_true)
    runs = []
    for (i, start, seed), traj in zip(_jobs(cfg), trajs):
        stem = f"traj_start{i}_seed{seed}"
        write_trajectory_csv(traj, out / f"{stem}.csv")
        write_sidecar(out / f"{stem}.json", cfg.to_dict(), seed, start=list(start))
        final = traj.final.theta_hat
        runs.append({"file": f"{stem}.csv", "start": list(start), "seed": seed,
                     "final": [float(v) for v in final],
                     "error": float(np.linalg.norm(final - theta))})
    summary = {"config": cfg.to_dict(), "runs": runs}
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def cmd_estimate_stream(cfg, stream, sink):
    """Read one observation per line and print ``t,theta_hat...`` after each."""
    model = cfg.model.build()
    proc = cfg.procedure.build(model)
    est = OnlineEstimator(proc, cfg.starts[0], model.presample(), cfg.engine)
    for line in stream:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        theta = est.update(float(line))
        sink.write(",".join([str(est.state.t), *(_fmt(v) for v in theta)]) + "\n")
        sink.flush()


def _skip(cid, reason):
    return cond.ConditionReport(cid, cond.SKIPPED, reason=reason)


def run_checks(cfg, seed):
    """Reports for every requested check, in request order."""
    model = cfg.model.build()
    proc = cfg.procedure.build(model)
    theta = np.array(cfg.model.theta_true)
    opts = cfg.check_options
    grid = opts.grid(theta.size)
    kw = opts.series_kw()
    requested = list(dict.fromkeys(cfg.checks))
    reports = {}
    is_ar = cfg.model.model == "ar"
    has_phi = "phi" in proc.info and is_ar

    general = [c for c in requested if c in ("C1", "C2", "C3")]
    if general:
        hist = None
        if "C1" in general:
            hist = cond.sample_histories(model, proc, theta, n=opts.n_histories, seed=seed)
        reports.update(cond.check_C1_C2_C3(model, proc, theta, grid, hist, T_check=opts.T_check,
                                           seed=seed, tol_margin=opts.tol_margin,
                                           which=tuple(general), **kw))
    if any(c in requested for c in ("I", "II")):
        if cfg.model.model != "iid":
            for c in ("I", "II"):
                reports[c] = _skip(c, "the i.i.d. pair applies to i.i.d. models only")
        else:
            reports.update(cond.check_corollary41(model, proc, theta, grid))
    if any(c in requested for c in ("a", "b", "c")):
        spec = cfg.procedure.linear_spec()
        if spec is None or spec.dim != 1 or cfg.procedure.flip_sign:
            for c in ("a", "b", "c"):
                reports[c] = _skip(c, "needs a scalar linear procedure")
        else:
            path = cond.stationary_path(model, theta, opts.T_check, seed + 1)
            reports.update(cond.check_corollary42(spec, model, path, theta, **kw))
    ar_ids = [c for c in requested if c in ("ArC1", "ArC2", "StArC1", "StArC2")]
    if ar_ids:
        if not has_phi:
            for c in ar_ids:
                reports[c] = _skip(c, "needs a phi-type autoregressive procedure")
        else:
            path = cond.stationary_path(model, theta, opts.T_check, seed + 1)
            if any(c.startswith("Ar") for c in ar_ids):
                reports.update(cond.check_ar_conditions(model, proc, theta, path, grid, **kw))
            if any(c.startswith("St") for c in ar_ids):
                if cfg.procedure.procedure != "student_ar1":
                    for c in ("StArC1", "StArC2"):
                        reports[c] = _skip(c, "Student forms apply to student_ar1 only")
                else:
                    reports.update(cond.check_ar_conditions(model, proc, theta, path, grid,
                                                            student=True, **kw))
    if "G_positivity" in requested:
        if not has_phi:
            reports["G_positivity"] = _skip("G_positivity", "needs a phi-type autoregressive procedure")
        else:
            reports["G_positivity"] = cond.check_G_positivity(proc.info["phi"], model.innovation, grid)
    return [reports[c] for c in requested]


def cmd_check(cfg, out, seed):
    reports = run_checks(cfg, seed)
    lines = []
    for rep in reports:
        with open(out / f"check_{rep.condition}.json", "w") as fh:
            json.dump(rep.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        lines.append({"condition": rep.condition, "verdict": rep.verdict, "margin": rep.margin,
                      "reason": rep.reason})
    with open(out / "checks_summary.json", "w") as fh:
        json.dump(cond._jsonable({"seed": seed, "checks": lines}), fh, indent=2, sort_keys=True)
        fh.write("\n")
    for rep in reports:
        print(f"{rep.condition:13s} {rep.verdict}" + (f"  ({rep.reason})" if rep.reason else ""))
    bad = [r for r in reports if r.verdict not in (cond.PASS, cond.EMPIRICAL_PASS, cond.SKIPPED)]
    return EXIT_CHECK if bad else EXIT_OK


def cmd_figure1(out, seed):
    cfg = figure1_config(seed)
    model = cfg.model.build()
    proc = cfg.procedure.build(model)
    trajs = run_ensemble(model, proc, cfg.model.theta_true, cfg.starts, cfg.T, cfg.seeds,
                         options=cfg.engine, config_id=cfg.name)
    files = []
    for k, traj in enumerate(trajs):
        path = out / f"figure1_start{k}.csv"
        write_trajectory_csv(traj, path)
        files.append(path)
    with open(out / "figure1_config.json", "w") as fh:
        fh.write(serialize_config(cfg))
    (out / "plot_figure1.py").write_text(PLOT_STUB)
    return files


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="use this single seed instead of the config's seeds")
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="recest", description=__doc__.splitlines()[0],
                                     parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("simulate", "write simulated observation paths"),
                           ("estimate", "run the recursion for every start and seed"),
                           ("check", "run the requested condition checks")):
        p = sub.add_parser(name, help=helptext, parents=[common])
        p.add_argument("--config", type=Path, required=True)
        if name == "estimate":
            p.add_argument("--stdin", action="store_true",
                           help="read observations from stdin, print estimates as they arrive")
    sub.add_parser("figure1", help="three 40-step Student AR(1) trajectories", parents=[common])
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; that is a validation error here
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    seed = args.seed
    try:
        if args.command == "figure1":
            cfg = None
        else:
            cfg = load_config(args.config)
            if seed is not None:
                cfg = cfg.with_seeds([seed])
    except (ConfigError, ValueError) as err:
        print(f"error: invalid configuration: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    out = args.out or Path((cfg.output if cfg and cfg.output else None) or "out")
    try:
        if args.command == "estimate" and args.stdin:
            cmd_estimate_stream(cfg, sys.stdin, sys.stdout)
            return EXIT_OK
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "simulate":
            cmd_simulate(cfg, out)
        elif args.command == "estimate":
            summary = cmd_estimate(cfg, out)
            for run in summary["runs"]:
                print(f"{run['file']}: final {run['final']} error {run['error']:.6g}")
        elif args.command == "check":
            return cmd_check(cfg, out, cfg.seeds[0])
        elif args.command == "figure1":
            for path in cmd_figure1(out, 1 if seed is None else seed):
                print(path)
    except (RecestError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
