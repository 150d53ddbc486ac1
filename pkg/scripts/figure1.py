"""Three 40-step Student AR(1) trajectories, printed side by side.

    python3 scripts/figure1.py [--seed N] [--out DIR]

With --out the CSVs, config and a matplotlib stub are written as by
``recest figure1``.
"""
import argparse
from pathlib import Path

from recest.cli import cmd_figure1
from recest.config import figure1_config
from recest.engine import run_ensemble


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()
    cfg = figure1_config(args.seed)
    model = cfg.model.build()
    trajs = run_ensemble(model, cfg.procedure.build(model), cfg.model.theta_true, cfg.starts,
                         cfg.T, cfg.seeds)
    print(" t " + "".join(f"{s[0]:>10.2f}" for s in cfg.starts))
    paths = [tr.theta_path()[:, 0] for tr in trajs]
    for t in range(cfg.T):
        print(f"{t + 1:2d} " + "".join(f"{p[t]:10.4f}" for p in paths))
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        for f in cmd_figure1(args.out, args.seed):
            print("wrote", f)


if __name__ == "__main__":
    main()
