"""Command line entry point: ``run``, ``report`` and ``sweep``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import statistics
import sys
from dataclasses import replace

from .metrics import ResultsMatrix, mean_forgetting
from .orchestrator import RunConfig, run_scenario, write_artifacts


def _load_config(path):
    return RunConfig.load(path) if path else RunConfig()


def cmd_run(args) -> int:
    config = _load_config(args.config)
    result = run_scenario(config, args.seed)
    write_artifacts(result, config, args.seed, args.out)
    print(f"last={result.last:.2f} avg={result.avg:.2f} -> {args.out}")
    return 0


def cmd_report(args) -> int:
    with open(os.path.join(args.run, "metrics.json")) as fh:
        metrics = json.load(fh)
    matrix = ResultsMatrix.from_csv(os.path.join(args.run, "results_matrix.csv"))
    print("stage  " + "  ".join(f"{t:>8}" for t in matrix.tasks))
    for i, row in enumerate(matrix.rows):
        print(f"{i:>5}  " + "  ".join(f"{v:8.2f}" for v in row))
    print(f"Last: {metrics['last']:.2f}")
    print(f"Avg:  {metrics['avg']:.2f}")
    print("Forgetting: " + ", ".join(f"{k}={v:.2f}" for k, v in metrics["forgetting"].items()))
    return 0


def cmd_sweep(args) -> int:
    config = _load_config(args.config)
    betas = [float(b) for b in args.betas.split(",")]
    os.makedirs(args.out, exist_ok=True)
    rows = []
    for beta in betas:
        cfg = replace(config, scenario=replace(config.scenario, beta=beta))
        lasts = []
        for seed in range(args.seeds):
            res = run_scenario(cfg, seed)
            write_artifacts(res, cfg, seed, os.path.join(args.out, f"beta{beta}_seed{seed}"))
            rows.append((beta, seed, res.last, res.avg, mean_forgetting(res.matrix)))
            lasts.append(res.last)
        print(f"beta={beta}: Last {statistics.mean(lasts):.2f} over {args.seeds} seeds")
    with open(os.path.join(args.out, "sweep.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["beta", "seed", "last", "avg", "mean_forgetting"])
        w.writerows(rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="disco-fcit", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario and write artifacts")
    run.add_argument("--config", help="JSON run config (defaults if omitted)")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", required=True)
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="print Last/Avg/forgetting of a finished run")
    rep.add_argument("--run", required=True)
    rep.set_defaults(func=cmd_report)

    sw = sub.add_parser("sweep", help="run a config over several betas and seeds")
    sw.add_argument("--config")
    sw.add_argument("--betas", default="0.5,1.0,5.0")
    sw.add_argument("--seeds", type=int, default=5)
    sw.add_argument("--out", default="sweep_out")
    sw.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
