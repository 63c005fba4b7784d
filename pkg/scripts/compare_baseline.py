"""DISCO vs. the single-adapter Finetune baseline, Hom- and Het-FCIT."""
from dataclasses import replace

from _common import base_config, mean_std, parser
from disco_fcit.orchestrator import DISCO, FINETUNE, run_scenario

HET_PLAN = [[0, 1], [2, 3], [0, 1, 2, 3], [1, 3]]


def main():
    args = parser(__doc__).parse_args()
    cfg = base_config(args.config)
    het = replace(cfg, scenario=replace(cfg.scenario, mode="HetFCIT", stage_plan=HET_PLAN))
    print(f"{'scenario':<9} {'method':<17} {'Last':>13} {'Avg':>13} {'forgetting':>13}")
    for name, sc_cfg in (("HomFCIT", cfg), ("HetFCIT", het)):
        for mode in (FINETUNE, DISCO):
            runs = [run_scenario(replace(sc_cfg, mode=mode), s) for s in range(args.seeds)]
            cols = [mean_std([getattr(r, k) for r in runs]) for k in ("last", "avg", "mean_forgetting")]
            print(f"{name:<9} {mode:<17} " + " ".join(f"{m:6.2f}±{sd:5.2f}" for m, sd in cols))


if __name__ == "__main__":
    main()
