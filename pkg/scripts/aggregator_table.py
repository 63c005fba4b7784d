"""DISCO under different server aggregation rules."""
from dataclasses import replace

from _common import base_config, mean_std, parser
from disco_fcit.aggregators import KINDS
from disco_fcit.orchestrator import run_scenario


def main():
    p = parser(__doc__)
    p.add_argument("--server-lr", type=float, default=None,
                   help="override the server learning rate of the adaptive rules")
    args = p.parse_args()
    cfg = base_config(args.config)
    print(f"{'aggregator':<11} {'Last':>13} {'Avg':>13}")
    for kind in KINDS:
        spec = replace(cfg.aggregator, kind=kind)
        if args.server_lr is not None:
            spec = replace(spec, server_lr=args.server_lr)
        runs = [run_scenario(replace(cfg, aggregator=spec), s) for s in range(args.seeds)]
        last, avg = mean_std([r.last for r in runs]), mean_std([r.avg for r in runs])
        print(f"{kind:<11} {last[0]:6.2f}±{last[1]:5.2f} {avg[0]:6.2f}±{avg[1]:5.2f}")


if __name__ == "__main__":
    main()
