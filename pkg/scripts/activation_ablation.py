"""Effect of the activation-factor rule used at inference."""
from dataclasses import replace

from _common import base_config, mean_std, parser
from disco_fcit.orchestrator import run_scenario
from disco_fcit.ssa import POLICIES, ActivationPolicy


def main():
    args = parser(__doc__).parse_args()
    cfg = base_config(args.config)
    print(f"{'policy':<12} {'Last':>13} {'Avg':>13}")
    for kind in POLICIES:
        pol = ActivationPolicy(kind, cfg.activation.temperature)
        runs = [run_scenario(replace(cfg, activation=pol), s) for s in range(args.seeds)]
        last, avg = mean_std([r.last for r in runs]), mean_std([r.avg for r in runs])
        print(f"{kind:<12} {last[0]:6.2f}±{last[1]:5.2f} {avg[0]:6.2f}±{avg[1]:5.2f}")


if __name__ == "__main__":
    main()
