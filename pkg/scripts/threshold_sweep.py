"""Matching threshold vs. number of subspaces, and softmax temperature vs. accuracy."""
from dataclasses import replace

from _common import base_config, mean_std, parser
from disco_fcit.orchestrator import run_scenario
from disco_fcit.ssa import ActivationPolicy

TAUS = (0.3, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99)
EPSILONS = (0.005, 0.01, 0.05, 0.1, 0.5, 1.0)


def main():
    args = parser(__doc__).parse_args()
    cfg = base_config(args.config)
    print(f"{'tau':>5} {'subspaces':>10} {'Last':>8}")
    for tau in TAUS:
        runs = [run_scenario(replace(cfg, tau=tau), s) for s in range(args.seeds)]
        n = mean_std([len(r.cache) for r in runs])[0]
        print(f"{tau:>5} {n:>10.1f} {mean_std([r.last for r in runs])[0]:8.2f}")
    print(f"\n{'eps':>6} {'Last':>8}")
    for eps in EPSILONS:
        pol = ActivationPolicy(cfg.activation.kind, eps)
        runs = [run_scenario(replace(cfg, activation=pol), s) for s in range(args.seeds)]
        print(f"{eps:>6} {mean_std([r.last for r in runs])[0]:8.2f}")


if __name__ == "__main__":
    main()
