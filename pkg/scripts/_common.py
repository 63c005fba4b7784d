import argparse
import statistics

from disco_fcit.orchestrator import RunConfig


def parser(doc):
    p = argparse.ArgumentParser(description=doc)
    p.add_argument("--config", help="base JSON config (defaults if omitted)")
    p.add_argument("--seeds", type=int, default=5)
    return p


def base_config(path):
    return RunConfig.load(path) if path else RunConfig()


def mean_std(xs):
    return statistics.mean(xs), (statistics.stdev(xs) if len(xs) > 1 else 0.0)
