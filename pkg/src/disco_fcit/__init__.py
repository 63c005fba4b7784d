"""Desk-scale simulator of federated continual instruction tuning with
dynamic subspace organization and selective activation (DISCO)."""

from .aggregators import AggregatorSpec, AggregatorState, fed_avg, fed_opt, pseudo_gradient
from .bench import compose_scenario, dirichlet_partition, make_task_family
from .client import ClientModel, local_train, predict
from .identity import EncoderSpec, IdentityToken, encode, local_token
from .lowrank import LowRankAdapter, adapter_product, concat_adapters, cosine
from .metrics import ResultsMatrix, avg_metric, forgetting, last_metric
from .orchestrator import RunConfig, run_scenario
from .server import (ClientUpdate, DynamicCache, SubspaceEntry, match_token,
                     merge_global_token, pair_mismatched, select_client_subspace,
                     server_round)
from .ssa import ActivationPolicy, activations, assemble, scores

__all__ = [
    "AggregatorSpec", "AggregatorState", "fed_avg", "fed_opt", "pseudo_gradient",
    "compose_scenario", "dirichlet_partition", "make_task_family",
    "ClientModel", "local_train", "predict",
    "EncoderSpec", "IdentityToken", "encode", "local_token",
    "LowRankAdapter", "adapter_product", "concat_adapters", "cosine",
    "ResultsMatrix", "avg_metric", "forgetting", "last_metric",
    "RunConfig", "run_scenario",
    "ClientUpdate", "DynamicCache", "SubspaceEntry", "match_token", "merge_global_token",
    "pair_mismatched", "select_client_subspace", "server_round",
    "ActivationPolicy", "activations", "assemble", "scores",
]
__version__ = "0.1.0"
