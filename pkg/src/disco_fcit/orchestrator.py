"""End-to-end federated continual run: stages, rounds, evaluation, artifacts."""
from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import bench
from .aggregators import AggregatorSpec, AggregatorState, fed_avg, fed_opt
from .bench import HOM, SyntheticTask, compose_scenario, make_task_family, stream
from .client import ClientModel, local_train, predict, predict_class
from .identity import EncoderSpec, encode, local_token
from .lowrank import LowRankAdapter, adapter_product
from .metrics import ResultsMatrix, avg_metric, forgetting, last_metric, mean_forgetting
from .server import FRESH, DynamicCache, save_cache, select_client_subspace, server_round
from .ssa import ActivationPolicy, activations, assemble

log = logging.getLogger(__name__)

DISCO = "DISCO"
FINETUNE = "FinetuneBaseline"


@dataclass
class ScenarioConfig:
    mode: str = HOM
    num_tasks: int = 4
    stage_plan: Optional[list] = None  # default: task s at stage s
    n_clients: int = 50
    clients_per_round: int = 5
    rounds_per_stage: int = 10
    beta: float = 1.0
    d_in: int = 16
    n_classes: int = 8
    n_train: int = 1000
    n_test: int = 200
    noise: float = 0.1

    def plan(self) -> list[list[int]]:
        if self.stage_plan is not None:
            return [list(p) for p in self.stage_plan]
        return [[t] for t in range(self.num_tasks)]


@dataclass
class TrainConfig:
    lr: float = 0.5
    epochs: int = 20
    init_scale: float = 0.01
    base_scale: float = 0.1


@dataclass
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    aggregator: AggregatorSpec = field(default_factory=AggregatorSpec)
    activation: ActivationPolicy = field(default_factory=ActivationPolicy)
    train: TrainConfig = field(default_factory=TrainConfig)
    tau: float = 0.9
    rank: int = 8
    encoder_dim: int = 64
    mode: str = DISCO
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    log_activations: bool = False
    out: Optional[str] = None

    def __post_init__(self):
        if self.mode not in (DISCO, FINETUNE):
            raise ValueError(f"unknown run mode {self.mode!r}")
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        # accept a flat "epsilon" as shorthand for the softmax temperature
        act = dict(data.pop("activation", {}))
        if "epsilon" in data:
            act["temperature"] = data.pop("epsilon")
        return cls(scenario=ScenarioConfig(**data.pop("scenario", {})),
                   aggregator=AggregatorSpec(**data.pop("aggregator", {})),
                   activation=ActivationPolicy(**act),
                   train=TrainConfig(**data.pop("train", {})),
                   **data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunResult:
    matrix: ResultsMatrix
    cache: Optional[DynamicCache]
    shared_adapter: Optional[LowRankAdapter]
    rounds: list = field(default_factory=list)
    activations: list = field(default_factory=list)
    cache_history: list = field(default_factory=list)  # cache after every round
    family: list = field(default_factory=list)

    @property
    def last(self) -> float:
        return last_metric(self.matrix)

    @property
    def avg(self) -> float:
        return avg_metric(self.matrix)

    @property
    def mean_forgetting(self) -> float:
        return mean_forgetting(self.matrix)

    def metrics(self) -> dict:
        return {"last": self.last, "avg": self.avg, "forgetting": forgetting(self.matrix)}


def _accuracy(pred, labels) -> float:
    return 100.0 * float(np.mean(pred == labels))


def evaluate_disco(task: SyntheticTask, base, cache: DynamicCache, policy: ActivationPolicy,
                   encoder: EncoderSpec, trace: Optional[list] = None, stage: int = 0) -> float:
    directions = cache.token_directions()
    memo: dict[bytes, tuple] = {}
    correct = 0
    for i, text in enumerate(task.test.instructions):
        q = encode(text, encoder)
        key = q.tobytes()
        if key not in memo:
            alpha = activations(directions @ q, policy)  # unit vectors: dot == cosine
            memo[key] = alpha, assemble(cache, alpha)
        alpha, delta = memo[key]
        pred = predict_class(predict(base, delta, task.test.x[i]))
        correct += int(pred == task.test.labels[i])
        if trace is not None:
            for j, a in enumerate(alpha):
                trace.append((stage, f"{task.name}:{i}", j, float(a)))
    return 100.0 * correct / len(task.test)


def evaluate_shared(task: SyntheticTask, base, adapter: Optional[LowRankAdapter]) -> float:
    delta = np.zeros_like(base) if adapter is None else adapter_product(adapter)
    return _accuracy(predict_class(predict(base, delta, task.test.x)), task.test.labels)


def run_scenario(config: RunConfig, seed: int) -> RunResult:
    sc = config.scenario
    family = make_task_family(sc.num_tasks, sc.d_in, sc.n_classes, seed,
                              n_train=sc.n_train, n_test=sc.n_test, noise=sc.noise)
    schedule = compose_scenario(family, sc.mode, sc.plan(), sc.beta, seed,
                                n_clients=sc.n_clients, clients_per_round=sc.clients_per_round,
                                rounds_per_stage=sc.rounds_per_stage)
    encoder = EncoderSpec(config.encoder_dim)
    base = stream(seed, bench.BASE).normal(0.0, config.train.base_scale,
                                           size=(sc.n_classes, sc.d_in))
    C, d_in, r = sc.n_classes, sc.d_in, config.rank

    cache = DynamicCache(tau=config.tau)
    shared: Optional[LowRankAdapter] = None
    shared_state: Optional[AggregatorState] = None
    result = RunResult(ResultsMatrix(), None, None, family=family)

    for s in range(len(schedule.stages)):
        sample_rng = stream(seed, bench.SAMPLE, s)
        for rnd in range(schedule.rounds_per_stage):
            selected = sorted(int(c) for c in sample_rng.choice(
                schedule.n_clients, schedule.clients_per_round, replace=False))
            fresh = LowRankAdapter.fresh(C, d_in, r, stream(seed, bench.INIT, s, rnd),
                                         config.train.init_scale)
            updates, routing = [], []
            for c in selected:
                shard = schedule.shard(s, c)
                if not shard.indices:
                    routing.append("skip")
                    continue
                data = family[shard.task].train.subset(shard.indices)
                if config.mode == DISCO:
                    slot = select_client_subspace(cache, local_token(data.instructions, encoder))
                    start = fresh if slot is FRESH else cache.entries[slot].adapter
                    slot = None if slot is FRESH else slot
                else:
                    slot = None
                    start = fresh if shared is None else shared
                model = ClientModel(base, start, lr=config.train.lr, epochs=config.train.epochs)
                updates.append(local_train(model, data, client_id=c, trained_slot=slot,
                                           encoder=encoder))
                routing.append("new" if slot is None and config.mode == DISCO else
                               ("shared" if slot is None else str(slot)))

            if config.mode == DISCO:
                cache = server_round(updates, cache, config.aggregator, stage=s)
                size = len(cache)
                result.cache_history.append(cache)
            elif updates:
                params = [u.adapter for u in updates]
                weights = [u.sample_count for u in updates]
                if shared is None:
                    shared = fed_avg(params, weights)
                    shared_state = AggregatorState.zeros_like(shared)
                else:
                    shared, shared_state = fed_opt(shared, params, weights,
                                                   config.aggregator, shared_state)
                size = 1
            else:
                size = 0 if shared is None else 1
            result.rounds.append((s, rnd, selected, routing, size))
            log.debug("stage %d round %d clients %s -> %s", s, rnd, selected, routing)

        seen = schedule.tasks_through(s)
        new = [family[t].name for t in seen[len(result.matrix.tasks):]]
        trace = result.activations if (config.log_activations and s == len(schedule.stages) - 1) else None
        row = []
        for t in seen:
            if config.mode == DISCO and len(cache):
                row.append(evaluate_disco(family[t], base, cache, config.activation,
                                          encoder, trace, s))
            else:
                row.append(evaluate_shared(family[t], base, shared))
        result.matrix.append(row, new)
        log.info("stage %d: %s", s, " ".join(f"{v:.1f}" for v in row))

    result.cache = cache if config.mode == DISCO else None
    result.shared_adapter = shared
    return result


def write_artifacts(result: RunResult, config: RunConfig, seed: int, out: str) -> None:
    os.makedirs(out, exist_ok=True)
    result.matrix.to_csv(os.path.join(out, "results_matrix.csv"))
    with open(os.path.join(out, "metrics.json"), "w") as fh:
        json.dump(result.metrics(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out, "rounds.csv"), "w") as fh:
        fh.write("stage,round,clientIds,matchedEntry,cacheSize\n")
        for s, rnd, clients, routing, size in result.rounds:
            fh.write(f"{s},{rnd},{' '.join(map(str, clients))},{' '.join(routing)},{size}\n")
    if result.activations:
        with open(os.path.join(out, "activations.csv"), "w") as fh:
            fh.write("stage,testId,entry,alpha\n")
            for s, tid, j, a in result.activations:
                fh.write(f"{s},{tid},{j},{a!r}\n")
    with open(os.path.join(out, "config.json"), "w") as fh:
        json.dump({**config.to_dict(), "seed": seed}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if result.cache is not None:
        save_cache(result.cache, os.path.join(out, "cache.json"))
