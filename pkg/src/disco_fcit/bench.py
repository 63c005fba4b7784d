"""Synthetic continual instruction-tuning tasks and federated scenarios.

Every task is a linear multi-class problem ``label = argmax(W* x + noise)``
paired with instruction templates over a task-specific vocabulary.  A
scenario spreads each stage's training data over a pool of clients with a
Dirichlet split.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

SYLLABLES = ("ka", "lo", "mi", "ne", "ru", "si", "ta", "vo", "pe", "zu",
             "da", "fi", "go", "hu", "ja", "ko", "bi", "xe", "wy", "qa")

HOM = "HomFCIT"
HET = "HetFCIT"


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for a named sub-stream of a run seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(keys)))


# stream identifiers
VOCAB, TASK, PARTITION, SAMPLE, INIT, BASE = range(6)


@dataclass(frozen=True, eq=False)
class Examples:
    x: np.ndarray
    labels: np.ndarray
    instructions: tuple[str, ...]

    def __len__(self):
        return len(self.labels)

    def subset(self, indices) -> "Examples":
        idx = np.asarray(indices, dtype=np.int64)
        return Examples(self.x[idx], self.labels[idx],
                        tuple(self.instructions[i] for i in idx))


@dataclass(frozen=True, eq=False)
class SyntheticTask:
    task_id: int
    name: str
    vocab: tuple[str, ...]
    templates: tuple[tuple[str, ...], ...]
    w_star: np.ndarray
    noise: float
    train: Examples
    test: Examples

    @property
    def n_classes(self) -> int:
        return self.w_star.shape[0]


def _make_words(rng, count, taken: set) -> list[str]:
    words = []
    while len(words) < count:
        w = "".join(rng.choice(SYLLABLES, size=3))
        if w not in taken:
            taken.add(w)
            words.append(w)
    return words


def _sample_examples(rng, task_templates, w_star, noise, n) -> Examples:
    C, d_in = w_star.shape
    x = rng.standard_normal((n, d_in))
    logits = x @ w_star.T + noise * rng.standard_normal((n, C))
    labels = np.argmax(logits, axis=1)
    picks = rng.integers(len(task_templates), size=n)
    instructions = []
    for p in picks:
        words = list(task_templates[p])
        rng.shuffle(words)
        instructions.append(" ".join(words))
    return Examples(x, labels, tuple(instructions))


def make_task_family(count: int, d_in: int = 16, n_classes: int = 8, seed: int = 0, *,
                     n_train: int = 1000, n_test: int = 200, noise: float = 0.1,
                     n_anchor: int = 12, n_variant: int = 4, shared_pool: int = 6,
                     shared_per_task: int = 2) -> list[SyntheticTask]:
    """Generate ``count`` tasks with disjoint core vocabularies.

    A template is the task's anchor words, ``shared_per_task`` words from a
    pool common to all tasks and one of ``n_variant`` variant words.
    """
    if count < 2:
        raise ValueError("need at least two tasks")
    if not (d_in >= n_classes >= 2):
        raise ValueError("require d_in >= n_classes >= 2")
    if n_anchor + n_variant < 8:
        raise ValueError("core vocabulary must have at least 8 words")
    if n_train < 1 or n_test < 1:
        raise ValueError("need training and test examples")

    vrng = stream(seed, VOCAB)
    taken: set[str] = set()
    pool = _make_words(vrng, shared_pool, taken)
    tasks = []
    for t in range(count):
        core = _make_words(vrng, n_anchor + n_variant, taken)
        anchors, variants = core[:n_anchor], core[n_anchor:]
        shared = [pool[i] for i in sorted(vrng.choice(shared_pool, shared_per_task, replace=False))]
        templates = tuple(tuple(anchors + shared + [v]) for v in variants)

        trng = stream(seed, TASK, t)
        w_star = trng.standard_normal((n_classes, d_in))
        train = _sample_examples(trng, templates, w_star, noise, n_train)
        test = _sample_examples(trng, templates, w_star, noise, n_test)
        tasks.append(SyntheticTask(t, f"task{t}", tuple(core), templates,
                                   w_star, noise, train, test))
    return tasks


def dirichlet_partition(n_samples: int, n_clients: int, beta: float,
                        rng: np.random.Generator) -> np.ndarray:
    """Per-client sample counts from a Dirichlet(beta) split; sums to ``n_samples``."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    if n_clients < 1:
        raise ValueError("need at least one client")
    if n_clients == 1:
        return np.array([n_samples], dtype=np.int64)
    p = rng.dirichlet(np.full(n_clients, beta))
    raw = p * n_samples
    counts = np.floor(raw).astype(np.int64)
    remainder = n_samples - int(counts.sum())
    if remainder > 0:
        frac = raw - counts
        order = np.argsort(-frac, kind="stable")
        counts[order[:remainder]] += 1
    return counts


@dataclass(frozen=True)
class Shard:
    stage: int
    client: int
    task: int
    indices: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class ScenarioSchedule:
    mode: str
    stages: tuple[tuple[int, ...], ...]
    n_clients: int
    clients_per_round: int
    rounds_per_stage: int
    beta: float
    shards: dict = field(repr=False)  # (stage, client) -> Shard

    def shard(self, stage: int, client: int) -> Shard:
        return self.shards[(stage, client)]

    def tasks_through(self, stage: int) -> list[int]:
        """Distinct tasks seen up to ``stage`` in order of first appearance."""
        seen: list[int] = []
        for plan in self.stages[:stage + 1]:
            for t in plan:
                if t not in seen:
                    seen.append(t)
        return seen


def compose_scenario(family: Sequence[SyntheticTask], mode: str,
                     stage_plan: Sequence[Sequence[int]], beta: float, seed: int, *,
                     n_clients: int = 50, clients_per_round: int = 5,
                     rounds_per_stage: int = 10) -> ScenarioSchedule:
    if mode not in (HOM, HET):
        raise ValueError(f"unknown scenario mode {mode!r}")
    if clients_per_round > n_clients:
        raise ValueError("cannot sample more clients than the pool holds")
    stages = tuple(tuple(int(t) for t in plan) for plan in stage_plan)
    for plan in stages:
        if not plan:
            raise ValueError("each stage needs at least one task")
        if mode == HOM and len(plan) != 1:
            raise ValueError("HomFCIT stages hold exactly one task")
        for t in plan:
            if not 0 <= t < len(family):
                raise ValueError(f"stage references unknown task {t}")

    shards = {}
    for s, plan in enumerate(stages):
        groups: dict[int, list[int]] = {t: [] for t in plan}
        for c in range(n_clients):
            groups[plan[c % len(plan)]].append(c)
        for t in plan:
            clients = groups[t]
            rng = stream(seed, PARTITION, s, t)
            n = len(family[t].train)
            counts = dirichlet_partition(n, len(clients), beta, rng)
            perm = rng.permutation(n)
            bounds = np.concatenate([[0], np.cumsum(counts)])
            for i, c in enumerate(clients):
                idx = tuple(int(j) for j in np.sort(perm[bounds[i]:bounds[i + 1]]))
                shards[(s, c)] = Shard(s, c, t, idx)
    return ScenarioSchedule(mode, stages, n_clients, clients_per_round,
                            rounds_per_stage, beta, shards)


# -- persistence -------------------------------------------------------------

def _examples_json(ex: Examples) -> list[dict]:
    return [{"x": ex.x[i].tolist(), "label": int(ex.labels[i]), "instruction": ex.instructions[i]}
            for i in range(len(ex))]


def _examples_from_json(items) -> Examples:
    return Examples(np.array([e["x"] for e in items], dtype=np.float64),
                    np.array([e["label"] for e in items], dtype=np.int64),
                    tuple(e["instruction"] for e in items))


def bench_to_dict(family: Sequence[SyntheticTask],
                  schedule: Optional[ScenarioSchedule] = None) -> dict:
    out = {"tasks": [{
        "id": t.task_id,
        "name": t.name,
        "vocab": list(t.vocab),
        "templates": [list(x) for x in t.templates],
        "W_star": t.w_star.tolist(),
        "noise": t.noise,
        "train": _examples_json(t.train),
        "test": _examples_json(t.test),
    } for t in family]}
    if schedule is not None:
        out["shards"] = [{"stage": sh.stage, "client": sh.client, "task": sh.task,
                          "indices": list(sh.indices)}
                         for _, sh in sorted(schedule.shards.items())]
    return out


def family_from_dict(data: dict) -> list[SyntheticTask]:
    return [SyntheticTask(
        task_id=int(t["id"]), name=t.get("name", f"task{t['id']}"),
        vocab=tuple(t["vocab"]),
        templates=tuple(tuple(x) for x in t.get("templates", [])),
        w_star=np.array(t["W_star"], dtype=np.float64), noise=float(t["noise"]),
        train=_examples_from_json(t["train"]), test=_examples_from_json(t["test"]),
    ) for t in data["tasks"]]


def save_bench(path, family, schedule=None) -> None:
    with open(path, "w") as fh:
        json.dump(bench_to_dict(family, schedule), fh)
