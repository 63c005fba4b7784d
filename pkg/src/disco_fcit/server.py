"""Dynamic knowledge organization on the server.

The server keeps an ordered cache of task subspaces.  Each uploaded client
update is routed to a cache slot purely by its identity token; unmatched
updates are grouped among themselves and become new slots.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .aggregators import AggregatorSpec, AggregatorState, fed_avg, fed_opt
from .identity import IdentityToken
from .lowrank import LowRankAdapter, cosine


@dataclass(frozen=True, eq=False)
class SubspaceEntry:
    adapter: LowRankAdapter
    token: IdentityToken
    created_at_stage: int = 0
    state: Optional[AggregatorState] = None


@dataclass(frozen=True, eq=False)
class DynamicCache:
    entries: tuple[SubspaceEntry, ...] = ()
    tau: float = 0.9

    def __post_init__(self):
        if not (0.0 < self.tau <= 1.0):
            raise ValueError("tau must lie in (0, 1]")
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self):
        return len(self.entries)

    def token_directions(self) -> np.ndarray:
        return np.stack([e.token.direction for e in self.entries])


@dataclass(frozen=True, eq=False)
class ClientUpdate:
    """What a client uploads: adapter, token and sample count. No task label."""

    adapter: LowRankAdapter
    token: IdentityToken
    sample_count: int
    client_id: int
    trained_slot: Optional[int] = None

    def __post_init__(self):
        if self.sample_count != self.token.support:
            raise ValueError("sample_count must equal the token's support")


@dataclass(frozen=True)
class FreshAdapter:
    """Directive telling a client to start a new subspace."""


FRESH = FreshAdapter()


def match_token(token: IdentityToken, cache: DynamicCache) -> Optional[int]:
    """Index of the most similar entry with cosine >= tau, lowest index on ties."""
    direction = token.direction
    best, best_sim = None, -np.inf
    for i, entry in enumerate(cache.entries):
        sim = cosine(direction, entry.token.direction)
        if sim >= cache.tau and sim > best_sim:
            best, best_sim = i, sim
    return best


def _weighted_sum(updates: Sequence[ClientUpdate]) -> tuple[np.ndarray, int]:
    total = 0
    acc = np.zeros_like(updates[0].token.vector)
    for u in updates:
        acc = acc + u.sample_count * u.token.vector
        total += u.sample_count
    return acc, total


def pair_mismatched(updates: Sequence[ClientUpdate], tau: float) -> list[list[ClientUpdate]]:
    """Greedy grouping of unmatched updates in client-id order.

    A group's representative is the sample-weighted mean of its members'
    tokens; each update joins the first group it reaches ``tau`` with.
    """
    groups: list[list[ClientUpdate]] = []
    reps: list[tuple[np.ndarray, int]] = []
    for u in sorted(updates, key=lambda u: u.client_id):
        for g, (acc, n) in enumerate(reps):
            if cosine(u.token.vector, acc) >= tau:
                groups[g].append(u)
                reps[g] = (acc + u.sample_count * u.token.vector, n + u.sample_count)
                break
        else:
            groups.append([u])
            reps.append((u.sample_count * u.token.vector, u.sample_count))
    return groups


def merge_global_token(entry: Optional[SubspaceEntry],
                       updates: Sequence[ClientUpdate]) -> IdentityToken:
    if not updates:
        raise ValueError("no local tokens to merge")
    acc, n = _weighted_sum(updates)
    if entry is not None:
        prev = entry.token
        acc = prev.support * prev.vector + acc
        n = prev.support + n
    return IdentityToken(acc / n, n)


def server_round(updates: Sequence[ClientUpdate], cache: DynamicCache,
                 aggregator: AggregatorSpec = AggregatorSpec(),
                 stage: int = 0) -> DynamicCache:
    """Route, merge and aggregate one round of client updates.

    Returns a new cache.  Entries that receive no update are carried over
    as the very same objects.
    """
    if not updates:
        return cache
    matched: dict[int, list[ClientUpdate]] = {}
    unmatched: list[ClientUpdate] = []
    for u in updates:
        idx = match_token(u.token, cache)
        if idx is None:
            unmatched.append(u)
        else:
            matched.setdefault(idx, []).append(u)

    entries = list(cache.entries)
    for idx in sorted(matched):
        group = matched[idx]
        entry = entries[idx]
        state = entry.state or AggregatorState.zeros_like(entry.adapter)
        adapter, state = fed_opt(entry.adapter, [u.adapter for u in group],
                                 [u.sample_count for u in group], aggregator, state)
        entries[idx] = replace(entry, adapter=adapter,
                               token=merge_global_token(entry, group), state=state)

    for group in pair_mismatched(unmatched, cache.tau):
        # no prior state for a new slot: plain weighted average
        adapter = fed_avg([u.adapter for u in group], [u.sample_count for u in group])
        entries.append(SubspaceEntry(adapter=adapter,
                                     token=merge_global_token(None, group),
                                     created_at_stage=stage,
                                     state=AggregatorState.zeros_like(adapter)))
    return DynamicCache(tuple(entries), cache.tau)


def select_client_subspace(cache: DynamicCache, token: IdentityToken):
    """Cache index to train from, or :data:`FRESH` when nothing matches."""
    idx = match_token(token, cache)
    return FRESH if idx is None else idx


# -- persistence -------------------------------------------------------------

def cache_to_dict(cache: DynamicCache) -> dict:
    entries = []
    for e in cache.entries:
        item = {
            "B": e.adapter.B.tolist(),
            "A": e.adapter.A.tolist(),
            "token": e.token.vector.tolist(),
            "count": e.token.support,
            "createdAtStage": e.created_at_stage,
        }
        if e.state is not None:
            item["optimizerState"] = {
                "m": [x.tolist() for x in e.state.m],
                "v": [x.tolist() for x in e.state.v],
            }
        entries.append(item)
    return {"tau": cache.tau, "entries": entries}


def cache_from_dict(data: dict) -> DynamicCache:
    entries = []
    for item in data["entries"]:
        adapter = LowRankAdapter(np.array(item["B"], dtype=np.float64),
                                 np.array(item["A"], dtype=np.float64))
        state = None
        if "optimizerState" in item:
            st = item["optimizerState"]
            state = AggregatorState(
                m=tuple(np.array(x, dtype=np.float64) for x in st["m"]),
                v=tuple(np.array(x, dtype=np.float64) for x in st["v"]))
        entries.append(SubspaceEntry(
            adapter=adapter,
            token=IdentityToken(np.array(item["token"], dtype=np.float64), int(item["count"])),
            created_at_stage=int(item["createdAtStage"]),
            state=state))
    return DynamicCache(tuple(entries), float(data["tau"]))


def save_cache(cache: DynamicCache, path) -> None:
    with open(path, "w") as fh:
        json.dump(cache_to_dict(cache), fh)


def load_cache(path) -> DynamicCache:
    with open(path) as fh:
        return cache_from_dict(json.load(fh))
