"""Server-side combination rules: FedAvg and the FedOpt family.

FedAvgM / FedAdam / FedAdagrad / FedYogi treat ``avg - previous`` as a
pseudo-gradient and keep momentum and second-moment buffers per adapter
factor (Reddi et al., "Adaptive Federated Optimization").
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lowrank import LowRankAdapter, ShapeError

KINDS = ("FedAvg", "FedAvgM", "FedAdam", "FedAdagrad", "FedYogi")


@dataclass(frozen=True)
class AggregatorSpec:
    kind: str = "FedAvg"
    server_lr: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.99
    tau: float = 1e-3

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown aggregator {self.kind!r}; expected one of {KINDS}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.server_lr <= 0 or self.tau <= 0:
            raise ValueError("server_lr and tau must be positive")


@dataclass(frozen=True, eq=False)
class AggregatorState:
    """Momentum ``m`` and second moment ``v`` as (B-part, A-part) pairs."""

    m: tuple[np.ndarray, np.ndarray]
    v: tuple[np.ndarray, np.ndarray]

    @classmethod
    def zeros_like(cls, adapter: LowRankAdapter) -> "AggregatorState":
        z = (np.zeros_like(adapter.B), np.zeros_like(adapter.A))
        return cls(m=z, v=z)

    def matches(self, adapter: LowRankAdapter) -> bool:
        shapes = (adapter.B.shape, adapter.A.shape)
        return (tuple(x.shape for x in self.m) == shapes
                and tuple(x.shape for x in self.v) == shapes)


def fed_avg(params: Sequence[LowRankAdapter], weights: Sequence[float]) -> LowRankAdapter:
    if len(params) == 0:
        raise ValueError("nothing to average")
    if len(params) != len(weights):
        raise ValueError("one weight per adapter required")
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    first = params[0]
    for p in params[1:]:
        if not p.same_shape(first):
            raise ShapeError("adapters to average differ in shape")
    if all(p.identical(first) for p in params[1:]):
        return first
    total = w.sum()
    B = sum(wi * p.B for wi, p in zip(w, params)) / total
    A = sum(wi * p.A for wi, p in zip(w, params)) / total
    return LowRankAdapter(B, A)


def pseudo_gradient(previous: LowRankAdapter,
                    aggregated: LowRankAdapter) -> tuple[np.ndarray, np.ndarray]:
    if not previous.same_shape(aggregated):
        raise ShapeError("previous and aggregated adapters differ in shape")
    return aggregated.B - previous.B, aggregated.A - previous.A


def _step(kind, spec, prev, d, m, v):
    if kind == "FedAvgM":
        m = spec.beta1 * m + d
        return prev + spec.server_lr * m, m, v
    m = spec.beta1 * m + (1.0 - spec.beta1) * d
    d2 = d * d
    if kind == "FedAdam":
        v = spec.beta2 * v + (1.0 - spec.beta2) * d2
    elif kind == "FedAdagrad":
        v = v + d2
    else:  # FedYogi
        v = np.maximum(v - (1.0 - spec.beta2) * d2 * np.sign(v - d2), 0.0)
    return prev + spec.server_lr * m / (np.sqrt(v) + spec.tau), m, v


def fed_opt(previous: LowRankAdapter, params: Sequence[LowRankAdapter],
            weights: Sequence[float], spec: AggregatorSpec,
            state: AggregatorState) -> tuple[LowRankAdapter, AggregatorState]:
    """One server aggregation step; returns the new adapter and state."""
    avg = fed_avg(params, weights)
    if spec.kind == "FedAvg":
        return avg, state
    if not state.matches(previous):
        raise ShapeError("optimizer state does not match adapter shape")
    dB, dA = pseudo_gradient(previous, avg)
    B, mB, vB = _step(spec.kind, spec, previous.B, dB, state.m[0], state.v[0])
    A, mA, vA = _step(spec.kind, spec, previous.A, dA, state.m[1], state.v[1])
    for arr in (B, A, mB, mA, vB, vA):
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError(f"{spec.kind} produced non-finite values")
    return LowRankAdapter(B, A), AggregatorState(m=(mB, mA), v=(vB, vA))
