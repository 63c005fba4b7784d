"""Subspace selective activation at inference time."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .identity import EncoderSpec, encode
from .lowrank import ShapeError, block_diag_mixing, concat_adapters, cosine
from .server import DynamicCache

POLICIES = ("Softmax", "Argmax", "Concatenate", "CosineRaw")


@dataclass(frozen=True)
class ActivationPolicy:
    kind: str = "Softmax"
    temperature: float = 0.05

    def __post_init__(self):
        if self.kind not in POLICIES:
            raise ValueError(f"unknown activation policy {self.kind!r}")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


def scores(cache: DynamicCache, text: str, spec: EncoderSpec = EncoderSpec()) -> np.ndarray:
    if len(cache) == 0:
        raise ValueError("cannot score against an empty cache")
    query = encode(text, spec)
    return np.array([cosine(e.token.direction, query) for e in cache.entries])


def activations(s, policy: ActivationPolicy = ActivationPolicy()) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    if s.size == 0:
        raise ValueError("no scores")
    if policy.kind == "Softmax":
        z = (s - s.max()) / policy.temperature
        e = np.exp(z)
        return e / e.sum()
    if policy.kind == "Argmax":
        out = np.zeros_like(s)
        out[int(np.argmax(s))] = 1.0  # argmax returns the first maximum
        return out
    if policy.kind == "Concatenate":
        return np.ones_like(s)
    return s.copy()


def assemble(cache: DynamicCache, alpha) -> np.ndarray:
    """Effective update ``B_cat @ blockdiag(alpha_i * I) @ A_cat``."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (len(cache),):
        raise ShapeError(f"{alpha.shape[0] if alpha.ndim else 0} factors for {len(cache)} entries")
    adapters = [e.adapter for e in cache.entries]
    stacked = concat_adapters(adapters)
    mixing = block_diag_mixing([a.rank for a in adapters], alpha)
    return stacked.B @ mixing @ stacked.A


def assemble_sum(cache: DynamicCache, alpha) -> np.ndarray:
    """Same quantity as :func:`assemble`, as a weighted sum of products."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (len(cache),):
        raise ShapeError("one factor per cache entry required")
    out = np.zeros(cache.entries[0].adapter.shape)
    for a, e in zip(alpha, cache.entries):
        out += a * (e.adapter.B @ e.adapter.A)
    return out
