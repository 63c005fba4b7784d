"""Deterministic instruction encoder and identity tokens.

Instructions are embedded with a hashed bag of whitespace tokens (FNV-1a,
64-bit) and L2-normalized.  An identity token is the mean embedding of a
client's instructions together with the number of samples behind it.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .lowrank import DegenerateInputError

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211
_MASK64 = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class EncoderSpec:
    dimension: int = 64
    hash_name: str = "fnv1a64"

    def __post_init__(self):
        if self.dimension < 2:
            raise ValueError("encoder dimension must be >= 2")
        if self.hash_name != "fnv1a64":
            raise ValueError(f"unsupported hash {self.hash_name!r}")


@lru_cache(maxsize=65536)
def _bucket(token: str, dimension: int) -> int:
    return fnv1a_64(token.encode("utf-8")) % dimension


@lru_cache(maxsize=16384)
def _encode_cached(text: str, dimension: int) -> np.ndarray:
    tokens = text.split()
    if not tokens:
        raise DegenerateInputError("instruction text has no tokens")
    counts = np.zeros(dimension, dtype=np.float64)
    for tok in tokens:
        counts[_bucket(tok, dimension)] += 1.0
    counts /= np.linalg.norm(counts)
    counts.setflags(write=False)
    return counts


def encode(text: str, spec: EncoderSpec = EncoderSpec()) -> np.ndarray:
    """Unit-norm hashed bag-of-tokens embedding of ``text``."""
    return _encode_cached(text, spec.dimension)


@dataclass(frozen=True, eq=False)
class IdentityToken:
    """Mean instruction embedding plus the sample count supporting it.

    Client tokens are unit vectors.  Server-side tokens hold the raw
    sample-weighted running mean, so always compare via :attr:`direction`.
    """

    vector: np.ndarray
    support: int

    def __post_init__(self):
        v = np.array(self.vector, dtype=np.float64)
        if v.ndim != 1:
            raise ValueError("token vector must be 1-d")
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)
        if self.support < 1:
            raise ValueError("token support must be >= 1")

    @property
    def direction(self) -> np.ndarray:
        n = np.linalg.norm(self.vector)
        if n == 0.0:
            raise DegenerateInputError("identity token has zero norm")
        return self.vector / n


def local_token(texts: Sequence[str], spec: EncoderSpec = EncoderSpec()) -> IdentityToken:
    if len(texts) == 0:
        raise ValueError("cannot build a token from zero instructions")
    encoded = np.stack([encode(t, spec) for t in texts])
    # lexicographic row sort fixes the summation order -> order-invariant bits
    order = np.lexsort(encoded.T[::-1])
    mean = encoded[order].sum(axis=0) / len(texts)
    norm = np.linalg.norm(mean)
    if norm == 0.0:
        raise DegenerateInputError("instruction embeddings cancel out")
    return IdentityToken(mean / norm, len(texts))
