"""Dense matrix helpers and the low-rank adapter pair (B, A)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class DegenerateInputError(ValueError):
    """Raised when an input has no direction (zero norm, empty text)."""


class ShapeError(ValueError):
    pass


def as_matrix(x) -> np.ndarray:
    m = np.array(x, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-d matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    m.setflags(write=False)
    return m


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ShapeError(f"length mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DegenerateInputError("cosine of a zero-norm vector is undefined")
    c = float(np.dot(u, v) / (nu * nv))
    return min(1.0, max(-1.0, c))


@dataclass(frozen=True, eq=False)
class LowRankAdapter:
    """Factored update ``delta = B @ A`` with ``B`` d x r and ``A`` r x k."""

    B: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        B = as_matrix(self.B)
        A = as_matrix(self.A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "A", A)
        if B.shape[1] != A.shape[0]:
            raise ShapeError(f"B is {B.shape}, A is {A.shape}: inner ranks differ")
        r = B.shape[1]
        if r < 1:
            raise ShapeError("rank must be at least 1")

    @property
    def rank(self) -> int:
        return self.B.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        """Shape (d, k) of the materialized product."""
        return self.B.shape[0], self.A.shape[1]

    @classmethod
    def zeros(cls, d: int, k: int, rank: int) -> "LowRankAdapter":
        return cls(np.zeros((d, rank)), np.zeros((rank, k)))

    @classmethod
    def fresh(cls, d: int, k: int, rank: int, rng: np.random.Generator,
              scale: float = 0.01) -> "LowRankAdapter":
        # B = 0 so the product starts at zero; A breaks the symmetry.
        return cls(np.zeros((d, rank)), rng.uniform(-scale, scale, size=(rank, k)))

    def same_shape(self, other: "LowRankAdapter") -> bool:
        return self.B.shape == other.B.shape and self.A.shape == other.A.shape

    def identical(self, other: "LowRankAdapter") -> bool:
        """Bitwise equality of both factors."""
        return (self.same_shape(other)
                and self.B.tobytes() == other.B.tobytes()
                and self.A.tobytes() == other.A.tobytes())


def adapter_product(a: LowRankAdapter) -> np.ndarray:
    return a.B @ a.A


def concat_adapters(adapters: Sequence[LowRankAdapter]) -> LowRankAdapter:
    """Stack adapters along the rank axis, keeping their order."""
    if not adapters:
        raise ValueError("need at least one adapter")
    shape = adapters[0].shape
    for a in adapters[1:]:
        if a.shape != shape:
            raise ShapeError(f"adapter shape {a.shape} != {shape}")
    if len(adapters) == 1:
        return adapters[0]
    return LowRankAdapter(np.hstack([a.B for a in adapters]),
                          np.vstack([a.A for a in adapters]))


def block_diag_mixing(ranks: Sequence[int], factors: Sequence[float]) -> np.ndarray:
    """Block-diagonal matrix with ``factors[i] * I`` of size ``ranks[i]`` per block."""
    if len(ranks) != len(factors):
        raise ShapeError("one factor per block required")
    return np.diag(np.repeat(np.asarray(factors, dtype=np.float64), ranks))
