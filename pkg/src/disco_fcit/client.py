"""Local client training of a low-rank adapter on top of a frozen linear base."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bench import Examples
from .identity import EncoderSpec, local_token
from .lowrank import LowRankAdapter, ShapeError, adapter_product
from .server import ClientUpdate


@dataclass(frozen=True, eq=False)
class ClientModel:
    base: np.ndarray  # W0, C x d_in, frozen
    adapter: LowRankAdapter
    lr: float = 0.05
    epochs: int = 1

    def __post_init__(self):
        base = np.array(self.base, dtype=np.float64)
        base.setflags(write=False)
        object.__setattr__(self, "base", base)
        if self.adapter.shape != base.shape:
            raise ShapeError(f"adapter {self.adapter.shape} does not fit base {base.shape}")


def predict(base: np.ndarray, delta: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Class scores ``(W0 + delta) x``; ``x`` may be a vector or an (n, d_in) batch."""
    W = base + delta
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != W.shape[1]:
        raise ShapeError(f"input width {x.shape[-1]} != {W.shape[1]}")
    return x @ W.T


def predict_class(scores: np.ndarray) -> np.ndarray:
    return np.argmax(scores, axis=-1)


def _softmax_rows(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss(base, adapter: LowRankAdapter, x, labels) -> float:
    """Mean softmax cross-entropy."""
    z = predict(base, adapter_product(adapter), x)
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return float(-logp[np.arange(len(labels)), labels].mean())


def gradients(base, adapter: LowRankAdapter, x, labels) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form (dL/dB, dL/dA) of the mean cross-entropy."""
    n = len(labels)
    probs = _softmax_rows(predict(base, adapter_product(adapter), x))
    probs[np.arange(n), labels] -= 1.0
    G = probs.T @ x / n  # dL/dW, C x d_in
    return G @ adapter.A.T, adapter.B.T @ G


def local_train(model: ClientModel, shard: Examples, *, client_id: int = 0,
                trained_slot: Optional[int] = None,
                encoder: EncoderSpec = EncoderSpec()) -> ClientUpdate:
    """Full-batch gradient descent on the shard, then package the upload."""
    if len(shard) == 0:
        raise ValueError("cannot train on an empty shard")
    B, A = model.adapter.B, model.adapter.A
    if model.lr != 0:
        for _ in range(model.epochs):
            dB, dA = gradients(model.base, LowRankAdapter(B, A), shard.x, shard.labels)
            B, A = B - model.lr * dB, A - model.lr * dA
        if not (np.all(np.isfinite(B)) and np.all(np.isfinite(A))):
            raise FloatingPointError(f"client {client_id}: non-finite adapter after training")
        adapter = LowRankAdapter(B, A)
    else:
        adapter = model.adapter
    token = local_token(shard.instructions, encoder)
    return ClientUpdate(adapter=adapter, token=token, sample_count=len(shard),
                        client_id=client_id, trained_slot=trained_slot)
