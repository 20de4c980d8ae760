"""Parameter containers and the network building blocks used by both models."""
from __future__ import annotations

from collections import OrderedDict

import numpy as np

from ..errors import ContractError
from . import tensor as T
from .tensor import Tensor


class ParameterStore:
    """Ordered named parameters plus per-parameter optimizer state and a step counter."""

    def __init__(self, dtype=np.float64):
        self.params: OrderedDict[str, Tensor] = OrderedDict()
        self.opt_state: dict[str, dict[str, np.ndarray]] = {}
        self.step = 0
        self.dtype = np.dtype(dtype)

    def add(self, name: str, value) -> Tensor:
        if name in self.params:
            raise ContractError(f"duplicate parameter name {name!r}")
        t = Tensor(np.asarray(value, dtype=self.dtype), requires_grad=True, name=name)
        self.params[name] = t
        return t

    def __getitem__(self, name) -> Tensor:
        return self.params[name]

    def __contains__(self, name):
        return name in self.params

    def __iter__(self):
        return iter(self.params.items())

    def __len__(self):
        return len(self.params)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.params.values())

    def arrays(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((k, v.data) for k, v in self.params.items())

    def load_arrays(self, arrays) -> None:
        for name, p in self.params.items():
            if name not in arrays:
                raise ContractError(f"missing parameter {name!r} in checkpoint")
            value = np.asarray(arrays[name])
            if value.shape != p.shape:
                raise ContractError(f"parameter {name!r}: checkpoint shape {value.shape} != {p.shape}")
            p.data = value.astype(self.dtype).copy()

    def fingerprint(self) -> str:
        import hashlib
        h = hashlib.sha256()
        for name, p in self.params.items():
            h.update(name.encode())
            h.update(np.ascontiguousarray(p.data).tobytes())
        return h.hexdigest()


def truncated_normal(rng: np.random.Generator, shape, std=0.02, bound=2.0):
    """Normal(0, std) resampled until every draw lies within ``bound`` standard deviations."""
    out = rng.standard_normal(shape)
    bad = np.abs(out) > bound
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > bound
    return out * std


# forward primitives

def embed(table: Tensor, ids) -> Tensor:
    return T.embedding(table, ids)


def affine(x: Tensor, W: Tensor, b: Tensor | None = None) -> Tensor:
    if x.shape[-1] != W.shape[0]:
        raise ContractError(f"affine: input {x.shape} vs weight {W.shape}")
    y = T.matmul(x, W)
    return y if b is None else y + b


def layer_norm(x, gamma, beta, eps=1e-12):
    return T.layer_norm(x, gamma, beta, eps)


def softmax(x, axis=-1, mask=None):
    return T.softmax(x, axis, mask)


def cross_entropy(logits, targets):
    return T.cross_entropy(logits, targets)


def ffn(x, W1, b1, W2, b2, activation=T.gelu):
    return affine(activation(affine(x, W1, b1)), W2, b2)


def multi_head_attention(x: Tensor, Wq, bq, Wk, bk, Wv, bv, Wo, bo, heads: int,
                         key_mask=None, dropout_rate=0.0, rng=None, training=False) -> Tensor:
    """Scaled dot-product self-attention over ``x`` of shape ``(B, L, d)``.

    ``key_mask`` is ``(B, L)`` with True for attendable positions.
    """
    B, L, d = x.shape
    if d % heads:
        raise ContractError(f"hidden width {d} not divisible by {heads} heads")
    dh = d // heads

    def split(t):
        return T.transpose(T.reshape(t, (B, L, heads, dh)), (0, 2, 1, 3))

    q = split(affine(x, Wq, bq))
    k = split(affine(x, Wk, bk))
    v = split(affine(x, Wv, bv))
    scores = T.matmul(q, T.swapaxes(k, -1, -2)) * (1.0 / np.sqrt(dh))
    mask = None if key_mask is None else np.asarray(key_mask, dtype=bool)[:, None, None, :]
    attn = T.softmax(scores, axis=-1, mask=mask)
    attn = T.dropout(attn, dropout_rate, rng, training)
    ctx = T.matmul(attn, v)
    ctx = T.reshape(T.transpose(ctx, (0, 2, 1, 3)), (B, L, d))
    return affine(ctx, Wo, bo)


def lstm_cell(x: Tensor, h: Tensor, c: Tensor, W: Tensor, b: Tensor):
    """One LSTM step; ``W`` is ``(in + hidden, 4*hidden)`` with gate order i, f, g, o."""
    H = h.shape[-1]
    if W.shape != (x.shape[-1] + H, 4 * H):
        raise ContractError(f"lstm_cell: weight {W.shape} vs input {x.shape}, hidden {h.shape}")
    z = affine(T.concat([x, h], axis=-1), W, b)
    i = T.sigmoid(z[:, :H])
    f = T.sigmoid(z[:, H:2 * H])
    g = T.tanh(z[:, 2 * H:3 * H])
    o = T.sigmoid(z[:, 3 * H:])
    c_new = f * c + i * g
    h_new = o * T.tanh(c_new)
    return h_new, c_new


def lstm_params(store: ParameterStore, prefix: str, in_dim: int, hidden: int, rng):
    """Xavier-uniform weights, zero bias with forget-gate bias 1."""
    limit = np.sqrt(6.0 / (in_dim + hidden + 4 * hidden))
    store.add(f"{prefix}.W", rng.uniform(-limit, limit, (in_dim + hidden, 4 * hidden)))
    b = np.zeros(4 * hidden)
    b[hidden:2 * hidden] = 1.0
    store.add(f"{prefix}.b", b)


def categorical_sample(probs, rng: np.random.Generator, atol=1e-6) -> int:
    """Index ``i`` drawn with probability ``probs[i]`` (one uniform draw per call)."""
    p = np.asarray(probs.data if isinstance(probs, Tensor) else probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0 or np.any(p < 0) or abs(p.sum() - 1.0) > atol:
        raise ContractError("categorical_sample needs a non-negative 1-D vector summing to 1")
    cdf = np.cumsum(p)
    u = rng.random() * cdf[-1]
    return min(int(np.searchsorted(cdf, u, side="right")), p.size - 1)


def categorical_sample_rows(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Vectorised :func:`categorical_sample` over the rows of a 2-D array."""
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[0])[:, None] * cdf[:, -1:]
    idx = (cdf <= u).sum(axis=-1)
    # a zero-probability tail can leave u == cdf[-1]; clamp to the last positive entry
    last = probs.shape[1] - 1 - np.argmax((probs > 0)[:, ::-1], axis=1)
    return np.minimum(idx, last)
