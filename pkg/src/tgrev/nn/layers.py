"""Parameter store and the dense building blocks (linear, GRU cell, attention)."""
from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import ShapeError, Tensor


class ParamStore:
    """Ordered name -> Tensor map of trainable parameters."""

    def __init__(self, seed: int = 0):
        self.params: dict[str, Tensor] = {}
        self.rng = np.random.default_rng(seed)

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self.params:
            raise KeyError(f"duplicate parameter {name}")
        p = Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)
        self.params[name] = p
        return p

    def glorot(self, name: str, fan_in: int, fan_out: int) -> Tensor:
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        return self.add(name, self.rng.uniform(-lim, lim, size=(fan_in, fan_out)))

    def uniform(self, name: str, shape, lim: float) -> Tensor:
        return self.add(name, self.rng.uniform(-lim, lim, size=shape))

    def zeros(self, name: str, shape) -> Tensor:
        return self.add(name, np.zeros(shape))

    def __getitem__(self, name):
        return self.params[name]

    def __iter__(self):
        return iter(self.params.items())

    def __len__(self):
        return len(self.params)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.params.items()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for k, v in snap.items():
            self.params[k].data = v.copy()

    def set_all(self, value: float) -> None:
        for p in self.params.values():
            p.data[...] = value


def _check_last(op, x: Tensor, dim: int):
    if x.shape[-1] != dim:
        raise ShapeError(op, x.shape, (dim,))


class Linear:
    def __init__(self, store: ParamStore, name: str, in_dim: int, out_dim: int, bias: bool = True):
        self.in_dim, self.out_dim = in_dim, out_dim
        self.W = store.glorot(f"{name}.W", in_dim, out_dim)
        self.b = store.zeros(f"{name}.b", (out_dim,)) if bias else None

    def __call__(self, x) -> Tensor:
        x = T.as_tensor(x)
        _check_last("linear", x, self.in_dim)
        y = T.matmul(x, self.W)
        return y + self.b if self.b is not None else y


class GRUCell:
    """z, r gates and candidate state; one bias per gate."""

    def __init__(self, store: ParamStore, name: str, in_dim: int, hid_dim: int):
        self.in_dim, self.hid_dim = in_dim, hid_dim
        lim = 1.0 / np.sqrt(hid_dim)
        self.W = store.uniform(f"{name}.W", (in_dim, 3 * hid_dim), lim)
        self.U = store.uniform(f"{name}.U", (hid_dim, 3 * hid_dim), lim)
        self.b = store.uniform(f"{name}.b", (3 * hid_dim,), lim)

    def __call__(self, h, x) -> Tensor:
        h, x = T.as_tensor(h), T.as_tensor(x)
        _check_last("gru_cell(x)", x, self.in_dim)
        _check_last("gru_cell(h)", h, self.hid_dim)
        if h.shape[:-1] != x.shape[:-1]:
            raise ShapeError("gru_cell", h.shape, x.shape)
        H = self.hid_dim
        gx = T.matmul(x, self.W) + self.b
        Uzr = self.U[:, : 2 * H]
        Uh = self.U[:, 2 * H:]
        gh = T.matmul(h, Uzr)
        z = T.sigmoid(gx[..., :H] + gh[..., :H])
        r = T.sigmoid(gx[..., H:2 * H] + gh[..., H:])
        cand = T.tanh(gx[..., 2 * H:] + T.matmul(r * h, Uh))
        return (1.0 - z) * h + z * cand


class MultiHeadAttention:
    """Self-attention over the rows of Z, pooled to one vector by a masked mean."""

    def __init__(self, store: ParamStore, name: str, in_dim: int, model_dim: int, heads: int):
        if model_dim % heads:
            raise ShapeError("attention (model_dim % heads)", (model_dim,), (heads,))
        self.in_dim, self.model_dim, self.heads = in_dim, model_dim, heads
        self.Wq = store.glorot(f"{name}.Wq", in_dim, model_dim)
        self.Wk = store.glorot(f"{name}.Wk", in_dim, model_dim)
        self.Wv = store.glorot(f"{name}.Wv", in_dim, model_dim)
        self.out = Linear(store, f"{name}.out", model_dim, model_dim)

    def __call__(self, Z, mask=None) -> Tensor:
        """Z: (B, N, F) or (N, F); mask: (B, N) bool of valid rows."""
        Z = T.as_tensor(Z)
        single = Z.ndim == 2
        if single:
            Z = T.reshape(Z, (1,) + Z.shape)
        _check_last("attention", Z, self.in_dim)
        B, N, _ = Z.shape
        if N == 0:
            raise ShapeError("attention (no rows)", Z.shape)
        if mask is None:
            mask = np.ones((B, N), dtype=bool)
        mask = np.asarray(mask, dtype=bool).reshape(B, N)
        H, dh = self.heads, self.model_dim // self.heads

        def split(W):
            return T.transpose(T.reshape(T.matmul(Z, W), (B, N, H, dh)), (0, 2, 1, 3))

        q, k, v = split(self.Wq), split(self.Wk), split(self.Wv)
        logits = T.scale(T.matmul(q, T.transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(dh))
        att = T.softmax(logits, axis=-1, mask=mask[:, None, None, :])
        heads = T.matmul(att, v)  # (B, H, N, dh)
        cat = T.reshape(T.transpose(heads, (0, 2, 1, 3)), (B, N, self.model_dim))
        y = self.out(cat)
        w = mask / np.maximum(mask.sum(axis=1, keepdims=True), 1)
        pooled = T.tsum(y * w[:, :, None], axis=1)
        return T.reshape(pooled, (self.model_dim,)) if single else pooled
