"""Cosine time / sequence-gap encodings and the event feature vector."""
from __future__ import annotations

import numpy as np

from .nn import tensor as T
from .nn.layers import ParamStore
from .nn.tensor import Tensor


class CausalityError(ValueError):
    """A negative time or sequence gap reached an encoder."""


def init_frequencies(dim: int, median_gap: float) -> np.ndarray:
    """Log-spaced over [1e-3, 1e2] / median_gap."""
    scale = 1.0 / median_gap if median_gap > 0 else 1.0
    return np.logspace(-3, 2, dim) * scale


class TimeEncoder:
    """component i = cos(freq_i * delta + phase_i)."""

    def __init__(self, store: ParamStore, name: str, dim: int, median_gap: float = 1.0):
        self.dim = dim
        self.freq = store.add(f"{name}.freq", init_frequencies(dim, median_gap))
        self.phase = store.zeros(f"{name}.phase", (dim,))

    def __call__(self, delta) -> Tensor:
        d = T.as_tensor(delta)
        if np.any(d.data < 0):
            raise CausalityError(f"negative gap {float(d.data.min())}")
        arg = T.reshape(d, d.shape + (1,)) * self.freq + self.phase
        return T.cos(arg)


def time_encode(delta, freq, phase) -> np.ndarray:
    """Functional form on plain arrays."""
    delta = np.asarray(delta, dtype=np.float64)
    if np.any(delta < 0):
        raise CausalityError(f"negative gap {float(delta.min())}")
    return np.cos(delta[..., None] * np.asarray(freq) + np.asarray(phase))


class EventEncoder:
    """Phi = [time-gap encoding | sequence-gap encoding | edge features (| counts)]."""

    def __init__(self, store: ParamStore, d_t: int, d_s: int, edge_dim: int,
                 median_gap: float = 1.0, median_seq_gap: float = 1.0, count_feature: bool = False):
        self.time = TimeEncoder(store, "phi.time", d_t, median_gap)
        self.seq = TimeEncoder(store, "phi.seq", d_s, median_seq_gap)
        self.edge_dim = edge_dim
        self.count_feature = count_feature
        self.dim = d_t + d_s + edge_dim + (2 if count_feature else 0)

    def __call__(self, dt, ds, edge_feat, counts=None) -> Tensor:
        """dt, ds: gap arrays of any batch shape; edge_feat: batch shape + (edge_dim,)."""
        dt = np.asarray(dt, dtype=np.float64)
        ds = np.asarray(ds, dtype=np.float64)
        ef = np.asarray(edge_feat, dtype=np.float64)
        if ef.shape != dt.shape + (self.edge_dim,):
            raise ValueError(f"edge feature shape {ef.shape} != {dt.shape + (self.edge_dim,)}")
        parts = [self.time(dt), self.seq(ds), Tensor(ef)]
        if self.count_feature:
            if counts is None:
                counts = np.zeros(dt.shape + (2,))
            parts.append(Tensor(np.log1p(np.asarray(counts, dtype=np.float64))))
        return T.concat(parts, axis=-1)

    def zeros(self, batch_shape) -> Tensor:
        return Tensor(np.zeros(tuple(batch_shape) + (self.dim,)))


def event_feature(event, now_t: float, now_s: int, encoder: EventEncoder) -> np.ndarray:
    """Phi of one past event seen from (now_t, now_s)."""
    if now_t < event.time or now_s < event.seq:
        raise CausalityError("event lies in the future of the query point")
    ef = np.asarray(event.edge_feat, dtype=np.float64)
    if ef.shape != (encoder.edge_dim,):
        raise ValueError(f"edge feature arity {ef.size} != {encoder.edge_dim}")
    out = encoder(np.array(now_t - event.time), np.array(float(now_s - event.seq)), ef)
    return out.data
