"""Exact refinement engines over interned colors, plus a brute-force isomorphism oracle.

Every learnable function of the model is replaced by an interning table, so
two inputs receive the same color iff their canonical encodings are equal.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .graph import TemporalGraph

ISO = "isomorphic"
NON_ISO = "non-isomorphic"

# function tags keep encodings of different functions apart
TAG_INIT, TAG_WL, TAG_POS, TAG_BASE, TAG_REV, TAG_UPD = 1, 2, 3, 4, 5, 6


class OracleBudgetError(RuntimeError):
    """Refusal: the graph is too large for exhaustive matching."""


class Interner:
    """Canonical byte encoding -> dense integer id. Id 0 is the zero element."""

    def __init__(self):
        self.table: dict[bytes, int] = {b"zero": 0}
        self.keys: list[bytes] = [b"zero"]

    def __len__(self):
        return len(self.keys)

    def intern(self, key: bytes) -> int:
        code = self.table.get(key)
        if code is None:
            code = len(self.keys)
            self.table[key] = code
            self.keys.append(key)
        return code

    def intern_many(self, keys) -> np.ndarray:
        get = self.table.get
        out = np.empty(len(keys), dtype=np.int64)
        for i, k in enumerate(keys):
            c = get(k)
            if c is None:
                c = len(self.keys)
                self.table[k] = c
                self.keys.append(k)
            out[i] = c
        return out

    def audit(self) -> bool:
        """Reverse-table check that the map is a bijection."""
        if len(set(self.keys)) != len(self.keys) or len(self.table) != len(self.keys):
            return False
        return all(self.table[k] == i for i, k in enumerate(self.keys))


@dataclass
class StackedTrace:
    times: np.ndarray  # (m,)
    colors: np.ndarray  # (n, m) colors, or (n, m, D) vectors
    table_id: int | None = None

    @property
    def num_nodes(self) -> int:
        return self.colors.shape[0]

    def sorted_rows(self) -> list:
        return sorted(self.colors[i].tobytes() for i in range(self.num_nodes))


def _tbits(t: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(t, dtype=np.float64).view(np.int64)


class _Incidence:
    """Per-node chronological incidence lists, flattened (CSR)."""

    def __init__(self, g: TemporalGraph, include_seq: bool):
        n = g.num_nodes
        E = g.num_events
        loop = g.src == g.dst
        owner = np.concatenate([g.src, g.dst[~loop]])
        other = np.concatenate([g.dst, g.src[~loop]])
        eid = np.concatenate([np.arange(E), np.arange(E)[~loop]])
        direction = np.concatenate([np.zeros(E, dtype=np.int64), np.ones(int((~loop).sum()), dtype=np.int64)])
        order = np.lexsort((eid, owner))
        self.owner, self.other, self.eid = owner[order], other[order], eid[order]
        self.direction = direction[order] if g.directed else np.zeros(len(order), dtype=np.int64)
        self.time = g.time[self.eid]
        self.tb = _tbits(self.time)
        self.seq = self.eid if include_seq else None
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self.indptr, self.owner + 1, 1)
        self.indptr = np.cumsum(self.indptr)
        self.n = n

    def select(self, cutoff: float, strict: bool, cap: int | None = None) -> np.ndarray:
        """Flat positions of incidences with time < cutoff (strict) or <= cutoff."""
        keep = self.time < cutoff if strict else self.time <= cutoff
        if cap is not None:
            pos = np.nonzero(keep)[0]
            own = self.owner[pos]
            # rank from the newest within each owner
            cnt = np.bincount(own, minlength=self.n)
            start = np.cumsum(cnt) - cnt
            rank_from_end = cnt[own] - 1 - (np.arange(len(pos)) - start[own])
            keep = np.zeros_like(keep)
            keep[pos[rank_from_end < cap]] = True
        return np.nonzero(keep)[0]

    def time_cols(self, pos: np.ndarray) -> list[np.ndarray]:
        cols = [self.tb[pos]]
        if self.seq is not None:
            cols.append(self.seq[pos])
        cols.append(self.direction[pos])
        return cols


def _group_ptr(owner_sorted: np.ndarray, n: int) -> np.ndarray:
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(ptr, owner_sorted + 1, 1)
    return np.cumsum(ptr)


def _refine(inc: _Incidence, pos: np.ndarray, c: np.ndarray, iters: int, table: Interner) -> np.ndarray:
    n = inc.n
    indptr = _group_ptr(inc.owner[pos], n)
    tcols = inc.time_cols(pos)
    for _ in range(iters):
        rows = np.stack([c[inc.other[pos]]] + tcols, axis=1)
        prefix = np.stack([np.full(n, TAG_WL), c], axis=1)
        keys = kernels.multiset_keys(indptr, np.ascontiguousarray(rows), np.ascontiguousarray(prefix))
        c = table.intern_many(keys)
    return c


def _initial_colors(n: int, table: Interner, node_attr=None) -> np.ndarray:
    if node_attr is None:
        return np.full(n, table.intern(np.array([TAG_INIT], dtype=np.int64).tobytes()), dtype=np.int64)
    keys = [np.array([TAG_INIT], dtype=np.int64).tobytes() + repr(a).encode() for a in node_attr]
    return table.intern_many(keys)


def t1wl_refine(g: TemporalGraph, iters: int = 4, table: Interner | None = None, node_attr=None,
                include_seq: bool = False) -> StackedTrace:
    """Temporal 1-WL colors after `iters` rounds over E(t), at every event time."""
    if iters < 1:
        raise ValueError("iters must be >= 1")
    table = table if table is not None else Interner()
    inc = _Incidence(g, include_seq)
    grid = g.time_grid()
    out = np.zeros((g.num_nodes, len(grid)), dtype=np.int64)
    c0 = _initial_colors(g.num_nodes, table, node_attr)
    for i, t in enumerate(grid):
        pos = inc.select(t, strict=False)
        out[:, i] = _refine(inc, pos, c0, iters, table)
    return StackedTrace(grid, out, id(table))


def t1wl_partitions(g: TemporalGraph, iters: int, t: float, table: Interner | None = None) -> list[np.ndarray]:
    """Colors after each round 0..iters at time t (for refinement checks)."""
    table = table if table is not None else Interner()
    inc = _Incidence(g, False)
    pos = inc.select(t, strict=False)
    c = _initial_colors(g.num_nodes, table)
    out = [c]
    for _ in range(iters):
        c = _refine(inc, pos, c, 1, table)
        out.append(c)
    return out


def pint_pos_features(g: TemporalGraph, t: float) -> np.ndarray:
    """Cumulative interaction counts up to and including t under the given labeling."""
    n = g.num_nodes
    k = int(np.searchsorted(g.time, t, side="right"))
    A = np.zeros((n, n), dtype=np.int64)
    np.add.at(A, (g.src[:k], g.dst[:k]), 1)
    if not g.directed:
        off = g.src[:k] != g.dst[:k]
        np.add.at(A, (g.dst[:k][off], g.src[:k][off]), 1)
    return A


def row_permutation_exists(A: np.ndarray, B: np.ndarray) -> bool:
    """True iff some reordering of A's rows equals B."""
    if A.shape != B.shape:
        return False
    return sorted(map(bytes, np.ascontiguousarray(A, dtype=np.int64))) == \
        sorted(map(bytes, np.ascontiguousarray(B, dtype=np.int64)))


def pint_pos_colors(g: TemporalGraph, iters: int = 4, table: Interner | None = None) -> StackedTrace:
    table = table if table is not None else Interner()
    inc = _Incidence(g, False)
    grid = g.time_grid()
    out = np.zeros((g.num_nodes, len(grid)), dtype=np.int64)
    head = np.array([TAG_POS], dtype=np.int64).tobytes()
    for i, t in enumerate(grid):
        A = pint_pos_features(g, t)
        c0 = table.intern_many([head + A[u].tobytes() for u in range(g.num_nodes)])
        out[:, i] = _refine(inc, inc.select(t, strict=False), c0, iters, table)
    return StackedTrace(grid, out, id(table))


class HashRTR:
    """The RTR recursion with every learnable map replaced by interning."""

    def __init__(self, K: int = 4, hetero: bool = True, d: int | None = None,
                 include_seq: bool = False, table: Interner | None = None):
        if K < 1:
            raise ValueError("K must be >= 1")
        self.K, self.hetero, self.d, self.include_seq = K, hetero, d, include_seq
        self.table = table if table is not None else Interner()

    def trace(self, g: TemporalGraph) -> StackedTrace:
        n, K = g.num_nodes, self.K
        inc = _Incidence(g, self.include_seq)
        self.inc = inc
        h_cur = [np.zeros(n, dtype=np.int64) for _ in range(K + 1)]
        h_prev = [np.zeros(n, dtype=np.int64) for _ in range(K + 1)]
        self.h_cur, self.h_prev = h_cur, h_prev
        grid = g.time_grid()
        out = np.zeros((n, len(grid)), dtype=np.int64)
        for i, t in enumerate(grid):
            now = np.nonzero(inc.time == t)[0]
            past = inc.select(t, strict=True, cap=self.d)
            self._past_ptr = _group_ptr(inc.owner[past], n)
            self._past = past
            touched = np.unique(inc.owner[now])
            ptr_now = _group_ptr(inc.owner[now], n)
            # rows per touched node are contiguous because `now` is owner-sorted
            sub_ptr = np.concatenate([[0], np.cumsum(np.diff(ptr_now)[touched])]).astype(np.int64)
            tcols = inc.time_cols(now)
            rows = np.stack([h_cur[0][inc.other[now]]] + tcols, axis=1)
            prefix = np.stack([np.full(len(touched), TAG_BASE), h_cur[0][touched]], axis=1)
            new = self.table.intern_many(kernels.multiset_keys(sub_ptr, np.ascontiguousarray(rows),
                                                               np.ascontiguousarray(prefix)))
            h_prev[0][touched] = h_cur[0][touched]
            h_cur[0][touched] = new
            for k in range(1, K + 1):
                r = self._revision(touched, k)
                rows = np.stack([h_cur[k - 1][inc.other[now]]] + tcols, axis=1)
                prefix = np.stack([np.full(len(touched), TAG_UPD), np.full(len(touched), k),
                                   h_cur[k][touched], h_cur[k - 1][touched], r], axis=1)
                new = self.table.intern_many(kernels.multiset_keys(sub_ptr, np.ascontiguousarray(rows),
                                                                   np.ascontiguousarray(prefix)))
                h_prev[k][touched] = h_cur[k][touched]
                h_cur[k][touched] = new
            out[:, i] = h_cur[K]
        return StackedTrace(grid, out, id(self.table))

    def _revision(self, roots: np.ndarray, level: int) -> np.ndarray:
        inc, ptr, past = self.inc, self._past_ptr, self._past
        frames = []
        nodes = roots
        S = np.full((len(roots), 0), -1, dtype=np.int64)
        for depth in range(level):
            lv = level - depth
            cnt = ptr[nodes + 1] - ptr[nodes]
            flat = np.repeat(ptr[nodes], cnt) + (np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt))
            pos = past[flat]
            req = np.repeat(np.arange(len(nodes)), cnt)
            frame = {"nodes": nodes, "S": S, "pos": pos, "req": req,
                     "indptr": np.concatenate([[0], np.cumsum(cnt)]).astype(np.int64), "child": None}
            frames.append(frame)
            if lv < 2 or len(pos) == 0:
                break
            w = inc.other[pos]
            parent = nodes[req]
            if self.hetero:
                Sp = S[req]
                dup = (Sp == parent[:, None]).any(axis=1)
                cS = np.sort(np.concatenate([Sp, np.where(dup, -1, parent)[:, None]], axis=1), axis=1)
                key = np.concatenate([w[:, None], cS], axis=1)
            else:
                cS = np.zeros((len(w), 0), dtype=np.int64)
                key = w[:, None]
            first, inv = kernels.unique_rows(np.ascontiguousarray(key))
            frame["child"] = inv
            nodes, S = w[first], cS[first]
        codes = None
        for depth in range(len(frames) - 1, -1, -1):
            fr = frames[depth]
            lv = level - depth
            pos = fr["pos"]
            w = inc.other[pos]
            child = codes[fr["child"]] if fr["child"] is not None else np.zeros(len(pos), dtype=np.int64)
            cols = [child, self.h_prev[lv - 1][w], self.h_cur[lv - 1][w]] + inc.time_cols(pos)
            if self.hetero:
                ind = (fr["S"][fr["req"]] == w[:, None]).any(axis=1).astype(np.int64)
                cols.append(ind)
            rows = np.ascontiguousarray(np.stack(cols, axis=1))
            prefix = np.ascontiguousarray(np.stack([np.full(len(fr["nodes"]), TAG_REV),
                                                    np.full(len(fr["nodes"]), lv)], axis=1))
            keys = kernels.multiset_keys(fr["indptr"], rows, prefix)
            c = self.table.intern_many(keys)
            empty = np.diff(fr["indptr"]) == 0
            c[empty] = 0
            codes = c
        return codes


def hash_rtr_colors(g: TemporalGraph, K: int = 4, hetero: bool = True, table: Interner | None = None,
                    d: int | None = None, include_seq: bool = False) -> StackedTrace:
    return HashRTR(K, hetero, d, include_seq, table).trace(g)


def iso_check(a: StackedTrace, b: StackedTrace) -> str:
    """Sort-and-scan comparison of stacked traces."""
    if a.colors.shape[1] != b.colors.shape[1]:
        raise ValueError(f"trace grids differ in length: {a.colors.shape[1]} vs {b.colors.shape[1]}")
    if a.table_id is not None and b.table_id is not None and a.table_id != b.table_id:
        raise ValueError("traces come from different interning tables")
    if a.num_nodes != b.num_nodes or not np.array_equal(a.times, b.times):
        return NON_ISO
    if a.colors.dtype != b.colors.dtype or a.colors.shape != b.colors.shape:
        return NON_ISO
    return ISO if a.sorted_rows() == b.sorted_rows() else NON_ISO


def links_distinguishable(trace_a: StackedTrace, link_a: tuple, trace_b: StackedTrace, link_b: tuple) -> bool:
    """Two candidate events are distinguishable iff their endpoint traces differ."""
    ea = sorted(trace_a.colors[u].tobytes() for u in link_a)
    eb = sorted(trace_b.colors[u].tobytes() for u in link_b)
    return ea != eb


# ---------------------------------------------------------------- oracle
def _edge_table(g: TemporalGraph, include_seq: bool):
    tab: dict[tuple, list] = {}
    for i in range(g.num_events):
        u, v = int(g.src[i]), int(g.dst[i])
        key = (u, v) if g.directed else (min(u, v), max(u, v))
        val = (float(g.time[i]),) + tuple(g.edge_feat[i].tolist()) + ((i,) if include_seq else ())
        tab.setdefault(key, []).append(val)
    return {k: tuple(sorted(v)) for k, v in tab.items()}


def rp_oracle(ga: TemporalGraph, gb: TemporalGraph, attr_a=None, attr_b=None,
              budget: int = 9, include_seq: bool = False) -> str:
    """Exhaustive search for a node bijection mapping every timed edge of ga onto gb."""
    n = ga.num_nodes
    if n != gb.num_nodes or ga.num_events != gb.num_events or ga.directed != gb.directed:
        return NON_ISO
    if n > budget:
        raise OracleBudgetError(f"{n} nodes exceeds the exhaustive budget of {budget}")
    ea, eb = _edge_table(ga, include_seq), _edge_table(gb, include_seq)
    attr_a = [None] * n if attr_a is None else list(attr_a)
    attr_b = [None] * n if attr_b is None else list(attr_b)

    def edge(tab, directed, u, v):
        if directed:
            return tab.get((u, v), ()), tab.get((v, u), ())
        return tab.get((min(u, v), max(u, v)), ())

    def signature(tab, attrs, u):
        inc = []
        for (a, b), ts in tab.items():
            if a == u or b == u:
                inc.append((a == u, b == u, ts) if ga.directed else (a == b, ts))
        return (repr(attrs[u]), tuple(sorted(inc, key=repr)))

    sig_a = [signature(ea, attr_a, u) for u in range(n)]
    sig_b = [signature(eb, attr_b, u) for u in range(n)]
    if sorted(map(repr, sig_a)) != sorted(map(repr, sig_b)):
        return NON_ISO
    cand = [[v for v in range(n) if sig_b[v] == sig_a[u]] for u in range(n)]
    order = sorted(range(n), key=lambda u: len(cand[u]))
    mapping: dict[int, int] = {}
    used = [False] * n

    def consistent(u, v):
        for u2, v2 in mapping.items():
            if edge(ea, ga.directed, u, u2) != edge(eb, gb.directed, v, v2):
                return False
        return edge(ea, ga.directed, u, u) == edge(eb, gb.directed, v, v)

    def search(i):
        if i == n:
            return True
        u = order[i]
        for v in cand[u]:
            if not used[v] and consistent(u, v):
                mapping[u] = v
                used[v] = True
                if search(i + 1):
                    return True
                del mapping[u]
                used[v] = False
        return False

    return ISO if search(0) else NON_ISO


# ---------------------------------------------------------------- engines
def _pairwise(trace_fn: Callable) -> Callable:
    def verdict(ga, gb, attr_a=None, attr_b=None):
        ta, tb = ga.time_grid(), gb.time_grid()
        if ga.num_nodes != gb.num_nodes or len(ta) != len(tb) or not np.array_equal(ta, tb):
            return NON_ISO
        table = Interner()
        return iso_check(trace_fn(ga, table, attr_a), trace_fn(gb, table, attr_b))
    return verdict


ENGINES: dict[str, Callable] = {
    "t1wl": _pairwise(lambda g, tab, at: t1wl_refine(g, 4, tab, at)),
    "rtr": _pairwise(lambda g, tab, at: hash_rtr_colors(g, 4, False, tab)),
    "rtr-hetero": _pairwise(lambda g, tab, at: hash_rtr_colors(g, 4, True, tab)),
    "pint-pos": _pairwise(lambda g, tab, at: pint_pos_colors(g, 4, tab)),
    "oracle": lambda ga, gb, aa=None, ab=None: rp_oracle(ga, gb, aa, ab),
}

PERMUTATION_INVARIANT = ("t1wl", "rtr", "rtr-hetero")


def make_engine(name: str, iters: int = 4, K: int = 4) -> Callable:
    if name == "t1wl":
        return _pairwise(lambda g, tab, at: t1wl_refine(g, iters, tab, at))
    if name in ("rtr", "rtr-hetero"):
        het = name == "rtr-hetero"
        return _pairwise(lambda g, tab, at: hash_rtr_colors(g, K, het, tab))
    if name == "pint-pos":
        return _pairwise(lambda g, tab, at: pint_pos_colors(g, iters, tab))
    if name == "oracle":
        return ENGINES["oracle"]
    raise KeyError(f"unknown engine {name!r}; choose from {sorted(ENGINES)}")
