"""Event streams, neighbor stores and the split / negative sampling protocol."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels


class GraphError(ValueError):
    """Malformed input or an invalid graph/split request."""


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Event:
    src: int
    dst: int
    time: float
    seq: int
    edge_feat: tuple = ()


@dataclass
class TemporalGraph:
    """Column-oriented event list sorted by (time, seq). seq is the row index."""

    src: np.ndarray
    dst: np.ndarray
    time: np.ndarray
    edge_feat: np.ndarray  # (E, F), F may be 0
    num_nodes: int
    directed: bool = False
    id_map: list = field(default_factory=list)  # dense id -> original label

    def __post_init__(self):
        self.src = np.asarray(self.src, dtype=np.int64)
        self.dst = np.asarray(self.dst, dtype=np.int64)
        self.time = np.asarray(self.time, dtype=np.float64)
        n = len(self.src)
        if self.edge_feat is None:
            self.edge_feat = np.zeros((n, 0))
        ef = np.asarray(self.edge_feat, dtype=np.float64)
        self.edge_feat = ef.reshape(n, -1) if n else ef.reshape(0, ef.shape[1] if ef.ndim == 2 else 0)
        if not (len(self.dst) == n == len(self.time)):
            raise GraphError("src/dst/time length mismatch")
        if n and (np.any(np.diff(self.time) < 0)):
            raise GraphError("events must be sorted by time")
        if n and (self.src.min() < 0 or self.dst.min() < 0
                  or max(self.src.max(), self.dst.max()) >= self.num_nodes):
            raise GraphError("node ids must be dense in [0, num_nodes)")
        if not self.id_map:
            self.id_map = list(range(self.num_nodes))

    @property
    def seq(self) -> np.ndarray:
        return np.arange(len(self.src), dtype=np.int64)

    @property
    def num_events(self) -> int:
        return len(self.src)

    @property
    def feat_dim(self) -> int:
        return self.edge_feat.shape[1]

    def event(self, i: int) -> Event:
        return Event(int(self.src[i]), int(self.dst[i]), float(self.time[i]), i,
                     tuple(self.edge_feat[i].tolist()))

    @property
    def events(self) -> list[Event]:
        return [self.event(i) for i in range(self.num_events)]

    def time_grid(self) -> np.ndarray:
        return np.unique(self.time)

    def relabel(self, perm: Sequence[int]) -> "TemporalGraph":
        """Graph with node u renamed perm[u]; times, seqs and features kept."""
        perm = np.asarray(perm, dtype=np.int64)
        return TemporalGraph(perm[self.src], perm[self.dst], self.time.copy(),
                             self.edge_feat.copy(), self.num_nodes, self.directed)

    def subset(self, idx: np.ndarray) -> "TemporalGraph":
        return TemporalGraph(self.src[idx], self.dst[idx], self.time[idx],
                             self.edge_feat[idx], self.num_nodes, self.directed, self.id_map)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["src", "dst", "time"] + [f"f{j}" for j in range(self.feat_dim)])
            for i in range(self.num_events):
                w.writerow([self.id_map[self.src[i]], self.id_map[self.dst[i]], repr(float(self.time[i]))]
                           + [repr(float(x)) for x in self.edge_feat[i]])


def from_edges(edges: Iterable[tuple], num_nodes: int | None = None, directed=False) -> TemporalGraph:
    """Build from (src, dst, time[, feats]) tuples already using dense ids."""
    rows = list(edges)
    if not rows:
        return TemporalGraph(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros((0, 0)), num_nodes or 0, directed)
    order = sorted(range(len(rows)), key=lambda i: (rows[i][2], i))
    rows = [rows[i] for i in order]
    src = [r[0] for r in rows]
    dst = [r[1] for r in rows]
    feats = np.array([list(r[3]) if len(r) > 3 else [] for r in rows], dtype=np.float64).reshape(len(rows), -1)
    n = num_nodes if num_nodes is not None else max(max(src), max(dst)) + 1
    return TemporalGraph(src, dst, [r[2] for r in rows], feats, n, directed)


def _dense_ids(labels: list[str]):
    uniq = set(labels)
    try:
        ordered = sorted(uniq, key=int)
    except ValueError:
        ordered = sorted(uniq)
    return {lab: i for i, lab in enumerate(ordered)}, ordered


def ingest_events(source, directed: bool = False, allow_self_loops: bool = False) -> TemporalGraph:
    """Parse `src,dst,time[,f0,...]` CSV text, a path, or an iterable of records.

    Node labels are mapped to dense ids in sorted label order (numeric when all
    labels are integers); ties in time keep input order.
    """
    if isinstance(source, (str, Path)) and Path(str(source)).exists():
        text = Path(source).read_text(encoding="utf-8")
        records = _parse_csv(text)
    elif isinstance(source, str):
        records = _parse_csv(source)
    else:
        records = [(i + 1, list(r)) for i, r in enumerate(source)]
    srcs, dsts, times, feats = [], [], [], []
    arity = None
    for line, rec in records:
        if len(rec) < 3:
            raise GraphError(f"line {line}: expected at least 3 fields, got {len(rec)}")
        try:
            t = float(rec[2])
            f = [float(x) for x in rec[3:]]
        except (TypeError, ValueError) as exc:
            raise GraphError(f"line {line}: {exc}") from None
        if not np.isfinite(t):
            raise GraphError(f"line {line}: non-finite time")
        if t < 0:
            raise GraphError(f"line {line}: negative time {t}")
        if arity is None:
            arity = len(f)
        elif len(f) != arity:
            raise GraphError(f"line {line}: feature arity {len(f)} != {arity}")
        a, b = str(rec[0]).strip(), str(rec[1]).strip()
        if a == b and not allow_self_loops:
            raise GraphError(f"line {line}: self-loop {a}")
        srcs.append(a)
        dsts.append(b)
        times.append(t)
        feats.append(f)
    if not times:
        return TemporalGraph(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros((0, 0)), 0, directed)
    mapping, ordered = _dense_ids(srcs + dsts)
    order = np.argsort(np.asarray(times), kind="stable")
    src = np.array([mapping[srcs[i]] for i in order])
    dst = np.array([mapping[dsts[i]] for i in order])
    tt = np.asarray(times)[order]
    ff = np.asarray(feats, dtype=np.float64).reshape(len(times), -1)[order]
    return TemporalGraph(src, dst, tt, ff, len(ordered), directed, list(ordered))


def _parse_csv(text: str):
    reader = csv.reader(io.StringIO(text))
    out = []
    header_seen = False
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if not header_seen:
            header_seen = True
            if [c.strip() for c in row[:3]] == ["src", "dst", "time"]:
                continue
        out.append((lineno, row))
    return out


class NeighborStore:
    """Per-node ring buffer of the d most recent interactions."""

    def __init__(self, num_nodes: int, capacity: int):
        if capacity < 1:
            raise ConfigError("capacity must be >= 1")
        self.capacity = capacity
        self.nbr = np.zeros((num_nodes, capacity), dtype=np.int64)
        self.t = np.zeros((num_nodes, capacity), dtype=np.float64)
        self.s = np.zeros((num_nodes, capacity), dtype=np.int64)
        self.eid = np.zeros((num_nodes, capacity), dtype=np.int64)
        self.count = np.zeros(num_nodes, dtype=np.int64)

    @property
    def num_nodes(self) -> int:
        return len(self.count)

    def push(self, src, dst, t, s, eid=None) -> None:
        src = np.ascontiguousarray(src, dtype=np.int64)
        dst = np.ascontiguousarray(dst, dtype=np.int64)
        s = np.ascontiguousarray(s, dtype=np.int64)
        eid = s if eid is None else np.ascontiguousarray(eid, dtype=np.int64)
        kernels.ring_push(self.nbr, self.t, self.s, self.eid, self.count, src, dst,
                          np.ascontiguousarray(t, dtype=np.float64), s, eid)

    def gather(self, nodes: np.ndarray, before: np.ndarray | None = None):
        """Padded (len(nodes), d) views ordered oldest to newest.

        Entries with time >= `before` (per row) are masked so a store that ran
        ahead of a query still answers with E(t-) semantics.
        """
        nodes = np.asarray(nodes, dtype=np.int64)
        d = self.capacity
        cnt = self.count[nodes]
        fill = np.minimum(cnt, d)
        j = np.arange(d)
        slot = (cnt[:, None] - fill[:, None] + j[None, :]) % d
        mask = j[None, :] < fill[:, None]
        rows = nodes[:, None]
        nbr = np.where(mask, self.nbr[rows, slot], 0)
        t = np.where(mask, self.t[rows, slot], 0.0)
        s = np.where(mask, self.s[rows, slot], 0)
        eid = np.where(mask, self.eid[rows, slot], 0)
        if before is not None:
            mask &= t < np.asarray(before, dtype=np.float64).reshape(-1, 1)
        return nbr, t, s, eid, mask

    def entries(self, u: int, t: float | None = None):
        if u < 0 or u >= self.num_nodes:
            return []
        nbr, tt, ss, ee, mask = self.gather(np.array([u]), None if t is None else np.array([t]))
        return [(int(nbr[0, j]), float(tt[0, j]), int(ss[0, j]), int(ee[0, j]))
                for j in range(self.capacity) if mask[0, j]]

    def copy(self) -> "NeighborStore":
        out = NeighborStore.__new__(NeighborStore)
        out.capacity = self.capacity
        for name in ("nbr", "t", "s", "eid", "count"):
            setattr(out, name, getattr(self, name).copy())
        return out


def recent_neighbors(g: TemporalGraph, u: int, t: float, d: int):
    """Up to d most recent interactions of u strictly before t, oldest first.

    Returns (neighbor, t', s', edge_feat) tuples.
    """
    if u < 0 or u >= g.num_nodes:
        return []
    k = int(np.searchsorted(g.time, t, side="left"))
    store = NeighborStore(g.num_nodes, d)
    store.push(g.src[:k], g.dst[:k], g.time[:k], np.arange(k))
    return [(v, tt, ss, tuple(g.edge_feat[e].tolist())) for v, tt, ss, e in store.entries(u)]


@dataclass
class DataSplit:
    train: tuple
    val: tuple
    test: tuple
    masked_nodes: list

    def to_json(self) -> str:
        return json.dumps({"train": list(self.train), "val": list(self.val),
                           "test": list(self.test), "masked_nodes": list(self.masked_nodes)},
                          sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DataSplit":
        d = json.loads(text)
        return cls(tuple(d["train"]), tuple(d["val"]), tuple(d["test"]), list(d["masked_nodes"]))

    def masked_array(self, num_nodes: int) -> np.ndarray:
        m = np.zeros(num_nodes, dtype=bool)
        m[np.asarray(self.masked_nodes, dtype=np.int64)] = True
        return m

    def event_indices(self, g: TemporalGraph, part: str) -> np.ndarray:
        """Event ids of a part. Masked-node events are dropped from train/val."""
        a, b = getattr(self, part)
        idx = np.arange(a, b)
        if part in ("train", "val") and self.masked_nodes:
            m = self.masked_array(g.num_nodes)
            idx = idx[~(m[g.src[idx]] | m[g.dst[idx]])]
        return idx


def chronological_split(g: TemporalGraph, ratios=(0.70, 0.15, 0.15), mask_fraction: float = 0.10,
                        rng_seed: int = 0) -> DataSplit:
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) < 0:
        raise GraphError(f"ratios must be 3 non-negative numbers summing to 1, got {ratios}")
    if not 0 <= mask_fraction < 1:
        raise GraphError("mask_fraction must be in [0, 1)")
    n = g.num_events
    a = int(round(ratios[0] * n))
    b = int(round((ratios[0] + ratios[1]) * n))
    if a == 0 or b == a or b == n:
        raise GraphError(f"graph with {n} events too small for split {ratios}")
    rng = np.random.default_rng(rng_seed)
    n_mask = int(round(mask_fraction * g.num_nodes))
    masked = sorted(int(x) for x in rng.choice(g.num_nodes, size=n_mask, replace=False)) if n_mask else []
    return DataSplit((0, a), (a, b), (b, n), masked)


def sample_negatives(dst: np.ndarray, candidates: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One negative per positive destination, uniform over candidates != dst."""
    dst = np.asarray(dst, dtype=np.int64)
    cand = np.asarray(candidates, dtype=np.int64)
    if cand.size == 0:
        raise ConfigError("empty negative candidate pool")
    out = cand[rng.integers(0, cand.size, size=dst.size)]
    bad = out == dst
    while bad.any():
        if cand.size == 1:
            # only possible candidate equals the destination
            raise ConfigError("candidate pool has no node other than the positive destination")
        out[bad] = cand[rng.integers(0, cand.size, size=int(bad.sum()))]
        bad = out == dst
    return out
