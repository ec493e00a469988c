"""Synthetic temporal graphs: oscillating skip-link cycles, tetrahedra signs,
and a periodic user-item stream for link prediction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expressive import ISO, NON_ISO, rp_oracle
from .graph import TemporalGraph, from_edges


@dataclass(frozen=True)
class CslSpec:
    N: int
    s: int

    def validate(self):
        if not (2 <= self.s < self.N / 2):
            raise ValueError(f"skip must satisfy 2 <= s < N/2, got N={self.N}, s={self.s}")


def gen_csl(N: int, s: int) -> list[tuple[int, int]]:
    """Ring plus skip edges, canonical (min, max) form, sorted."""
    CslSpec(N, s).validate()
    edges = set()
    for i in range(N):
        for j in ((i + 1) % N, (i + s) % N):
            edges.add((min(i, j), max(i, j)))
    return sorted(edges)


def _snapshots_graph(N: int, skips: list[int]) -> TemporalGraph:
    ev = []
    for i, s in enumerate(skips):
        ev += [(a, b, float(i + 1)) for a, b in gen_csl(N, s)]
    return from_edges(ev, N)


def _edge_multiset(g: TemporalGraph):
    return sorted((min(a, b), max(a, b), t) for a, b, t in zip(g.src.tolist(), g.dst.tolist(), g.time.tolist()))


def relabel_canonical(g: TemporalGraph, perm: np.ndarray) -> TemporalGraph:
    """Relabel, then re-sequence edges inside each timestamp in canonical order."""
    h = g.relabel(perm)
    ev = sorted(((min(a, b), max(a, b), t) for a, b, t in zip(h.src.tolist(), h.dst.tolist(), h.time.tolist())),
                key=lambda e: (e[2], e[0], e[1]))
    return from_edges(ev, g.num_nodes)


def random_non_automorphism(g: TemporalGraph, rng: np.random.Generator, tries: int = 100) -> np.ndarray:
    base = _edge_multiset(g)
    for _ in range(tries):
        perm = rng.permutation(g.num_nodes)
        if _edge_multiset(g.relabel(perm)) != base:
            return perm
    return np.arange(g.num_nodes)


def gen_oscillating_csl(N: int = 11, s1: int = 2, s2: int = 3, length: int = 6, rng=None):
    """Forward (s1, s2, s1, ...) and reversed (s2, s1, ...) oscillations.

    With an rng the partner is relabeled by a random non-automorphism.
    Returns (graph, partner, label).
    """
    CslSpec(N, s1).validate()
    CslSpec(N, s2).validate()
    fwd = [s1 if i % 2 == 0 else s2 for i in range(length)]
    rev = [s2 if i % 2 == 0 else s1 for i in range(length)]
    ga = _snapshots_graph(N, fwd)
    gb = _snapshots_graph(N, rev)
    if rng is not None:
        gb = relabel_canonical(gb, random_non_automorphism(gb, rng))
    return ga, gb, (ISO if s1 == s2 else NON_ISO)


def oscillating_corpus(N: int = 11, skips=None, length: int = 6, n_noniso: int = 50,
                       n_iso: int = 10, seed: int = 0):
    """List of (entry, graph_a, graph_b). Non-isomorphic pairs cycle through all
    ordered skip pairs; isomorphic pairs use a random skip twice. By default every
    valid skip 2 <= s < N/2 is used."""
    rng = np.random.default_rng(seed)
    if skips is None:
        skips = [s for s in range(2, N) if 2 * s < N]
    if len(skips) < 2 and n_noniso:
        raise ValueError(f"N={N} admits fewer than two skips")
    ordered = [(a, b) for a in skips for b in skips if a != b]
    specs = [ordered[i % len(ordered)] for i in range(n_noniso)]
    specs += [(s, s) for s in rng.choice(list(skips), size=n_iso)]
    order = rng.permutation(len(specs))
    out = []
    for k, j in enumerate(order):
        s1, s2 = int(specs[j][0]), int(specs[j][1])
        pair_seed = int(rng.integers(2**31))
        ga, gb, label = gen_oscillating_csl(N, s1, s2, length, np.random.default_rng(pair_seed))
        entry = {"pair_id": f"osc-{k:04d}", "generator": "oscillating-csl",
                 "params": {"N": N, "s1": s1, "s2": s2, "length": length, "seed": pair_seed},
                 "label": label}
        out.append((entry, ga, gb))
    return out


# ------------------------------------------------------------- tetrahedra signs
@dataclass
class Sign:
    """T tetrahedra; center of tetrahedron i is node 4i. Arrangement edges join centers."""
    T: int
    arrangement: list  # (i, j) tetrahedron index pairs, max degree 2
    times: list  # wedge time of each tetrahedron

    def graph(self) -> TemporalGraph:
        ev = [(4 * i, 4 * j, 0.0) for i, j in sorted(self.arrangement)]
        for i in range(self.T):
            nodes = [4 * i + q for q in range(4)]
            ev += [(a, b, float(self.times[i])) for a in nodes for b in nodes if a < b]
        return from_edges(ev, 4 * self.T)

    def center_graph(self) -> TemporalGraph:
        return from_edges([(i, j, 0.0) for i, j in sorted(self.arrangement)], self.T)


def _cycle(nodes):
    return [(nodes[i], nodes[(i + 1) % len(nodes)]) for i in range(len(nodes))]


def _path(nodes):
    return [(nodes[i], nodes[i + 1]) for i in range(len(nodes) - 1)]


def random_sign(T: int, rng: np.random.Generator, groups: int | None = None) -> Sign:
    """Random max-degree-2 arrangement (paths and cycles) over T centers."""
    order = [int(x) for x in rng.permutation(T)]
    arr = []
    i = 0
    while i < T:
        size = int(rng.integers(1, T - i + 1))
        chunk = order[i:i + size]
        if size >= 3 and rng.random() < 0.5:
            arr += _cycle(chunk)
        else:
            arr += _path(chunk)
        i += size
    G = groups if groups is not None else int(rng.integers(1, 4))
    return Sign(T, [(min(a, b), max(a, b)) for a, b in arr], [1 + (k % G) for k in range(T)])


def periodic_cycles_sign(cycle_sizes: list[int], G: int, extra_path: int = 0) -> Sign:
    """Disjoint cycles whose tetrahedra times repeat with period G along each cycle."""
    arr, times = [], []
    start = 0
    for c in cycle_sizes:
        nodes = list(range(start, start + c))
        arr += _cycle(nodes)
        times += [1 + (k % G) for k in range(c)]
        start += c
    if extra_path:
        nodes = list(range(start, start + extra_path))
        arr += _path(nodes)
        times += [1 + (k % G) for k in range(extra_path)]
        start += extra_path
    return Sign(start, [(min(a, b), max(a, b)) for a, b in arr], times)


def hexagon_vs_triangles_pair() -> tuple[TemporalGraph, TemporalGraph]:
    """Six tetrahedra wired as a hexagon versus two triangles, wedge groups of period 3."""
    return periodic_cycles_sign([6], 3).graph(), periodic_cycles_sign([3, 3], 3).graph()


def sign_label(a: Sign, b: Sign) -> str:
    """Ground truth from the center graphs with wedge times as node attributes."""
    if a.T != b.T:
        return NON_ISO
    return rp_oracle(a.center_graph(), b.center_graph(), a.times, b.times, budget=max(9, a.T))


# WL-equivalent cycle partitions (with compatible wedge periods) within reach of K=4
HARD_PAIRS = [([6], [3, 3], (1, 3)), ([8], [4, 4], (1, 2, 4)), ([7], [3, 4], (1,)),
              ([8], [3, 5], (1,)), ([9], [4, 5], (1,)), ([9], [3, 3, 3], (1, 3))]


def cuneiform_corpus(n_pairs: int = 40, iso_fraction: float = 0.375, hard_fraction: float = 0.4,
                     t_range=(4, 8), seed: int = 0):
    """Labeled pairs of signs with equal node counts.

    Isomorphic pairs are a sign and a relabeled copy; non-isomorphic pairs mix
    WL-equivalent cycle swaps with random signs of equal size.
    """
    rng = np.random.default_rng(seed)
    n_iso = int(round(iso_fraction * n_pairs))
    n_hard = int(round(hard_fraction * (n_pairs - n_iso)))
    n_rand = n_pairs - n_iso - n_hard
    items = []
    for _ in range(n_iso):
        s = random_sign(int(rng.integers(t_range[0], t_range[1] + 1)), rng)
        items.append(("iso", s, s))
    for k in range(n_hard):
        ca, cb, periods = HARD_PAIRS[k % len(HARD_PAIRS)]
        G = int(rng.choice(periods))
        pad = int(rng.integers(0, 9 - sum(ca) + 1)) if sum(ca) < 9 else 0
        items.append(("hard", periodic_cycles_sign(ca, G, pad), periodic_cycles_sign(cb, G, pad)))
    while sum(1 for it in items if it[0] == "rand") < n_rand:
        T = int(rng.integers(t_range[0], t_range[1] + 1))
        G = int(rng.integers(1, 4))
        a, b = random_sign(T, rng, G), random_sign(T, rng, G)
        if sign_label(a, b) == NON_ISO:
            items.append(("rand", a, b))
    out = []
    for k, j in enumerate(rng.permutation(len(items))):
        kind, a, b = items[j]
        label = sign_label(a, b)
        ga = a.graph().relabel(rng.permutation(4 * a.T))
        gb = b.graph().relabel(rng.permutation(4 * b.T))
        entry = {"pair_id": f"cun-{k:04d}", "generator": "cuneiform-like",
                 "params": {"kind": kind, "T": a.T,
                            "a": {"arrangement": a.arrangement, "times": a.times},
                            "b": {"arrangement": b.arrangement, "times": b.times}},
                 "label": label}
        out.append((entry, ga, gb))
    return out


# --------------------------------------------------------- periodic bipartite
@dataclass
class PeriodicMeta:
    users: int
    items: int
    period: int
    noise: float
    cycles: np.ndarray  # (users, period) item node ids
    on_cycle: np.ndarray  # per event: True if drawn from the user's cycle
    phase: np.ndarray  # per event: cycle position the user was at


def gen_periodic_bipartite(users: int = 50, items: int = 20, period: int = 5, events: int = 20000,
                           noise: float = 0.1, rng=None) -> tuple[TemporalGraph, PeriodicMeta]:
    """Users 0..U-1, items U..U+I-1. Each user walks a personal cycle of
    `period` distinct items; with probability `noise` an event is a uniform
    random item instead and the cycle does not advance. Event i happens at
    time i + 1."""
    if users < 2 or items < 2:
        raise ValueError("need at least 2 users and 2 items")
    if period > items:
        raise ValueError("period cannot exceed the number of items")
    rng = rng if rng is not None else np.random.default_rng(0)
    cycles = np.stack([users + rng.choice(items, size=period, replace=False) for _ in range(users)])
    pos = np.zeros(users, dtype=np.int64)
    who = rng.integers(0, users, size=events)
    noisy = rng.random(events) < noise
    rand_item = users + rng.integers(0, items, size=events)
    dst = np.empty(events, dtype=np.int64)
    phase = np.empty(events, dtype=np.int64)
    for i in range(events):
        u = who[i]
        phase[i] = pos[u] % period
        if noisy[i]:
            dst[i] = rand_item[i]
        else:
            dst[i] = cycles[u, phase[i]]
            pos[u] += 1
    g = TemporalGraph(who, dst, np.arange(1, events + 1, dtype=np.float64), np.zeros((events, 0)),
                      users + items, directed=True)
    return g, PeriodicMeta(users, items, period, noise, cycles, ~noisy, phase)


def csl7_snapshot_pair() -> tuple[TemporalGraph, TemporalGraph]:
    """C(7,2) and C(7,3) as single-snapshot temporal graphs, nodes labeled clockwise."""
    return _snapshots_graph(7, [2]), _snapshots_graph(7, [3])


def random_temporal_graph(n: int, n_times: int, rng: np.random.Generator, p: float = 0.35) -> TemporalGraph:
    ev = []
    for t in range(1, n_times + 1):
        for a in range(n):
            for b in range(a + 1, n):
                if rng.random() < p:
                    ev.append((a, b, float(t)))
    return from_edges(ev, n)


def _two_regular(n: int, split: bool, t: float) -> list:
    if split and n >= 6:
        h = n // 2
        return [(a, b, t) for a, b in _cycle(list(range(h))) + _cycle(list(range(h, n)))]
    return [(a, b, t) for a, b in _cycle(list(range(n)))]


def random_small_pairs(n_pairs: int = 500, max_nodes: int = 7, max_times: int = 5, seed: int = 0):
    """Mixed pairs for oracle cross-checks: relabeled copies, one-edge edits,
    independent draws and WL-hard 2-regular pairs. Labels are left to the oracle."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n_pairs):
        n = int(rng.integers(2, max_nodes + 1))
        m = int(rng.integers(1, max_times + 1))
        kind = k % 4
        ga = random_temporal_graph(n, m, rng)
        if kind == 0:
            gb = ga.relabel(rng.permutation(n))
        elif kind == 1:
            ev = list(zip(ga.src.tolist(), ga.dst.tolist(), ga.time.tolist()))
            if ev and rng.random() < 0.5:
                ev.pop(int(rng.integers(len(ev))))
            a, b = sorted(rng.choice(n, size=2, replace=False).tolist())
            ev.append((a, b, float(rng.integers(1, m + 1))))
            gb = from_edges(ev, n).relabel(rng.permutation(n))
        elif kind == 2:
            gb = random_temporal_graph(n, m, rng)
        else:
            n = int(rng.integers(6, max_nodes + 1))
            extra = [(a, b, 1.0) for a, b in _path(list(range(n)))] if rng.random() < 0.3 else []
            ea = _two_regular(n, False, 1.0)
            eb = _two_regular(n, n == 6 or rng.random() < 0.5, 1.0)
            ga = from_edges(ea + [(a, b, 2.0) for a, b, _ in extra], n)
            gb = from_edges(eb + [(a, b, 2.0) for a, b, _ in extra], n).relabel(rng.permutation(n))
        out.append(({"pair_id": f"rnd-{k:04d}", "generator": "random-small",
                     "params": {"n": n, "times": m, "kind": kind}}, ga, gb))
    return out
