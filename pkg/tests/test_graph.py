import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tgrev.graph import (ConfigError, GraphError, NeighborStore, chronological_split, from_edges,
                         ingest_events, recent_neighbors, sample_negatives)

from helpers import random_graph


def test_ingest_tie_keeps_input_order():
    g = ingest_events("src,dst,time\na,b,1.0\nc,d,1.0\na,c,2.0\n")
    assert list(g.seq) == [0, 1, 2]
    assert [g.id_map[x] for x in g.src] == ["a", "c", "a"]
    assert [g.id_map[x] for x in g.dst] == ["b", "d", "c"]


def test_ingest_sorts_stably_and_maps_dense():
    g = ingest_events([("10", "3", 5.0), ("3", "7", 1.0), ("7", "10", 1.0)])
    assert g.num_nodes == 3 and g.id_map == ["3", "7", "10"]
    assert g.time.tolist() == [1.0, 1.0, 5.0]
    assert g.src.tolist() == [0, 1, 2] and g.dst.tolist() == [1, 2, 0]


def test_ingest_empty():
    g = ingest_events("src,dst,time\n")
    assert g.num_events == 0 and g.num_nodes == 0


def test_ingest_features_and_csv_round_trip(tmp_path):
    g = ingest_events("src,dst,time,f0,f1\n1,2,0.5,1.5,-2\n2,3,0.75,0,1\n")
    assert g.feat_dim == 2
    p = tmp_path / "ev.csv"
    g.to_csv(p)
    h = ingest_events(p)
    assert np.array_equal(h.edge_feat, g.edge_feat) and np.array_equal(h.time, g.time)
    assert h.id_map == g.id_map


@pytest.mark.parametrize("text, msg", [
    ("src,dst,time\n1,2\n", "line 2"),
    ("src,dst,time\n1,2,x\n", "line 2"),
    ("src,dst,time\n1,2,1\n2,3,-1\n", "negative time"),
    ("src,dst,time\n1,2,1,0.5\n2,3,2\n", "arity"),
    ("src,dst,time\n1,1,1\n", "self-loop"),
])
def test_ingest_errors(text, msg):
    with pytest.raises(GraphError, match=msg):
        ingest_events(text)


def test_self_loops_opt_in():
    g = ingest_events("src,dst,time\n1,1,1\n", allow_self_loops=True)
    assert g.num_events == 1


def test_recent_neighbors_window_and_boundary():
    g = from_edges([(0, 1, 1.0), (0, 2, 2.0), (0, 3, 3.0)], 4)
    assert [e[1] for e in recent_neighbors(g, 0, 10.0, 2)] == [2.0, 3.0]
    assert [e[1] for e in recent_neighbors(g, 0, 3.0, 2)] == [1.0, 2.0]
    assert recent_neighbors(g, 99, 10.0, 2) == []


def test_repeated_neighbor_appears_per_event():
    g = from_edges([(0, 1, float(t)) for t in range(1, 6)], 2)
    out = recent_neighbors(g, 0, 100.0, 3)
    assert [e[0] for e in out] == [1, 1, 1]
    assert [(e[1], e[2]) for e in out] == [(3.0, 2), (4.0, 3), (5.0, 4)]


def _brute(g, u, t, d):
    rows = [(int(g.dst[i]) if g.src[i] == u else int(g.src[i]), float(g.time[i]), i)
            for i in range(g.num_events) if g.time[i] < t and u in (g.src[i], g.dst[i])]
    return rows[-d:]


@given(st.integers(0, 10_000), st.integers(1, 5))
def test_store_matches_brute_force_scan(seed, d):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 6, 25, n_times=8)
    for t in np.unique(np.concatenate([g.time, [100.0]])):
        for u in range(g.num_nodes):
            got = [(v, tt, ss) for v, tt, ss, _ in recent_neighbors(g, u, float(t), d)]
            assert got == _brute(g, u, t, d)


@given(st.integers(0, 10_000))
def test_causality_appending_future_events(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 6, 20, n_times=6)
    t = float(g.time[len(g.time) // 2])
    before = [recent_neighbors(g, u, t, 3) for u in range(6)]
    extra = [(int(a), int(b), t + float(k)) for k, (a, b) in enumerate(rng.integers(0, 6, (5, 2))) if a != b]
    ev = [(int(g.src[i]), int(g.dst[i]), float(g.time[i])) for i in range(g.num_events)] + extra
    g2 = from_edges(ev, 6)
    assert [recent_neighbors(g2, u, t, 3) for u in range(6)] == before


def test_store_gather_masks_at_or_after_query():
    s = NeighborStore(3, 4)
    s.push([0, 0], [1, 2], [1.0, 2.0], [0, 1])
    nbr, t, _, _, mask = s.gather(np.array([0, 1]), before=np.array([2.0, 5.0]))
    assert mask.tolist() == [[True, False, False, False], [True, False, False, False]]
    assert nbr[0, 0] == 1 and t[1, 0] == 1.0
    with pytest.raises(ConfigError):
        NeighborStore(3, 0)


def test_split_ranges_and_masking():
    rng = np.random.default_rng(0)
    g = random_graph(rng, 20, 100)
    sp = chronological_split(g, (0.7, 0.15, 0.15), 0.0)
    assert (sp.train, sp.val, sp.test, sp.masked_nodes) == ((0, 70), (70, 85), (85, 100), [])
    assert len(sp.event_indices(g, "train")) == 70
    sp = chronological_split(g, mask_fraction=0.1, rng_seed=3)
    assert len(sp.masked_nodes) == 2
    m = sp.masked_array(g.num_nodes)
    for part in ("train", "val"):
        idx = sp.event_indices(g, part)
        assert not (m[g.src[idx]] | m[g.dst[idx]]).any()
    # test range keeps masked-node events
    assert len(sp.event_indices(g, "test")) == 15


def test_split_deterministic_bytes():
    g = random_graph(np.random.default_rng(1), 30, 200)
    a = chronological_split(g, mask_fraction=0.1, rng_seed=9).to_json()
    b = chronological_split(g, mask_fraction=0.1, rng_seed=9).to_json()
    assert a == b
    d = json.loads(a)
    assert set(d) == {"train", "val", "test", "masked_nodes"}


@pytest.mark.parametrize("ratios, frac", [((0.5, 0.5), 0.1), ((0.7, 0.2, 0.2), 0.1), ((0.7, 0.15, 0.15), 1.0)])
def test_split_rejects_bad_args(ratios, frac):
    g = random_graph(np.random.default_rng(1), 10, 50)
    with pytest.raises(GraphError):
        chronological_split(g, ratios, frac)


def test_split_too_small():
    g = from_edges([(0, 1, 1.0), (1, 2, 2.0)], 3)
    with pytest.raises(GraphError, match="too small"):
        chronological_split(g)


def test_negatives_membership_and_singleton():
    rng = np.random.default_rng(0)
    pool = np.array([2, 4, 6, 8])
    dst = rng.integers(0, 10, 500)
    neg = sample_negatives(dst, pool, rng)
    assert set(neg.tolist()) <= set(pool.tolist()) and not np.any(neg == dst)
    assert sample_negatives(np.array([1, 3]), np.array([7]), rng).tolist() == [7, 7]
    with pytest.raises(ConfigError):
        sample_negatives(np.array([1]), np.array([], dtype=np.int64), rng)
    with pytest.raises(ConfigError):
        sample_negatives(np.array([7]), np.array([7]), rng)


def test_negatives_uniform_chi_square():
    rng = np.random.default_rng(123)
    draws = sample_negatives(np.full(10_000, -1), np.arange(10), rng)
    counts = np.bincount(draws, minlength=10)
    expected = 1000.0
    sigma = np.sqrt(10_000 * 0.1 * 0.9)
    assert np.all(np.abs(counts - expected) < 3 * sigma)
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    assert chi2 < 27.88  # 0.999 quantile, 9 dof
