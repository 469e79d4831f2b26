import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from brute import brute_paths, index_records
from pegquery.datagen import GenParams, generate_pgd
from pegquery.fixtures import merge_example_pgd, random_small_pgd
from pegquery.model import PGD, PGDError, Reference, ReferenceEdge, build_entity_graph
from pegquery.pathindex import (build_histograms, build_path_index, canonical_sequence, compute_context,
                                estimate_count, index_lookup, lookup_arrays, on_demand_paths, record_dtype)


def gen_graph(seed, n=None, correlated=None, labels=3):
    rng = random.Random(seed)
    n = n or rng.randint(4, 60)
    pgd = generate_pgd(GenParams(n_refs=n, n_edges=max(3, min(3 * n // 2, n * (n - 1) // 2)),
                                 n_labels=labels, uncertain_fraction=0.3, k=n // 10, seed=seed,
                                 correlated=rng.random() < 0.5 if correlated is None else correlated))
    return build_entity_graph(pgd)


def check_exact(g, idx, L, beta):
    want = brute_paths(g, L, beta)
    got = index_records(idx)
    assert want.keys() == got.keys()
    for k, (_, le, pn) in want.items():
        _, le2, pn2, bucket = got[k]
        assert le2 == pytest.approx(le, abs=1e-12)
        assert pn2 == pytest.approx(pn, abs=1e-12)
        assert bucket == idx.bucket_fixed(idx.bucket_of(le2 * pn2))


def test_context_two_node_fixture():
    pgd = PGD(["a", "b"], [Reference("v", {"b": 1.0}), Reference("w", {"a": 0.8, "b": 0.2})],
              [ReferenceEdge("v", "w", 0.9)])
    g = build_entity_graph(pgd)
    ctx = compute_context(g)
    v = g.node_index["v"]
    c, ppu, fpu = ctx.row(v)["a"]
    assert (c, ppu) == (1, 0.9)
    assert fpu == pytest.approx(0.72)


def test_context_isolated_node():
    pgd = PGD(["a"], [Reference("v", {"a": 1.0})])
    ctx = compute_context(build_entity_graph(pgd))
    assert ctx.row(0)["a"] == (0, 0.0, 0.0)


@given(st.integers(0, 10_000))
def test_context_brute(seed):
    rng = random.Random(seed)
    pgd = random_small_pgd(rng, correlated=seed % 2 == 0)
    try:
        g = build_entity_graph(pgd)
    except PGDError:
        return
    ctx = compute_context(g)
    for v in range(g.n_nodes):
        for s in range(len(g.labels)):
            nb = [u for u in g.neighbors(v).tolist() if g.disjoint(u, v) and g.label_probs[u, s] > 0]
            if g.correlated:
                pe = [max(g.edge_prob(v, u, a, s) for a in g.supports[v]) for u in nb]
            else:
                pe = [g.edge_prob(v, u) for u in nb]
            assert ctx.count[v, s] == len(nb)
            assert ctx.ppu[v, s] == pytest.approx(max(pe, default=0.0))
            assert ctx.fpu[v, s] == pytest.approx(max((p * g.label_probs[u, s] for p, u in zip(pe, nb)),
                                                      default=0.0))
            assert ctx.fpu[v, s] <= ctx.ppu[v, s] + 1e-15


@given(st.integers(0, 10_000), st.integers(1, 3), st.sampled_from([0.05, 0.1, 0.3]),
       st.sampled_from([0.1, 0.25]))
def test_index_equals_brute_enumeration(seed, L, beta, gamma):
    g = gen_graph(seed)
    check_exact(g, build_path_index(g, L, beta, gamma), L, beta)


@given(st.integers(0, 10_000))
def test_index_exact_on_small_pgds(seed):
    rng = random.Random(seed)
    pgd = random_small_pgd(rng, correlated=seed % 2 == 0)
    try:
        g = build_entity_graph(pgd)
    except PGDError:
        return
    check_exact(g, build_path_index(g, 3, 0.1, 0.1), 3, 0.1)


def test_threads_and_budget_do_not_change_index(tmp_path):
    g = gen_graph(11, n=200)
    base = build_path_index(g, 3, 0.1, 0.1)
    other = build_path_index(g, 3, 0.1, 0.1, threads=4, budget=37, directory=str(tmp_path))
    assert base.table == other.table
    for w in base.segments:
        assert base.segments[w].tobytes() == np.asarray(other.segments[w]).tobytes()


def test_blocks_sorted_by_bucket():
    g = gen_graph(5, n=120)
    idx = build_path_index(g, 2, 0.1, 0.1)
    for blk in idx.blocks.values():
        assert (np.diff(blk.bucket.astype(np.int64)) >= 0).all()
        assert (blk.rec["ordinal"] == np.arange(len(blk))).all()


@given(st.integers(0, 10_000), st.sampled_from([0.1, 0.15, 0.35, 0.7, 1.0]))
def test_lookup_matches_brute_in_both_orientations(seed, alpha):
    g = gen_graph(seed)
    idx = build_path_index(g, 2, 0.1, 0.1)
    want = {}
    for (seq, nodes), (_, le, pn) in brute_paths(g, 2, 0.1).items():
        if le * pn >= alpha - 1e-12:
            want.setdefault(seq, set()).add(nodes)
            want.setdefault(seq[::-1], set()).add(nodes[::-1])
    for seq, paths in want.items():
        got = {r.nodes for r in index_lookup(idx, seq, alpha)}
        assert got == paths


def test_palindrome_lookup_returns_both_orientations():
    pgd = PGD(["a"], [Reference("x", {"a": 1.0}), Reference("y", {"a": 1.0})], [ReferenceEdge("x", "y", 0.5)])
    g = build_entity_graph(pgd)
    idx = build_path_index(g, 1, 0.1, 0.1)
    assert sorted(r.nodes for r in idx.lookup(["a", "a"], 0.4)) == [(0, 1), (1, 0)]
    assert len(idx.blocks[(0, 0)]) == 1
    assert build_histograms(idx).row(["a", "a"])[0] == 2


@given(st.integers(0, 10_000), st.sampled_from([0.02, 0.05, 0.2, 0.6]))
def test_on_demand_agrees_with_brute(seed, alpha):
    g = gen_graph(seed, n=30)
    want = {}
    for (seq, nodes), (_, le, pn) in brute_paths(g, 2, min(alpha, 0.1)).items():
        if le * pn >= alpha - 1e-12:
            want.setdefault(seq, set()).add(nodes)
            want.setdefault(seq[::-1], set()).add(nodes[::-1])
    idx = build_path_index(g, 2, 0.1, 0.1)
    for seq, paths in want.items():
        assert {r.nodes for r in on_demand_paths(g, seq, alpha)} == paths
        # below beta the lookup falls back to traversal
        assert {tuple(r) for r in lookup_arrays(idx, seq, alpha)[0].tolist()} == paths


def test_length_zero_records():
    g = build_entity_graph(merge_example_pgd())
    idx = build_path_index(g, 2, 0.1, 0.1)
    recs = {r.nodes for r in idx.lookup(["r"], 0.1)}
    assert recs == {(g.node_index["s3"],), (g.node_index["s34"],)}


def test_unknown_label_and_too_long_sequence():
    g = build_entity_graph(merge_example_pgd())
    idx = build_path_index(g, 1, 0.1, 0.1)
    assert idx.lookup(["zz"], 0.5) == []
    with pytest.raises(ValueError):
        idx.lookup(["a", "a", "a"], 0.5)


@pytest.mark.parametrize("kw", [dict(max_len=0), dict(beta=0.0), dict(gamma=1.5), dict(gamma=1e-6)])
def test_build_rejects_bad_parameters(kw):
    g = build_entity_graph(merge_example_pgd())
    args = dict(max_len=2, beta=0.1, gamma=0.1) | kw
    with pytest.raises(ValueError):
        build_path_index(g, **args)


def test_canonical_sequence():
    assert canonical_sequence((2, 1, 0)) == ((0, 1, 2), True)
    assert canonical_sequence((0, 1, 0)) == ((0, 1, 0), False)


def test_record_layout_sorts_bytewise():
    dt = record_dtype(2)
    rec = np.zeros(4, dtype=dt)
    rec["seq"] = [[0, 300], [0, 2], [1, 0], [0, 2]]
    rec["bucket"] = [5, 7, 1, 2]
    key_bytes = 2 * 2 + 2
    by_bytes = sorted(range(4), key=lambda i: rec[i].tobytes()[:key_bytes])
    by_value = sorted(range(4), key=lambda i: (tuple(rec["seq"][i]), int(rec["bucket"][i])))
    assert by_bytes == by_value


@given(st.integers(0, 10_000))
def test_histogram_counts_at_points(seed):
    g = gen_graph(seed)
    idx = build_path_index(g, 2, 0.1, 0.1)
    h = build_histograms(idx)
    rng = random.Random(seed)
    for key in rng.sample(sorted(idx.table), min(5, len(idx.table))):
        for a in h.points.tolist():
            assert estimate_count(h, key, a) == len(index_lookup(idx, key, a))


def test_estimate_interpolates_between_points():
    g = gen_graph(3, n=150)
    h = build_histograms(build_path_index(g, 1, 0.1, 0.1))
    key = max(h.counts, key=lambda k: h.counts[k][0])
    lo, hi = estimate_count(h, key, 0.3), estimate_count(h, key, 0.4)
    mid = estimate_count(h, key, 0.35)
    assert min(lo, hi) <= mid <= max(lo, hi)
    assert estimate_count(h, ["nope"], 0.3) == 0.0
