import math
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from brute import (fixture_cases, kpartite_matches, random_kpartite, same_answers, stage_losses)
from pegquery.datagen import GenParams, generate_pgd, generate_query
from pegquery.fixtures import merge_example_pgd, merge_example_query
from pegquery.model import build_entity_graph, match_probability
from pegquery.pathindex import build_histograms, build_path_index, compute_context, estimate_count
from pegquery.query import (QueryError, QueryGraph, answer_query, build_kpartite, decompose_query,
                            joint_reduce, node_candidates, query_paths, reduce_structure, run_query)
from pegquery.query.candidates import join_candidates
from pegquery.query.engine import join_order
from pegquery.query.graph import assemble_decomposition, path_stats
from pegquery.worlds import oracle_subgraph_match


def setup(pgd, L=3):
    g = build_entity_graph(pgd)
    idx = build_path_index(g, L, 0.1, 0.1)
    return g, idx, compute_context(g), build_histograms(idx)


# --------------------------------------------------------------------------
# query graphs and decomposition


def test_query_validation():
    with pytest.raises(QueryError):
        QueryGraph({"a": "x", "b": "y"}, [])
    with pytest.raises(QueryError):
        QueryGraph({"a": "x"}, [("a", "a")])
    with pytest.raises(QueryError):
        QueryGraph({"a": "x", "b": "x"}, [("a", "b")], alpha=1.5)


def test_query_paths_triangle():
    q = QueryGraph({"a": "x", "b": "x", "c": "x"}, [("a", "b"), ("b", "c"), ("a", "c")])
    ps = query_paths(q, 2)
    assert len([p for p in ps if len(p) == 2]) == 3
    assert len([p for p in ps if len(p) == 3]) == 3


def test_path_stats_cycle():
    q = QueryGraph({"a": "x", "b": "x", "c": "x", "d": "y"}, [("a", "b"), ("b", "c"), ("a", "c"), ("c", "d")])
    st_ = path_stats(q, ("a", "b", "c"))
    assert st_.cycles["a"] == ["c"]
    assert st_.neighbors == ["d"]
    assert st_.reverse["d"] == ["c"]
    assert st_.density == 1.0


@given(st.integers(0, 10_000), st.integers(1, 3))
def test_decomposition_covers_query(seed, L):
    rng = random.Random(seed)
    n = rng.randint(1, 6)
    m = rng.randint(max(n - 1, 0), n * (n - 1) // 2)
    q = generate_query(n, m, ["a", "b"], seed)
    d = decompose_query(q, L, lambda seq, a: 10.0 + len(seq))
    assert set(d.cover_edges) == set(q.edges)
    assert set(d.cover_nodes) == set(q.labels)
    assert all(len(p) - 1 <= L for p in d.paths)
    for (i, j), shared in d.join_predicates.items():
        assert set(shared) == set(d.paths[i]) & set(d.paths[j])
    order = join_order(d)
    assert sorted(order) == list(range(len(d.paths)))
    # every path after the first overlaps an earlier one
    for k in range(1, len(order)):
        assert any(set(d.paths[order[k]]) & set(d.paths[o]) for o in order[:k])


def test_assemble_rejects_partial_cover():
    q = merge_example_query()
    with pytest.raises(QueryError):
        assemble_decomposition(q, [("A", "B")])


# --------------------------------------------------------------------------
# candidates


def test_node_pruning_cardinality():
    pgd = generate_pgd(GenParams(n_refs=40, n_labels=2, seed=1))
    g, idx, ctx, h = setup(pgd, 1)
    q = QueryGraph({"c": "l0", "x": "l1", "y": "l1", "z": "l1"}, [("c", "x"), ("c", "y"), ("c", "z")], 0.01)
    nc = node_candidates(q, g, ctx, 0.01)
    s = g.label_index["l1"]
    assert not nc["c"][ctx.count[:, s] < 3].any()


def test_join_candidates_agree_with_pairs():
    g, idx, ctx, h = setup(generate_pgd(GenParams(n_refs=80, n_labels=2, seed=4)), 2)
    q = generate_query(4, 4, g.labels, seed=2, alpha=0.2)
    res = run_query(g, idx, ctx, h, q, keep_stages=True)
    tr = res.trace
    for (i, j) in tr.decomposition.join_predicates:
        for row in range(min(5, len(tr.candidates.paths[i]))):
            got = join_candidates(q, g, tr.decomposition, tr.candidates, i, row, j, 0.2)
            assert got.tolist() == sorted(tr.kpartite.links[(i, j)].of(row).tolist())


# --------------------------------------------------------------------------
# k-partite reduction


@given(st.integers(0, 100_000), st.sampled_from([0.01, 0.1, 0.3, 0.6]))
def test_kpartite_bounds_and_confluence(seed, alpha):
    rng = random.Random(seed)
    w1, w2, pairs = random_kpartite(rng)
    seq = joint_reduce(build_kpartite(w1, w2, pairs), alpha, threads=1)
    par = joint_reduce(build_kpartite(w1, w2, pairs), alpha, threads=3)
    assert seq.survivors() == par.survivors()
    best = {}
    for sel, p in kpartite_matches(w1, w2, pairs):
        for i, v in enumerate(sel):
            best[(i, v)] = max(best.get((i, v), 0.0), p)
        if p >= alpha:
            assert all(seq.alive[i][v] for i, v in enumerate(sel))
    for i in range(seq.k):
        for v in np.flatnonzero(seq.alive[i]).tolist():
            assert seq.bound(i, v) >= best.get((i, v), 0.0) - 1e-12
            assert par.bound(i, v) == pytest.approx(seq.bound(i, v), abs=1e-15)


def test_structure_reduction_chain():
    w = [np.ones(2), np.ones(2), np.ones(1)]
    pairs = {(0, 1): (np.array([0]), np.array([0])), (1, 2): (np.array([1]), np.array([0]))}
    g = reduce_structure(build_kpartite(w, w, pairs))
    assert g.sizes() == [0, 0, 0]


def test_upperbound_reduction_prunes():
    w1 = [np.array([0.5, 1.0]), np.array([0.5])]
    w2 = [np.ones(2), np.ones(1)]
    pairs = {(0, 1): (np.array([0, 1]), np.array([0, 0]))}
    g = joint_reduce(build_kpartite(w1, w2, pairs), 0.4)
    assert g.survivors() == [frozenset({1}), frozenset({0})]
    assert g.bound(1, 0) == 0.5


# --------------------------------------------------------------------------
# engine


def test_merge_example_engine():
    g, idx, ctx, h = setup(merge_example_pgd())
    res = answer_query(g, idx, ctx, h, merge_example_query(), alpha=0.05)
    assert [m.mapping for m in res] == [{"A": "s3", "B": "s2", "C": "s4"}]
    assert abs(res[0].probability - 0.1) < 1e-9
    assert answer_query(g, idx, ctx, h, merge_example_query(), alpha=0.25) == []


@given(st.integers(0, 100_000))
def test_engine_equals_oracle(seed):
    for _, pgd, g, q, _ in fixture_cases(1, seed):
        idx = build_path_index(g, 3, 0.1, 0.1)
        ctx, h = compute_context(g), build_histograms(idx)
        for a in (0.05, 0.3, 0.7):
            res = run_query(g, idx, ctx, h, q, alpha=a, keep_stages=True)
            exp = oracle_subgraph_match(g, q, a)
            assert same_answers(exp, res.matches)
            assert stage_losses(g, res, exp) == []


@given(st.integers(0, 100_000))
def test_engine_shorter_decomposition_and_threads(seed):
    for _, pgd, g, q, _ in fixture_cases(1, seed):
        idx = build_path_index(g, 3, 0.1, 0.1)
        ctx, h = compute_context(g), build_histograms(idx)
        base = run_query(g, idx, ctx, h, q, alpha=0.05).matches
        assert same_answers(base, run_query(g, idx, ctx, h, q, alpha=0.05, max_len=1).matches)
        par = run_query(g, idx, ctx, h, q, alpha=0.05, threads=3).matches
        assert par == base


def test_match_probabilities_are_exact():
    g, idx, ctx, h = setup(generate_pgd(GenParams(n_refs=150, n_labels=3, seed=9, uncertain_fraction=0.5)), 2)
    q = generate_query(3, 3, g.labels, seed=1, alpha=0.2)
    for m in answer_query(g, idx, ctx, h, q):
        exact = match_probability(g, q, m.mapping)
        assert m.probability == exact.probability
        assert m.probability >= 0.2 - 1e-12


def test_stage_sizes_decrease():
    g, idx, ctx, h = setup(generate_pgd(GenParams(n_refs=300, seed=2)), 2)
    for s in range(3):
        q = generate_query(4, 5, g.labels, seed=s, alpha=0.5)
        tr = run_query(g, idx, ctx, h, q).trace
        a, b, c = (tr.stage(x).product for x in ("path", "path+context", "final"))
        assert a >= b >= c
        assert math.isfinite(tr.stage("path").seconds)


def test_engine_errors_and_empty_cases():
    g, idx, ctx, h = setup(merge_example_pgd(), 1)
    with pytest.raises(QueryError):
        run_query(g, idx, ctx, h, merge_example_query(), max_len=2)
    q = QueryGraph({"x": "nope", "y": "a"}, [("x", "y")])
    assert run_query(g, idx, ctx, h, q).matches == []


def test_single_node_query():
    g, idx, ctx, h = setup(merge_example_pgd())
    q = QueryGraph({"x": "r"}, [], 0.15)
    got = {m.mapping["x"] for m in answer_query(g, idx, ctx, h, q)}
    assert got == {"s3", "s34"}
    assert {m.mapping["x"] for m in answer_query(g, idx, ctx, h, q, alpha=0.3)} == {"s34"}


def test_histogram_estimates_feed_costs():
    g, idx, ctx, h = setup(generate_pgd(GenParams(n_refs=200, seed=5)), 2)
    d = decompose_query(generate_query(4, 4, g.labels, 3), 2, lambda seq, a: estimate_count(h, seq, a))
    assert len(d.costs) == len(d.paths)
    assert all(c >= 0 for c in d.costs)
