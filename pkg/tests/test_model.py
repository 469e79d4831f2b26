import math
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pegquery.fixtures import merge_example_pgd, merge_example_query, random_small_pgd
from pegquery.model import (PGD, PGDError, Reference, ReferenceEdge, ReferenceSet, build_entity_graph,
                            chain_product, match_probability, node_existence_marginal, validate_pgd)
from pegquery.worlds import enumerate_possible_worlds, node_configurations


def small_graph(seed, correlated=False):
    pgd = random_small_pgd(random.Random(seed), correlated=correlated)
    try:
        return pgd, build_entity_graph(pgd)
    except PGDError:
        return pgd, None


def test_merge_example_merged_entity():
    g = build_entity_graph(merge_example_pgd())
    v = g.node_index["s34"]
    assert g.node(v).label_dist == {"r": 0.5, "i": 0.5}
    assert g.edge_prob(g.node_index["s2"], v) == 0.75
    assert g.node_refs[v] == frozenset({"r3", "r4"})


def test_merge_example_existence():
    g = build_entity_graph(merge_example_pgd())
    ix = g.node_index
    assert math.isclose(g.existence_marginal([ix["s34"]]), 0.8)
    assert math.isclose(g.existence_marginal([ix["s3"], ix["s4"]]), 0.2)
    assert g.existence_marginal([ix["s2"]]) == 1.0
    assert node_existence_marginal(g, ["s3", "s34"]) == 0.0


def test_merge_example_match_probability():
    g = build_entity_graph(merge_example_pgd())
    m = match_probability(g, merge_example_query(), {"A": "s3", "B": "s2", "C": "s4"})
    assert m.valid
    assert abs(m.probability - 0.1) < 1e-9
    assert abs(m.pr_le - 0.5) < 1e-12


def test_match_probability_rejects_overlap():
    g = build_entity_graph(merge_example_pgd())
    m = match_probability(g, merge_example_query(), {"A": "s34", "B": "s2", "C": "s34"})
    assert not m.valid and m.probability == 0.0


@pytest.mark.parametrize("mutate,kind", [
    (lambda d: d["references"][0]["dist"].update(a=0.7), "distribution-sum"),
    (lambda d: d["edges"].append({"u": "r2", "v": "zz", "p": 0.5}), "dangling-id"),
    (lambda d: d["edges"].append({"u": "r2", "v": "r2", "p": 0.5}), "self-loop"),
    (lambda d: d["sets"].append({"id": "s9", "refs": ["r3", "r4"], "p": 0.3}), "duplicate-set"),
    (lambda d: d["sets"][3].update(p=1.5), "probability-range"),
    (lambda d: d["references"][0]["dist"].update({"q": 0.0}), "unknown-label"),
])
def test_validation_reports(mutate, kind):
    doc = merge_example_pgd().to_dict()
    mutate(doc)
    pgd = PGD.from_dict(doc)
    kinds = {v.kind for v in validate_pgd(pgd)}
    assert kind in kinds
    with pytest.raises(PGDError):
        build_entity_graph(pgd)


def test_valid_example_has_no_violations():
    assert validate_pgd(merge_example_pgd()) == []


def test_pgd_dict_round_trip():
    pgd = random_small_pgd(random.Random(3), correlated=True)
    assert PGD.from_dict(pgd.to_dict()) == pgd


def test_chain_product_long_chains():
    fs = [0.9] * 500
    assert math.isclose(chain_product(fs), 0.9 ** 500, rel_tol=1e-9)
    assert chain_product([0.5, 0.0] * 100) == 0.0


def test_correlated_edge_needs_labels():
    pgd = PGD(["a", "b"], [Reference("x", {"a": 1.0}), Reference("y", {"b": 1.0})],
              [ReferenceEdge("x", "y", None, {("a", "b"): 0.4, ("b", "a"): 0.1,
                                              ("a", "a"): 0.0, ("b", "b"): 0.0})])
    g = build_entity_graph(pgd)
    x, y = g.node_index["x"], g.node_index["y"]
    assert g.edge_prob(x, y, 0, 1) == 0.4
    assert g.edge_prob(y, x, 1, 0) == 0.4
    with pytest.raises(ValueError):
        g.edge_prob(x, y)


def test_weighted_singleton_changes_marginal():
    pgd = PGD(["a"], [Reference("x", {"a": 1.0}), Reference("y", {"a": 1.0})], [],
              [ReferenceSet("xy", ("x", "y"), 0.5), ReferenceSet("sx", ("x",), 0.5)])
    g = build_entity_graph(pgd)
    # configs: {xy} weight .5*.5*1, {sx, y} weight .5*.5*1
    assert math.isclose(g.existence_marginal([g.node_index["xy"]]), 0.5)


@given(st.integers(0, 10_000), st.booleans())
def test_configurations_normalised(seed, corr):
    _, g = small_graph(seed, corr)
    if g is None:
        return
    cfgs = node_configurations(g)
    assert math.isclose(math.fsum(p for _, p in cfgs), 1.0, abs_tol=1e-12)
    for cfg, _ in cfgs:
        refs = [r for v in cfg for r in g.node_refs[v]]
        assert len(refs) == len(set(refs))


@given(st.integers(0, 10_000))
def test_existence_marginal_matches_configurations(seed):
    _, g = small_graph(seed)
    if g is None:
        return
    cfgs = node_configurations(g)
    rng = random.Random(seed)
    for _ in range(5):
        k = rng.randint(1, min(3, g.n_nodes))
        sub = rng.sample(range(g.n_nodes), k)
        want = math.fsum(p for cfg, p in cfgs if set(sub) <= cfg)
        assert abs(node_existence_marginal(g, sub) - want) < 1e-12


@given(st.integers(0, 10_000))
def test_world_probabilities_sum_to_one(seed):
    rng = random.Random(seed)
    pgd = random_small_pgd(rng, max_refs=5, correlated=seed % 2 == 0)
    try:
        g = build_entity_graph(pgd)
    except PGDError:
        return
    total = math.fsum(w.probability for w in enumerate_possible_worlds(g))
    assert abs(total - 1.0) < 1e-9


@given(st.integers(0, 10_000))
def test_label_rows_are_distributions(seed):
    _, g = small_graph(seed)
    if g is None:
        return
    assert np.allclose(g.label_probs.sum(axis=1), 1.0)
    assert (g.label_probs >= 0).all()
