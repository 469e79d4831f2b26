"""Small hand-made and random inputs used by tests, scripts and the CLI."""
from __future__ import annotations

import itertools
import random

from .model import PGD, Reference, ReferenceEdge, ReferenceSet
from .query.graph import QueryGraph


def merge_example_pgd() -> PGD:
    """Three references; r3 and r4 may be one entity (p=0.8)."""
    return PGD.from_dict({
        "labels": ["a", "r", "i"],
        "references": [
            {"id": "r2", "dist": {"a": 1.0}},
            {"id": "r3", "dist": {"r": 1.0}},
            {"id": "r4", "dist": {"i": 1.0}},
        ],
        "edges": [{"u": "r3", "v": "r2", "p": 1.0}, {"u": "r2", "v": "r4", "p": 0.5}],
        "sets": [
            {"id": "s2", "refs": ["r2"]},
            {"id": "s3", "refs": ["r3"]},
            {"id": "s4", "refs": ["r4"]},
            {"id": "s34", "refs": ["r3", "r4"], "p": 0.8},
        ],
        "merge": {"labels": "average", "edges": "average"},
    })


def merge_example_query(alpha: float = 0.25) -> QueryGraph:
    return QueryGraph({"A": "r", "B": "a", "C": "i"}, [("A", "B"), ("B", "C")], alpha)


def _random_dist(rng: random.Random, labels: list[str]) -> dict[str, float]:
    if rng.random() < 0.4:
        return {rng.choice(labels): 1.0}
    support = [lab for lab in labels if rng.random() < 0.7] or [rng.choice(labels)]
    w = [rng.random() + 0.05 for _ in support]
    total = sum(w)
    dist = {lab: x / total for lab, x in zip(support, w)}
    # force an exact sum of one
    last = support[-1]
    dist[last] = 1.0 - sum(v for k, v in dist.items() if k != last)
    return dist


def random_small_pgd(rng: random.Random, max_refs: int = 8, max_labels: int = 3,
                     max_sets: int = 2, max_density: float = 0.5,
                     correlated: bool = False) -> PGD:
    labels = ["a", "b", "c"][:rng.randint(1, max_labels)]
    n = rng.randint(1, max_refs)
    refs = [Reference(f"r{i}", _random_dist(rng, labels)) for i in range(n)]
    density = rng.uniform(0.1, max_density)
    edges = []
    for a, b in itertools.combinations(range(n), 2):
        if rng.random() >= density:
            continue
        u, v = f"r{a}", f"r{b}"
        if correlated:
            cpt = {(x, y): (1.0 if rng.random() < 0.3 else rng.uniform(0.05, 1.0))
                   for x in labels for y in labels}
            edges.append(ReferenceEdge(u, v, None, cpt))
        else:
            edges.append(ReferenceEdge(u, v, 1.0 if rng.random() < 0.3 else rng.uniform(0.05, 1.0)))
    sets = []
    seen = set()
    for k in range(rng.randint(0, max_sets) if n > 1 else 0):
        size = rng.randint(2, min(3, n))
        members = tuple(sorted(rng.sample([r.id for r in refs], size)))
        if frozenset(members) in seen:
            continue
        seen.add(frozenset(members))
        sets.append(ReferenceSet(f"s{k}", members, round(rng.uniform(0.1, 0.95), 3)))
    if sets and rng.random() < 0.3:
        # an explicitly weighted singleton inside a component
        r = rng.choice(sets[0].refs)
        sets.append(ReferenceSet(f"t{r}", (r,), round(rng.uniform(0.2, 0.9), 3)))
    return PGD(labels, refs, edges, sets)


def random_connected_query(rng: random.Random, labels: list[str], max_nodes: int = 4,
                           alpha: float = 0.5) -> QueryGraph:
    n = rng.randint(1, max_nodes)
    names = [chr(ord("A") + i) for i in range(n)]
    edges = set()
    for i in range(1, n):
        j = rng.randrange(i)
        edges.add((names[j], names[i]))
    extra = [e for e in itertools.combinations(names, 2) if e not in edges]
    for e in extra:
        if rng.random() < 0.3:
            edges.add(e)
    lab = {x: rng.choice(labels) for x in names}
    return QueryGraph(lab, sorted(edges), alpha)
