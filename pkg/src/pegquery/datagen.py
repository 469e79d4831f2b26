"""Synthetic PGDs (preferential attachment + skewed distributions) and random queries."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .model import PGD, Reference, ReferenceEdge, ReferenceSet
from .query.graph import QueryError, QueryGraph

SEED_CLIQUE = 3


@dataclass
class GenParams:
    n_refs: int = 1000
    n_edges: int | None = None          # default 5 * n_refs
    n_labels: int = 10
    uncertain_fraction: float = 0.2
    k: int | None = None                # groups; default n_refs // 50
    s: int = 4                          # group size
    r: int = 2                          # disjoint merged pairs per group
    seed: int = 0
    correlated: bool = False
    same_label_factor: float = 0.8      # CPT entry for differing labels, relative to p

    def resolved(self) -> "GenParams":
        out = GenParams(**self.__dict__)
        if out.n_edges is None:
            out.n_edges = 5 * out.n_refs
        if out.k is None:
            out.k = out.n_refs // 50
        return out

    def validate(self) -> None:
        p = self.resolved()
        if p.n_refs < 1 or p.n_labels < 1:
            raise ValueError("n_refs and n_labels must be positive")
        if not 0.0 <= p.uncertain_fraction <= 1.0:
            raise ValueError("uncertain_fraction must lie in [0, 1]")
        if 2 * p.r > p.s:
            raise ValueError(f"{p.r} disjoint pairs do not fit in a group of {p.s} references")
        if p.k * p.s > p.n_refs:
            raise ValueError(f"{p.k} disjoint groups of {p.s} need more than {p.n_refs} references")
        if p.n_refs >= SEED_CLIQUE:
            lo = SEED_CLIQUE
            hi = SEED_CLIQUE + sum(min(i, p.n_edges) for i in range(SEED_CLIQUE, p.n_refs))
            if not lo <= p.n_edges <= hi:
                raise ValueError(f"n_edges must lie in [{lo}, {hi}] for {p.n_refs} references")


def preferential_attachment(n: int, n_edges: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Seed triangle, then each new node links to distinct degree-proportional targets."""
    if n < SEED_CLIQUE:
        return list(itertools.combinations(range(n), 2))[:n_edges]
    edges = [(0, 1), (0, 2), (1, 2)]
    ends = [0, 1, 0, 2, 1, 2]
    remaining = n_edges - len(edges)
    new_nodes = n - SEED_CLIQUE
    for t, v in enumerate(range(SEED_CLIQUE, n)):
        left = new_nodes - t
        m = min(v, -(-remaining // left)) if remaining > 0 else 0
        m = max(m, 1) if remaining > 0 else 0
        targets: set[int] = set()
        while len(targets) < m:
            draw = rng.integers(0, len(ends), size=2 * (m - len(targets)))
            for d in draw.tolist():
                targets.add(ends[d])
                if len(targets) == m:
                    break
        for u in sorted(targets):
            edges.append((u, v))
            ends.extend((u, v))
        remaining -= m
    return edges


def skewed_distribution(n: int, rng: np.random.Generator, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Random values weighted by 1/i, normalised, in a random order."""
    p = rng.uniform(lo, hi, size=n) / np.arange(1, n + 1)
    p = p / p.sum()
    return p[rng.permutation(n)]


def _exact_dist(labels: list[str], p: np.ndarray) -> dict[str, float]:
    vals = [float(x) for x in p]
    vals[-1] = 1.0 - sum(vals[:-1])
    return {lab: v for lab, v in zip(labels, vals)}


def generate_pgd(params: GenParams) -> PGD:
    params.validate()
    p = params.resolved()
    rng = np.random.default_rng(p.seed)
    labels = [f"l{i}" for i in range(p.n_labels)]
    ref_ids = [f"r{i}" for i in range(p.n_refs)]

    refs = []
    uncertain_ref = rng.random(p.n_refs) < p.uncertain_fraction
    for i, rid in enumerate(ref_ids):
        if uncertain_ref[i] and p.n_labels > 1:
            refs.append(Reference(rid, _exact_dist(labels, skewed_distribution(p.n_labels, rng))))
        else:
            refs.append(Reference(rid, {labels[int(rng.integers(p.n_labels))]: 1.0}))

    pairs = preferential_attachment(p.n_refs, p.n_edges, rng)
    uncertain_edge = rng.random(len(pairs)) < p.uncertain_fraction
    edges = []
    for (a, b), unc in zip(pairs, uncertain_edge):
        if unc:
            tf = skewed_distribution(2, rng, 0.5, 1.0)
            pe = float(tf[0])
        else:
            pe = 1.0
        if p.correlated:
            cpt = {(x, y): pe if x == y else p.same_label_factor * pe for x in labels for y in labels}
            edges.append(ReferenceEdge(ref_ids[a], ref_ids[b], None, cpt))
        else:
            edges.append(ReferenceEdge(ref_ids[a], ref_ids[b], pe))

    sets = []
    if p.uncertain_fraction > 0.0 and p.k > 0 and p.s >= 2:
        chosen = rng.permutation(p.n_refs)[:p.k * p.s].reshape(p.k, p.s)
        for g, group in enumerate(chosen):
            # the group is already in random order: consecutive slots form the pairs
            for j in range(p.r):
                x, y = 2 * j, 2 * j + 1
                members = tuple(sorted((ref_ids[group[x]], ref_ids[group[y]]), key=lambda s: int(s[1:])))
                sets.append(ReferenceSet(f"g{g}_{j}", members, float(rng.uniform(0.5, 1.0))))
    return PGD(labels, refs, edges, sets)


def generate_query(n: int, m: int, sigma, seed: int = 0, alpha: float = 0.7) -> QueryGraph:
    """Random connected simple query with ``n`` nodes, ``m`` edges and uniform labels."""
    if n < 1 or not (n - 1 <= m <= n * (n - 1) // 2):
        raise QueryError(f"no connected simple graph has {n} nodes and {m} edges")
    labels = list(sigma)
    if not labels:
        raise QueryError("label alphabet is empty")
    rng = np.random.default_rng(seed)
    names = [f"q{i}" for i in range(n)]
    order = rng.permutation(n).tolist()
    edges = set()
    for t in range(1, n):
        parent = order[int(rng.integers(t))]
        a, b = sorted((parent, order[t]))
        edges.add((a, b))
    rest = [e for e in itertools.combinations(range(n), 2) if e not in edges]
    extra = rng.choice(len(rest), size=m - len(edges), replace=False) if m > len(edges) else []
    for k in sorted(int(x) for x in extra):
        edges.add(rest[k])
    lab = {names[i]: labels[int(rng.integers(len(labels)))] for i in range(n)}
    return QueryGraph(lab, [(names[a], names[b]) for a, b in sorted(edges)], alpha)
