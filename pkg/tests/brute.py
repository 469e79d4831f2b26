"""Brute-force reference implementations used as test oracles."""
from __future__ import annotations

import itertools
import random

import numpy as np

from pegquery.experiments import fixture_cases, same_answers, stage_losses  # noqa: F401


def brute_paths(g, max_len: int, beta: float) -> dict[tuple, tuple[tuple[int, ...], float, float]]:
    """Every simple, reference-disjoint labelled path with Pr >= beta.

    Keyed by (label sequence, node tuple) in the stored orientation:
    the smaller of the label sequence and its reverse, and for palindromic
    sequences the node order whose first node is smaller.
    """
    out = {}
    n_lab = len(g.labels)

    def emit(nodes, labs, le):
        pn = g.existence_marginal(nodes)
        if le * pn < beta - 1e-12:
            return
        seq, nd = tuple(labs), tuple(nodes)
        rs, rn = seq[::-1], nd[::-1]
        if seq > rs or (seq == rs and len(nd) > 1 and nd[0] > nd[-1]):
            seq, nd = rs, rn
        out[(seq, nd)] = (seq, le, pn)

    def grow(nodes, labs, le):
        emit(nodes, labs, le)
        if len(nodes) - 1 == max_len:
            return
        x = nodes[-1]
        for y in g.neighbors(x).tolist():
            if y in nodes or any(not g.disjoint(y, z) for z in nodes):
                continue
            for lab in range(n_lab):
                lp = g.label_probs[y, lab]
                if lp <= 0.0:
                    continue
                p = le * g.edge_prob(x, y, labs[-1], lab) * lp
                if p <= 0.0 or p < beta - 1e-12:
                    continue
                grow(nodes + [y], labs + [lab], p)

    for v in range(g.n_nodes):
        for lab in range(n_lab):
            lp = float(g.label_probs[v, lab])
            if lp > 0.0 and lp >= beta - 1e-12:
                grow([v], [lab], lp)
    return out


def index_records(idx) -> dict[tuple, tuple[tuple[int, ...], float, float, int]]:
    out = {}
    for key, blk in idx.blocks.items():
        for row, le, pn, b in zip(blk.nodes.tolist(), blk.pr_le.tolist(), blk.pr_n.tolist(),
                                  blk.bucket.tolist()):
            out[(key, tuple(row))] = (key, le, pn, b)
    return out


def kpartite_matches(w1, w2, pairs):
    """Yield (vertex tuple, probability) for every fully linked selection.

    The probability of a selection is the product of its w1 weights times the
    smallest w2 (existence of a superset is at most that of any subset).
    """
    k = len(w1)
    linked = {key: set(zip(a.tolist(), b.tolist())) for key, (a, b) in pairs.items()}
    for sel in itertools.product(*(range(len(w)) for w in w1)):
        if all((sel[i], sel[j]) in linked[(i, j)] for (i, j) in linked):
            p = float(np.prod([w1[i][v] for i, v in enumerate(sel)]))
            p *= min(w2[i][v] for i, v in enumerate(sel))
            yield sel, p


def random_kpartite(rng: random.Random):
    k = rng.randint(1, 4)
    sizes = [rng.randint(1, 20) for _ in range(k)]

    def weight():
        return 1.0 if rng.random() < 0.2 else rng.uniform(0.05, 1.0)

    w1 = [np.array([weight() for _ in range(n)]) for n in sizes]
    w2 = [np.array([weight() for _ in range(n)]) for n in sizes]
    # connected join structure plus a few extra pairs
    edges = {(rng.randrange(j), j) for j in range(1, k)}
    for i, j in itertools.combinations(range(k), 2):
        if rng.random() < 0.3:
            edges.add((i, j))
    pairs = {}
    for i, j in sorted(edges):
        dens = rng.uniform(0.05, 0.6)
        ab = [(a, b) for a in range(sizes[i]) for b in range(sizes[j]) if rng.random() < dens]
        a = np.array([x for x, _ in ab], dtype=np.int64)
        b = np.array([y for _, y in ab], dtype=np.int64)
        pairs[(i, j)] = (a, b)
    return w1, w2, pairs
