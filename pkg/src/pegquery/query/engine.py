"""End-to-end query answering over the offline artifacts."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..model import EntityGraph, Match, at_least, match_probability
from ..pathindex import ContextTable, Histogram, PathIndex, estimate_count
from .candidates import (CandidateSet, build_candidates, join_pairs, label_ids,
                         node_candidates)
from .graph import (PathDecomposition, QueryError, QueryGraph, compute_query_stats,
                    decompose_query, path_edges)
from .kpartite import KPartiteGraph, build_kpartite, joint_reduce


def _log10_product(sizes) -> float:
    sizes = list(sizes)
    if any(s == 0 for s in sizes):
        return -math.inf
    return math.fsum(math.log10(s) for s in sizes)


@dataclass
class StageSize:
    name: str
    sizes: list[int]
    seconds: float = 0.0

    @property
    def product(self) -> int:
        return math.prod(self.sizes)

    @property
    def log10(self) -> float:
        return _log10_product(self.sizes)


@dataclass
class QueryTrace:
    decomposition: PathDecomposition | None = None
    order: list[int] = field(default_factory=list)
    node_candidates: dict[str, np.ndarray] = field(default_factory=dict)
    candidates: CandidateSet | None = None
    kpartite: KPartiteGraph | None = None          # links built, before any reduction
    structure_only: list[frozenset[int]] = field(default_factory=list)
    reduced: KPartiteGraph | None = None
    stages: list[StageSize] = field(default_factory=list)

    def stage(self, name: str) -> StageSize:
        for s in self.stages:
            if s.name == name:
                return s
        raise KeyError(name)


@dataclass
class QueryResult:
    matches: list[Match]
    trace: QueryTrace


def w1_weights(q: QueryGraph, g: EntityGraph, decomp: PathDecomposition,
               cands: CandidateSet, qlab: dict[str, int]) -> list[np.ndarray]:
    """Label/edge factors each candidate contributes for the elements its path covers."""
    from .candidates import edge_prob_rows
    out = []
    for i, pc in enumerate(cands.paths):
        w = np.ones(len(pc))
        for n in decomp.cv(i):
            w *= g.label_probs[pc.nodes[:, pc.column(n)], qlab[n]]
        for a, b in decomp.ce(i):
            w *= edge_prob_rows(g, pc.nodes[:, pc.column(a)], pc.nodes[:, pc.column(b)],
                                qlab[a], qlab[b])
        out.append(w)
    return out


def build_query_kpartite(q: QueryGraph, g: EntityGraph, decomp: PathDecomposition,
                         cands: CandidateSet, alpha: float) -> KPartiteGraph:
    qlab = label_ids(q, g)
    pairs = {(i, j): join_pairs(q, g, decomp, cands, i, j, alpha, qlab)
             for (i, j) in sorted(decomp.join_predicates)}
    w1 = w1_weights(q, g, decomp, cands, qlab)
    w2 = [pc.pr_n for pc in cands.paths]
    return build_kpartite(w1, w2, pairs)


def join_order(decomp: PathDecomposition) -> list[int]:
    """Seed with the cheapest path, then grow by node overlap, predicates and cost."""
    k = len(decomp.paths)
    if k == 0:
        raise QueryError("empty decomposition")
    cost = decomp.costs if len(decomp.costs) == k else [0.0] * k
    first = min(range(k), key=lambda i: (cost[i], i))
    order = [first]
    covered = set(decomp.paths[first])
    while len(order) < k:
        rest = [i for i in range(k) if i not in order]

        def rank(i):
            overlap = len(covered & set(decomp.paths[i]))
            preds = sum(len(decomp.predicates(i, j)) for j in order)
            return (-overlap, -preds, cost[i], i)

        nxt = min(rest, key=rank)
        order.append(nxt)
        covered |= set(decomp.paths[nxt])
    return order


def enumerate_matches(kpg: KPartiteGraph, order: list[int], g: EntityGraph, q: QueryGraph,
                      decomp: PathDecomposition, cands: CandidateSet, alpha: float) -> list[Match]:
    paths = [pc.path for pc in cands.paths]
    found: dict[tuple, Match] = {}
    placed: list[int] = []
    chosen: dict[int, int] = {}
    mapping: dict[str, int] = {}

    def extend(depth: int, w1_acc: float):
        if depth == len(order):
            m = match_probability(g, q, {n: mapping[n] for n in q.labels})
            if m.valid and m.probability > 0.0 and at_least(m.probability, alpha):
                found.setdefault(m.key, m)
            return
        i = order[depth]
        partners = [j for j in kpg.joins[i] if j in chosen]
        if partners:
            cand = None
            for j in partners:
                nb = kpg.linked(j, chosen[j], i)
                cand = nb if cand is None else np.intersect1d(cand, nb, assume_unique=True)
        else:
            cand = np.flatnonzero(kpg.alive[i])
        pc = cands.paths[i]
        for v in cand.tolist():
            row = pc.nodes[v].tolist()
            new = []
            ok = True
            for n, e in zip(paths[i], row):
                if n in mapping:
                    if mapping[n] != e:
                        ok = False
                        break
                    continue
                if any(not g.disjoint(e, x) for x in mapping.values()) or any(e == x for _, x in new):
                    ok = False
                    break
                if any(not g.disjoint(e, x) for _, x in new):
                    ok = False
                    break
                new.append((n, e))
            if not ok:
                continue
            w = w1_acc * kpg.w1[i][v]
            for n, e in new:
                mapping[n] = e
            if at_least(w * g.existence_marginal(list(mapping.values())), alpha):
                chosen[i] = v
                placed.append(i)
                extend(depth + 1, w)
                placed.pop()
                del chosen[i]
            for n, _ in new:
                del mapping[n]

    extend(0, 1.0)
    return sort_matches(found.values())


def sort_matches(ms) -> list[Match]:
    return sorted(ms, key=lambda m: (-m.probability, tuple(m.mapping.values())))


def run_query(g: EntityGraph, idx: PathIndex, ctx: ContextTable, h: Histogram, q: QueryGraph,
              alpha: float | None = None, max_len: int | None = None, threads: int = 1,
              keep_stages: bool = False) -> QueryResult:
    """Answer ``q``: stats, decomposition, candidates, joins, joint reduction, enumeration.

    With ``keep_stages`` the trace also holds a copy of the k-partite graph
    before reduction and the survivors of structure-only reduction.
    """
    alpha = q.alpha if alpha is None else alpha
    max_len = idx.max_len if max_len is None else max_len
    if max_len > idx.max_len:
        raise QueryError(f"decomposition path length {max_len} exceeds the index maximum {idx.max_len}")
    trace = QueryTrace()
    qlab = label_ids(q, g)
    if qlab is None:
        return QueryResult([], trace)

    t0 = time.perf_counter()
    decomp = decompose_query(q, max_len, lambda seq, a: estimate_count(h, seq, a), alpha)
    stats = compute_query_stats(q, decomp)
    trace.decomposition = decomp
    trace.node_candidates = node_candidates(q, g, ctx, alpha, stats.label_counts)
    cands = build_candidates(q, decomp, stats, idx, g, ctx, trace.node_candidates, alpha)
    trace.candidates = cands
    t1 = time.perf_counter()
    lookup_s = sum(pc.lookup_seconds for pc in cands.paths)
    trace.stages.append(StageSize("path", [pc.looked_up for pc in cands.paths], lookup_s))
    trace.stages.append(StageSize("path+context", [len(pc) for pc in cands.paths], t1 - t0 - lookup_s))

    kpg = build_query_kpartite(q, g, decomp, cands, alpha)
    if keep_stages:
        from .kpartite import reduce_structure
        trace.kpartite = kpg.copy()
        trace.structure_only = reduce_structure(kpg.copy()).survivors()
    joint_reduce(kpg, alpha, threads)
    trace.reduced = kpg
    t2 = time.perf_counter()
    trace.stages.append(StageSize("final", kpg.sizes(), t2 - t1))

    trace.order = join_order(decomp)
    matches = enumerate_matches(kpg, trace.order, g, q, decomp, cands, alpha)
    trace.stages.append(StageSize("matches", [len(matches)], time.perf_counter() - t2))
    return QueryResult(matches, trace)


def answer_query(g: EntityGraph, idx: PathIndex, ctx: ContextTable, h: Histogram, q: QueryGraph,
                 alpha: float | None = None, threads: int = 1) -> list[Match]:
    return run_query(g, idx, ctx, h, q, alpha=alpha, threads=threads).matches


__all__ = ["QueryResult", "QueryTrace", "StageSize", "answer_query", "build_query_kpartite",
           "enumerate_matches", "join_order", "run_query", "sort_matches", "w1_weights",
           "path_edges"]
