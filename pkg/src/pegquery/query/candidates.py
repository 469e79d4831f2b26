"""Candidate generation: node pruning, path pruning and join-candidate links.

Candidates of a query path are kept as parallel arrays (entity ordinals per
path position, pr_le, pr_n) so pruning can run vectorised even when the
index returns many records.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..model import THRESHOLD_SLACK, EntityGraph
from ..pathindex import ContextTable, PathIndex, lookup_arrays
from .graph import PathDecomposition, QPath, QueryGraph, QueryStats, path_edges


@dataclass
class PathCandidates:
    path: QPath
    nodes: np.ndarray        # (n, len(path)) entity ordinals in query orientation
    pr_le: np.ndarray
    pr_n: np.ndarray
    looked_up: int = 0       # index records before pruning
    lookup_seconds: float = 0.0
    prune_seconds: float = 0.0

    def __len__(self) -> int:
        return len(self.pr_le)

    def column(self, qnode: str) -> int:
        return self.path.index(qnode)


@dataclass
class CandidateSet:
    paths: list[PathCandidates]
    # T(P_i, P_j): entities of P_i at the shared query nodes -> candidate rows of P_i
    tables: dict[tuple[int, int], dict[tuple[int, ...], np.ndarray]] = field(default_factory=dict)


# --------------------------------------------------------------------------
# vectorised probability helpers


def edge_prob_rows(g: EntityGraph, a: np.ndarray, b: np.ndarray,
                   la: int | None = None, lb: int | None = None) -> np.ndarray:
    """Pr(edge) for entity pairs (a[k], b[k]); 0 where no entity edge exists."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    out = np.zeros(len(a))
    if not g.n_edges or not len(a):
        return out
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    n = np.int64(g.n_nodes)
    keys = g.edge_u * n + g.edge_v            # ascending: edges are sorted by (u, v)
    want = lo * n + hi
    pos = np.clip(np.searchsorted(keys, want), 0, len(keys) - 1)
    hit = keys[pos] == want
    eid = pos[hit]
    if g.edge_cpt is None:
        out[hit] = g.edge_p[eid]
    else:
        fwd = (a < b)[hit]
        out[hit] = np.where(fwd, g.edge_cpt[eid, la, lb], g.edge_cpt[eid, lb, la])
    return out


def existence_rows(g: EntityGraph, ents: np.ndarray) -> np.ndarray:
    """Pr_n for every row of entity ordinals (rows must be reference-disjoint)."""
    ents = np.asarray(ents, dtype=np.int64)
    if ents.shape[1] == 0:
        return np.ones(len(ents))
    out = np.prod(g.single_marginal[ents], axis=1)
    if ents.shape[1] > 1:
        comps = np.sort(g.comp_of[ents], axis=1)
        shared = (comps[:, 1:] == comps[:, :-1]).any(axis=1)
        for r in np.flatnonzero(shared):
            out[r] = g.existence_marginal(ents[r].tolist())
    return out


def disjoint_rows(g: EntityGraph, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a != b) & ~((g.comp_of[a] == g.comp_of[b]) & ((g.ref_mask[a] & g.ref_mask[b]) != 0))


def label_ids(q: QueryGraph, g: EntityGraph) -> dict[str, int] | None:
    out = {}
    for n, lab in q.labels.items():
        if lab not in g.label_index:
            return None
        out[n] = g.label_index[lab]
    return out


# --------------------------------------------------------------------------
# node and path pruning


def node_candidates(q: QueryGraph, g: EntityGraph, ctx: ContextTable, alpha: float,
                    counts: dict[str, dict[str, int]] | None = None) -> dict[str, np.ndarray]:
    """Boolean membership mask over entities for every query node."""
    from .graph import node_label_counts
    counts = node_label_counts(q) if counts is None else counts
    out = {}
    for n, lab in q.labels.items():
        mask = np.zeros(g.n_nodes, dtype=bool)
        a = g.label_index.get(lab)
        if a is not None:
            lp = g.label_probs[:, a]
            mask = lp > 0.0
            mask &= lp >= alpha - THRESHOLD_SLACK
            for sig, need in counts[n].items():
                s = g.label_index.get(sig)
                if s is None:
                    mask[:] = False
                    break
                mask &= ctx.count[:, s] >= need
                mask &= lp * ctx.fpu[:, s] ** need >= alpha - THRESHOLD_SLACK
        out[n] = mask
    return out


def path_candidates(q: QueryGraph, path: QPath, stats: QueryStats, idx: PathIndex,
                    g: EntityGraph, ctx: ContextTable, node_cands: dict[str, np.ndarray],
                    alpha: float) -> PathCandidates:
    seq = [q.labels[n] for n in path]
    t0 = time.perf_counter()
    nodes, pr_le, pr_n = lookup_arrays(idx, seq, alpha)
    t1 = time.perf_counter()
    looked_up = len(pr_le)
    keep = np.ones(looked_up, dtype=bool)
    for c, n in enumerate(path):
        keep &= node_cands[n][nodes[:, c]]
    nodes, pr_le, pr_n = nodes[keep], pr_le[keep], pr_n[keep]
    st = stats.paths[path]
    pos = {n: i for i, n in enumerate(path)}
    bound = pr_le * pr_n
    # neighbourhood upper bound pu
    for m in st.neighbors:
        s = g.label_index.get(q.labels[m])
        if s is None:
            bound[:] = 0.0
            break
        cols = [pos[n] for n in st.reverse[m]]
        fp = [ctx.fpu[nodes[:, c], s] for c in cols]
        pp = [ctx.ppu[nodes[:, c], s] for c in cols]
        best = None
        for k in range(len(cols)):
            term = fp[k].copy()
            for k2 in range(len(cols)):
                if k2 != k:
                    term *= pp[k2]
            best = term if best is None else np.minimum(best, term)
        bound *= best
    # cycle-closing edges cpr
    qlab = {n: g.label_index.get(q.labels[n]) for n in path}
    for n, others in st.cycles.items():
        for m in others:
            bound *= edge_prob_rows(g, nodes[:, pos[n]], nodes[:, pos[m]], qlab[n], qlab[m])
    keep = bound >= alpha - THRESHOLD_SLACK
    return PathCandidates(path, nodes[keep], pr_le[keep], pr_n[keep], looked_up,
                          t1 - t0, time.perf_counter() - t1)


def build_tables(decomp: PathDecomposition, paths: list[PathCandidates]) -> dict:
    tables = {}
    for (i, j), shared in decomp.join_predicates.items():
        for a, b in ((i, j), (j, i)):
            pc = paths[a]
            cols = [pc.column(n) for n in shared]
            tab: dict[tuple[int, ...], list[int]] = {}
            for r, key in enumerate(map(tuple, pc.nodes[:, cols].tolist())):
                tab.setdefault(key, []).append(r)
            tables[(a, b)] = {k: np.asarray(v, dtype=np.int64) for k, v in tab.items()}
    return tables


def build_candidates(q: QueryGraph, decomp: PathDecomposition, stats: QueryStats, idx: PathIndex,
                     g: EntityGraph, ctx: ContextTable, node_cands, alpha: float) -> CandidateSet:
    paths = [path_candidates(q, p, stats, idx, g, ctx, node_cands, alpha) for p in decomp.paths]
    return CandidateSet(paths, build_tables(decomp, paths))


# --------------------------------------------------------------------------
# join candidates


def union_probability(g: EntityGraph, q: QueryGraph, qlab: dict[str, int],
                      cols: dict[str, np.ndarray], edges) -> tuple[np.ndarray, np.ndarray]:
    """(pr_le, pr_n) of the subgraph given by query nodes ``cols`` and query ``edges``."""
    nodes = list(cols)
    n_rows = len(cols[nodes[0]]) if nodes else 0
    le = np.ones(n_rows)
    for n in nodes:
        le *= g.label_probs[cols[n], qlab[n]]
    for a, b in edges:
        le *= edge_prob_rows(g, cols[a], cols[b], qlab[a], qlab[b])
    ents = np.stack([cols[n] for n in nodes], axis=1) if nodes else np.zeros((n_rows, 0), np.int64)
    return le, existence_rows(g, ents)


def join_pairs(q: QueryGraph, g: EntityGraph, decomp: PathDecomposition, cands: CandidateSet,
               i: int, j: int, alpha: float, qlab: dict[str, int]) -> tuple[np.ndarray, np.ndarray]:
    """All (row of P_i, row of P_j) join-candidate pairs, i.e. cn(P_i, ., P_j) for every row."""
    ti, tj = cands.tables[(i, j)], cands.tables[(j, i)]
    left, right = [], []
    for key, rows_i in ti.items():
        rows_j = tj.get(key)
        if rows_j is None:
            continue
        left.append(np.repeat(rows_i, len(rows_j)))
        right.append(np.tile(rows_j, len(rows_i)))
    if not left:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    A = np.concatenate(left)
    B = np.concatenate(right)
    pi, pj = cands.paths[i], cands.paths[j]
    shared = set(decomp.predicates(i, j))
    ok = np.ones(len(A), dtype=bool)
    own_j = [n for n in pj.path if n not in shared]
    for n in own_j:
        y = pj.nodes[B, pj.column(n)]
        for m in pi.path:
            ok &= disjoint_rows(g, pi.nodes[A, pi.column(m)], y)
    A, B = A[ok], B[ok]
    cols = {n: pi.nodes[A, pi.column(n)] for n in pi.path}
    for n in own_j:
        cols[n] = pj.nodes[B, pj.column(n)]
    edges = sorted(set(path_edges(pi.path, q)) | set(path_edges(pj.path, q)))
    le, pn = union_probability(g, q, qlab, cols, edges)
    ok = le * pn >= alpha - THRESHOLD_SLACK
    return A[ok], B[ok]


def join_candidates(q: QueryGraph, g: EntityGraph, decomp: PathDecomposition, cands: CandidateSet,
                    i: int, row: int, j: int, alpha: float) -> np.ndarray:
    """cn(P_i, P_i^u, P_j): rows of P_j joinable with row ``row`` of P_i."""
    qlab = label_ids(q, g)
    pc = cands.paths[i]
    one = PathCandidates(pc.path, pc.nodes[row:row + 1], pc.pr_le[row:row + 1], pc.pr_n[row:row + 1])
    sub = CandidateSet([one if k == i else p for k, p in enumerate(cands.paths)], {})
    sub.tables = build_tables(decomp, sub.paths)
    _, B = join_pairs(q, g, decomp, sub, i, j, alpha, qlab)
    return np.unique(B)
