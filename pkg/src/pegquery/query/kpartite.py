"""Candidate k-partite graph and its joint reduction.

Partition ``i`` holds the candidates of query path ``i``.  Links connect
join-compatible candidates of partitions whose paths share query nodes.
Every vertex carries weights ``w1`` (the label/edge factors its path covers
exclusively) and ``w2`` (its node-existence probability), plus a perception
vector: per partition, an upper bound on the ``w1`` any full match through
the vertex can pick up there.

Both reductions only ever delete vertices or lower perception entries, and
each update is monotone in its neighbours' state, so every fair schedule
reaches the same greatest fixpoint.  That is what makes the sequential
worklist and the parallel round-based schedule interchangeable.
"""
from __future__ import annotations

import copy
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..model import THRESHOLD_SLACK


@dataclass
class Links:
    """CSR adjacency from the vertices of one partition into another."""

    ptr: np.ndarray
    dst: np.ndarray
    src: np.ndarray     # owner of each dst entry

    @classmethod
    def from_pairs(cls, a: np.ndarray, b: np.ndarray, n_src: int) -> "Links":
        order = np.lexsort((b, a))
        a, b = np.asarray(a, np.int64)[order], np.asarray(b, np.int64)[order]
        ptr = np.concatenate([[0], np.cumsum(np.bincount(a, minlength=n_src))]).astype(np.int64)
        return cls(ptr, b, a)

    def of(self, v: int) -> np.ndarray:
        return self.dst[self.ptr[v]:self.ptr[v + 1]]


@dataclass
class KPartiteGraph:
    w1: list[np.ndarray]
    w2: list[np.ndarray]
    joins: list[list[int]]                       # J(P_i)
    links: dict[tuple[int, int], Links]          # both directions present
    alive: list[np.ndarray] = field(default_factory=list)
    perception: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        k = len(self.w1)
        if not self.alive:
            self.alive = [np.ones(len(w), dtype=bool) for w in self.w1]
        if not self.perception:
            for i, w in enumerate(self.w1):
                per = np.ones((len(w), k))
                per[:, i] = w
                self.perception.append(per)

    @property
    def k(self) -> int:
        return len(self.w1)

    def copy(self) -> "KPartiteGraph":
        return copy.deepcopy(self)

    def survivors(self) -> list[frozenset[int]]:
        return [frozenset(np.flatnonzero(a).tolist()) for a in self.alive]

    def sizes(self) -> list[int]:
        return [int(a.sum()) for a in self.alive]

    def linked(self, i: int, v: int, j: int) -> np.ndarray:
        nb = self.links[(i, j)].of(v)
        return nb[self.alive[j][nb]]

    def bound(self, i: int, v: int) -> float:
        return float(_row_products(self.perception[i][v])[0] * self.w2[i][v])


def build_kpartite(w1: list[np.ndarray], w2: list[np.ndarray],
                   pairs: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]]) -> KPartiteGraph:
    """``pairs[(i, j)]`` (i < j) lists the linked (row in i, row in j) pairs."""
    k = len(w1)
    joins: list[list[int]] = [[] for _ in range(k)]
    links = {}
    for (i, j), (a, b) in sorted(pairs.items()):
        joins[i].append(j)
        joins[j].append(i)
        links[(i, j)] = Links.from_pairs(a, b, len(w1[i]))
        links[(j, i)] = Links.from_pairs(b, a, len(w1[j]))
    return KPartiteGraph([np.asarray(w, float) for w in w1], [np.asarray(w, float) for w in w2],
                         [sorted(x) for x in joins], links)


# --------------------------------------------------------------------------
# partition-wide (vectorised) steps


def _row_products(per: np.ndarray) -> np.ndarray:
    # fixed left-to-right order so every schedule computes bit-identical bounds
    per = np.atleast_2d(per)
    out = per[:, 0].copy()
    for c in range(1, per.shape[1]):
        out *= per[:, c]
    return out


def _alive_link_counts(g: KPartiteGraph, i: int, j: int) -> np.ndarray:
    ln = g.links[(i, j)]
    return np.bincount(ln.src, weights=g.alive[j][ln.dst], minlength=len(g.w1[i]))


def _structure_mask(g: KPartiteGraph, i: int) -> np.ndarray:
    keep = g.alive[i].copy()
    for j in g.joins[i]:
        keep &= _alive_link_counts(g, i, j) > 0
    return keep


def _upper_update(g: KPartiteGraph, i: int, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """New perception block and alive mask of partition i from the current neighbour state."""
    per = g.perception[i].copy()
    keep = g.alive[i].copy()
    for j in g.joins[i]:
        ln = g.links[(i, j)]
        vals = g.perception[j][ln.dst] * g.alive[j][ln.dst][:, None]
        best = np.zeros_like(per)
        np.maximum.at(best, ln.src, vals)
        best[:, i] = per[:, i]          # messages never carry the receiver's own entry
        per = np.minimum(per, best)
    keep &= _row_products(per) * g.w2[i] >= alpha - THRESHOLD_SLACK
    return per, keep


def reduce_structure(g: KPartiteGraph) -> KPartiteGraph:
    """Delete vertices missing links into some joined partition, to fixpoint (in place)."""
    changed = True
    while changed:
        changed = False
        for i in range(g.k):
            keep = _structure_mask(g, i)
            if (keep != g.alive[i]).any():
                g.alive[i] = keep
                changed = True
    return g


def reduce_upperbounds(g: KPartiteGraph, alpha: float, threads: int = 1) -> KPartiteGraph:
    """Synchronous message-passing rounds until no vector changes and nothing is deleted."""
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        while True:
            if pool:
                res = list(pool.map(lambda i: _upper_update(g, i, alpha), range(g.k)))
            else:
                res = [_upper_update(g, i, alpha) for i in range(g.k)]
            # barrier: all partitions read the same snapshot, then publish together
            changed = False
            for i, (per, keep) in enumerate(res):
                if (keep != g.alive[i]).any() or (per[keep] != g.perception[i][keep]).any():
                    changed = True
                g.perception[i] = np.where(keep[:, None], per, g.perception[i])
                g.alive[i] = keep
            if not changed:
                return g
    finally:
        if pool:
            pool.shutdown()


def _joint_parallel(g: KPartiteGraph, alpha: float, threads: int) -> KPartiteGraph:
    while True:
        before = (g.sizes(), [p.copy() for p in g.perception])
        reduce_structure(g)
        reduce_upperbounds(g, alpha, threads)
        if g.sizes() == before[0] and all(np.array_equal(a, b) for a, b in zip(g.perception, before[1])):
            return g


def _joint_sequential(g: KPartiteGraph, alpha: float) -> KPartiteGraph:
    """Gauss-Seidel worklist: a vertex is revisited only when a neighbour changed."""
    reduce_structure(g)
    queue = deque((i, v) for i in range(g.k) for v in np.flatnonzero(g.alive[i]).tolist())
    queued = {(i, v) for i, v in queue}

    def notify(i, v):
        for j in g.joins[i]:
            for u in g.linked(i, v, j).tolist():
                if (j, u) not in queued:
                    queued.add((j, u))
                    queue.append((j, u))

    while queue:
        i, v = queue.popleft()
        queued.discard((i, v))
        if not g.alive[i][v]:
            continue
        old = g.perception[i][v]
        new = old.copy()
        dead = False
        for j in g.joins[i]:
            nb = g.linked(i, v, j)
            if not len(nb):
                dead = True
                break
            best = g.perception[j][nb].max(axis=0)
            best[i] = new[i]
            np.minimum(new, best, out=new)
        if dead or _row_products(new)[0] * g.w2[i][v] < alpha - THRESHOLD_SLACK:
            g.alive[i][v] = False
            notify(i, v)
        elif (new != old).any():
            g.perception[i][v] = new
            notify(i, v)
    return g


def joint_reduce(g: KPartiteGraph, alpha: float, threads: int = 1) -> KPartiteGraph:
    """Alternate structural and upper-bound reduction until neither changes anything (in place)."""
    if threads > 1:
        return _joint_parallel(g, alpha, threads)
    return _joint_sequential(g, alpha)
