"""Query graphs, their node/path statistics, and greedy path decomposition."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

QPath = tuple[str, ...]


class QueryError(ValueError):
    pass


@dataclass
class QueryGraph:
    labels: dict[str, str]            # node id -> label, in declaration order
    edges: list[tuple[str, str]]
    alpha: float = 0.5

    def __post_init__(self):
        self.order = {n: i for i, n in enumerate(self.labels)}
        norm = []
        seen = set()
        for a, b in self.edges:
            key = frozenset((a, b))
            if a == b or key in seen:
                raise QueryError(f"query edge {a}-{b} is a self-loop or duplicate")
            if a not in self.labels or b not in self.labels:
                raise QueryError(f"query edge {a}-{b} uses an undeclared node")
            seen.add(key)
            norm.append((a, b) if self.order[a] < self.order[b] else (b, a))
        self.edges = norm
        self.adj: dict[str, set[str]] = {n: set() for n in self.labels}
        for a, b in self.edges:
            self.adj[a].add(b)
            self.adj[b].add(a)
        if not 0.0 <= self.alpha <= 1.0:
            raise QueryError(f"alpha {self.alpha} outside [0, 1]")
        if not self.is_connected():
            raise QueryError("query graph must be connected")

    @property
    def nodes(self) -> list[str]:
        return list(self.labels)

    def is_connected(self) -> bool:
        if not self.labels:
            return False
        start = next(iter(self.labels))
        seen = {start}
        stack = [start]
        while stack:
            for m in self.adj[stack.pop()]:
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        return len(seen) == len(self.labels)

    def has_edge(self, a: str, b: str) -> bool:
        return b in self.adj[a]

    def edge_key(self, a: str, b: str) -> tuple[str, str]:
        return (a, b) if self.order[a] < self.order[b] else (b, a)

    @classmethod
    def from_dict(cls, doc: Mapping) -> "QueryGraph":
        labels = {str(n["id"]): str(n["label"]) for n in doc["nodes"]}
        edges = [(str(a), str(b)) for a, b in doc.get("edges", [])]
        return cls(labels, edges, float(doc.get("alpha", 0.5)))

    def to_dict(self) -> dict:
        return {"nodes": [{"id": n, "label": lab} for n, lab in self.labels.items()],
                "edges": [list(e) for e in self.edges], "alpha": self.alpha}


def path_edges(path: Sequence[str], q: QueryGraph) -> list[tuple[str, str]]:
    return [q.edge_key(a, b) for a, b in zip(path, path[1:])]


def query_paths(q: QueryGraph, max_len: int) -> list[QPath]:
    """All simple paths with 1..max_len edges, one orientation each.

    A single-node query yields its node as a length-0 path.
    """
    if not q.edges:
        return [(n,) for n in q.labels]
    out = []
    order = q.order

    def extend(path):
        if len(path) > 1 and order[path[0]] < order[path[-1]]:
            out.append(tuple(path))
        if len(path) - 1 == max_len:
            return
        for m in sorted(q.adj[path[-1]], key=order.get):
            if m not in path:
                path.append(m)
                extend(path)
                path.pop()

    for n in q.labels:
        extend([n])
    out.sort(key=lambda p: (len(p), [order[x] for x in p]))
    return out


# --------------------------------------------------------------------------
# statistics


@dataclass
class PathStats:
    neighbors: list[str]                      # Gamma(P)
    reverse: dict[str, list[str]]             # rv(P, m)
    cycles: dict[str, list[str]]              # cyc(P, n)
    degree: int
    density: float


@dataclass
class QueryStats:
    label_counts: dict[str, dict[str, int]]   # c(n, sigma)
    paths: dict[QPath, PathStats]


def node_label_counts(q: QueryGraph) -> dict[str, dict[str, int]]:
    out = {}
    for n in q.labels:
        counts: dict[str, int] = {}
        for m in q.adj[n]:
            counts[q.labels[m]] = counts.get(q.labels[m], 0) + 1
        out[n] = counts
    return out


def path_stats(q: QueryGraph, path: QPath) -> PathStats:
    on = set(path)
    pos = {n: i for i, n in enumerate(path)}
    neighbors = sorted({m for n in path for m in q.adj[n] if m not in on}, key=q.order.get)
    reverse = {m: [n for n in path if m in q.adj[n]] for m in neighbors}
    cycles: dict[str, list[str]] = {n: [] for n in path}
    k = 0
    for a, b in q.edges:
        if a in on and b in on:
            k += 1
            if abs(pos[a] - pos[b]) > 1:
                owner, other = (a, b) if q.order[a] < q.order[b] else (b, a)
                cycles[owner].append(other)
    length = len(path) - 1
    degree = sum(len(q.adj[n]) for n in path) - 2 * length
    m = len(path)
    density = 2.0 * k / (m * (m - 1)) if m > 1 else 1.0
    return PathStats(neighbors, reverse, cycles, degree, density)


def compute_query_stats(q: QueryGraph, decomp: "PathDecomposition") -> QueryStats:
    return QueryStats(node_label_counts(q), {p: path_stats(q, p) for p in decomp.paths})


# --------------------------------------------------------------------------
# decomposition


@dataclass
class PathDecomposition:
    paths: list[QPath]
    join_predicates: dict[tuple[int, int], list[str]]   # (i, j), i < j -> shared query nodes
    cover_nodes: dict[str, int]                         # cv: node -> path index
    cover_edges: dict[tuple[str, str], int]             # ce: edge -> path index
    costs: list[float] = field(default_factory=list)
    search_space: float = math.nan                      # SS_0 estimate

    def joins(self, i: int) -> list[int]:
        out = []
        for (a, b) in self.join_predicates:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return sorted(out)

    def predicates(self, i: int, j: int) -> list[str]:
        return self.join_predicates.get((min(i, j), max(i, j)), [])

    def cv(self, i: int) -> list[str]:
        return [n for n, p in self.cover_nodes.items() if p == i]

    def ce(self, i: int) -> list[tuple[str, str]]:
        return [e for e, p in self.cover_edges.items() if p == i]


def path_cost(q: QueryGraph, path: QPath, alpha: float,
              count: Callable[[list[str], float], float]) -> float:
    """Estimated cardinality C(P, alpha) = |PIndex| / (degree * density).

    Path degree is floored at 1 so that a path spanning the whole query has a
    finite cost.
    """
    st = path_stats(q, path)
    est = count([q.labels[n] for n in path], alpha)
    return est / (max(st.degree, 1) * st.density)


def assemble_decomposition(q: QueryGraph, paths: Sequence[QPath],
                           costs: Sequence[float] | None = None) -> PathDecomposition:
    """Join predicates and exclusive coverage for an ordered list of paths."""
    paths = list(paths)
    jp = {}
    for i in range(len(paths)):
        for j in range(i + 1, len(paths)):
            shared = [n for n in paths[i] if n in set(paths[j])]
            if shared:
                jp[(i, j)] = sorted(shared, key=q.order.get)
    cv: dict[str, int] = {}
    ce: dict[tuple[str, str], int] = {}
    for i, p in enumerate(paths):
        for n in p:
            cv.setdefault(n, i)
        for e in path_edges(p, q):
            ce.setdefault(e, i)
    missing = set(q.edges) - set(ce)
    if missing or set(cv) != set(q.labels):
        raise QueryError(f"paths do not cover the query (missing edges {sorted(missing)})")
    costs = list(costs) if costs is not None else []
    ss0 = math.prod(costs) if costs else math.nan
    return PathDecomposition(paths, jp, cv, ce, costs, ss0)


def decompose_query(q: QueryGraph, max_len: int,
                    count: Callable[[list[str], float], float],
                    alpha: float | None = None) -> PathDecomposition:
    """Greedy SET COVER of the query edges by paths of length <= max_len.

    ``count(labels, alpha)`` estimates how many indexed paths match a label
    sequence.  Paths are picked by newly-covered-edges / cost; afterwards any
    path whose edges are all covered by the others (and whose cost is >= 1,
    so dropping it cannot grow the cost product) is removed.
    """
    if max_len < 1:
        raise QueryError("maximum path length must be >= 1")
    alpha = q.alpha if alpha is None else alpha
    cands = query_paths(q, max_len)
    cost = {p: path_cost(q, p, alpha, count) for p in cands}
    if not q.edges:
        p = cands[0]
        return assemble_decomposition(q, [p], [cost[p]])
    pe = {p: set(path_edges(p, q)) for p in cands}
    uncovered = set(q.edges)
    chosen: list[QPath] = []
    while uncovered:
        best = None
        best_key = None
        for idx, p in enumerate(cands):
            new = len(pe[p] & uncovered)
            if not new:
                continue
            eff = new / max(cost[p], 1e-12)
            key = (eff, new, -idx)
            if best_key is None or key > best_key:
                best, best_key = p, key
        chosen.append(best)
        uncovered -= pe[best]
    # drop redundant paths, most expensive first
    for p in sorted(chosen, key=lambda x: (-cost[x], cands.index(x))):
        if len(chosen) == 1 or cost[p] < 1.0:
            continue
        rest = set().union(*(pe[x] for x in chosen if x != p))
        if set(q.edges) <= rest:
            chosen.remove(p)
    return assemble_decomposition(q, chosen, [cost[p] for p in chosen])
