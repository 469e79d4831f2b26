"""Reference-level input (PGD), the entity graph it induces, and match probabilities.

A PGD lists references with label distributions, reference-pair edge
distributions and candidate reference sets.  :func:`build_entity_graph`
turns it into an :class:`EntityGraph`: one entity node per reference set,
merged label and edge distributions, and per identity component an exact
table of node-existence configurations.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

#: Slack used in every ``p >= alpha`` comparison so that two routes computing
#: the same probability in a different order agree on threshold membership.
THRESHOLD_SLACK = 1e-12

#: Tolerance for "sums to one" checks on input distributions.
DIST_TOL = 1e-9

#: Exact configuration tables are only built for components up to this size.
MAX_COMPONENT_NODES = 20

#: Products over more factors than this are accumulated in log space.
LOG_SPACE_AFTER = 64

MERGE_FUNCTIONS = ("average", "disjunct")


class PGDError(ValueError):
    """Raised when a PGD cannot be turned into an entity graph."""


class ComponentTooLarge(PGDError):
    pass


def at_least(p: float, alpha: float) -> bool:
    return p >= alpha - THRESHOLD_SLACK


def chain_product(factors: Iterable[float]) -> float:
    fs = list(factors)
    if len(fs) <= LOG_SPACE_AFTER:
        out = 1.0
        for f in fs:
            out *= f
        return float(out)
    if any(f <= 0.0 for f in fs):
        return 0.0
    return math.exp(math.fsum(math.log(f) for f in fs))


# --------------------------------------------------------------------------
# PGD


@dataclass
class Reference:
    id: str
    dist: dict[str, float]


@dataclass
class ReferenceEdge:
    u: str
    v: str
    p: float | None = None
    # (label of u, label of v) -> Pr(edge | labels)
    cpt: dict[tuple[str, str], float] | None = None

    @property
    def correlated(self) -> bool:
        return self.cpt is not None


@dataclass
class ReferenceSet:
    id: str
    refs: tuple[str, ...]
    # None only for singletons that merely name the entity.
    p: float | None = None


@dataclass
class PGD:
    labels: list[str]
    references: list[Reference]
    edges: list[ReferenceEdge] = field(default_factory=list)
    sets: list[ReferenceSet] = field(default_factory=list)
    merge_labels: str = "average"
    merge_edges: str = "average"

    @property
    def correlated(self) -> bool:
        return any(e.cpt is not None for e in self.edges)

    @classmethod
    def from_dict(cls, doc: Mapping) -> "PGD":
        refs = [Reference(str(r["id"]), {str(k): float(v) for k, v in r["dist"].items()})
                for r in doc.get("references", [])]
        edges = []
        seen = set()
        for e in doc.get("edges", []):
            u, v = str(e["u"]), str(e["v"])
            key = frozenset((u, v))
            if key in seen:
                continue
            seen.add(key)
            cpt = None
            if "cpt" in e:
                cpt = {}
                for k, val in e["cpt"].items():
                    a, b = k.split(",")
                    cpt[(a.strip(), b.strip())] = float(val)
            edges.append(ReferenceEdge(u, v, None if cpt is not None else float(e["p"]), cpt))
        sets = [ReferenceSet(str(s["id"]), tuple(str(r) for r in s["refs"]),
                             None if s.get("p") is None else float(s["p"]))
                for s in doc.get("sets", [])]
        merge = doc.get("merge", {})
        return cls(
            labels=[str(x) for x in doc.get("labels", [])],
            references=refs,
            edges=edges,
            sets=sets,
            merge_labels=merge.get("labels", "average"),
            merge_edges=merge.get("edges", "average"),
        )

    def to_dict(self) -> dict:
        edges = []
        for e in self.edges:
            if e.cpt is not None:
                edges.append({"u": e.u, "v": e.v,
                              "cpt": {f"{a},{b}": p for (a, b), p in e.cpt.items()}})
            else:
                edges.append({"u": e.u, "v": e.v, "p": e.p})
        sets = []
        for s in self.sets:
            d = {"id": s.id, "refs": list(s.refs)}
            if s.p is not None:
                d["p"] = s.p
            sets.append(d)
        return {
            "labels": list(self.labels),
            "references": [{"id": r.id, "dist": dict(r.dist)} for r in self.references],
            "edges": edges,
            "sets": sets,
            "merge": {"labels": self.merge_labels, "edges": self.merge_edges},
        }


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


def _bad_prob(p) -> bool:
    return p is None or not (0.0 <= p <= 1.0) or math.isnan(p)


def validate_pgd(pgd: PGD) -> list[Violation]:
    """Return every invariant violation found in ``pgd``; empty means valid."""
    out: list[Violation] = []
    add = lambda kind, msg: out.append(Violation(kind, msg))  # noqa: E731

    labels = set(pgd.labels)
    if not pgd.labels:
        add("labels", "label alphabet is empty")
    if len(labels) != len(pgd.labels):
        add("labels", "duplicate labels in alphabet")
    for name, fn in (("labels", pgd.merge_labels), ("edges", pgd.merge_edges)):
        if fn not in MERGE_FUNCTIONS:
            add("merge", f"unknown {name} merge function {fn!r}")
    if pgd.merge_labels == "disjunct":
        add("merge", "disjunct is only defined for edge existence")

    ref_ids: set[str] = set()
    for r in pgd.references:
        if r.id in ref_ids:
            add("duplicate-id", f"reference {r.id!r} declared twice")
        ref_ids.add(r.id)
        for lab, p in r.dist.items():
            if lab not in labels:
                add("unknown-label", f"reference {r.id!r} uses undeclared label {lab!r}")
            if _bad_prob(p):
                add("probability-range", f"reference {r.id!r} label {lab!r} has probability {p}")
        total = math.fsum(r.dist.values())
        if abs(total - 1.0) > DIST_TOL:
            add("distribution-sum", f"reference {r.id!r} distribution sums to {total:g}")

    pairs: set[frozenset] = set()
    for e in pgd.edges:
        for end in (e.u, e.v):
            if end not in ref_ids:
                add("dangling-id", f"edge {e.u!r}-{e.v!r} references undeclared {end!r}")
        if e.u == e.v:
            add("self-loop", f"edge endpoints coincide ({e.u!r})")
        key = frozenset((e.u, e.v))
        if key in pairs:
            add("duplicate-edge", f"edge {e.u!r}-{e.v!r} declared twice")
        pairs.add(key)
        if e.cpt is None:
            if _bad_prob(e.p):
                add("probability-range", f"edge {e.u!r}-{e.v!r} has probability {e.p}")
        else:
            for (a, b), p in e.cpt.items():
                if a not in labels or b not in labels:
                    add("unknown-label", f"edge {e.u!r}-{e.v!r} CPT entry {a},{b}")
                if _bad_prob(p):
                    add("probability-range", f"edge {e.u!r}-{e.v!r} CPT {a},{b} = {p}")

    set_ids: set[str] = set()
    singleton_named: dict[str, str] = {}
    for s in pgd.sets:
        if s.id in set_ids:
            add("duplicate-id", f"set {s.id!r} declared twice")
        set_ids.add(s.id)
        if not s.refs:
            add("empty-set", f"set {s.id!r} has no references")
        if len(set(s.refs)) != len(s.refs):
            add("duplicate-member", f"set {s.id!r} lists a reference twice")
        for r in s.refs:
            if r not in ref_ids:
                add("dangling-id", f"set {s.id!r} references undeclared {r!r}")
        if len(s.refs) == 1:
            if s.refs[0] in singleton_named:
                add("duplicate-set", f"singleton of {s.refs[0]!r} declared twice")
            singleton_named[s.refs[0]] = s.id
            if s.p is not None and _bad_prob(s.p):
                add("probability-range", f"set {s.id!r} has probability {s.p}")
        elif _bad_prob(s.p):
            add("probability-range", f"set {s.id!r} has probability {s.p}")
    multi = {frozenset(s.refs) for s in pgd.sets if len(s.refs) > 1}
    if len(multi) != sum(1 for s in pgd.sets if len(s.refs) > 1):
        add("duplicate-set", "two sets share the same reference members")
    # implicit singleton entities take their reference's id
    for r in pgd.references:
        if r.id not in singleton_named and r.id in set_ids:
            add("id-collision", f"set id {r.id!r} collides with the implicit singleton of reference {r.id!r}")
    return out


# --------------------------------------------------------------------------
# merge functions


def merge_label_dists(dists: Sequence[np.ndarray], how: str) -> np.ndarray:
    if how != "average":
        raise PGDError(f"label merge {how!r} not supported")
    return np.mean(np.stack(dists), axis=0)


def merge_edge_probs(values: Sequence, how: str):
    """Merge existence probabilities (floats or per-label-pair arrays)."""
    if how == "average":
        if all(not isinstance(v, np.ndarray) for v in values):
            return math.fsum(values) / len(values)
        return np.mean(np.stack([np.broadcast_to(v, _shape_of(values)) for v in values]), axis=0)
    if how == "disjunct":
        if all(not isinstance(v, np.ndarray) for v in values):
            return 1.0 - math.prod(1.0 - v for v in values)
        shape = _shape_of(values)
        keep = np.ones(shape)
        for v in values:
            keep = keep * (1.0 - np.broadcast_to(v, shape))
        return 1.0 - keep
    raise PGDError(f"edge merge {how!r} not supported")


def _shape_of(values):
    for v in values:
        if isinstance(v, np.ndarray):
            return v.shape
    return ()


# --------------------------------------------------------------------------
# entity graph


@dataclass(frozen=True)
class EntityNode:
    id: str
    refs: frozenset[str]
    label_dist: dict[str, float]

    @property
    def possible_labels(self) -> frozenset[str]:
        return frozenset(k for k, v in self.label_dist.items() if v > 0.0)


@dataclass(frozen=True)
class EntityEdge:
    u: str
    v: str
    # float, or {(label of u, label of v): probability}
    existence: float | dict[tuple[str, str], float]


@dataclass
class IdentityComponent:
    """Entities linked by shared references, with their exact configuration marginals.

    ``table`` maps every legal set of existing entities (each component
    reference covered exactly once) to its normalised probability.
    """

    nodes: tuple[int, ...]
    table: dict[frozenset[int], float]
    normalizer: float

    def marginal(self, subset: frozenset[int]) -> float:
        if len(self.nodes) == 1:
            return self.table.get(subset, 0.0) if subset else 1.0
        return math.fsum(p for cfg, p in self.table.items() if subset <= cfg)


@dataclass
class EntityGraph:
    labels: list[str]
    node_ids: list[str]
    node_refs: list[frozenset[str]]
    label_probs: np.ndarray          # (N, |labels|)
    edge_u: np.ndarray               # (E,) with edge_u < edge_v
    edge_v: np.ndarray
    edge_p: np.ndarray | None        # (E,) scalar existence, None when correlated
    edge_cpt: np.ndarray | None      # (E, |labels|, |labels|) oriented (edge_u label, edge_v label)
    components: list[IdentityComponent]
    comp_of: np.ndarray              # (N,) component index
    node_weights: list[tuple[float, float]] = field(repr=False, default_factory=list)

    def __post_init__(self):
        self.node_index = {nid: i for i, nid in enumerate(self.node_ids)}
        n = len(self.node_ids)
        self.ref_index: dict[str, tuple[int, ...]] = {}
        tmp: dict[str, list[int]] = {}
        for i, refs in enumerate(self.node_refs):
            for r in refs:
                tmp.setdefault(r, []).append(i)
        self.ref_index = {r: tuple(v) for r, v in tmp.items()}
        self.supports = [tuple(int(a) for a in np.flatnonzero(row > 0.0)) for row in self.label_probs]
        self.nodes_by_label = [np.flatnonzero(self.label_probs[:, a] > 0.0)
                               for a in range(len(self.labels))]
        self.label_index = {lab: i for i, lab in enumerate(self.labels)}
        # CSR adjacency over undirected edges
        ne = len(self.edge_u)
        src = np.concatenate([self.edge_u, self.edge_v]).astype(np.int64)
        dst = np.concatenate([self.edge_v, self.edge_u]).astype(np.int64)
        eid = np.concatenate([np.arange(ne), np.arange(ne)]).astype(np.int64)
        order = np.lexsort((dst, src))
        self.adj_dst = dst[order]
        self.adj_eid = eid[order]
        counts = np.bincount(src, minlength=n) if ne else np.zeros(n, dtype=np.int64)
        self.adj_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self.edge_lookup = {(int(u), int(v)): k for k, (u, v) in enumerate(zip(self.edge_u, self.edge_v))}
        self.single_marginal = np.array(
            [self.components[self.comp_of[i]].marginal(frozenset((i,))) for i in range(n)],
            dtype=np.float64)
        self.comp_size = np.array([len(self.components[c].nodes) for c in self.comp_of], dtype=np.int64)
        # per-node bitmask of its references inside its component
        self.ref_mask = np.zeros(n, dtype=np.int64)
        for comp in self.components:
            refs = sorted(set().union(*(self.node_refs[i] for i in comp.nodes)))
            bit = {r: 1 << k for k, r in enumerate(refs)}
            for i in comp.nodes:
                self.ref_mask[i] = sum(bit[r] for r in self.node_refs[i])
        self._marg_cache: dict = {}

    # -- basic accessors ---------------------------------------------------
    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        return len(self.edge_u)

    @property
    def correlated(self) -> bool:
        return self.edge_cpt is not None

    def neighbors(self, i: int) -> np.ndarray:
        return self.adj_dst[self.adj_ptr[i]:self.adj_ptr[i + 1]]

    def label_prob(self, i: int, label: int) -> float:
        return float(self.label_probs[i, label])

    def edge_id(self, i: int, j: int) -> int | None:
        return self.edge_lookup.get((i, j) if i < j else (j, i))

    def edge_prob(self, i: int, j: int, li: int | None = None, lj: int | None = None) -> float:
        """Pr((i,j).e = T), conditioned on endpoint labels for correlated graphs."""
        if i < j:
            k = self.edge_lookup.get((i, j))
        else:
            k = self.edge_lookup.get((j, i))
            li, lj = lj, li
        if k is None:
            return 0.0
        if self.edge_cpt is None:
            return float(self.edge_p[k])
        if li is None or lj is None:
            raise ValueError("correlated edge probability needs both endpoint labels")
        return float(self.edge_cpt[k, li, lj])

    def edge_upper(self, k: int) -> float:
        if self.edge_cpt is None:
            return float(self.edge_p[k])
        return float(self.edge_cpt[k].max())

    def disjoint(self, i: int, j: int) -> bool:
        if i == j:
            return False
        if self.comp_of[i] != self.comp_of[j]:
            return True
        return not (self.ref_mask[i] & self.ref_mask[j])

    def node(self, i: int) -> EntityNode:
        dist = {self.labels[a]: float(self.label_probs[i, a]) for a in self.supports[i]}
        return EntityNode(self.node_ids[i], self.node_refs[i], dist)

    def nodes(self) -> Iterator[EntityNode]:
        return (self.node(i) for i in range(self.n_nodes))

    def edges(self) -> Iterator[EntityEdge]:
        for k in range(self.n_edges):
            u, v = self.node_ids[self.edge_u[k]], self.node_ids[self.edge_v[k]]
            if self.edge_cpt is None:
                yield EntityEdge(u, v, float(self.edge_p[k]))
            else:
                cpt = {(a, b): float(self.edge_cpt[k, x, y])
                       for x, a in enumerate(self.labels) for y, b in enumerate(self.labels)}
                yield EntityEdge(u, v, cpt)

    # -- node existence ----------------------------------------------------
    def existence_marginal(self, nodes: Iterable[int]) -> float:
        nodes = tuple(nodes)
        if not nodes:
            return 1.0
        if len(nodes) == 1:
            return float(self.single_marginal[nodes[0]])
        by_comp: dict[int, list[int]] = {}
        for i in nodes:
            by_comp.setdefault(int(self.comp_of[i]), []).append(i)
        out = 1.0
        for c, members in by_comp.items():
            if len(members) == 1:
                out *= float(self.single_marginal[members[0]])
                continue
            key = (c, frozenset(members))
            if len(key[1]) < len(members):
                return 0.0
            val = self._marg_cache.get(key)
            if val is None:
                val = self.components[c].marginal(key[1])
                self._marg_cache[key] = val
            out *= val
        return out


def _exact_covers(refs: list[str], sets_of_ref: dict[str, list[int]], members: list[frozenset]) -> Iterator[tuple[int, ...]]:
    """Yield every choice of entities covering each reference exactly once."""
    chosen: list[int] = []
    covered: set[str] = set()

    def rec():
        for r in refs:
            if r not in covered:
                break
        else:
            yield tuple(chosen)
            return
        for s in sets_of_ref[r]:
            if members[s] & covered:
                continue
            chosen.append(s)
            covered.update(members[s])
            yield from rec()
            covered.difference_update(members[s])
            chosen.pop()

    yield from rec()


def build_entity_graph(pgd: PGD, max_component_nodes: int = MAX_COMPONENT_NODES) -> EntityGraph:
    report = validate_pgd(pgd)
    if report:
        raise PGDError("invalid PGD: " + "; ".join(map(str, report[:5])))

    labels = list(pgd.labels)
    lab_ix = {lab: i for i, lab in enumerate(labels)}
    nlab = len(labels)
    ref_dist = {}
    for r in pgd.references:
        vec = np.zeros(nlab)
        for lab, p in r.dist.items():
            vec[lab_ix[lab]] = p
        ref_dist[r.id] = vec

    # entities: singletons in reference order, then multi-reference sets
    declared_single = {s.refs[0]: s for s in pgd.sets if len(s.refs) == 1}
    ids: list[str] = []
    members: list[frozenset[str]] = []
    weights: list[tuple[float, float]] = []
    for r in pgd.references:
        s = declared_single.get(r.id)
        ids.append(s.id if s is not None else r.id)
        members.append(frozenset((r.id,)))
        if s is not None and s.p is not None:
            weights.append((s.p, 1.0 - s.p))
        else:
            weights.append((1.0, 1.0))
    for s in pgd.sets:
        if len(s.refs) > 1:
            ids.append(s.id)
            members.append(frozenset(s.refs))
            weights.append((s.p, 1.0 - s.p))
    n = len(ids)

    label_probs = np.zeros((n, nlab))
    for i, refs in enumerate(members):
        dists = [ref_dist[r] for r in sorted(refs)]
        label_probs[i] = dists[0] if len(dists) == 1 else merge_label_dists(dists, pgd.merge_labels)

    sets_of_ref: dict[str, list[int]] = {}
    for i, refs in enumerate(members):
        for r in refs:
            sets_of_ref.setdefault(r, []).append(i)

    # edges: merge over declared reference pairs only
    correlated = pgd.correlated
    acc: dict[tuple[int, int], list] = {}
    for e in pgd.edges:
        if e.cpt is not None:
            m = np.zeros((nlab, nlab))
            for (a, b), p in e.cpt.items():
                m[lab_ix[a], lab_ix[b]] = p
            val_uv = m
        else:
            val_uv = e.p if not correlated else np.full((nlab, nlab), e.p)
        for s1 in sets_of_ref[e.u]:
            for s2 in sets_of_ref[e.v]:
                if s1 == s2 or members[s1] & members[s2]:
                    continue
                if s1 < s2:
                    acc.setdefault((s1, s2), []).append(val_uv)
                else:
                    v = val_uv.T if isinstance(val_uv, np.ndarray) else val_uv
                    acc.setdefault((s2, s1), []).append(v)
    keys = sorted(acc)
    eu, ev, ep, ecpt = [], [], [], []
    for key in keys:
        vals = acc[key]
        merged = vals[0] if len(vals) == 1 else merge_edge_probs(vals, pgd.merge_edges)
        if correlated:
            merged = np.asarray(merged, dtype=np.float64)
            if not (merged > 0.0).any():
                continue
            ecpt.append(merged)
        else:
            if not merged > 0.0:
                continue
            ep.append(float(merged))
        eu.append(key[0])
        ev.append(key[1])

    # identity components via shared references
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for group in sets_of_ref.values():
        for other in group[1:]:
            a, b = find(group[0]), find(other)
            if a != b:
                parent[max(a, b)] = min(a, b)
    comps: dict[int, list[int]] = {}
    for i in range(n):
        comps.setdefault(find(i), []).append(i)

    components: list[IdentityComponent] = []
    comp_of = np.zeros(n, dtype=np.int64)
    for root in sorted(comps):
        nodes = comps[root]
        if len(nodes) > max_component_nodes:
            raise ComponentTooLarge(
                f"identity component containing {ids[nodes[0]]!r} has {len(nodes)} entities "
                f"(limit {max_component_nodes})")
        ci = len(components)
        for i in nodes:
            comp_of[i] = ci
        if len(nodes) == 1:
            on = weights[nodes[0]][0]
            if on <= 0.0:
                raise PGDError(f"entity {ids[nodes[0]]!r} can never exist but is the only cover of its reference")
            components.append(IdentityComponent((nodes[0],), {frozenset(nodes): 1.0}, on))
            continue
        refs = sorted(set().union(*(members[i] for i in nodes)))
        local = {r: [s for s in sets_of_ref[r]] for r in refs}
        raw: dict[frozenset[int], float] = {}
        for cover in _exact_covers(refs, local, members):
            chosen = set(cover)
            w = 1.0
            for i in nodes:
                w *= weights[i][0] if i in chosen else weights[i][1]
            if w > 0.0:
                raw[frozenset(cover)] = w
        z = math.fsum(raw.values())
        if z <= 0.0:
            raise PGDError(f"identity component containing {ids[nodes[0]]!r} has no legal configuration with positive weight")
        table = {cfg: w / z for cfg, w in raw.items()}
        components.append(IdentityComponent(tuple(nodes), table, z))

    return EntityGraph(
        labels=labels,
        node_ids=ids,
        node_refs=members,
        label_probs=label_probs,
        edge_u=np.asarray(eu, dtype=np.int64),
        edge_v=np.asarray(ev, dtype=np.int64),
        edge_p=None if correlated else np.asarray(ep, dtype=np.float64),
        edge_cpt=np.asarray(ecpt, dtype=np.float64).reshape(len(ecpt), nlab, nlab) if correlated else None,
        components=components,
        comp_of=comp_of,
        node_weights=weights,
    )


def node_existence_marginal(g: EntityGraph, nodes: Iterable[str | int]) -> float:
    """Pr(all given entities exist); 0 when two of them share a reference."""
    idx = [g.node_index[x] if isinstance(x, str) else int(x) for x in nodes]
    if len(set(idx)) < len(idx):
        return 0.0
    for a, b in itertools.combinations(idx, 2):
        if not g.disjoint(a, b):
            return 0.0
    return g.existence_marginal(idx)


# --------------------------------------------------------------------------
# matches


@dataclass(frozen=True)
class Match:
    mapping: dict[str, str]
    pr_le: float
    pr_n: float
    valid: bool = True

    @property
    def probability(self) -> float:
        return self.pr_le * self.pr_n

    @property
    def key(self) -> tuple[tuple[str, str], ...]:
        return tuple(self.mapping.items())

    def to_dict(self) -> dict:
        return {"mapping": dict(self.mapping), "pr_le": float(self.pr_le),
                "pr_n": float(self.pr_n), "probability": float(self.probability)}


def labels_and_edges_product(g: EntityGraph, node_labels: Mapping[int, int],
                             edges: Iterable[tuple[int, int]]) -> float:
    """Pr_le for entity nodes with fixed labels and a set of required entity edges."""
    factors = [g.label_probs[v, lab] for v, lab in node_labels.items()]
    for a, b in edges:
        factors.append(g.edge_prob(a, b, node_labels.get(a), node_labels.get(b)))
    return chain_product(factors)


def match_probability(g: EntityGraph, query, mapping: Mapping[str, str | int]) -> Match:
    """Exact probability of the match given by ``mapping`` (query node -> entity).

    ``query`` is anything with ``labels`` (node -> label name) and ``edges``.
    """
    psi = {n: (g.node_index[v] if isinstance(v, str) else int(v)) for n, v in mapping.items()}
    ids = {n: g.node_ids[v] for n, v in psi.items()}
    ents = list(psi.values())
    ok = len(set(ents)) == len(ents) and all(
        g.disjoint(a, b) for a, b in itertools.combinations(ents, 2))
    if not ok:
        return Match(ids, 0.0, 0.0, valid=False)
    labs = {}
    for n, v in psi.items():
        lab = g.label_index.get(query.labels[n])
        if lab is None:
            return Match(ids, 0.0, g.existence_marginal(ents))
        labs[v] = lab
    pr_le = labels_and_edges_product(g, labs, [(psi[a], psi[b]) for a, b in query.edges])
    return Match(ids, pr_le, g.existence_marginal(ents))
