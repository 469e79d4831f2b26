"""Brute-force semantics: possible-world enumeration and an oracle matcher.

Nothing here touches the identity-component tables of :class:`EntityGraph`;
node-existence probabilities are recomputed from the PGD's set
probabilities over whole-graph configurations.  That keeps the oracle an
independent check on the component decomposition used everywhere else.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator

from .model import PGD, EntityGraph, Match, PGDError, at_least, build_entity_graph

DEFAULT_WORLD_CAP = 2_000_000


class EnumerationTooLarge(RuntimeError):
    pass


@dataclass(frozen=True)
class PossibleWorld:
    nodes: frozenset[str]
    edges: frozenset[frozenset[str]]
    labeling: dict[str, str]
    probability: float


def node_configurations(g: EntityGraph) -> list[tuple[frozenset[int], float]]:
    """All legal sets of existing entities with their normalised probability.

    Enumerates on/off for every multi-reference entity, fills the remaining
    references with their singletons and normalises over the whole graph.
    """
    n = g.n_nodes
    multi = [i for i in range(n) if len(g.node_refs[i]) > 1]
    if len(multi) > 22:
        raise EnumerationTooLarge(f"{len(multi)} multi-reference entities")
    singleton_of = {next(iter(g.node_refs[i])): i for i in range(n) if len(g.node_refs[i]) == 1}
    raw = []
    for bits in itertools.product((False, True), repeat=len(multi)):
        on = [m for m, b in zip(multi, bits) if b]
        covered: set[str] = set()
        legal = True
        for m in on:
            if covered & g.node_refs[m]:
                legal = False
                break
            covered |= g.node_refs[m]
        if not legal:
            continue
        nodes = set(on)
        nodes.update(i for r, i in singleton_of.items() if r not in covered)
        w = 1.0
        for i in range(n):
            on_w, off_w = g.node_weights[i]
            w *= on_w if i in nodes else off_w
        if w > 0.0:
            raw.append((frozenset(nodes), w))
    z = math.fsum(w for _, w in raw)
    if z <= 0.0:
        raise PGDError("no legal node configuration has positive weight")
    return [(cfg, w / z) for cfg, w in raw]


def _possible_edges(g: EntityGraph, nodes) -> list[tuple[int, int]]:
    ns = sorted(nodes)
    return [(a, b) for a, b in itertools.combinations(ns, 2) if g.edge_id(a, b) is not None]


def count_worlds(g: EntityGraph) -> int:
    total = 0
    for cfg, _ in node_configurations(g):
        k = 1
        for v in cfg:
            k *= len(g.supports[v])
        total += k * 2 ** len(_possible_edges(g, cfg))
    return total


def enumerate_possible_worlds(source: PGD | EntityGraph, cap: int = DEFAULT_WORLD_CAP) -> Iterator[PossibleWorld]:
    """Yield every possible world graph with its probability."""
    g = build_entity_graph(source) if isinstance(source, PGD) else source
    configs = node_configurations(g)
    total = count_worlds(g)
    if total > cap:
        raise EnumerationTooLarge(f"{total} possible worlds exceed the cap of {cap}")
    for cfg, p_nodes in configs:
        ns = sorted(cfg)
        pairs = _possible_edges(g, cfg)
        for labs in itertools.product(*(g.supports[v] for v in ns)):
            lab = dict(zip(ns, labs))
            p_lab = p_nodes
            for v in ns:
                p_lab *= g.label_probs[v, lab[v]]
            if p_lab == 0.0:
                continue
            pe = [g.edge_prob(a, b, lab[a], lab[b]) for a, b in pairs]
            for present in itertools.product((True, False), repeat=len(pairs)):
                p = p_lab
                for on, q in zip(present, pe):
                    p *= q if on else 1.0 - q
                if p == 0.0:
                    continue
                yield PossibleWorld(
                    nodes=frozenset(g.node_ids[v] for v in ns),
                    edges=frozenset(frozenset((g.node_ids[a], g.node_ids[b]))
                                    for on, (a, b) in zip(present, pairs) if on),
                    labeling={g.node_ids[v]: g.labels[lab[v]] for v in ns},
                    probability=p,
                )


def _world_matches(world: PossibleWorld, query) -> Iterator[tuple[str, ...]]:
    qn = list(query.labels)
    for image in itertools.permutations(sorted(world.nodes), len(qn)):
        psi = dict(zip(qn, image))
        if any(world.labeling[psi[n]] != query.labels[n] for n in qn):
            continue
        if all(frozenset((psi[a], psi[b])) in world.edges for a, b in query.edges):
            yield image


def oracle_subgraph_match(source: PGD | EntityGraph, query, alpha: float | None = None,
                          exhaustive: bool = False, cap: int = DEFAULT_WORLD_CAP) -> list[Match]:
    """All matches with probability >= alpha, by summing over possible worlds.

    With ``exhaustive`` every world is materialised.  Otherwise node
    configurations are enumerated explicitly while label and edge variables
    of the matched elements are summed out in closed form (they are
    independent factors); the two modes agree on every enumerable input.
    """
    g = build_entity_graph(source) if isinstance(source, PGD) else source
    alpha = query.alpha if alpha is None else alpha
    qn = list(query.labels)
    mass: dict[tuple[str, ...], float] = {}
    pr_n: dict[tuple[str, ...], float] = {}
    if exhaustive:
        for world in enumerate_possible_worlds(g, cap=cap):
            for image in _world_matches(world, query):
                mass[image] = mass.get(image, 0.0) + world.probability
    else:
        qlab = {}
        for n in qn:
            if query.labels[n] not in g.label_index:
                return []
            qlab[n] = g.label_index[query.labels[n]]
        for cfg, p_nodes in node_configurations(g):
            for image in itertools.permutations(sorted(cfg), len(qn)):
                psi = dict(zip(qn, image))
                p = p_nodes
                for n in qn:
                    p *= g.label_probs[psi[n], qlab[n]]
                    if p == 0.0:
                        break
                else:
                    for a, b in query.edges:
                        p *= g.edge_prob(psi[a], psi[b], qlab[a], qlab[b])
                if p == 0.0:
                    continue
                key = tuple(g.node_ids[v] for v in image)
                mass[key] = mass.get(key, 0.0) + p
                pr_n[key] = pr_n.get(key, 0.0) + p_nodes
    out = []
    for key, p in mass.items():
        if p > 0.0 and at_least(p, alpha):
            node_mass = pr_n.get(key)
            if node_mass is None:
                node_mass = math.fsum(pn for cfg, pn in node_configurations(g)
                                      if all(g.node_index[x] in cfg for x in key))
            out.append(Match(dict(zip(qn, key)), p / node_mass if node_mass else 0.0, node_mass))
    out.sort(key=lambda m: (-m.probability, tuple(m.mapping.values())))
    return out
