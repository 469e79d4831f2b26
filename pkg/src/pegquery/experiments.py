"""Experiment drivers shared by ``scripts/`` and the acceptance suite."""
from __future__ import annotations

import os
import random
import shutil
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from .datagen import GenParams, generate_pgd, generate_query
from .fixtures import random_connected_query, random_small_pgd
from .model import PGDError, build_entity_graph
from .pathindex import build_histograms, build_path_index, compute_context
from .query.engine import QueryResult, run_query
from .worlds import oracle_subgraph_match


# --------------------------------------------------------------------------
# oracle sweep on tiny PGDs


def fixture_cases(n_seeds: int, seed0: int = 0):
    """Seeded (seed, PGD, entity graph, query, correlated) cases; odd seeds use CPT edges."""
    for seed in range(seed0, seed0 + n_seeds):
        rng = random.Random(seed)
        corr = seed % 2 == 1
        pgd = random_small_pgd(rng, max_refs=8, max_labels=3, max_sets=2, max_density=0.5,
                               correlated=corr)
        try:
            g = build_entity_graph(pgd)
        except PGDError:
            continue
        q = random_connected_query(rng, pgd.labels, max_nodes=4)
        yield seed, pgd, g, q, corr


def same_answers(expected, got, tol: float = 1e-9) -> bool:
    e = {m.key: m.probability for m in expected}
    o = {m.key: m.probability for m in got}
    return e.keys() == o.keys() and all(abs(e[k] - o[k]) <= tol for k in e)


def stage_losses(g, res: QueryResult, expected) -> list[str]:
    """Stages that dropped the projection of an expected match (needs ``keep_stages``)."""
    tr = res.trace
    lost = []
    for m in expected:
        psi = {n: g.node_index[v] for n, v in m.mapping.items()}
        for n, v in psi.items():
            if not tr.node_candidates[n][v]:
                lost.append(f"node {n}->{m.mapping[n]}")
        if tr.candidates is None:
            lost.append("no candidates")
            continue
        rows = []
        for pc in tr.candidates.paths:
            proj = np.array([psi[n] for n in pc.path])
            hit = np.flatnonzero((pc.nodes == proj).all(axis=1)) if len(pc) else []
            if not len(hit):
                lost.append(f"path {pc.path}")
            rows.append(int(hit[0]) if len(hit) else None)
        if None in rows:
            continue
        for (i, j) in tr.decomposition.join_predicates:
            if rows[j] not in tr.kpartite.links[(i, j)].of(rows[i]).tolist():
                lost.append(f"join {i}-{j}")
        for i, r in enumerate(rows):
            if r not in tr.structure_only[i]:
                lost.append(f"structure {i}")
            if not tr.reduced.alive[i][r]:
                lost.append(f"joint {i}")
    return lost


@dataclass
class SweepReport:
    comparisons: int = 0
    nonempty: int = 0
    skipped_seeds: int = 0
    correlated: int = 0
    mismatches: list[tuple[int, float]] = field(default_factory=list)
    losses: list[tuple[int, float, list[str]]] = field(default_factory=list)
    seconds: float = 0.0


def oracle_sweep(n_seeds: int = 200, alphas=(0.05, 0.3, 0.7), seed0: int = 0,
                 max_len: int = 3, beta: float = 0.1, gamma: float = 0.1) -> SweepReport:
    rep = SweepReport()
    t = time.perf_counter()
    seen = 0
    for seed, _, g, q, corr in fixture_cases(n_seeds, seed0):
        seen += 1
        idx = build_path_index(g, max_len, beta, gamma)
        ctx, h = compute_context(g), build_histograms(idx)
        for a in alphas:
            res = run_query(g, idx, ctx, h, q, alpha=a, keep_stages=True)
            exp = oracle_subgraph_match(g, q, a)
            rep.comparisons += 1
            rep.correlated += corr
            rep.nonempty += bool(exp)
            if not same_answers(exp, res.matches):
                rep.mismatches.append((seed, a))
            lost = stage_losses(g, res, exp)
            if lost:
                rep.losses.append((seed, a, lost))
    rep.skipped_seeds = n_seeds - seen
    rep.seconds = time.perf_counter() - t
    return rep


# --------------------------------------------------------------------------
# search-space trend


@dataclass
class TrendConfig:
    n_refs: int = 10_000
    seed: int = 7
    lengths: tuple[int, ...] = (1, 2, 3)
    n_queries: int = 5
    query_nodes: int = 5
    query_edges: int = 7
    alpha: float = 0.7
    beta: float = 0.1
    gamma: float = 0.1
    threads: int = 1


@dataclass
class TrendRow:
    L: int
    query: int
    path: int
    context: int
    final: int
    matches: int
    build_seconds: float
    query_seconds: float

    @staticmethod
    def log10(x: int) -> float:
        return float("-inf") if x == 0 else float(np.log10(float(x)))


def search_space_trend(cfg: TrendConfig, directory: str | None = None) -> list[TrendRow]:
    pgd = generate_pgd(GenParams(n_refs=cfg.n_refs, seed=cfg.seed))
    g = build_entity_graph(pgd)
    ctx = compute_context(g)
    queries = [generate_query(cfg.query_nodes, cfg.query_edges, pgd.labels, cfg.seed + i, cfg.alpha)
               for i in range(cfg.n_queries)]
    rows = []
    base = directory or tempfile.mkdtemp(prefix="pegq-trend-")
    try:
        for L in cfg.lengths:
            t = time.perf_counter()
            idx = build_path_index(g, L, cfg.beta, cfg.gamma, threads=cfg.threads,
                                   directory=os.path.join(base, f"L{L}"))
            h = build_histograms(idx)
            build_s = time.perf_counter() - t
            for i, q in enumerate(queries):
                t = time.perf_counter()
                res = run_query(g, idx, ctx, h, q, threads=cfg.threads)
                tr = res.trace
                rows.append(TrendRow(L, i, tr.stage("path").product, tr.stage("path+context").product,
                                     tr.stage("final").product, len(res.matches), build_s,
                                     time.perf_counter() - t))
            del idx
    finally:
        if directory is None:
            shutil.rmtree(base, ignore_errors=True)
    return rows


def trend_violations(rows: list[TrendRow]) -> list[str]:
    out = []
    for r in rows:
        if not r.path >= r.context >= r.final:
            out.append(f"L={r.L} q{r.query}: stages not decreasing ({r.path}, {r.context}, {r.final})")
    by = {(r.L, r.query): r for r in rows}
    lengths = sorted({r.L for r in rows})
    lo, hi = lengths[0], lengths[-1]
    for q in sorted({r.query for r in rows}):
        if (lo, q) in by and (hi, q) in by and by[(hi, q)].final > by[(lo, q)].final:
            out.append(f"q{q}: Final(L={hi}) = {by[(hi, q)].final} > Final(L={lo}) = {by[(lo, q)].final}")
    return out


# --------------------------------------------------------------------------
# performance smoke


@dataclass
class PerfConfig:
    n_refs: int = 100_000
    seed: int = 0
    max_len: int = 2
    query_nodes: int = 5
    query_edges: int = 9
    n_queries: int = 3
    alpha: float = 0.7
    beta: float = 0.1
    gamma: float = 0.1
    threads: int = field(default_factory=lambda: max(2, os.cpu_count() or 1))


@dataclass
class PerfReport:
    entities: int
    edges: int
    records: int
    build_seconds: float
    query_seconds: list[float]
    query_seconds_parallel: list[float]
    matches: list[int]
    identical: bool
    peak_rss_mb: float


def perf_smoke(cfg: PerfConfig, directory: str | None = None) -> PerfReport:
    import resource

    pgd = generate_pgd(GenParams(n_refs=cfg.n_refs, seed=cfg.seed))
    g = build_entity_graph(pgd)
    del pgd
    base = directory or tempfile.mkdtemp(prefix="pegq-perf-")
    try:
        t = time.perf_counter()
        idx = build_path_index(g, cfg.max_len, cfg.beta, cfg.gamma, threads=cfg.threads,
                               directory=os.path.join(base, "index"))
        ctx = compute_context(g)
        h = build_histograms(idx)
        build_s = time.perf_counter() - t
        seq_s, par_s, counts, same = [], [], [], True
        for i in range(cfg.n_queries):
            q = generate_query(cfg.query_nodes, cfg.query_edges, g.labels, cfg.seed + i, cfg.alpha)
            t = time.perf_counter()
            one = run_query(g, idx, ctx, h, q, threads=1).matches
            seq_s.append(time.perf_counter() - t)
            t = time.perf_counter()
            many = run_query(g, idx, ctx, h, q, threads=cfg.threads).matches
            par_s.append(time.perf_counter() - t)
            counts.append(len(one))
            same &= one == many
        rss = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0
        return PerfReport(g.n_nodes, g.n_edges, idx.record_count(), build_s, seq_s, par_s, counts, same, rss)
    finally:
        if directory is None:
            shutil.rmtree(base, ignore_errors=True)
