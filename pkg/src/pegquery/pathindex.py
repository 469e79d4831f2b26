"""Offline structures over the entity graph: context tables, path index, histograms.

The path index maps a label sequence (stored once per reversal pair) and a
probability bucket to the simple, reference-disjoint entity paths carrying
that labelling with probability at least ``beta``.  Records hold the
label/edge probability and the node-existence probability separately.

Construction is level-wise over numpy arrays: every directed path of length
``l`` is extended by one edge and one label, and extensions falling below
``beta`` are dropped (all factors are <= 1, so no qualifying path loses a
qualifying prefix).
"""
from __future__ import annotations

import hashlib
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .model import THRESHOLD_SLACK, EntityGraph, at_least

log = logging.getLogger(__name__)

DEFAULT_POINTS = tuple(round(0.1 * i, 10) for i in range(1, 11))
BUCKET_SLACK = 1e-9
# rows of (path x neighbour) candidates materialised per work unit
EXPANSION_BUDGET = 500_000


class PathRecord(NamedTuple):
    nodes: tuple[int, ...]
    pr_le: float
    pr_n: float

    @property
    def probability(self) -> float:
        return self.pr_le * self.pr_n


# --------------------------------------------------------------------------
# context information


@dataclass
class ContextTable:
    labels: list[str]
    count: np.ndarray     # c(v, sigma), int32 (N, |labels|)
    ppu: np.ndarray       # partial upper bound (N, |labels|)
    fpu: np.ndarray       # full upper bound (N, |labels|)

    def row(self, v: int) -> dict[str, tuple[int, float, float]]:
        return {lab: (int(self.count[v, s]), float(self.ppu[v, s]), float(self.fpu[v, s]))
                for s, lab in enumerate(self.labels)}


def _directed_entries(g: EntityGraph):
    deg = np.diff(g.adj_ptr)
    src = np.repeat(np.arange(g.n_nodes, dtype=np.int64), deg)
    return src, g.adj_dst, g.adj_eid


def _oriented_cpt(g: EntityGraph, src, dst, eid) -> np.ndarray:
    """CPT rows indexed (label of src, label of dst) for each directed entry."""
    c = g.edge_cpt[eid]
    flip = src > dst
    c[flip] = np.transpose(c[flip], (0, 2, 1))
    return c


def compute_context(g: EntityGraph) -> ContextTable:
    n, s_count = g.n_nodes, len(g.labels)
    count = np.zeros((n, s_count), dtype=np.int32)
    ppu = np.zeros((n, s_count))
    fpu = np.zeros((n, s_count))
    src, dst, eid = _directed_entries(g)
    if len(src):
        ok = (src != dst) & ~((g.comp_of[src] == g.comp_of[dst])
                              & ((g.ref_mask[src] & g.ref_mask[dst]) != 0))
        src, dst, eid = src[ok], dst[ok], eid[ok]
    cpt = None
    if g.correlated and len(src):
        cpt = _oriented_cpt(g, src, dst, eid)
        src_support = g.label_probs[src] > 0.0           # (M, S)
    for s in range(s_count):
        lp = g.label_probs[dst, s]
        has = lp > 0.0
        if not has.any():
            continue
        if cpt is None:
            pe = g.edge_p[eid]
        else:
            # the label of v is unknown: take the best case over its support
            pe = np.where(src_support, cpt[:, :, s], 0.0).max(axis=1)
        idx = src[has]
        count[:, s] = np.bincount(idx, minlength=n)
        np.maximum.at(ppu[:, s], idx, pe[has])
        np.maximum.at(fpu[:, s], idx, lp[has] * pe[has])
    return ContextTable(list(g.labels), count, ppu, fpu)


# --------------------------------------------------------------------------
# the index


def canonical_sequence(seq: Sequence[int]) -> tuple[tuple[int, ...], bool]:
    """Return (stored orientation, whether ``seq`` is the reverse of it)."""
    t = tuple(seq)
    r = t[::-1]
    return (t, False) if t <= r else (r, True)


#: stored bucket values are fixed-point multiples of this resolution
BUCKET_SCALE = 10_000


def record_dtype(width: int) -> np.dtype:
    """Fixed-width segment record for paths of ``width`` nodes.

    The key fields (label sequence, bucket, ordinal) are big-endian so that
    the raw record bytes sort in key order; values are little-endian.
    """
    return np.dtype([
        ("seq", ">u2", (width,)),
        ("bucket", ">u2"),
        ("ordinal", ">u4"),
        ("nodes", "<u4", (width,)),
        ("pr_le", "<f8"),
        ("pr_n", "<f8"),
    ])


class PathBlock:
    """All records of one canonical label sequence, ordered by (bucket, nodes)."""

    __slots__ = ("rec",)

    def __init__(self, rec: np.ndarray):
        self.rec = rec

    def __len__(self) -> int:
        return len(self.rec)

    @property
    def nodes(self) -> np.ndarray:
        return self.rec["nodes"].astype(np.int64)

    @property
    def pr_le(self) -> np.ndarray:
        return self.rec["pr_le"].astype(np.float64)

    @property
    def pr_n(self) -> np.ndarray:
        return self.rec["pr_n"].astype(np.float64)

    @property
    def bucket(self) -> np.ndarray:
        """Fixed-point bucket values (pi * BUCKET_SCALE)."""
        return self.rec["bucket"].astype(np.int64)

    @property
    def probability(self) -> np.ndarray:
        return self.pr_le * self.pr_n


@dataclass
class PathIndex:
    max_len: int
    beta: float
    gamma: float
    labels: list[str]
    segments: dict[int, np.ndarray]                       # width -> record array
    table: dict[tuple[int, ...], tuple[int, int]]          # canonical sequence -> [start, end)
    fingerprint: str = ""
    graph: EntityGraph | None = field(default=None, repr=False, compare=False)
    directory: str | None = None

    def __post_init__(self):
        self.blocks = {key: PathBlock(self.segments[len(key)][a:b])
                       for key, (a, b) in sorted(self.table.items())}

    @property
    def n_buckets(self) -> int:
        return int(math.floor((1.0 - self.beta) / self.gamma + BUCKET_SLACK)) + 1

    def bucket_of(self, p) -> np.ndarray | int:
        """Bucket ordinal i with pi = beta + i*gamma and p in [pi, pi + gamma)."""
        top = self.n_buckets - 1
        b = np.floor((np.asarray(p, dtype=np.float64) - self.beta) / self.gamma + BUCKET_SLACK)
        b = np.clip(b, 0, top).astype(np.int64)
        return b if b.ndim else int(b)

    def bucket_value(self, i):
        return self.beta + self.gamma * np.asarray(i)

    def bucket_fixed(self, i):
        return np.rint(self.bucket_value(i) * BUCKET_SCALE).astype(np.int64)

    def record_count(self) -> int:
        return sum(len(s) for s in self.segments.values())

    def label_ids(self, seq: Sequence[str | int]) -> tuple[int, ...] | None:
        out = []
        for x in seq:
            if isinstance(x, str):
                if x not in self.labels:
                    return None
                out.append(self.labels.index(x))
            else:
                out.append(int(x))
        return tuple(out)

    def lookup(self, seq: Sequence[str | int], alpha: float) -> list[PathRecord]:
        return index_lookup(self, seq, alpha)

    def records(self):
        """Iterate (canonical sequence, PathRecord) over the whole index."""
        for key, blk in self.blocks.items():
            for row, a, b in zip(blk.nodes.tolist(), blk.pr_le.tolist(), blk.pr_n.tolist()):
                yield key, PathRecord(tuple(row), a, b)


def graph_fingerprint(g: EntityGraph) -> str:
    h = hashlib.sha256()
    h.update("\x1f".join(g.labels).encode())
    h.update("\x1e".join(g.node_ids).encode())
    h.update(np.ascontiguousarray(g.label_probs).tobytes())
    h.update(np.ascontiguousarray(g.edge_u).tobytes())
    h.update(np.ascontiguousarray(g.edge_v).tobytes())
    if g.edge_p is not None:
        h.update(np.ascontiguousarray(g.edge_p).tobytes())
    if g.edge_cpt is not None:
        h.update(np.ascontiguousarray(g.edge_cpt).tobytes())
    h.update(np.ascontiguousarray(g.single_marginal).tobytes())
    return h.hexdigest()


@dataclass
class _Frontier:
    nodes: np.ndarray     # (n, l+1) int64
    labs: np.ndarray      # (n, l+1) int64
    pr_le: np.ndarray
    pr_n: np.ndarray

    def __len__(self):
        return len(self.pr_le)

    def take(self, idx) -> "_Frontier":
        return _Frontier(self.nodes[idx], self.labs[idx], self.pr_le[idx], self.pr_n[idx])

    @staticmethod
    def concat(parts: list["_Frontier"], width: int) -> "_Frontier":
        if not parts:
            e = np.zeros((0, width), dtype=np.int64)
            return _Frontier(e, e.copy(), np.zeros(0), np.zeros(0))
        return _Frontier(np.concatenate([p.nodes for p in parts]),
                         np.concatenate([p.labs for p in parts]),
                         np.concatenate([p.pr_le for p in parts]),
                         np.concatenate([p.pr_n for p in parts]))


def _label_states(g: EntityGraph):
    rows, cols = np.nonzero(g.label_probs > 0.0)
    ptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=g.n_nodes))]).astype(np.int64)
    return ptr, cols.astype(np.int64), g.label_probs[rows, cols]


def _ragged(starts: np.ndarray, lengths: np.ndarray):
    """For runs [start, start+len): return (owner row, flat position)."""
    owner = np.repeat(np.arange(len(lengths), dtype=np.int64), lengths)
    if not len(owner):
        return owner, owner.copy()
    first = np.cumsum(lengths) - lengths
    pos = starts[owner] + (np.arange(len(owner), dtype=np.int64) - first[owner])
    return owner, pos


def _level_zero(g: EntityGraph, beta: float) -> _Frontier:
    ptr, lab, lp = _label_states(g)
    node = np.repeat(np.arange(g.n_nodes, dtype=np.int64), np.diff(ptr))
    prn = g.single_marginal[node]
    keep = lp * prn >= beta - THRESHOLD_SLACK
    return _Frontier(node[keep, None], lab[keep, None], lp[keep], prn[keep])


def _extend(g: EntityGraph, fr: _Frontier, beta: float, states) -> _Frontier:
    ptr, lab_of, lp_of = states
    width = fr.nodes.shape[1]
    last = fr.nodes[:, -1]
    owner, pos = _ragged(g.adj_ptr[last], g.adj_ptr[last + 1] - g.adj_ptr[last])
    y = g.adj_dst[pos]
    eid = g.adj_eid[pos]
    ok = np.ones(len(y), dtype=bool)
    comp_y = g.comp_of[y]
    mask_y = g.ref_mask[y]
    shares = np.zeros(len(y), dtype=bool)
    for c in range(width):
        prev = fr.nodes[owner, c]
        same = g.comp_of[prev] == comp_y
        ok &= (prev != y) & ~(same & ((g.ref_mask[prev] & mask_y) != 0))
        shares |= same
    owner, y, eid, shares = owner[ok], y[ok], eid[ok], shares[ok]
    # cheap bound before expanding labels of y
    emax = g.edge_p[eid] if g.edge_cpt is None else g.edge_cpt[eid].max(axis=(1, 2))
    ub = fr.pr_le[owner] * emax * fr.pr_n[owner]
    ok = ub >= beta - THRESHOLD_SLACK
    owner, y, eid, shares = owner[ok], y[ok], eid[ok], shares[ok]

    o2, lpos = _ragged(ptr[y], ptr[y + 1] - ptr[y])
    b = lab_of[lpos]
    pl = lp_of[lpos]
    src_row = owner[o2]
    yy = y[o2]
    e2 = eid[o2]
    if g.edge_cpt is None:
        ef = g.edge_p[e2]
    else:
        a = fr.labs[src_row, -1]
        x = fr.nodes[src_row, -1]
        fwd = x < yy
        ef = np.where(fwd, g.edge_cpt[e2, a, b], g.edge_cpt[e2, b, a])
    prle = fr.pr_le[src_row] * ef * pl
    prn = fr.pr_n[src_row] * g.single_marginal[yy]
    sh = shares[o2]
    keep = prle * fr.pr_n[src_row] >= beta - THRESHOLD_SLACK
    nodes = np.concatenate([fr.nodes[src_row], yy[:, None]], axis=1)
    if sh.any():
        for k in np.flatnonzero(sh & keep):
            prn[k] = g.existence_marginal(tuple(int(v) for v in nodes[k]))
    keep &= prle * prn >= beta - THRESHOLD_SLACK
    labs = np.concatenate([fr.labs[src_row], b[:, None]], axis=1)
    return _Frontier(nodes[keep], labs[keep], prle[keep], prn[keep])


def _canonical_mask(fr: _Frontier) -> np.ndarray:
    width = fr.labs.shape[1]
    if width == 1:
        return np.ones(len(fr), dtype=bool)
    decided = np.zeros(len(fr), dtype=bool)
    canon = np.zeros(len(fr), dtype=bool)
    for i in range(width // 2):
        a, b = fr.labs[:, i], fr.labs[:, width - 1 - i]
        lt = ~decided & (a < b)
        gt = ~decided & (a > b)
        canon |= lt
        decided |= lt | gt
    # palindromic label sequence: keep the orientation with the smaller first node
    canon |= ~decided & (fr.nodes[:, 0] < fr.nodes[:, -1])
    return canon


def _work_units(fr: _Frontier, g: EntityGraph, budget: int) -> list[np.ndarray]:
    """Contiguous slices of the frontier (sorted by label sequence) of bounded fan-out."""
    if not len(fr):
        return []
    last = fr.nodes[:, -1]
    fan = (g.adj_ptr[last + 1] - g.adj_ptr[last]).astype(np.int64)
    cum = np.cumsum(fan)
    cuts = [0]
    base = 0
    while True:
        nxt = int(np.searchsorted(cum, base + budget, side="right"))
        nxt = max(nxt, cuts[-1] + 1)
        if nxt >= len(fr):
            break
        cuts.append(nxt)
        base = int(cum[nxt - 1])
    cuts.append(len(fr))
    return [np.arange(a, b) for a, b in zip(cuts, cuts[1:])]


def _seq_order(fr: _Frontier, n_labels: int) -> np.ndarray:
    code = np.zeros(len(fr), dtype=np.int64)
    for c in range(fr.labs.shape[1]):
        code = code * n_labels + fr.labs[:, c]
    return np.argsort(code, kind="stable")


def _seq_codes(seq: np.ndarray, n_labels: int) -> np.ndarray:
    code = np.zeros(len(seq), dtype=np.int64)
    for c in range(seq.shape[1]):
        code = code * n_labels + seq[:, c].astype(np.int64)
    return code


class _LevelWriter:
    """Collects the canonical records of one path length and lays them out as a segment.

    Records are spilled as they arrive (to a run file when a directory is
    given), then scattered into per-sequence blocks and sorted block by block,
    so peak memory is bounded by one block rather than by the level.
    """

    CHUNK = 1 << 20

    def __init__(self, idx: PathIndex, width: int, n_labels: int, directory: str | None):
        self.idx = idx
        self.width = width
        self.n_labels = n_labels
        self.dtype = record_dtype(width)
        self.counts: dict[int, int] = {}
        self.total = 0
        self.parts: list[np.ndarray] = []
        self.directory = directory
        self.run_path = os.path.join(directory, f"segment-{width - 1}.run") if directory else None
        self.run = open(self.run_path, "wb") if self.run_path else None

    def add(self, fr: _Frontier) -> None:
        if not len(fr):
            return
        rec = np.zeros(len(fr), dtype=self.dtype)
        rec["seq"] = fr.labs
        rec["bucket"] = self.idx.bucket_fixed(self.idx.bucket_of(fr.pr_le * fr.pr_n))
        rec["nodes"] = fr.nodes
        rec["pr_le"] = fr.pr_le
        rec["pr_n"] = fr.pr_n
        codes, cnt = np.unique(_seq_codes(fr.labs, self.n_labels), return_counts=True)
        for c, k in zip(codes.tolist(), cnt.tolist()):
            self.counts[c] = self.counts.get(c, 0) + k
        self.total += len(rec)
        if self.run is not None:
            rec.tofile(self.run)
        else:
            self.parts.append(rec)

    def _chunks(self):
        if self.run is None:
            yield from self.parts
            return
        self.run.close()
        with open(self.run_path, "rb") as fh:
            while True:
                part = np.fromfile(fh, dtype=self.dtype, count=self.CHUNK)
                if not len(part):
                    break
                yield part

    def finish(self) -> tuple[np.ndarray, dict[tuple[int, ...], tuple[int, int]]]:
        if self.directory:
            path = os.path.join(self.directory, f"segment-{self.width - 1}.bin")
            if self.total:
                seg = np.memmap(path, dtype=self.dtype, mode="w+", shape=(self.total,))
            else:
                open(path, "wb").close()
                seg = np.zeros(0, dtype=self.dtype)
        else:
            seg = np.zeros(self.total, dtype=self.dtype)
        order = sorted(self.counts)
        cursor = {}
        pos = 0
        spans = []
        for c in order:
            cursor[c] = pos
            spans.append((c, pos, pos + self.counts[c]))
            pos += self.counts[c]
        for part in self._chunks():
            codes = _seq_codes(part["seq"], self.n_labels)
            srt = np.argsort(codes, kind="stable")
            uc, first, cnt = np.unique(codes[srt], return_index=True, return_counts=True)
            base = np.array([cursor[c] for c in uc.tolist()], dtype=np.int64)
            dest = np.repeat(base - first, cnt) + np.arange(len(part))
            seg[dest] = part[srt]
            for c, k in zip(uc.tolist(), cnt.tolist()):
                cursor[c] += k
        if self.run_path:
            os.remove(self.run_path)
        table = {}
        for c, a, b in spans:
            blk = np.array(seg[a:b])
            keys = [blk["nodes"][:, k].astype(np.int64) for k in range(self.width - 1, -1, -1)]
            keys.append(blk["bucket"].astype(np.int64))
            blk = blk[np.lexsort(keys)]
            blk["ordinal"] = np.arange(len(blk))
            seg[a:b] = blk
            table[tuple(int(x) for x in blk["seq"][0])] = (a, b)
        if isinstance(seg, np.memmap):
            seg.flush()
        return seg, table


def build_path_index(g: EntityGraph, max_len: int, beta: float, gamma: float,
                     threads: int = 1, budget: int = EXPANSION_BUDGET,
                     directory: str | None = None) -> PathIndex:
    """Index every simple reference-disjoint path with <= max_len edges and Pr >= beta.

    With ``directory`` the segments are written there and memory-mapped.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    if not (0.0 < beta <= 1.0) or not (0.0 < gamma <= 1.0):
        raise ValueError("beta and gamma must lie in (0, 1]")
    if gamma * BUCKET_SCALE < 1.0:
        raise ValueError(f"gamma below the bucket resolution 1/{BUCKET_SCALE}")
    n_labels = len(g.labels)
    if n_labels > np.iinfo(np.uint16).max or n_labels ** (max_len + 1) >= 2 ** 62:
        raise ValueError("label alphabet too large for the segment key layout")
    if directory:
        os.makedirs(directory, exist_ok=True)
    states = _label_states(g)
    idx = PathIndex(max_len, beta, gamma, list(g.labels), {}, {}, graph_fingerprint(g), g, directory)
    frontier = _level_zero(g, beta)
    segments, table = {}, {}
    w0 = _LevelWriter(idx, 1, n_labels, directory)
    w0.add(frontier)
    segments[1], t = w0.finish()
    table.update(t)
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for level in range(1, max_len + 1):
            frontier = frontier.take(_seq_order(frontier, n_labels))
            units = _work_units(frontier, g, budget)
            final = level == max_len
            writer = _LevelWriter(idx, level + 1, n_labels, directory)
            nxt: list[_Frontier] = []

            def work(rows, frontier=frontier, final=final):
                ext = _extend(g, frontier.take(rows), beta, states)
                canon = ext.take(_canonical_mask(ext))
                return canon, (None if final else ext)

            step = max(1, 2 * threads)
            for k in range(0, len(units), step):
                batch = units[k:k + step]
                results = list(pool.map(work, batch)) if pool else [work(u) for u in batch]
                for canon, ext in results:
                    writer.add(canon)
                    if ext is not None:
                        nxt.append(ext)
                del results
            # barrier: every path of this length exists before the next level starts
            segments[level + 1], t = writer.finish()
            table.update(t)
            log.info("length %d: %d canonical records", level, writer.total)
            if not final:
                frontier = _Frontier.concat(nxt, level + 1)
            del nxt
    finally:
        if pool:
            pool.shutdown()
    return PathIndex(max_len, beta, gamma, list(g.labels), segments, table,
                     idx.fingerprint, g, directory)


def lookup_arrays(idx: PathIndex, seq: Sequence[str | int], alpha: float):
    """Like :func:`index_lookup` but returns (nodes (n, l+1), pr_le, pr_n) arrays."""
    ids = idx.label_ids(seq)
    width = len(seq)
    empty = (np.zeros((0, width), dtype=np.int64), np.zeros(0), np.zeros(0))
    if ids is None:
        return empty
    if len(ids) - 1 > idx.max_len:
        raise ValueError(f"label sequence of length {len(ids) - 1} exceeds indexed maximum {idx.max_len}")
    if alpha < idx.beta - THRESHOLD_SLACK:
        if idx.graph is None:
            raise ValueError("alpha below beta needs the entity graph for on-demand traversal")
        recs = on_demand_paths(idx.graph, ids, alpha)
        if not recs:
            return empty
        return (np.array([r.nodes for r in recs], dtype=np.int64).reshape(len(recs), width),
                np.array([r.pr_le for r in recs]), np.array([r.pr_n for r in recs]))
    key, reversed_ = canonical_sequence(ids)
    blk = idx.blocks.get(key)
    if blk is None:
        return empty
    start = int(np.searchsorted(blk.bucket, int(idx.bucket_fixed(idx.bucket_of(alpha))), side="left"))
    rec = blk.rec[start:]
    le = rec["pr_le"].astype(np.float64)
    pn = rec["pr_n"].astype(np.float64)
    sel = np.flatnonzero(le * pn >= alpha - THRESHOLD_SLACK)
    nodes = rec["nodes"][sel].astype(np.int64)
    le, pn = le[sel], pn[sel]
    if reversed_:
        nodes = nodes[:, ::-1]
    if len(ids) > 1 and key == key[::-1]:
        nodes = np.concatenate([nodes, nodes[:, ::-1]])
        le = np.concatenate([le, le])
        pn = np.concatenate([pn, pn])
    return np.ascontiguousarray(nodes), le, pn


def index_lookup(idx: PathIndex, seq: Sequence[str | int], alpha: float) -> list[PathRecord]:
    """Records matching ``seq`` (in query orientation) with probability >= alpha."""
    nodes, le, pn = lookup_arrays(idx, seq, alpha)
    return [PathRecord(tuple(row), a, b) for row, a, b in zip(nodes.tolist(), le.tolist(), pn.tolist())]


def on_demand_paths(g: EntityGraph, seq: Sequence[str | int], alpha: float) -> list[PathRecord]:
    """Direct traversal for label sequences/thresholds the index does not cover."""
    ids = []
    for x in seq:
        if isinstance(x, str):
            if x not in g.label_index:
                return []
            ids.append(g.label_index[x])
        else:
            ids.append(int(x))
    out: list[PathRecord] = []
    if not ids:
        return out
    path: list[int] = []

    def rec(pr_le: float, pr_n: float):
        if len(path) == len(ids):
            out.append(PathRecord(tuple(path), pr_le, pr_n))
            return
        k = len(path)
        lab = ids[k]
        x = path[-1]
        for y in g.neighbors(x).tolist():
            lp = g.label_probs[y, lab]
            if lp <= 0.0 or any(not g.disjoint(y, p) for p in path):
                continue
            le = pr_le * g.edge_prob(x, y, ids[k - 1], lab) * lp
            if not at_least(le * pr_n, alpha):
                continue
            path.append(y)
            pn = g.existence_marginal(path)
            if at_least(le * pn, alpha):
                rec(le, pn)
            path.pop()

    for v in g.nodes_by_label[ids[0]].tolist():
        lp = float(g.label_probs[v, ids[0]])
        pn = float(g.single_marginal[v])
        if at_least(lp * pn, alpha):
            path.append(v)
            rec(lp, pn)
            path.pop()
    return out


# --------------------------------------------------------------------------
# histograms


@dataclass
class Histogram:
    points: np.ndarray
    counts: dict[tuple[int, ...], np.ndarray]
    labels: list[str]

    def row(self, seq: Sequence[str | int]) -> np.ndarray | None:
        ids = []
        for x in seq:
            if isinstance(x, str):
                if x not in self.labels:
                    return None
                ids.append(self.labels.index(x))
            else:
                ids.append(int(x))
        key, _ = canonical_sequence(ids)
        return self.counts.get(key)

    def estimate(self, seq, alpha: float) -> float:
        return estimate_count(self, seq, alpha)


def build_histograms(idx: PathIndex, points: Sequence[float] = DEFAULT_POINTS) -> Histogram:
    pts = np.asarray(sorted(points), dtype=np.float64)
    if not len(pts) or abs(pts[-1] - 1.0) > 1e-12:
        raise ValueError("histogram points must end at 1")
    counts = {}
    for key, blk in idx.blocks.items():
        prob = np.sort(blk.probability)
        c = len(prob) - np.searchsorted(prob, pts - THRESHOLD_SLACK, side="left")
        if len(key) > 1 and key == key[::-1]:
            c = 2 * c
        counts[key] = c.astype(np.int64)
    return Histogram(pts, counts, list(idx.labels))


def estimate_count(h: Histogram, seq, alpha: float) -> float:
    """Exponential interpolation A*exp(-B*alpha) between bracketing histogram points."""
    row = h.row(seq)
    if row is None:
        return 0.0
    pts = h.points
    hit = np.flatnonzero(np.abs(pts - alpha) <= 1e-12)
    if len(hit):
        return float(row[hit[0]])
    if len(pts) == 1:
        return float(row[0])
    i = int(np.searchsorted(pts, alpha)) - 1
    i = min(max(i, 0), len(pts) - 2)
    a1, a2 = pts[i], pts[i + 1]
    c1, c2 = float(row[i]), float(row[i + 1])
    t = (alpha - a1) / (a2 - a1)
    if c1 > 0.0 and c2 > 0.0:
        return c1 * (c2 / c1) ** t
    return max(0.0, c1 + (c2 - c1) * t)
