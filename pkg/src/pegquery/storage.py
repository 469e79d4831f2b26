"""Persistence for PGDs, entity-graph snapshots, context tables, path indexes,
histograms and query results.

Every artifact lives in its own directory next to a ``manifest.json`` that
records the artifact kind, the format version, the build parameters and the
SHA-256 digest of the source PGD document.  Loads refuse manifests whose
kind, version or fingerprint do not match, and files whose size does not
match the manifest.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import shutil
import struct
import time
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .model import PGD, EntityGraph, IdentityComponent, Match, build_entity_graph
from .pathindex import (ContextTable, Histogram, PathIndex, build_histograms, build_path_index,
                        compute_context, graph_fingerprint, record_dtype)

FORMAT_VERSION = 1


class StorageError(RuntimeError):
    pass


class MissingArtifactError(StorageError):
    """A file or directory that should exist does not."""


class MalformedDocumentError(StorageError):
    """A user-supplied document (PGD, results) cannot be parsed."""


# --------------------------------------------------------------------------
# helpers


def _dump_json(obj, path: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True, ensure_ascii=False, allow_nan=False)
        fh.write("\n")
    os.replace(tmp, path)


def _load_json(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise MissingArtifactError(f"missing file {path}") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise StorageError(f"corrupted JSON in {path}: {exc}") from None


def pgd_fingerprint(pgd: PGD) -> str:
    doc = json.dumps(pgd.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(doc.encode("utf-8")).hexdigest()


def write_manifest(directory: str, kind: str, fingerprint: str, params: dict, counts: dict) -> dict:
    man = {"kind": kind, "format_version": FORMAT_VERSION, "source_fingerprint": fingerprint,
           "params": params, "counts": counts, "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())}
    os.makedirs(directory, exist_ok=True)
    _dump_json(man, os.path.join(directory, "manifest.json"))
    return man


def read_manifest(directory: str, kind: str, fingerprint: str | None = None) -> dict:
    man = _load_json(os.path.join(directory, "manifest.json"))
    if not isinstance(man, dict):
        raise StorageError(f"corrupted manifest in {directory}")
    for key in ("kind", "format_version", "source_fingerprint", "params", "counts"):
        if key not in man:
            raise StorageError(f"manifest in {directory} lacks {key!r}")
    if man["kind"] != kind:
        raise StorageError(f"{directory} holds a {man['kind']!r} artifact, expected {kind!r}")
    if man["format_version"] != FORMAT_VERSION:
        raise StorageError(f"{directory} has format version {man['format_version']}, expected {FORMAT_VERSION}")
    if fingerprint is not None and man["source_fingerprint"] != fingerprint:
        raise StorageError(f"{directory} was built from a different PGD (fingerprint mismatch)")
    return man


def _save_npy(path: str, arr: np.ndarray) -> None:
    np.save(path, np.ascontiguousarray(arr), allow_pickle=False)


def _load_npy(path: str, mmap: bool = False) -> np.ndarray:
    try:
        return np.load(path, allow_pickle=False, mmap_mode="r" if mmap else None)
    except FileNotFoundError:
        raise MissingArtifactError(f"missing file {path}") from None
    except (ValueError, OSError, EOFError) as exc:
        raise StorageError(f"unreadable or truncated array {path}: {exc}") from None


# --------------------------------------------------------------------------
# PGD


def save_pgd(pgd: PGD, path: str) -> None:
    _dump_json(pgd.to_dict(), path)


def load_pgd(path: str) -> PGD:
    try:
        doc = _load_json(path)
    except MissingArtifactError:
        raise
    except StorageError as exc:
        raise MalformedDocumentError(str(exc)) from None
    try:
        return PGD.from_dict(doc)
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise MalformedDocumentError(f"malformed PGD document {path}: {exc}") from None


# --------------------------------------------------------------------------
# entity graph


def save_graph(g: EntityGraph, directory: str, fingerprint: str) -> None:
    os.makedirs(directory, exist_ok=True)
    _save_npy(os.path.join(directory, "label_probs.npy"), g.label_probs)
    _save_npy(os.path.join(directory, "edge_u.npy"), g.edge_u)
    _save_npy(os.path.join(directory, "edge_v.npy"), g.edge_v)
    if g.edge_cpt is not None:
        _save_npy(os.path.join(directory, "edge_cpt.npy"), g.edge_cpt)
    else:
        _save_npy(os.path.join(directory, "edge_p.npy"), g.edge_p)
    _save_npy(os.path.join(directory, "comp_of.npy"), g.comp_of)
    _save_npy(os.path.join(directory, "node_weights.npy"), np.asarray(g.node_weights, dtype=np.float64))
    comps = []
    for c in g.components:
        if len(c.nodes) == 1:
            continue
        items = sorted(c.table.items(), key=lambda kv: sorted(kv[0]))
        comps.append({"nodes": list(c.nodes), "normalizer": c.normalizer,
                      "configs": [sorted(cfg) for cfg, _ in items], "probs": [p for _, p in items]})
    _dump_json({"labels": g.labels, "node_ids": g.node_ids,
                "node_refs": [sorted(r) for r in g.node_refs], "components": comps},
               os.path.join(directory, "graph.json"))
    write_manifest(directory, "entity-graph", fingerprint, {"correlated": g.correlated},
                   {"nodes": g.n_nodes, "edges": g.n_edges, "components": len(g.components),
                    "graph_fingerprint": graph_fingerprint(g)})


def load_graph(directory: str, fingerprint: str | None = None) -> EntityGraph:
    man = read_manifest(directory, "entity-graph", fingerprint)
    meta = _load_json(os.path.join(directory, "graph.json"))
    label_probs = _load_npy(os.path.join(directory, "label_probs.npy"))
    comp_of = _load_npy(os.path.join(directory, "comp_of.npy"))
    weights = _load_npy(os.path.join(directory, "node_weights.npy"))
    correlated = man["params"].get("correlated", False)
    edge_p = None if correlated else _load_npy(os.path.join(directory, "edge_p.npy"))
    edge_cpt = _load_npy(os.path.join(directory, "edge_cpt.npy")) if correlated else None
    try:
        n = len(meta["node_ids"])
        multi = {tuple(c["nodes"]): c for c in meta["components"]}
        n_comp = int(comp_of.max()) + 1 if n else 0
        members: list[list[int]] = [[] for _ in range(n_comp)]
        for i, c in enumerate(comp_of.tolist()):
            members[c].append(i)
        components = []
        for nodes in members:
            key = tuple(nodes)
            if key in multi:
                c = multi[key]
                table = {frozenset(cfg): p for cfg, p in zip(c["configs"], c["probs"])}
                components.append(IdentityComponent(key, table, c["normalizer"]))
            elif len(nodes) == 1:
                components.append(IdentityComponent(key, {frozenset(nodes): 1.0}, float(weights[nodes[0], 0])))
            else:
                raise StorageError(f"component {key} missing from snapshot")
        g = EntityGraph(
            labels=list(meta["labels"]), node_ids=list(meta["node_ids"]),
            node_refs=[frozenset(r) for r in meta["node_refs"]], label_probs=label_probs,
            edge_u=_load_npy(os.path.join(directory, "edge_u.npy")),
            edge_v=_load_npy(os.path.join(directory, "edge_v.npy")),
            edge_p=edge_p, edge_cpt=edge_cpt, components=components, comp_of=comp_of,
            node_weights=[tuple(w) for w in weights.tolist()])
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise StorageError(f"malformed entity-graph snapshot in {directory}: {exc}") from None
    if (g.n_nodes, g.n_edges) != (man["counts"]["nodes"], man["counts"]["edges"]):
        raise StorageError(f"entity-graph snapshot in {directory} does not match its manifest")
    return g


# --------------------------------------------------------------------------
# context table


def save_context(ctx: ContextTable, directory: str, fingerprint: str) -> None:
    os.makedirs(directory, exist_ok=True)
    _save_npy(os.path.join(directory, "count.npy"), ctx.count)
    _save_npy(os.path.join(directory, "ppu.npy"), ctx.ppu)
    _save_npy(os.path.join(directory, "fpu.npy"), ctx.fpu)
    write_manifest(directory, "context", fingerprint, {"labels": ctx.labels},
                   {"nodes": int(ctx.count.shape[0])})


def load_context(directory: str, fingerprint: str | None = None) -> ContextTable:
    man = read_manifest(directory, "context", fingerprint)
    arrs = [_load_npy(os.path.join(directory, f"{k}.npy")) for k in ("count", "ppu", "fpu")]
    n = man["counts"]["nodes"]
    if any(a.shape != (n, len(man["params"]["labels"])) for a in arrs):
        raise StorageError(f"context arrays in {directory} do not match the manifest")
    return ContextTable(list(man["params"]["labels"]), *arrs)


# --------------------------------------------------------------------------
# path index


def _write_id_table(ids: list[str], path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", len(ids)))
        for s in ids:
            b = s.encode("utf-8")
            fh.write(struct.pack("<I", len(b)))
            fh.write(b)


def _read_id_table(path: str) -> list[str]:
    try:
        data = open(path, "rb").read()
    except FileNotFoundError:
        raise MissingArtifactError(f"missing file {path}") from None
    try:
        (n,) = struct.unpack_from("<I", data, 0)
        pos = 4
        out = []
        for _ in range(n):
            (k,) = struct.unpack_from("<I", data, pos)
            pos += 4
            if pos + k > len(data):
                raise StorageError(f"truncated id table {path}")
            out.append(data[pos:pos + k].decode("utf-8"))
            pos += k
    except struct.error:
        raise StorageError(f"truncated id table {path}") from None
    if pos != len(data):
        raise StorageError(f"trailing bytes in id table {path}")
    return out


def save_index(idx: PathIndex, directory: str, fingerprint: str, node_ids: list[str]) -> None:
    os.makedirs(directory, exist_ok=True)
    same_dir = idx.directory and os.path.realpath(idx.directory) == os.path.realpath(directory)
    sizes = {}
    for width, seg in sorted(idx.segments.items()):
        path = os.path.join(directory, f"segment-{width - 1}.bin")
        if isinstance(seg, np.memmap):
            seg.flush()
        if not same_dir:
            with open(path, "wb") as fh:
                for a in range(0, len(seg), 1 << 20):
                    np.ascontiguousarray(seg[a:a + (1 << 20)]).tofile(fh)
        sizes[str(width - 1)] = len(seg)
    _write_id_table(node_ids, os.path.join(directory, "nodes.bin"))
    table = [[list(k), a, b] for k, (a, b) in sorted(idx.table.items())]
    _dump_json({"blocks": table}, os.path.join(directory, "blocks.json"))
    write_manifest(directory, "path-index", fingerprint,
                   {"L": idx.max_len, "beta": idx.beta, "gamma": idx.gamma, "labels": idx.labels},
                   {"records": sizes, "total_records": idx.record_count(), "blocks": len(idx.table),
                    "graph_fingerprint": idx.fingerprint})


def load_index(directory: str, fingerprint: str | None = None,
               graph: EntityGraph | None = None, mmap: bool = True) -> PathIndex:
    man = read_manifest(directory, "path-index", fingerprint)
    p = man["params"]
    if graph is not None and man["counts"]["graph_fingerprint"] != graph_fingerprint(graph):
        raise StorageError(f"index in {directory} was built over a different entity graph")
    node_ids = _read_id_table(os.path.join(directory, "nodes.bin"))
    if graph is not None and node_ids != graph.node_ids:
        raise StorageError(f"index node table in {directory} does not match the entity graph")
    segments = {}
    for lvl, count in man["counts"]["records"].items():
        width = int(lvl) + 1
        dt = record_dtype(width)
        path = os.path.join(directory, f"segment-{lvl}.bin")
        if not os.path.exists(path):
            raise MissingArtifactError(f"missing file {path}")
        size = os.path.getsize(path)
        if size != count * dt.itemsize:
            raise StorageError(f"segment {path} has {size} bytes, expected {count * dt.itemsize} (truncated?)")
        if count == 0:
            segments[width] = np.zeros(0, dtype=dt)
        elif mmap:
            segments[width] = np.memmap(path, dtype=dt, mode="r", shape=(count,))
        else:
            segments[width] = np.fromfile(path, dtype=dt, count=count)
    blocks = _load_json(os.path.join(directory, "blocks.json"))
    try:
        table = {tuple(int(x) for x in k): (int(a), int(b)) for k, a, b in blocks["blocks"]}
    except (KeyError, TypeError, ValueError) as exc:
        raise StorageError(f"malformed block table in {directory}: {exc}") from None
    for key, (a, b) in table.items():
        seg = segments.get(len(key))
        if seg is None or not (0 <= a <= b <= len(seg)):
            raise StorageError(f"block table in {directory} points outside its segment")
    return PathIndex(int(p["L"]), float(p["beta"]), float(p["gamma"]), list(p["labels"]),
                     segments, table, man["counts"]["graph_fingerprint"], graph, directory)


# --------------------------------------------------------------------------
# histogram


def save_histogram(h: Histogram, directory: str, fingerprint: str) -> None:
    os.makedirs(directory, exist_ok=True)
    rows = [[list(k), v.tolist()] for k, v in sorted(h.counts.items())]
    _dump_json({"points": h.points.tolist(), "labels": h.labels, "rows": rows},
               os.path.join(directory, "histogram.json"))
    write_manifest(directory, "histogram", fingerprint, {"points": h.points.tolist()},
                   {"sequences": len(rows)})


def load_histogram(directory: str, fingerprint: str | None = None) -> Histogram:
    read_manifest(directory, "histogram", fingerprint)
    doc = _load_json(os.path.join(directory, "histogram.json"))
    try:
        counts = {tuple(k): np.asarray(v, dtype=np.int64) for k, v in doc["rows"]}
        return Histogram(np.asarray(doc["points"], dtype=np.float64), counts, list(doc["labels"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise StorageError(f"malformed histogram in {directory}: {exc}") from None


# --------------------------------------------------------------------------
# results


def matches_to_json(matches: Iterable[Match]) -> str:
    return json.dumps([m.to_dict() for m in matches], indent=1, ensure_ascii=False) + "\n"


def matches_to_csv(matches: Iterable[Match], query_nodes: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(query_nodes) + ["pr_le", "pr_n", "probability"])
    for m in matches:
        w.writerow([m.mapping[n] for n in query_nodes] + [repr(float(m.pr_le)), repr(float(m.pr_n)), repr(float(m.probability))])
    return buf.getvalue()


def save_results(matches: list[Match], path: str, fmt: str = "json", query_nodes: list[str] | None = None) -> None:
    if fmt == "json":
        text = matches_to_json(matches)
    elif fmt == "csv":
        nodes = query_nodes or (list(matches[0].mapping) if matches else [])
        text = matches_to_csv(matches, nodes)
    else:
        raise ValueError(f"unknown result format {fmt!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def load_results(path: str) -> list[Match]:
    """Read results written in either format (detected from the content)."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("["):
        try:
            return [Match(dict(d["mapping"]), float(d["pr_le"]), float(d["pr_n"])) for d in json.loads(text)]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise MalformedDocumentError(f"malformed result file {path}: {exc}") from None
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        return []
    head = rows[0]
    nodes = head[:-3]
    return [Match(dict(zip(nodes, r[:-3])), float(r[-3]), float(r[-2])) for r in rows[1:]]


# --------------------------------------------------------------------------
# the artifact directory


@dataclass
class Artifacts:
    fingerprint: str
    graph: EntityGraph
    context: ContextTable
    index: PathIndex
    histogram: Histogram
    directory: str | None = None


def build_artifacts(pgd: PGD, directory: str, max_len: int = 3, beta: float = 0.1,
                    gamma: float = 0.1, threads: int = 1, points=None) -> Artifacts:
    """Build and persist graph, context, index and histogram under ``directory``."""
    fp = pgd_fingerprint(pgd)
    g = build_entity_graph(pgd)
    os.makedirs(directory, exist_ok=True)
    idx_dir = os.path.join(directory, "index")
    if os.path.isdir(idx_dir):
        shutil.rmtree(idx_dir)
    save_graph(g, os.path.join(directory, "graph"), fp)
    ctx = compute_context(g)
    save_context(ctx, os.path.join(directory, "context"), fp)
    idx = build_path_index(g, max_len, beta, gamma, threads=threads, directory=idx_dir)
    save_index(idx, idx_dir, fp, g.node_ids)
    h = build_histograms(idx) if points is None else build_histograms(idx, points)
    save_histogram(h, os.path.join(directory, "histogram"), fp)
    return Artifacts(fp, g, ctx, idx, h, directory)


def open_artifacts(directory: str, mmap: bool = True) -> Artifacts:
    if not os.path.isdir(directory):
        raise MissingArtifactError(f"artifact directory {directory} does not exist")
    man = read_manifest(os.path.join(directory, "graph"), "entity-graph")
    fp = man["source_fingerprint"]
    g = load_graph(os.path.join(directory, "graph"), fp)
    ctx = load_context(os.path.join(directory, "context"), fp)
    idx = load_index(os.path.join(directory, "index"), fp, g, mmap=mmap)
    h = load_histogram(os.path.join(directory, "histogram"), fp)
    if ctx.count.shape[0] != g.n_nodes or ctx.labels != g.labels:
        raise StorageError("context table does not match the entity graph")
    return Artifacts(fp, g, ctx, idx, h, directory)
