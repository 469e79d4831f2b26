import json
import os
import random

import numpy as np
import pytest

from pegquery.datagen import GenParams, generate_pgd, generate_query
from pegquery.fixtures import merge_example_pgd
from pegquery.model import Match, build_entity_graph
from pegquery.pathindex import lookup_arrays
from pegquery.query import run_query
from pegquery.storage import (MalformedDocumentError, MissingArtifactError, StorageError, build_artifacts,
                              load_graph, load_pgd, load_results, open_artifacts, pgd_fingerprint,
                              read_manifest, save_graph, save_pgd, save_results)


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    pgd = generate_pgd(GenParams(n_refs=400, seed=13, correlated=True, n_labels=4))
    d = str(tmp_path_factory.mktemp("art"))
    return pgd, d, build_artifacts(pgd, d, 3, 0.1, 0.1)


def graph_arrays(g):
    return {k: v for k, v in vars(g).items() if isinstance(v, np.ndarray)}


def test_pgd_round_trip(tmp_path):
    pgd = generate_pgd(GenParams(n_refs=60, seed=1, correlated=True))
    p = str(tmp_path / "pgd.json")
    save_pgd(pgd, p)
    assert load_pgd(p) == pgd
    assert pgd_fingerprint(load_pgd(p)) == pgd_fingerprint(pgd)


def test_artifacts_round_trip(built):
    pgd, d, a = built
    b = open_artifacts(d)
    ga, gb = graph_arrays(a.graph), graph_arrays(b.graph)
    assert ga.keys() == gb.keys()
    for k in ga:
        assert np.array_equal(ga[k], gb[k]), k
    assert a.graph.node_ids == b.graph.node_ids and a.graph.node_refs == b.graph.node_refs
    assert [c.table for c in a.graph.components] == [c.table for c in b.graph.components]
    for f in ("count", "ppu", "fpu"):
        assert np.array_equal(getattr(a.context, f), getattr(b.context, f))
    assert a.index.table == b.index.table
    for w in a.index.segments:
        assert np.asarray(a.index.segments[w]).tobytes() == np.asarray(b.index.segments[w]).tobytes()
    assert np.array_equal(a.histogram.points, b.histogram.points)
    assert a.histogram.counts.keys() == b.histogram.counts.keys()
    assert all(np.array_equal(a.histogram.counts[k], b.histogram.counts[k]) for k in a.histogram.counts)


def test_random_lookups_survive_reopen(built):
    _, d, a = built
    b = open_artifacts(d, mmap=False)
    rng = random.Random(0)
    keys = sorted(a.index.table)
    for _ in range(100):
        key = list(rng.choice(keys))
        if rng.random() < 0.5:
            key = key[::-1]
        alpha = rng.choice([0.05, 0.1, 0.3, 0.5, 0.9])
        for x, y in zip(lookup_arrays(a.index, key, alpha), lookup_arrays(b.index, key, alpha)):
            assert np.array_equal(x, y)


def test_queries_identical_after_reopen(built):
    _, d, a = built
    b = open_artifacts(d)
    for s in range(3):
        q = generate_query(4, 4, a.graph.labels, s, 0.3)
        ra = run_query(a.graph, a.index, a.context, a.histogram, q).matches
        rb = run_query(b.graph, b.index, b.context, b.histogram, q).matches
        assert ra == rb


def test_rebuild_manifests_identical_except_timestamp(tmp_path):
    pgd = merge_example_pgd()
    mans = []
    for name in ("a", "b"):
        d = str(tmp_path / name)
        build_artifacts(pgd, d, 2)
        for sub in ("graph", "context", "index", "histogram"):
            m = json.load(open(os.path.join(d, sub, "manifest.json")))
            m.pop("created")
            mans.append((sub, m))
    assert mans[:4] == mans[4:]
    for sub in ("blocks.json", "nodes.bin", "segment-1.bin"):
        assert open(tmp_path / "a" / "index" / sub, "rb").read() == open(tmp_path / "b" / "index" / sub, "rb").read()


def test_truncated_segment_detected(tmp_path):
    d = str(tmp_path)
    build_artifacts(generate_pgd(GenParams(n_refs=100, seed=3)), d, 2)
    seg = os.path.join(d, "index", "segment-2.bin")
    size = os.path.getsize(seg)
    with open(seg, "r+b") as fh:
        fh.truncate(size - 7)
    with pytest.raises(StorageError, match="truncated"):
        open_artifacts(d)


def test_corrupt_manifest_detected(tmp_path):
    d = str(tmp_path)
    build_artifacts(merge_example_pgd(), d, 1)
    with open(os.path.join(d, "context", "manifest.json"), "w") as fh:
        fh.write("{not json")
    with pytest.raises(StorageError):
        open_artifacts(d)


def test_manifest_kind_and_version_checked(tmp_path):
    d = str(tmp_path)
    build_artifacts(merge_example_pgd(), d, 1)
    with pytest.raises(StorageError, match="expected"):
        read_manifest(os.path.join(d, "graph"), "path-index")
    p = os.path.join(d, "histogram", "manifest.json")
    m = json.load(open(p))
    m["format_version"] = 99
    json.dump(m, open(p, "w"))
    with pytest.raises(StorageError, match="format version"):
        open_artifacts(d)


def test_mixed_artifacts_rejected(tmp_path):
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    build_artifacts(merge_example_pgd(), a, 1)
    build_artifacts(generate_pgd(GenParams(n_refs=30, seed=1)), b, 1)
    os.rename(os.path.join(a, "index"), os.path.join(a, "old"))
    os.rename(os.path.join(b, "index"), os.path.join(a, "index"))
    with pytest.raises(StorageError, match="fingerprint|different"):
        open_artifacts(a)


def test_missing_pieces(tmp_path):
    with pytest.raises(MissingArtifactError):
        open_artifacts(str(tmp_path / "none"))
    with pytest.raises(MissingArtifactError):
        load_pgd(str(tmp_path / "none.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2")
    with pytest.raises(MalformedDocumentError):
        load_pgd(str(bad))


def test_graph_snapshot_alone(tmp_path):
    g = build_entity_graph(merge_example_pgd())
    save_graph(g, str(tmp_path), "fp")
    h = load_graph(str(tmp_path), "fp")
    assert h.node_ids == g.node_ids
    assert h.existence_marginal([h.node_index["s3"], h.node_index["s4"]]) == pytest.approx(0.2)
    with pytest.raises(StorageError):
        load_graph(str(tmp_path), "other")


@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_results_round_trip(tmp_path, fmt):
    ms = [Match({"A": "x,1", "B": "y"}, 0.5, 0.2), Match({"A": "z", "B": "w"}, 1.0 / 3.0, 0.7)]
    p = str(tmp_path / f"r.{fmt}")
    save_results(ms, p, fmt, ["A", "B"])
    back = load_results(p)
    assert [(m.mapping, m.pr_le, m.pr_n) for m in back] == [(m.mapping, m.pr_le, m.pr_n) for m in ms]
