"""Command-line interface: ``pegq generate | build | query | oracle | bench | stats``."""
from __future__ import annotations

import csv
import functools
import json
import os
import sys
import tempfile
import time

import click

from .datagen import GenParams, generate_pgd, generate_query
from .model import PGDError
from .query.engine import run_query, sort_matches
from .query.graph import QueryError, QueryGraph
from .storage import (MalformedDocumentError, MissingArtifactError, StorageError, build_artifacts,
                      load_pgd, open_artifacts, read_manifest, save_pgd, save_results)
from .worlds import EnumerationTooLarge, oracle_subgraph_match

ENV_ARTIFACTS = "PEGQ_ARTIFACTS"
ENV_OUTPUT = "PEGQ_OUTPUT"

# exit status per failure class
EXIT = {"missing-file": 3, "invalid-input": 4, "incompatible-artifacts": 5, "enumeration": 6,
        "invalid-parameter": 7}


class CliFailure(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


def _fail(kind: str, message: str):
    raise CliFailure(kind, message)


def guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except CliFailure as exc:
            kind, msg = exc.kind, str(exc)
        except FileNotFoundError as exc:
            kind, msg = "missing-file", f"{exc.filename or exc}"
        except MissingArtifactError as exc:
            kind, msg = "missing-file", str(exc)
        except MalformedDocumentError as exc:
            kind, msg = "invalid-input", str(exc)
        except StorageError as exc:
            kind, msg = "incompatible-artifacts", str(exc)
        except (PGDError, QueryError) as exc:
            kind, msg = "invalid-input", str(exc)
        except EnumerationTooLarge as exc:
            kind, msg = "enumeration", str(exc)
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            kind, msg = "invalid-input", f"{type(exc).__name__}: {exc}"
        except ValueError as exc:
            kind, msg = "invalid-parameter", str(exc)
        msg = " ".join(msg.split())
        click.echo(f"error: {kind}: {msg}", err=True)
        sys.exit(EXIT[kind])
    return wrapper


def _check_params(L=None, beta=None, gamma=None, alpha=None, threads=None):
    if L is not None and L < 1:
        _fail("invalid-parameter", f"--max-path-length must be >= 1 (got {L})")
    for name, v in (("beta", beta), ("gamma", gamma), ("alpha", alpha)):
        if v is not None and not 0.0 < v <= 1.0:
            _fail("invalid-parameter", f"--{name} must lie in (0, 1] (got {v})")
    if threads is not None and threads < 1:
        _fail("invalid-parameter", f"--threads must be >= 1 (got {threads})")


def _read_query(path: str) -> QueryGraph:
    if not os.path.exists(path):
        raise FileNotFoundError(2, "no such query file", path)
    with open(path, "r", encoding="utf-8") as fh:
        return QueryGraph.from_dict(json.load(fh))


def _emit(matches, out: str | None, fmt: str, nodes: list[str]):
    if out:
        save_results(matches, out, fmt, nodes)
    else:
        fd, tmp = tempfile.mkstemp(suffix="." + fmt)
        os.close(fd)
        save_results(matches, tmp, fmt, nodes)
        with open(tmp, encoding="utf-8") as fh:
            click.echo(fh.read(), nl=False)
        os.remove(tmp)


threads_opt = click.option("--threads", type=int, default=lambda: os.cpu_count() or 1, show_default="cores",
                           help="Worker threads for index build and joint reduction.")
fmt_opt = click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True)
artifacts_opt = click.option("--artifacts", "-a", envvar=ENV_ARTIFACTS, default="artifacts", show_default=True,
                             type=click.Path(file_okay=False), help=f"Artifact directory (env {ENV_ARTIFACTS}).")


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Threshold subgraph queries over probabilistic entity graphs."""


@main.command()
@click.option("--refs", "n_refs", type=int, default=1000, show_default=True)
@click.option("--edges", "n_edges", type=int, default=None, help="Default 5 x refs.")
@click.option("--labels", "n_labels", type=int, default=10, show_default=True)
@click.option("--uncertain", "uncertain_fraction", type=float, default=0.2, show_default=True)
@click.option("--groups", "k", type=int, default=None, help="Default refs // 50.")
@click.option("--group-size", "s", type=int, default=4, show_default=True)
@click.option("--pairs", "r", type=int, default=2, show_default=True)
@click.option("--correlated", is_flag=True, help="Label-conditioned edge CPTs.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "-o", envvar=ENV_OUTPUT, default="pgd.json", show_default=True)
@guarded
def generate(n_refs, n_edges, n_labels, uncertain_fraction, k, s, r, correlated, seed, out):
    """Write a synthetic PGD document."""
    params = GenParams(n_refs, n_edges, n_labels, uncertain_fraction, k, s, r, seed, correlated)
    pgd = generate_pgd(params)
    save_pgd(pgd, out)
    click.echo(f"wrote {out}: {len(pgd.references)} references, {len(pgd.edges)} edges, {len(pgd.sets)} sets")


@main.command()
@click.argument("pgd_path", type=click.Path())
@artifacts_opt
@click.option("--max-path-length", "-L", "L", type=int, default=3, show_default=True)
@click.option("--beta", type=float, default=0.1, show_default=True)
@click.option("--gamma", type=float, default=0.1, show_default=True)
@threads_opt
@click.option("--seed", type=int, default=0, help="Accepted for symmetry; the build is deterministic.")
@guarded
def build(pgd_path, artifacts, L, beta, gamma, threads, seed):
    """Build entity graph, context table, path index and histograms."""
    _check_params(L=L, beta=beta, gamma=gamma, threads=threads)
    pgd = load_pgd(pgd_path)
    t = time.perf_counter()
    art = build_artifacts(pgd, artifacts, L, beta, gamma, threads)
    click.echo(f"built {artifacts}: {art.graph.n_nodes} entities, {art.graph.n_edges} edges, "
               f"{art.index.record_count()} index records in {time.perf_counter() - t:.1f}s")


@main.command()
@click.argument("query_path", type=click.Path())
@artifacts_opt
@click.option("--alpha", type=float, default=None, help="Override the query document's threshold.")
@threads_opt
@fmt_opt
@click.option("--out", "-o", default=None, help="Result file (stdout when omitted).")
@guarded
def query(query_path, artifacts, alpha, threads, fmt, out):
    """Answer a query document against built artifacts."""
    _check_params(alpha=alpha, threads=threads)
    q = _read_query(query_path)
    art = open_artifacts(artifacts)
    res = run_query(art.graph, art.index, art.context, art.histogram, q, alpha=alpha, threads=threads)
    _emit(res.matches, out, fmt, q.nodes)


@main.command()
@click.argument("pgd_path", type=click.Path())
@click.argument("query_path", type=click.Path())
@click.option("--alpha", type=float, default=None)
@click.option("--exhaustive", is_flag=True, help="Materialise every possible world.")
@fmt_opt
@click.option("--out", "-o", default=None)
@guarded
def oracle(pgd_path, query_path, alpha, exhaustive, fmt, out):
    """Brute-force possible-world answer (small inputs only)."""
    _check_params(alpha=alpha)
    q = _read_query(query_path)
    pgd = load_pgd(pgd_path)
    ms = sort_matches(oracle_subgraph_match(pgd, q, alpha, exhaustive=exhaustive))
    _emit(ms, out, fmt, q.nodes)


@main.command()
@click.argument("pgd_path", type=click.Path())
@click.option("--lengths", default="1,2,3", show_default=True, help="Comma-separated L values.")
@click.option("--beta", type=float, default=0.1, show_default=True)
@click.option("--gamma", type=float, default=0.1, show_default=True)
@click.option("--alpha", type=float, default=0.7, show_default=True)
@click.option("--queries", type=int, default=5, show_default=True)
@click.option("--query-nodes", type=int, default=5, show_default=True)
@click.option("--query-edges", type=int, default=7, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@threads_opt
@click.option("--work-dir", default=None, help="Where per-L artifacts are built (temporary when omitted).")
@click.option("--out", "-o", default=None, help="CSV file (stdout when omitted).")
@guarded
def bench(pgd_path, lengths, beta, gamma, alpha, queries, query_nodes, query_edges, seed, threads,
          work_dir, out):
    """Per-stage search-space sizes and timings for random queries."""
    try:
        Ls = [int(x) for x in lengths.split(",") if x.strip()]
    except ValueError:
        _fail("invalid-parameter", f"--lengths must be comma-separated integers (got {lengths!r})")
    for L in Ls:
        _check_params(L=L)
    _check_params(beta=beta, gamma=gamma, alpha=alpha, threads=threads)
    pgd = load_pgd(pgd_path)
    qs = [generate_query(query_nodes, query_edges, pgd.labels, seed + i, alpha) for i in range(queries)]
    base = work_dir or tempfile.mkdtemp(prefix="pegq-bench-")
    rows = []
    for L in Ls:
        t = time.perf_counter()
        art = build_artifacts(pgd, os.path.join(base, f"L{L}"), L, beta, gamma, threads)
        build_s = time.perf_counter() - t
        for i, q in enumerate(qs):
            t = time.perf_counter()
            res = run_query(art.graph, art.index, art.context, art.histogram, q, threads=threads)
            total = time.perf_counter() - t
            for st in res.trace.stages:
                if st.name == "matches":
                    continue
                rows.append([L, i, st.name, st.product, f"{st.log10:.6g}", f"{st.seconds:.6f}",
                             len(res.matches), f"{total:.6f}", f"{build_s:.3f}"])
    header = ["L", "query", "stage", "search_space", "log10_search_space", "stage_seconds",
              "matches", "query_seconds", "build_seconds"]
    fh = open(out, "w", newline="", encoding="utf-8") if out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if out:
            fh.close()
    if not work_dir:
        import shutil
        shutil.rmtree(base, ignore_errors=True)


@main.command()
@artifacts_opt
@guarded
def stats(artifacts):
    """Summarise the manifests of an artifact directory."""
    if not os.path.isdir(artifacts):
        raise FileNotFoundError(2, "no such artifact directory", artifacts)
    out = {}
    for kind, sub in (("entity-graph", "graph"), ("context", "context"), ("path-index", "index"),
                      ("histogram", "histogram")):
        man = read_manifest(os.path.join(artifacts, sub), kind)
        out[sub] = {k: man[k] for k in ("source_fingerprint", "params", "counts")}
    click.echo(json.dumps(out, indent=1, sort_keys=True))


if __name__ == "__main__":
    main()
