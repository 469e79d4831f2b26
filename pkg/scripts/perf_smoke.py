#!/usr/bin/env python3
"""Build an L=2 index over a 100k-reference synthetic PGD and time q(5,9) queries."""
import argparse
import os

from pegquery.experiments import PerfConfig, perf_smoke


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--refs", type=int, default=100_000)
    ap.add_argument("--L", type=int, default=2)
    ap.add_argument("--queries", type=int, default=3)
    ap.add_argument("--threads", type=int, default=max(2, os.cpu_count() or 1))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--dir", default=None, help="keep the index here instead of a temp dir")
    args = ap.parse_args()
    cfg = PerfConfig(n_refs=args.refs, seed=args.seed, max_len=args.L, n_queries=args.queries,
                     threads=args.threads)
    rep = perf_smoke(cfg, args.dir)
    print(f"entities={rep.entities} edges={rep.edges} records={rep.records}")
    print(f"build_seconds={rep.build_seconds:.1f} peak_rss_mb={rep.peak_rss_mb:.0f}")
    for i, (a, b, m) in enumerate(zip(rep.query_seconds, rep.query_seconds_parallel, rep.matches)):
        print(f"q{i}: threads=1 {a:.3f}s threads={cfg.threads} {b:.3f}s matches={m}")
    print("identical across thread counts:", rep.identical)
    ok = rep.identical and rep.build_seconds < 1800 and max(rep.query_seconds + rep.query_seconds_parallel) < 60
    raise SystemExit(0 if ok else 1)


if __name__ == "__main__":
    main()
