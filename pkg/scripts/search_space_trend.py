#!/usr/bin/env python3
"""Path / Path+Context / Final search-space sizes for L = 1..3 on a synthetic graph."""
import argparse
import csv
import sys

from pegquery.experiments import TrendConfig, TrendRow, search_space_trend, trend_violations


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--refs", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--lengths", default="1,2,3")
    ap.add_argument("--queries", type=int, default=5)
    ap.add_argument("--nodes", type=int, default=5)
    ap.add_argument("--edges", type=int, default=7)
    ap.add_argument("--alpha", type=float, default=0.7)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--csv", default=None, help="also write rows to this file")
    args = ap.parse_args()
    cfg = TrendConfig(args.refs, args.seed, tuple(int(x) for x in args.lengths.split(",")), args.queries,
                      args.nodes, args.edges, args.alpha, threads=args.threads)
    rows = search_space_trend(cfg)
    head = ["L", "query", "log10_path", "log10_path_context", "log10_final", "matches",
            "build_s", "query_s"]
    out = [[r.L, r.query, f"{TrendRow.log10(r.path):.2f}", f"{TrendRow.log10(r.context):.2f}",
            f"{TrendRow.log10(r.final):.2f}", r.matches, f"{r.build_seconds:.1f}", f"{r.query_seconds:.3f}"]
           for r in rows]
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(head)
    w.writerows(out)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows([head] + out)
    bad = trend_violations(rows)
    for b in bad:
        print("violation:", b)
    print("trend holds" if not bad else "trend violated")
    raise SystemExit(1 if bad else 0)


if __name__ == "__main__":
    main()
