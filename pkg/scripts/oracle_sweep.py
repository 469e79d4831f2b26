#!/usr/bin/env python3
"""Compare answer_query with the possible-world oracle on seeded tiny PGDs."""
import argparse

from pegquery.experiments import oracle_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=200)
    ap.add_argument("--seed0", type=int, default=0)
    ap.add_argument("--alphas", default="0.05,0.3,0.7")
    args = ap.parse_args()
    alphas = tuple(float(x) for x in args.alphas.split(","))
    rep = oracle_sweep(args.seeds, alphas, args.seed0)
    print(f"comparisons={rep.comparisons} nonempty={rep.nonempty} correlated={rep.correlated} "
          f"skipped_seeds={rep.skipped_seeds} seconds={rep.seconds:.1f}")
    print(f"mismatches={len(rep.mismatches)} stage_losses={len(rep.losses)}")
    for seed, a in rep.mismatches[:20]:
        print(f"  mismatch seed={seed} alpha={a}")
    for seed, a, lost in rep.losses[:20]:
        print(f"  lost seed={seed} alpha={a}: {', '.join(lost)}")
    raise SystemExit(1 if rep.mismatches or rep.losses else 0)


if __name__ == "__main__":
    main()
