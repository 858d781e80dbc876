"""Reduced versus full-size Newton cost as the component count grows.

The base mixture is split into n pseudo-components by duplication, which
leaves the equilibrium unchanged and the interaction matrix rank-deficient.

    python scripts/benchmark.py --counts 2 4 8 16 32
"""
import argparse

from redflash import cli, load_mixture


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--base", default="c2c7")
    ap.add_argument("--counts", type=int, nargs="+", default=[2, 4, 8, 16])
    ap.add_argument("--grid", type=int, default=30)
    ap.add_argument("--reps", type=int, default=31)
    args = ap.parse_args()

    base = load_mixture(args.base)
    ratios = cli.kernel_scaling(base, tuple(args.counts), *cli.BENCH_BOX, grid=args.grid, reps=args.reps)
    print(f"{'n':>4}  {'reduced/full':>12}")
    for n, r in zip(args.counts, ratios):
        print(f"{n:>4}  {r:12.3f}")


if __name__ == "__main__":
    main()
