"""Blind PT sweep over a mixture's default window; writes a CSV and prints a status census.

    python scripts/phase_diagram.py y8 --n 100 --out y8_diagram.csv
"""
import argparse
import collections
import time

from redflash import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("mix", choices=sorted(cli.DIAGRAM_WINDOWS))
    ap.add_argument("--n", type=int, default=100, help="nodes per axis")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    T_range, p_range = cli.DIAGRAM_WINDOWS[args.mix]
    spec = cli.SweepSpec(args.mix, T_range, p_range, args.n, args.n)
    t0 = time.perf_counter()
    rows = cli.diagram_rows(spec, args.threads)
    elapsed = time.perf_counter() - t0
    census = collections.Counter(r[2] for r in rows)
    newton = [r[5] for r in rows if r[2] == "two-phase"]
    print(f"{args.mix}: {len(rows)} nodes in {elapsed:.2f} s ({1e3 * elapsed / len(rows):.3f} ms per flash)")
    for status, count in census.most_common():
        print(f"  {status:<28} {count}")
    if newton:
        print(f"  Newton iterations on two-phase nodes: mean {sum(newton) / len(newton):.2f}, max {max(newton)}")
    if args.out:
        with open(args.out, "w", newline="") as f:
            cli.write_csv(f, "diagram", {"mix": args.mix, "grid": f"{args.n}x{args.n}"},
                          ["T_K", "p_bar", "status", "theta", "ssi", "newton"], rows)


if __name__ == "__main__":
    main()
