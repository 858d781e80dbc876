"""Vapor fraction and pressure along isochores, marching temperature upward.

    python scripts/isochores.py my10 0.2874 0.5 1.0 --step 1 --out my10_isochores.csv
"""
import argparse

import numpy as np

from redflash import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("mix")
    ap.add_argument("v", type=float, nargs="+", help="molar volumes [L/mol]")
    ap.add_argument("--T-start", dest="T_start", type=float, default=200.0)
    ap.add_argument("--T-stop", dest="T_stop", type=float, default=1000.0)
    ap.add_argument("--step", type=float, default=1.0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    rows = cli.isochore_rows(args.mix, args.v, args.T_start, args.T_stop, args.step, args.threads)
    for v in args.v:
        curve = [r for r in rows if r[0] == v and r[4] == "two-phase"]
        if not curve:
            print(f"v = {v} L/mol: no two-phase segment")
            continue
        T = np.array([r[1] for r in curve])
        theta = np.array([r[3] for r in curve])
        k = int(np.argmax(theta))
        print(f"v = {v} L/mol: two-phase {T[0]:.1f}-{T[-1]:.1f} K, theta {theta[0]:.4f} at start, "
              f"peak {theta[k]:.4f} at {T[k]:.1f} K")
    if args.out:
        with open(args.out, "w", newline="") as f:
            cli.write_csv(f, "isochore", {"mix": args.mix}, ["v_L_per_mol", "T_K", "p_bar", "theta", "status"], rows)


if __name__ == "__main__":
    main()
