"""Reduced flash against the full-space substitution oracle on random two-phase states.

    python scripts/oracle_comparison.py y8 --count 200
"""
import argparse
import math

import numpy as np

from redflash import cli, load_mixture
from redflash.isothermal_flash import flash_pt
from redflash.oracle import flash_pt_fullspace_ssi


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("mix", choices=["y8", "my10"])
    ap.add_argument("--count", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    mix = load_mixture(args.mix)
    (T0, T1), (p0, p1) = cli.DIAGRAM_WINDOWS[args.mix]
    rng = np.random.default_rng(args.seed)
    worst, checked, disagree = 0.0, 0, 0
    while checked < args.count:
        T = rng.uniform(T0, T1)
        p = math.exp(rng.uniform(math.log(p0), math.log(p1))) * 1e5
        r = flash_pt(mix, T, p)
        if not r.two_phase:
            continue
        o = flash_pt_fullspace_ssi(mix, T, p)
        checked += 1
        if o.status != "two-phase":
            disagree += 1
            continue
        worst = max(worst, float(np.max(np.abs(r.x - o.x))), float(np.max(np.abs(r.y - o.y))))
    print(f"{args.mix}: {checked} two-phase states, {disagree} classification disagreements, "
          f"max |dx|, |dy| = {worst:.2e}")


if __name__ == "__main__":
    main()
