"""Residual histories of the reduced Newton iteration and of the nested HP/UV loops.

Prints, for each reference state, the ln K step norms of the PT and VT flashes
and the outer relative residuals of a blind UV flash.

    python scripts/convergence_traces.py
"""
import sys
from pathlib import Path

from redflash import load_mixture
from redflash.caloric import flash_caloric
from redflash.isothermal_flash import flash_pt, flash_vt
from redflash.nonisothermal_flash import flash_uv
from redflash.reduction import build_reduction_basis

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from reference_states import STATES  # noqa: E402


def trace(values):
    return " ".join(f"{v:.1e}" for v in values)


def main():
    mixes = {}
    for name, s in STATES.items():
        mix = mixes.setdefault(s["fluid"], load_mixture(s["fluid"]))
        T, p, v = s["T"], s["p"] * 1e5, s["v"] * 1e-3
        pt = flash_pt(mix, T, p)
        vt = flash_vt(mix, T, v)
        u = flash_caloric(mix, vt, build_reduction_basis(mix, T=T))[2].u
        uv = flash_uv(mix, u, v)
        print(f"state {name} ({s['fluid']}, {T} K, {s['p']} bar)")
        print(f"  PT  ssi={pt.iterations.ssi} newton={pt.iterations.newton}: {trace(pt.residual_history)}")
        print(f"  VT  ssi={vt.iterations.ssi} newton={vt.iterations.newton}: {trace(vt.residual_history)}")
        print(f"  UV  T0={uv.T0:.2f} K outer={uv.outer_iterations}: {trace(uv.residual_history)}")
        print(f"      |T - T_ref| = {abs(uv.T - T):.2e} K")


if __name__ == "__main__":
    main()
