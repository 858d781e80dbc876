"""Command-line driver: single flashes, sweeps and the component-scaling benchmark.

Units at this boundary are K, bar, L/mol and kJ/mol; pressures accept an
explicit unit suffix (``198.1bar``, ``20kPa``, ``7.54MPa``, ``1e5Pa``).
Exit codes: 0 converged (two-phase or single-phase), 2 solver failure,
1 usage error.  Error lines on stderr read ``error kind=<...> message=<...>``.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import math
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .caloric import flash_caloric
from .errors import DomainError, FlashError
from .fluid_db import FluidDataError, Mixture, duplicate_components, load_mixture
from .isothermal_flash import FlashResult, flash_pt, flash_vt, pt_sweep_compiled
from .nonisothermal_flash import NestedResult, flash_hp, flash_uv
from .reduction import build_reduction_basis, rebase_temperature

CSV_SCHEMA = "redflash-csv/1"
BAR = 1e5
L_PER_MOL = 1e-3
KJ = 1e3

# Default sweep windows, chosen to cover each dome and its critical region;
# override them on the command line with --T-range and --p-range.
DIAGRAM_WINDOWS = {
    "y8": ((200.0, 450.0), (1.0, 250.0)),
    "my10": ((250.0, 700.0), (1.0, 250.0)),
    "c2c7": ((300.0, 560.0), (1.0, 60.0)),
}
BENCH_BOX = ((400.0, 500.0), (10.0, 40.0))

_PRESSURE_UNITS = {"pa": 1.0, "kpa": 1e3, "mpa": 1e6, "bar": 1e5, "atm": 101325.0}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _error_line("usage", message)
        raise SystemExit(1)


def _error_line(kind: str, message: str) -> None:
    print(f"error kind={kind} message={message!r}", file=sys.stderr)


def parse_pressure(text: str) -> float:
    """Pressure in Pa from ``<number>[unit]``; a bare number is in bar."""
    m = re.fullmatch(r"\s*([-+0-9.eE]+)\s*([A-Za-z]*)\s*", str(text))
    if not m:
        raise argparse.ArgumentTypeError(f"cannot parse pressure {text!r}")
    unit = m.group(2).lower() or "bar"
    if unit not in _PRESSURE_UNITS:
        raise argparse.ArgumentTypeError(f"unknown pressure unit {m.group(2)!r}")
    try:
        value = float(m.group(1)) * _PRESSURE_UNITS[unit]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse pressure {text!r}") from None
    if not value > 0.0:
        raise argparse.ArgumentTypeError("pressure must be positive")
    return value


def _positive(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value > 0.0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return value


def _count(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 2:
        raise argparse.ArgumentTypeError("grid counts must be at least 2")
    return value


def fmt(x) -> str:
    """Float with 17 significant digits (round-trip exact); other values as text."""
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


# --------------------------------------------------------------------------- CSV

def write_csv(stream, command: str, meta: dict, columns: list[str], rows, summary: dict | None = None) -> None:
    stream.write(f"# {CSV_SCHEMA} command={command} redflash={__version__}\n")
    for key, value in meta.items():
        stream.write(f"# {key}={value}\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    if summary:
        stream.write("# summary " + " ".join(f"{k}={fmt(v)}" for k, v in summary.items()) + "\n")


def read_csv(text: str):
    """(meta, columns, rows) of a file written by ``write_csv``; values stay strings."""
    meta, lines = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body and " " not in body.split("=", 1)[0]:
                k, v = body.split("=", 1)
                meta[k] = v
        elif line:
            lines.append(line)
    rows = list(csv.reader(lines))
    return meta, rows[0], rows[1:]


def _open_out(path):
    if path in (None, "-"):
        return contextlib.nullcontext(sys.stdout)
    return open(path, "w", encoding="utf-8", newline="")


# --------------------------------------------------------------------------- flash

def _report_rows(res: FlashResult, mix: Mixture):
    rows = [("status", res.status), ("theta", res.theta), ("T_K", res.T), ("p_bar", res.p / BAR),
            ("vL_L_per_mol", res.vL / L_PER_MOL), ("vV_L_per_mol", res.vV / L_PER_MOL),
            ("ssi_iterations", res.iterations.ssi), ("newton_iterations", res.iterations.newton)]
    for name, xi, yi, ki in zip((c.name for c in mix.components), res.x, res.y, res.K):
        rows += [(f"x_{name}", xi), (f"y_{name}", yi), (f"K_{name}", ki)]
    rows += [(f"residual_{k}", r) for k, r in enumerate(res.residual_history)]
    if res.message:
        rows.append(("message", res.message))
    return rows


def _print_report(rows, fmt_name, stream, command, meta):
    if fmt_name == "csv":
        write_csv(stream, command, meta, ["quantity", "value"], rows)
        return
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        stream.write(f"{k:<{width}}  {fmt(v)}\n")


def cmd_flash(args) -> int:
    mix = load_mixture(args.mix)
    meta = {"mix": args.mix, "kind": args.kind}
    nested: NestedResult | None = None
    if args.kind == "pt":
        _need(args, "T", "p")
        res = flash_pt(mix, args.T, args.p)
    elif args.kind == "vt":
        _need(args, "T", "v")
        res = flash_vt(mix, args.T, args.v * L_PER_MOL, p0=args.p)
    elif args.kind == "hp":
        _need(args, "h", "p")
        nested = flash_hp(mix, args.h * KJ, args.p, args.T0)
        res = nested.flash
    else:
        _need(args, "u", "v")
        nested = flash_uv(mix, args.u * KJ, args.v * L_PER_MOL, args.T0, p0=args.p)
        res = nested.flash
    rows = _report_rows(res, mix)
    if res.converged:
        basis = build_reduction_basis(mix, mix.eos, res.T)
        _, _, M = flash_caloric(mix, res, basis)
        rows[6:6] = [("u_kJ_per_mol", M.u / KJ), ("h_kJ_per_mol", M.h / KJ), ("v_L_per_mol", res.v / L_PER_MOL)]
    if nested is not None:
        rows += [("outer_iterations", nested.outer_iterations), ("T0_K", nested.T0)]
        rows += [(f"T_outer_{k}", t) for k, t in enumerate(nested.T_history)]
        rows += [(f"outer_residual_{k}", r) for k, r in enumerate(nested.residual_history)]
    with _open_out(args.out) as out:
        _print_report(rows, args.format, out, "flash", meta)
    if not res.converged:
        _error_line("solver", res.status)
        return 2
    return 0


def _need(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"flash {args.kind} needs --{' --'.join(missing)}")


# --------------------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class SweepSpec:
    mix: str
    T_range: tuple[float, float]
    p_range: tuple[float, float]  # bar
    nT: int = 100
    np_: int = 100

    def __post_init__(self):
        if self.nT < 2 or self.np_ < 2:
            raise UsageError("grid counts must be at least 2")
        if not (self.T_range[0] < self.T_range[1] and self.p_range[0] < self.p_range[1]):
            raise UsageError("ranges must be increasing")
        if not (self.T_range[0] > 0.0 and self.p_range[0] > 0.0):
            raise UsageError("ranges must be positive")

    def temperatures(self):
        return np.linspace(*self.T_range, self.nT)

    def pressures(self):
        return np.linspace(*self.p_range, self.np_) * BAR


def _pool_map(fn, items, threads):
    items = list(items)
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))  # map preserves input order


def diagram_rows(spec: SweepSpec, threads: int = 1):
    """Blind PT flashes on the grid; rows (T, p_bar, status, theta, ssi, newton) in node order."""
    mix = load_mixture(spec.mix)
    base = build_reduction_basis(mix, mix.eos, 298.15)
    ps = spec.pressures()

    def row_block(T):
        basis = rebase_temperature(base, mix, mix.eos, T)
        out = []
        for p in ps:
            try:
                r = flash_pt(mix, T, p, basis=basis)
                status, theta, its = r.status, r.theta, r.iterations
                out.append((T, p / BAR, status, theta, its.ssi, its.newton))
            except FlashError as e:
                out.append((T, p / BAR, f"failed: {type(e).__name__}", math.nan, 0, 0))
        return out

    blocks = _pool_map(row_block, spec.temperatures(), threads)
    return [r for b in blocks for r in b]


def cmd_diagram(args) -> int:
    window = DIAGRAM_WINDOWS.get(str(args.mix).removesuffix(".mix"), DIAGRAM_WINDOWS["y8"])
    spec = SweepSpec(args.mix, tuple(args.T_range or window[0]), tuple(args.p_range or window[1]), args.nT, args.np)
    t0 = time.perf_counter()
    rows = diagram_rows(spec, args.threads)
    elapsed = time.perf_counter() - t0
    failures = sum(1 for r in rows if str(r[2]).startswith("failed"))
    meta = {"mix": spec.mix, "T_range_K": f"{spec.T_range[0]}:{spec.T_range[1]}",
            "p_range_bar": f"{spec.p_range[0]}:{spec.p_range[1]}", "grid": f"{spec.nT}x{spec.np_}",
            "theta_single_phase": "1 vapor-like root, 0 liquid-like root"}
    with _open_out(args.out) as out:
        write_csv(out, "diagram", meta, ["T_K", "p_bar", "status", "theta", "ssi", "newton"], rows,
                  {"nodes": len(rows), "failures": failures, "seconds": elapsed})
    print(f"diagram: {len(rows)} nodes, {failures} failures, {elapsed:.3f} s", file=sys.stderr)
    return 0


def isochore_rows(mix_name: str, v_values, T_start: float, T_stop: float, step: float, threads: int = 1):
    """VT flashes marching T upward per isochore; rows (v, T, p_bar, theta, status).

    K-factors are warm-started from the previous two-phase point; each curve
    ends at the first single-phase point after its two-phase segment.
    """
    if not step > 0.0:
        raise UsageError("step must be positive")
    mix = load_mixture(mix_name)
    base = build_reduction_basis(mix, mix.eos, 298.15)
    n_steps = int(math.floor((T_stop - T_start) / step + 1e-9)) + 1

    def curve(v):
        out, K, seen_two = [], None, False
        for k in range(n_steps):
            T = T_start + k * step
            basis = rebase_temperature(base, mix, mix.eos, T)
            try:
                r = flash_vt(mix, T, v * L_PER_MOL, K, basis=basis)
            except FlashError as e:
                out.append((v, T, math.nan, math.nan, f"failed: {type(e).__name__}"))
                K = None
                continue
            if K is not None and not r.converged:
                r = flash_vt(mix, T, v * L_PER_MOL, basis=basis)
            out.append((v, T, r.p / BAR, r.theta, r.status))
            if r.two_phase:
                seen_two, K = True, r.K
            else:
                K = None
                if seen_two and r.converged:
                    break
        return out

    blocks = _pool_map(curve, list(v_values), threads)
    return [r for b in blocks for r in b]


def cmd_isochore(args) -> int:
    t0 = time.perf_counter()
    rows = isochore_rows(args.mix, args.v, args.T_start, args.T_stop, args.step, args.threads)
    failures = sum(1 for r in rows if str(r[4]).startswith("failed"))
    meta = {"mix": args.mix, "v_L_per_mol": ":".join(fmt(v) for v in args.v),
            "T_start_K": args.T_start, "step_K": args.step}
    with _open_out(args.out) as out:
        write_csv(out, "isochore", meta, ["v_L_per_mol", "T_K", "p_bar", "theta", "status"], rows,
                  {"points": len(rows), "failures": failures, "seconds": time.perf_counter() - t0})
    return 0


# --------------------------------------------------------------------------- benchmark

def bench_mixture(base: Mixture, n: int) -> Mixture:
    """``n`` pseudo-components by even duplication of every species of ``base``."""
    k = len(base.components)
    if n % k:
        raise UsageError(f"pseudo-component count {n} is not a multiple of {k}")
    return duplicate_components(base, [n // k] * k)


def bench_run(mix: Mixture, full: bool, T_range, p_range, grid: int, dT: float, dp: float, seed: int):
    """Timed PT sweep and perturbed-start UV sweep over the box.

    Returns (pt_seconds, uv_seconds, kernel_seconds, pt_failures, uv_failures,
    theta_pt, p_uv, theta_uv, m).  ``kernel_seconds`` is the best of five
    runs of the compiled blind PT sweep, free of Python call overhead.
    """
    base = build_reduction_basis(mix, mix.eos, 298.15, full=full)
    Ts = np.linspace(*T_range, grid)
    ps = np.linspace(*p_range, grid) * BAR
    # untimed warm-up so that JIT compilation never lands inside a timed region
    warm = flash_pt(mix, Ts[0], ps[0], basis=rebase_temperature(base, mix, mix.eos, Ts[0]))
    if warm.converged:
        _, _, wc = flash_caloric(mix, warm, rebase_temperature(base, mix, mix.eos, Ts[0]))
        try:
            flash_uv(mix, wc.u, warm.v, Ts[0], basis=base)
        except FlashError:
            pass
    pt_sweep_compiled(mix, Ts[:1], ps[:1], base)
    kernel = math.inf
    for _ in range(5):
        t0 = time.perf_counter()
        pt_sweep_compiled(mix, Ts, ps, base)
        kernel = min(kernel, time.perf_counter() - t0)
    rng = np.random.default_rng(seed)
    r_T = rng.uniform(-0.5, 0.5, size=(grid, grid))
    r_p = rng.uniform(-0.5, 0.5, size=(grid, grid))
    theta_pt = np.full((grid, grid), np.nan)
    states = [[None] * grid for _ in range(grid)]
    pt_fail = 0
    t0 = time.perf_counter()
    for i, T in enumerate(Ts):
        basis = rebase_temperature(base, mix, mix.eos, T)
        for j, p in enumerate(ps):
            r = flash_pt(mix, T, p, basis=basis)
            if not r.converged:
                pt_fail += 1
                continue
            theta_pt[i, j] = r.theta
            states[i][j] = r
    pt_time = time.perf_counter() - t0
    # energies are evaluated outside the timed region
    targets = {}
    for i, T in enumerate(Ts):
        basis = rebase_temperature(base, mix, mix.eos, T)
        for j in range(grid):
            r = states[i][j]
            if r is not None:
                targets[i, j] = (flash_caloric(mix, r, basis)[2].u, r.v)
    p_uv = np.full((grid, grid), np.nan)
    theta_uv = np.full((grid, grid), np.nan)
    uv_fail = 0
    t0 = time.perf_counter()
    for (i, j), (u, v) in targets.items():
        T0 = float(np.clip(Ts[i] + r_T[i, j] * dT, 150.0, 1500.0))
        p0 = max(ps[j] + r_p[i, j] * dp, 1e3)
        try:
            res = flash_uv(mix, u, v, T0, basis=base, p0=p0)
        except FlashError:
            uv_fail += 1
            continue
        p_uv[i, j] = res.flash.p
        theta_uv[i, j] = res.flash.theta
    uv_time = time.perf_counter() - t0
    return pt_time, uv_time, kernel, pt_fail, uv_fail, theta_pt, p_uv, theta_uv, base.m


def kernel_scaling(base: Mixture, counts, T_range, p_range, grid: int = 30, reps: int = 31):
    """Median over ``reps`` of the paired reduced/full time ratio of the compiled PT sweep, per n.

    Each repetition times the reduced and the full basis back to back for
    every n, so slow drifts of the machine cancel in the ratio.
    """
    Ts = np.linspace(*T_range, grid)
    ps = np.linspace(*p_range, grid) * BAR
    cases = []
    for n in counts:
        mix = bench_mixture(base, n)
        pair = [build_reduction_basis(mix, mix.eos, 298.15, full=full) for full in (False, True)]
        for b in pair:
            pt_sweep_compiled(mix, Ts[:1], ps[:1], b)
        cases.append((mix, pair))

    def timed(mix, b):
        t0 = time.perf_counter()
        pt_sweep_compiled(mix, Ts, ps, b)
        return time.perf_counter() - t0

    ratios = np.empty((reps, len(cases)))
    for r in range(reps):
        for k, (mix, (reduced, full)) in enumerate(cases):
            ratios[r, k] = timed(mix, reduced) / timed(mix, full)
    return np.median(ratios, axis=0)


def cmd_bench(args) -> int:
    base_mix = load_mixture(args.base)
    modes = ["reduced", "full"] if args.mode == "both" else [args.mode]
    rows, ref = [], {}
    # throwaway pass over a coarse grid compiles every code path the timed runs can reach
    for mode in modes:
        bench_run(bench_mixture(base_mix, args.counts[0]), mode == "full", args.T_range, args.p_range, 6,
                  args.dT, args.dp, args.seed)
    for n in args.counts:
        mix = bench_mixture(base_mix, n)
        for mode in modes:
            out = bench_run(mix, mode == "full", args.T_range, args.p_range, args.grid, args.dT, args.dp, args.seed)
            pt_t, uv_t, k_t, pt_f, uv_f, th_pt, p_uv, th_uv, m = out
            if mode not in ref:
                ref[mode] = (th_pt, p_uv, th_uv)
            r0 = ref[mode]
            dev_theta = float(np.nanmax(np.abs(np.concatenate([(th_pt - r0[0]).ravel(), (th_uv - r0[2]).ravel()]))))
            dev_p = float(np.nanmax(np.abs(p_uv - r0[1]) / r0[1]))
            rows.append((n, mode, m, pt_t, uv_t, k_t, pt_f, uv_f, dev_theta, dev_p))
            print(f"bench n={n} mode={mode} m={m}: PT {pt_t:.3f} s, UV {uv_t:.3f} s, PT kernel {k_t:.4f} s",
                  file=sys.stderr)
    meta = {"base": args.base, "grid": f"{args.grid}x{args.grid}",
            "T_range_K": f"{args.T_range[0]}:{args.T_range[1]}", "p_range_bar": f"{args.p_range[0]}:{args.p_range[1]}",
            "dT_K": args.dT, "dp_Pa": args.dp, "seed": args.seed,
            "deviation": "max over nodes against the smallest n of the same mode"}
    summary = None
    if args.mode == "both":
        ratios = kernel_scaling(base_mix, args.counts, args.T_range, args.p_range)
        summary = {"kernel_time_ratio_reduced_over_full": ":".join(f"{r:.4f}" for r in ratios)}
    with _open_out(args.out) as out:
        write_csv(out, "bench", meta, ["n", "mode", "m", "pt_seconds", "uv_seconds", "pt_kernel_seconds", "pt_failures",
                                       "uv_failures", "max_dev_theta", "max_rel_dev_p"], rows, summary)
    return 0


# --------------------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="redflash", description="Reduced-space flash calculations with cubic equations of state.")
    p.add_argument("--version", action="version", version=f"redflash {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("flash", help="single PT, VT, HP or UV flash")
    f.add_argument("kind", choices=["pt", "vt", "hp", "uv"])
    f.add_argument("--mix", required=True, help="mixture file or shipped name (y8, my10, c2c7)")
    f.add_argument("--T", type=_positive, help="temperature [K]")
    f.add_argument("--p", type=parse_pressure, help="pressure (bar unless suffixed); VT/UV: Wilson start pressure")
    f.add_argument("--v", type=_positive, help="molar volume [L/mol]")
    f.add_argument("--u", type=float, help="molar internal energy [kJ/mol]")
    f.add_argument("--h", type=float, help="molar enthalpy [kJ/mol]")
    f.add_argument("--T0", type=_positive, help="starting temperature for HP/UV [K]")
    _common(f, "text")

    d = sub.add_parser("diagram", help="blind PT sweep over a T-p grid")
    d.add_argument("--mix", required=True)
    d.add_argument("--T-range", dest="T_range", type=_positive, nargs=2, metavar=("TMIN", "TMAX"))
    d.add_argument("--p-range", dest="p_range", type=_positive, nargs=2, metavar=("PMIN", "PMAX"),
                   help="pressure range [bar]")
    d.add_argument("--nT", type=_count, default=100)
    d.add_argument("--np", type=_count, default=100)
    _common(d)

    i = sub.add_parser("isochore", help="VT flashes along isochores")
    i.add_argument("--mix", required=True)
    i.add_argument("--v", type=_positive, nargs="+", required=True, help="molar volumes [L/mol]")
    i.add_argument("--T-start", dest="T_start", type=_positive, default=200.0)
    i.add_argument("--T-stop", dest="T_stop", type=_positive, default=1000.0)
    i.add_argument("--step", type=_positive, default=1.0)
    _common(i)

    b = sub.add_parser("bench", help="component-count scaling benchmark")
    b.add_argument("--base", default="c2c7")
    b.add_argument("--counts", type=_count, nargs="+", default=[2, 4, 8, 16])
    b.add_argument("--mode", choices=["reduced", "full", "both"], default="both")
    b.add_argument("--grid", type=_count, default=100)
    b.add_argument("--T-range", dest="T_range", type=_positive, nargs=2, default=list(BENCH_BOX[0]))
    b.add_argument("--p-range", dest="p_range", type=_positive, nargs=2, default=list(BENCH_BOX[1]))
    b.add_argument("--dT", type=_positive, default=20.0, help="temperature perturbation amplitude [K]")
    b.add_argument("--dp", type=parse_pressure, default=20e3, help="pressure perturbation amplitude")
    _common(b)
    return p


def _common(p, default_format="csv"):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default="-", help="output path ('-' for stdout)")
    p.add_argument("--format", choices=["text", "csv"], default=default_format)


COMMANDS = {"flash": cmd_flash, "diagram": cmd_diagram, "isochore": cmd_isochore, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if getattr(args, "threads", 1) < 1:
        _error_line("usage", "--threads must be at least 1")
        return 1
    try:
        return COMMANDS[args.command](args)
    except (UsageError, FluidDataError, FileNotFoundError, DomainError) as e:
        _error_line("usage", str(e))
        return 1
    except FlashError as e:
        _error_line("solver", f"{type(e).__name__}: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
