"""HP- and UV-flash by a temperature Newton iteration around PT- or VT-flash.

Each outer step runs the isothermal flash at the current temperature
(warm-started from the previous K-factors), evaluates h (HP) or u (UV) of
the mixture, and updates

    T <- T + L (target - value) / c

with the line-search factor L halved until the residual magnitude drops.
The slope c is selectable: the frozen-composition heat capacity c_p or c_v,
a secant through the last two iterates, or (default) the equilibrium slope
d(value)/dT along the phase split, taken as a central difference of two
warm-started inner flashes.  The frozen heat capacity ignores the latent
heat released as the split moves with T and so converges only linearly in
the two-phase region.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .caloric import CaloricState, PhaseState, flash_caloric, phase_caloric
from .cubic_eos import _pressure, _solve_volume
from .errors import ConvergenceError, DomainError, FlashError
from .fluid_db import Mixture
from .isothermal_flash import DEFAULT_CONFIG, FlashConfig, FlashResult, flash_pt, flash_vt
from .reduction import ReductionBasis, build_reduction_basis, rebase_temperature

T_BRACKET = (150.0, 1500.0)
DEFAULT_NESTED_EPS = 1e-10


@dataclass(frozen=True)
class NestedConfig:
    eps_r: float = DEFAULT_NESTED_EPS
    max_outer: int = 50
    line_search: bool = True
    slope: str = "equilibrium"  # or "frozen", "secant"
    fd_step: float = 1e-3  # K, half-width of the equilibrium-slope difference
    max_halvings: int = 20
    T0_strategy: str = "single-phase-EoS-inversion"  # or "user"
    inner: FlashConfig = DEFAULT_CONFIG

    def __post_init__(self):
        if not self.eps_r > 0.0:
            raise ValueError("eps_r must be positive")
        if self.slope not in ("equilibrium", "frozen", "secant"):
            raise ValueError(f"unknown slope rule {self.slope!r}")
        if not self.fd_step > 0.0:
            raise ValueError("fd_step must be positive")


DEFAULT_NESTED = NestedConfig()


@dataclass
class NestedResult:
    flash: FlashResult
    T: float
    caloric: CaloricState
    outer_iterations: int
    T_history: np.ndarray
    residual_history: np.ndarray  # relative residual at every accepted temperature
    T0: float
    T0_fallback: bool = False
    inner_newton: list = field(default_factory=list)
    eps_r: float = DEFAULT_NESTED_EPS

    @property
    def status(self) -> str:
        return self.flash.status

    @property
    def converged(self) -> bool:
        return self.flash.converged and self.residual_history[-1] <= self.eps_r


class _Bases:
    """Eigenvectors are temperature independent; only sqrt(a_i) is rescaled."""

    def __init__(self, mix: Mixture, basis: ReductionBasis | None):
        self.mix = mix
        self.base = basis if basis is not None else build_reduction_basis(mix, mix.eos, 298.15)

    def at(self, T: float) -> ReductionBasis:
        return rebase_temperature(self.base, self.mix, self.mix.eos, T)


def _temperature_window(mix: Mixture):
    lo = max(T_BRACKET[0], float(np.max(mix.nasa_ranges[:, 0])))
    hi = min(T_BRACKET[1], float(np.min(mix.nasa_ranges[:, 2])))
    return lo, hi


def _single_phase_value(mix, bases, kind, T, spec):
    """(value, derivative) of the single-phase h(T, p) or u(T, v) at the feed composition."""
    basis = bases.at(T)
    eos = mix.eos
    q = basis.s_hat @ mix.z
    a = float(np.dot(basis.lam, q * q))
    b = float(basis.b_hat @ mix.z)
    if kind == "hp":
        v, k = _solve_volume(T, spec, a, b, eos.delta1, eos.delta2)
        if k < 0:
            raise DomainError("no volume root")
        st = phase_caloric(PhaseState(mix.z, v, T, q, a, b), basis, eos, spec, mix, need_cp=False)
        return st.h, st.cp
    if not spec > b:
        raise DomainError("v_hat below the mixture co-volume")
    p = _pressure(T, spec, a, b, eos.delta1, eos.delta2)
    st = phase_caloric(PhaseState(mix.z, spec, T, q, a, b), basis, eos, p, mix, need_cp=False)
    return st.u, st.cv


def estimate_temperature(mix: Mixture, spec: dict, eos=None, basis: ReductionBasis | None = None):
    """Single-phase temperature estimate for {'h','p'} or {'u','v'} specifications.

    Returns (T0, fallback); fallback is True when no bracket exists in the
    search window and 300 K is returned instead.
    """
    if eos is not None and eos != mix.eos:
        raise DomainError("estimate_temperature uses the mixture's own EoS")
    if "h" in spec:
        kind, target, sv = "hp", float(spec["h"]), float(spec["p"])
    elif "u" in spec:
        kind, target, sv = "uv", float(spec["u"]), float(spec["v"])
    else:
        raise DomainError("spec needs keys (h, p) or (u, v)")
    bases = _Bases(mix, basis)
    lo, hi = _temperature_window(mix)

    def g(T):
        val, der = _single_phase_value(mix, bases, kind, T, sv)
        return val - target, der

    try:
        flo, _ = g(lo)
        fhi, _ = g(hi)
    except FlashError:
        flo = fhi = math.nan
    if not (flo <= 0.0 <= fhi):
        warnings.warn("no single-phase temperature bracket; starting from 300 K", RuntimeWarning, stacklevel=2)
        return 300.0, True
    T = 0.5 * (lo + hi)
    for _ in range(200):
        f, d = g(T)
        if f > 0.0:
            hi = T
        else:
            lo = T
        new = T - f / d if d > 0.0 and math.isfinite(d) else 0.5 * (lo + hi)
        if not lo < new < hi:
            new = 0.5 * (lo + hi)
        if abs(new - T) <= 1e-10 * T or hi - lo <= 1e-12 * T:
            return new, False
        T = new
    return T, False


def _nested(mix, kind, target, sv, T0, basis, config, p0=None, K0=None):
    if T0 is None:
        spec = {"h": target, "p": sv} if kind == "hp" else {"u": target, "v": sv}
        T0, fallback = estimate_temperature(mix, spec, basis=basis)
    else:
        fallback = False
    T_lo, T_hi = _temperature_window(mix)
    if not T_lo <= T0 <= T_hi:
        raise DomainError(f"T0 = {T0} K outside [{T_lo}, {T_hi}] K")
    bases = _Bases(mix, basis)
    inner = config.inner
    scale = abs(target) if target != 0.0 else 1.0

    def evaluate(T, Kw):
        b = bases.at(T)
        if kind == "hp":
            r = flash_pt(mix, T, sv, Kw, basis=b, config=inner)
            if not r.converged and Kw is not None:
                r = flash_pt(mix, T, sv, None, basis=b, config=inner)
        else:
            r = flash_vt(mix, T, sv, Kw, basis=b, config=inner, p0=p0 if Kw is None else None)
            if not r.converged and Kw is not None:
                r = flash_vt(mix, T, sv, None, basis=b, config=inner)
        if not r.converged:
            raise ConvergenceError(f"inner {'PT' if kind == 'hp' else 'VT'} flash failed at T = {T} K: {r.status}")
        _, _, M = flash_caloric(mix, r, b)
        val, der = (M.h, M.cp) if kind == "hp" else (M.u, M.cv)
        return r, M, target - val, der

    def warm(r):
        return r.K if r.two_phase else None

    def equilibrium_slope(T, r, frozen):
        if not r.two_phase:
            return frozen
        d = config.fd_step
        try:
            up = evaluate(min(T + d, T_hi), r.K)
            dn = evaluate(max(T - d, T_lo), r.K)
        except FlashError:
            return frozen
        if not (up[0].two_phase and dn[0].two_phase):
            return frozen
        sl = (dn[2] - up[2]) / (min(T + d, T_hi) - max(T - d, T_lo))
        return sl if sl > 0.0 and math.isfinite(sl) else frozen

    T = float(T0)
    r, M, res, der = evaluate(T, K0)
    Ts = [T]
    rel = [abs(res) / scale]
    newton = [r.iterations.newton]
    # value(T) increases with T, so the sign of the residual brackets the solution
    below = T if res > 0.0 else -math.inf
    above = T if res < 0.0 else math.inf
    prev = None
    outer = 0
    while rel[-1] > config.eps_r:
        if outer >= config.max_outer:
            raise ConvergenceError(f"{kind.upper()} flash: {config.max_outer} outer iterations without convergence")
        slope = der
        if config.slope == "equilibrium":
            slope = equilibrium_slope(T, r, der)
        elif config.slope == "secant" and prev is not None and prev[2] == r.two_phase and prev[0] != T:
            sec = (prev[1] - res) / (T - prev[0])
            if sec > 0.0 and math.isfinite(sec):
                slope = sec
        if not (slope > 0.0 and math.isfinite(slope)):
            raise ConvergenceError(f"non-positive heat capacity {slope} at T = {T} K")
        step = res / slope
        bracketed = math.isfinite(below) and math.isfinite(above)
        L = 1.0
        accepted = None
        for _ in range(config.max_halvings + 1):
            T_try = min(max(T + L * step, T_lo), T_hi)
            bisect = bracketed and not below < T_try < above
            if bisect:
                T_try = 0.5 * (below + above)
            try:
                trial = evaluate(T_try, warm(r))
            except FlashError:
                trial = None
            if trial is not None and (bisect or abs(trial[2]) < abs(res) or not config.line_search):
                accepted = trial
                break
            L *= 0.5
        if accepted is None:
            raise ConvergenceError(f"line search failed at T = {T} K")
        prev = (T, res, r.two_phase)
        T = T_try
        r, M, res, der = accepted
        if res > 0.0:
            below = max(below, T)
        elif res < 0.0:
            above = min(above, T)
        outer += 1
        Ts.append(T)
        rel.append(abs(res) / scale)
        newton.append(r.iterations.newton)
    return NestedResult(r, T, M, outer, np.array(Ts), np.array(rel), float(T0), fallback, newton, config.eps_r)


def flash_hp(mix: Mixture, h_hat: float, p: float, T0: float | None = None, *, basis: ReductionBasis | None = None,
             config: NestedConfig = DEFAULT_NESTED, K0=None) -> NestedResult:
    """Isenthalpic-isobaric flash (h in J/mol, p in Pa)."""
    if not p > 0.0:
        raise DomainError("pressure must be positive")
    if config.T0_strategy == "user" and T0 is None:
        raise DomainError("T0_strategy 'user' needs T0")
    return _nested(mix, "hp", float(h_hat), float(p), T0, basis, config, K0=K0)


def flash_uv(mix: Mixture, u_hat: float, v_hat: float, T0: float | None = None, *,
             basis: ReductionBasis | None = None, config: NestedConfig = DEFAULT_NESTED,
             p0: float | None = None, K0=None) -> NestedResult:
    """Isoenergetic-isochoric flash (u in J/mol, v in m^3/mol).

    ``p0`` replaces the pressure estimate used for Wilson K-factors when the
    inner VT flash has no warm start.
    """
    if not v_hat > 0.0:
        raise DomainError("v_hat must be positive")
    if config.T0_strategy == "user" and T0 is None:
        raise DomainError("T0_strategy 'user' needs T0")
    return _nested(mix, "uv", float(u_hat), float(v_hat), T0, basis, config, p0=p0, K0=K0)
