"""Independent full-space reference flash.

Deliberately naive and slow: the mixture energy parameter is built from the
full a_ij matrix, volumes come from ``numpy.roots``, the vapor fraction from
bisection, and K-factors from plain successive substitution.  Nothing here
shares code with the reduced-space solvers beyond the pure-component
parameters, so agreement between the two is a meaningful check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cubic_eos import MixParams, PureParams, R, mixture_params, pure_params
from .errors import ConvergenceError, DomainError
from .fluid_db import EosSpec, Mixture

SSI_CAP = 100_000


@dataclass
class OracleReport:
    status: str  # "two-phase", "single-phase" or "failed"
    theta: float
    x: np.ndarray
    y: np.ndarray
    K: np.ndarray
    vL: float
    vV: float
    iterations: int
    residual: float
    history: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status in ("two-phase", "single-phase")


def _phase(z, pp: PureParams, kappa) -> MixParams:
    z = np.asarray(z, dtype=float)
    return mixture_params(z / z.sum(), pp, kappa)


def _roots(T, p, a, b, eos):
    d1, d2 = eos.delta1, eos.delta2
    # p(v - b)(v + d1 b)(v + d2 b) - RT (v + d1 b)(v + d2 b) + a (v - b) = 0
    s, pr = (d1 + d2) * b, d1 * d2 * b * b
    c = [p, p * (s - b) - R * T, p * (pr - s * b) - R * T * s + a, -p * pr * b - R * T * pr - a * b]
    r = np.roots(c)
    real = np.sort(r[np.abs(r.imag) <= 1e-9 * np.abs(r.real)].real)
    return real[real > b]


def _gibbs(T, p, v, a, b, eos):
    d1, d2 = eos.delta1, eos.delta2
    F = math.log((v + d1 * b) / (v + d2 * b))
    return p * v / (R * T) - 1.0 - math.log(p * (v - b) / (R * T)) - a * F / ((d1 - d2) * b * R * T)


def stable_volume(T: float, p: float, a: float, b: float, eos: EosSpec) -> float:
    """Root of the cubic with the lowest Gibbs energy."""
    roots = _roots(T, p, a, b, eos)
    if roots.size == 0:
        raise DomainError(f"no volume root above the co-volume at T = {T}, p = {p}")
    return float(min(roots, key=lambda v: _gibbs(T, p, v, a, b, eos)))


def fugacity_coeff(T: float, p: float, v: float, z, mp: MixParams, pp: PureParams, eos: EosSpec) -> np.ndarray:
    """ln phi_i of a phase with composition z at volume v.

    ``mp`` must be the mixture parameters of z; its ``g`` vector (the row
    sums of a_ij weighted by z) carries the composition dependence.
    """
    a, b = mp.a, mp.b
    if not v > b:
        raise DomainError(f"specific volume {v!r} must exceed the co-volume {b!r}")
    b_hat = pp.b_hat
    if b == 0.0:
        return np.zeros_like(b_hat)
    d1, d2 = eos.delta1, eos.delta2
    Z = p * v / (R * T)
    B = b * p / (R * T)
    F = math.log((v + d1 * b) / (v + d2 * b))
    attract = 0.0 if a == 0.0 else a / ((d1 - d2) * b * R * T)
    coupling = 2.0 * mp.g / a if a != 0.0 else np.zeros_like(b_hat)
    return b_hat / b * (Z - 1.0) - math.log(Z - B) - attract * (coupling - b_hat / b) * F


def rr_bisection(z, K, tol: float = 1e-13) -> float:
    """Rachford-Rice root inside (1/(1 - K_max), 1/(1 - K_min)) by bisection."""
    z = np.asarray(z, dtype=float)
    K = np.asarray(K, dtype=float)
    if not (K.max() > 1.0 > K.min()):
        raise DomainError("K - 1 has no sign change")
    lo = 1.0 / (1.0 - K.max())
    hi = 1.0 / (1.0 - K.min())

    def f(t):
        return float(np.sum(z * (K - 1.0) / (1.0 + t * (K - 1.0))))

    width = hi - lo
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, abs(mid)) or hi - lo <= 1e-3 * tol * width:
            break
    return 0.5 * (lo + hi)


def tpd_min(mix: Mixture, T: float, p: float, z=None, v_feed: float | None = None, tol: float = 1e-12,
            max_iter: int = 20_000):
    """(tm, w) of the lowest tangent-plane-distance stationary point found from Wilson trials."""
    eos = mix.eos
    z = mix.z if z is None else np.asarray(z, dtype=float)
    pp = pure_params(mix, eos, T)
    mz = _phase(z, pp, mix.kappa)
    if v_feed is None:
        v_feed = stable_volume(T, p, mz.a, mz.b, eos)
    d = np.log(z) + fugacity_coeff(T, p, v_feed, z, mz, pp, eos)
    Kw = mix.pc / p * np.exp(5.373 * (1.0 + mix.omega) * (1.0 - mix.Tc / T))
    best = (0.0, z.copy())
    for W in (z * Kw, z / Kw):
        lnW = np.log(W)
        for _ in range(max_iter):
            w = np.exp(lnW) / np.exp(lnW).sum()
            mw = _phase(w, pp, mix.kappa)
            v = stable_volume(T, p, mw.a, mw.b, eos)
            new = d - fugacity_coeff(T, p, v, w, mw, pp, eos)
            done = np.max(np.abs(new - lnW)) < tol
            lnW = new
            if done:
                break
        tm = 1.0 + float(np.sum(np.exp(lnW) * (lnW + fugacity_coeff(T, p, v, w, mw, pp, eos) - d - 1.0)))
        if tm < best[0]:
            best = (tm, np.exp(lnW) / np.exp(lnW).sum())
    return best


def flash_pt_fullspace_ssi(mix: Mixture, T: float, p: float, tol: float = 1e-12, K0=None,
                           max_iter: int = SSI_CAP, restart: bool = True) -> OracleReport:
    """Successive-substitution PT flash on ln K with full a_ij mixing.

    Substitution from Wilson factors can fall into the trivial solution
    although the feed is unstable.  With ``restart`` a collapsed run is
    checked with :func:`tpd_min` and, if a negative tangent-plane distance
    exists, repeated from the trial phase.
    """
    rep = _ssi(mix, T, p, tol, K0, max_iter)
    if rep.status == "single-phase" and restart:
        tm, w = tpd_min(mix, T, p)
        if tm < -1e-10:
            again = _ssi(mix, T, p, tol, w / mix.z, max_iter)
            again.iterations += rep.iterations
            again.history = rep.history + again.history
            return again
    return rep


def _ssi(mix, T, p, tol, K0, max_iter):
    eos = mix.eos
    z = mix.z
    pp = pure_params(mix, eos, T)
    K = (mix.pc / p * np.exp(5.373 * (1.0 + mix.omega) * (1.0 - mix.Tc / T))
         if K0 is None else np.asarray(K0, dtype=float).copy())
    hist = []
    for it in range(1, max_iter + 1):
        if not K.max() > 1.0 > K.min():
            break
        # theta may leave [0, 1] while iterating (negative flash); only the converged root is classified
        theta = rr_bisection(z, K)
        x = z / (1.0 + theta * (K - 1.0))
        y = K * x
        x, y = x / x.sum(), y / y.sum()
        mL, mV = _phase(x, pp, mix.kappa), _phase(y, pp, mix.kappa)
        vL = stable_volume(T, p, mL.a, mL.b, eos)
        vV = stable_volume(T, p, mV.a, mV.b, eos)
        lnK = fugacity_coeff(T, p, vL, x, mL, pp, eos) - fugacity_coeff(T, p, vV, y, mV, pp, eos)
        r = float(np.linalg.norm(lnK - np.log(K)))
        hist.append(r)
        K = np.exp(lnK)
        if np.max(np.abs(K - 1.0)) < 1e-8:
            break
        if r <= tol:
            if not 0.0 < theta < 1.0:
                break
            if vL > vV:
                theta, x, y, K, vL, vV = 1.0 - theta, y, x, 1.0 / K, vV, vL
            return OracleReport("two-phase", float(theta), x, y, K, vL, vV, it, r, hist)
    else:
        raise ConvergenceError(f"full-space SSI did not converge in {max_iter} iterations")
    mz = _phase(z, pp, mix.kappa)
    v = stable_volume(T, p, mz.a, mz.b, eos)
    return OracleReport("single-phase", math.nan, z.copy(), z.copy(), K, v, v, len(hist),
                        hist[-1] if hist else 0.0, hist)
