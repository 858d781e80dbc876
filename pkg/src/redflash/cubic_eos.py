"""General two-parameter cubic equation of state.

    p = RT/(v - b) - a / ((v + d1 b)(v + d2 b))

The ``_``-prefixed functions are compiled kernels operating on plain floats
and arrays; the public wrappers take the named-tuple parameter bundles and
validate their domain.
"""
from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numba
import numpy as np

from .errors import DomainError, NoRootError
from .fluid_db import Component, EosSpec, Mixture

R = 8.31446261815324  # J/(mol K)

jit = numba.njit(cache=True, nogil=True)


class PureParams(NamedTuple):
    a_hat: np.ndarray  # Pa m^6/mol^2
    b_hat: np.ndarray  # m^3/mol
    T: float


class MixParams(NamedTuple):
    a: float
    b: float
    g: np.ndarray


class PressureDerivs(NamedTuple):
    dp_dv: float
    dp_dT: float
    dp_db: float
    dp_dq: np.ndarray


# --------------------------------------------------------------------------- kernels

@jit
def _alpha_slope(omega, kind):
    if kind == 1:
        return 0.48508 + 1.55171 * omega - 0.15613 * omega * omega
    if omega < 0.5:
        return 0.37464 + 1.54226 * omega - 0.26992 * omega * omega
    return 0.3796 + 1.485 * omega - 0.1644 * omega * omega + 0.01667 * omega * omega * omega


@jit
def _alpha_slopes(omega, kind):
    out = np.empty(omega.shape[0])
    for i in range(omega.shape[0]):
        out[i] = _alpha_slope(omega[i], kind)
    return out


@jit
def _pure_params(Tc, pc, omega, eos, T):
    n = Tc.shape[0]
    a_hat = np.empty(n)
    b_hat = np.empty(n)
    for i in range(n):
        th = 1.0 + _alpha_slope(omega[i], eos.alpha) * (1.0 - math.sqrt(T / Tc[i]))
        a_hat[i] = eos.omega_a * (R * Tc[i]) ** 2 / pc[i] * th * th
        b_hat[i] = eos.omega_b * R * Tc[i] / pc[i]
    return a_hat, b_hat


@jit
def _pressure(T, v, a, b, d1, d2):
    return R * T / (v - b) - a / ((v + d1 * b) * (v + d2 * b))


@jit
def _dp_dv(T, v, a, b, d1, d2):
    P = (v + d1 * b) * (v + d2 * b)
    return -R * T / (v - b) ** 2 + a * (2.0 * v + (d1 + d2) * b) / (P * P)


@jit
def _dp_dT(v, a_T, b, d1, d2):
    return R / (v - b) - a_T / ((v + d1 * b) * (v + d2 * b))


@jit
def _dp_db(T, v, a, b, d1, d2):
    P = (v + d1 * b) * (v + d2 * b)
    return R * T / (v - b) ** 2 + a * (2.0 * d1 * d2 * b + v * (d1 + d2)) / (P * P)


@jit
def _dp_dq(v, b, lam, q, d1, d2):
    P = (v + d1 * b) * (v + d2 * b)
    return -2.0 * lam * q / P


@jit
def _cubic_coeffs(T, p, a, b, d1, d2):
    """(rho2, rho1, rho0) of the monic volume cubic at given T and p."""
    rtp = R * T / p
    dd = d1 * d2
    ds = d1 + d2
    r0 = -a * b / p - (b + rtp) * dd * b * b
    r1 = dd * b * b + a / p - ds * b * (b + rtp)
    r2 = (ds - 1.0) * b - rtp
    return r2, r1, r0


@jit
def _polish(x, c2, c1, c0):
    f = ((x + c2) * x + c1) * x + c0
    df = (3.0 * x + 2.0 * c2) * x + c1
    if df != 0.0:
        return x - f / df
    return x


@jit
def _real_cubic_roots(c2, c1, c0):
    """Real roots of x^3 + c2 x^2 + c1 x + c0, ascending, one Newton polish each.

    Returns (count, roots[3]); unused slots are NaN.
    """
    out = np.full(3, np.nan)
    shift = c2 / 3.0
    p = c1 - c2 * shift
    q = 2.0 * shift ** 3 - shift * c1 + c0
    disc = 0.25 * q * q + p * p * p / 27.0
    if disc > 0.0:
        sq = math.sqrt(disc)
        u = -0.5 * q + (sq if q <= 0.0 else -sq)
        cu = math.copysign(abs(u) ** (1.0 / 3.0), u)
        t = cu - p / (3.0 * cu) if cu != 0.0 else 0.0
        out[0] = _polish(t - shift, c2, c1, c0)
        return 1, out
    if p == 0.0:
        out[0] = _polish(-shift, c2, c1, c0)
        return 1, out
    m = 2.0 * math.sqrt(-p / 3.0)
    arg = 3.0 * q / (p * m)
    arg = min(1.0, max(-1.0, arg))
    phi = math.acos(arg) / 3.0
    for k in range(3):
        out[k] = _polish(m * math.cos(phi - 2.0 * math.pi * k / 3.0) - shift, c2, c1, c0)
    out.sort()
    return 3, out


@jit
def _gibbs_score(T, v, a, b, d1, d2):
    """-sum_i z_i ln(psi_i) of a phase; at fixed (T, p, z) it ranks Gibbs energy."""
    P = (v + d1 * b) * (v + d2 * b)
    F = math.log((v + d1 * b) / (v + d2 * b))
    return -(math.log(v - b) - b / (v - b) + a * v / (R * T * P) + a * F / ((d1 - d2) * b * R * T))


@jit
def _solve_volume(T, p, a, b, d1, d2):
    """Stable volume root; returns (v, kind).

    kind: -1 no physical root, 0 unique root, 1 smallest of several chosen,
    2 largest of several chosen.
    """
    c2, c1, c0 = _cubic_coeffs(T, p, a, b, d1, d2)
    nr, roots = _real_cubic_roots(c2, c1, c0)
    floor = b * (1.0 + 1e-12)
    lo = np.nan
    hi = np.nan
    for k in range(nr):
        r = roots[k]
        if r > floor:
            if not (lo <= r):
                lo = r
            if not (hi >= r):
                hi = r
    if math.isnan(lo):
        return np.nan, -1
    if lo == hi:
        return lo, 0
    if _gibbs_score(T, lo, a, b, d1, d2) <= _gibbs_score(T, hi, a, b, d1, d2):
        return lo, 1
    return hi, 2


# --------------------------------------------------------------------------- public API

def _crit_arrays(components):
    if isinstance(components, Mixture):
        return components.Tc, components.pc, components.omega
    comps: Sequence[Component] = [components] if isinstance(components, Component) else components
    return (
        np.array([c.Tc for c in comps], dtype=float),
        np.array([c.pc for c in comps], dtype=float),
        np.array([c.omega for c in comps], dtype=float),
    )


def alpha_slope(omega: float, eos: EosSpec) -> float:
    """The acentric polynomial c(omega) of the EoS."""
    return float(_alpha_slope(float(omega), eos.alpha))


def pure_params(components, eos: EosSpec, T: float) -> PureParams:
    if not T > 0.0:
        raise DomainError(f"temperature must be positive, got {T}")
    Tc, pc, omega = _crit_arrays(components)
    a_hat, b_hat = _pure_params(Tc, pc, omega, eos, float(T))
    return PureParams(a_hat, b_hat, float(T))


def mixture_params(z, pp: PureParams, kappa) -> MixParams:
    z = np.asarray(z, dtype=float)
    if abs(z.sum() - 1.0) > 1e-10:
        raise DomainError(f"composition sums to {z.sum()!r}")
    sa = np.sqrt(pp.a_hat)
    A = (1.0 - np.asarray(kappa, dtype=float)) * np.outer(sa, sa)
    g = A @ z
    return MixParams(float(z @ g), float(z @ pp.b_hat), g)


def _check_volume(v, b):
    if not v > b:
        raise DomainError(f"specific volume {v!r} must exceed the co-volume {b!r}")


def pressure(T: float, v: float, mp: MixParams, eos: EosSpec) -> float:
    _check_volume(v, mp.b)
    return float(_pressure(T, v, mp.a, mp.b, eos.delta1, eos.delta2))


def pressure_derivs(T, v, mp: MixParams, eos: EosSpec, da_dT: float = 0.0, lam=None, q=None) -> PressureDerivs:
    """Partial derivatives of p at fixed composition parameters.

    ``dp_dT`` uses the supplied ``da_dT``; ``dp_dq`` is empty unless the
    reduced parameters ``q`` and eigenvalues ``lam`` are given.
    """
    _check_volume(v, mp.b)
    d1, d2 = eos.delta1, eos.delta2
    if lam is not None and q is not None:
        dq = _dp_dq(v, mp.b, np.asarray(lam, float), np.asarray(q, float), d1, d2)
    else:
        dq = np.empty(0)
    return PressureDerivs(
        float(_dp_dv(T, v, mp.a, mp.b, d1, d2)),
        float(_dp_dT(v, da_dT, mp.b, d1, d2)),
        float(_dp_db(T, v, mp.a, mp.b, d1, d2)),
        dq,
    )


def cubic_roots(T: float, p: float, a: float, b: float, eos: EosSpec) -> np.ndarray:
    """All real roots of the volume cubic (physical or not), ascending."""
    c2, c1, c0 = _cubic_coeffs(T, p, a, b, eos.delta1, eos.delta2)
    nr, roots = _real_cubic_roots(c2, c1, c0)
    return roots[:nr].copy()


def gibbs_score(T: float, v: float, a: float, b: float, eos: EosSpec) -> float:
    return float(_gibbs_score(T, v, a, b, eos.delta1, eos.delta2))


def solve_cubic_volume(T: float, p: float, mp: MixParams, eos: EosSpec) -> float:
    """Volume root with the lowest Gibbs energy among roots above the co-volume."""
    if not (T > 0.0 and p > 0.0):
        raise DomainError("temperature and pressure must be positive")
    v, kind = _solve_volume(T, p, mp.a, mp.b, eos.delta1, eos.delta2)
    if kind < 0:
        raise NoRootError(f"no volume root above the co-volume at T={T} K, p={p} Pa")
    return float(v)
