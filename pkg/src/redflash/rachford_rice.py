"""Rachford-Rice vapor fraction by the convex transformation.

With the components ordered so that K_1 is the largest and K_n the smallest
factor, c_i = 1/(1 - K_i) and theta mapped to sigma = (theta - c_1)/(c_n - theta)
in (0, inf), the function G(sigma) = (1 + sigma) S(sigma) is convex where
positive and H = -sigma G is convex where G is negative, so Newton on the
matching branch converges monotonically from any sigma_0 > 0.
"""
from __future__ import annotations

from typing import NamedTuple

import numba
import numpy as np

from .errors import ConvergenceError, DegenerateError, DomainError, SinglePhaseSignal

jit = numba.njit(cache=True, nogil=True)

RR_OK = 0
RR_ALL_LIQUID = 1  # every K <= 1: no root, feed is liquid-like
RR_ALL_VAPOR = 2  # every K >= 1: no root, feed is vapor-like
RR_DEGENERATE = 3  # all K equal to one
RR_MAXITER = 4

DEFAULT_TOL = 1e-14
MAX_ITER = 50


class RRWork(NamedTuple):
    c: np.ndarray
    d: np.ndarray
    sigma: float
    ordering: np.ndarray


class RRTrace(NamedTuple):
    theta: float
    sigma: np.ndarray  # iterates, starting with sigma_0
    branch: np.ndarray  # +1 Newton on G, -1 on H
    residual: float


@jit
def _rr_residual(z, K, theta):
    acc = 0.0
    for i in range(z.shape[0]):
        km1 = K[i] - 1.0
        acc += z[i] * km1 / (1.0 + theta * km1)
    return acc


@jit
def _extremes(K):
    imax = -1
    imin = -1
    for i in range(K.shape[0]):
        if K[i] == 1.0:
            continue
        if imax < 0 or K[i] > K[imax]:
            imax = i
        if imin < 0 or K[i] < K[imin]:
            imin = i
    return imax, imin


@jit
def _rr_setup(K):
    """(status, c, d, c1, cn); c and d in the original component order."""
    n = K.shape[0]
    c = np.empty(n)
    d = np.empty(n)
    i1, i2 = _extremes(K)
    if i1 < 0:
        return RR_DEGENERATE, c, d, 0.0, 0.0
    if K[i1] <= 1.0:
        return RR_ALL_LIQUID, c, d, 0.0, 0.0
    if K[i2] >= 1.0:
        return RR_ALL_VAPOR, c, d, 0.0, 0.0
    for i in range(n):
        c[i] = 1.0 / (1.0 - K[i]) if K[i] != 1.0 else np.inf
    c1 = c[i1]
    cn = c[i2]
    for i in range(n):
        d[i] = (c1 - c[i]) / (cn - c1) if K[i] != 1.0 else -np.inf
    return RR_OK, c, d, c1, cn


@jit
def _rr_sigma(z, K, d, sigma):
    """S, dS/dsigma; components with K = 1 are skipped."""
    S = 0.0
    dS = 0.0
    for i in range(z.shape[0]):
        if K[i] == 1.0:
            continue
        den = d[i] + sigma * (1.0 + d[i])
        S += z[i] / den
        dS -= z[i] * (1.0 + d[i]) / (den * den)
    return S, dS


@jit
def _solve_rr_trace(z, K, tol, maxit, sigmas, branches):
    """Newton in sigma. Returns (status, theta, iterations, residual)."""
    status, c, d, c1, cn = _rr_setup(K)
    if status != RR_OK:
        return status, np.nan, 0, np.nan
    sigma = 1.0
    sigmas[0] = sigma
    theta = (c1 + sigma * cn) / (1.0 + sigma)
    res = _rr_residual(z, K, theta)
    for it in range(maxit):
        if abs(res) <= tol:
            return RR_OK, theta, it, res
        S, dS = _rr_sigma(z, K, d, sigma)
        G = (1.0 + sigma) * S
        if G > 0.0:
            dG = S + (1.0 + sigma) * dS
            step = G / dG
            branches[it] = 1
        else:
            Hv = -sigma * G
            dH = -(1.0 + 2.0 * sigma) * S - sigma * (1.0 + sigma) * dS
            step = Hv / dH
            branches[it] = -1
        new = sigma - step
        if not new > 0.0:
            new = 0.1 * sigma
        stagnated = abs(new - sigma) <= 4e-16 * sigma
        sigma = new
        sigmas[it + 1] = sigma
        theta = (c1 + sigma * cn) / (1.0 + sigma)
        res = _rr_residual(z, K, theta)
        if stagnated:
            return RR_OK, theta, it + 1, res
    if abs(res) <= tol:
        return RR_OK, theta, maxit, res
    return RR_MAXITER, theta, maxit, res


@jit
def _solve_rr(z, K, tol, maxit):
    sigmas = np.empty(maxit + 1)
    branches = np.empty(maxit, dtype=np.int64)
    return _solve_rr_trace(z, K, tol, maxit, sigmas, branches)


@jit
def _phase_compositions(z, K, theta):
    n = z.shape[0]
    x = np.empty(n)
    y = np.empty(n)
    ok = True
    for i in range(n):
        den = 1.0 + theta * (K[i] - 1.0)
        if not den > 0.0:
            ok = False
        x[i] = z[i] / den
        y[i] = K[i] * x[i]
    return x, y, ok


# --------------------------------------------------------------------------- public API

def _check(z_hat, K):
    z = np.asarray(z_hat, dtype=float)
    K = np.asarray(K, dtype=float)
    if z.shape != K.shape or z.ndim != 1:
        raise DomainError("z and K must be vectors of equal length")
    if np.any(K <= 0.0) or not np.all(np.isfinite(K)):
        raise DomainError("K-factors must be positive and finite")
    return z, K


def setup(K) -> RRWork:
    """Transformation data for a K vector with a two-phase root."""
    K = np.asarray(K, dtype=float)
    status, c, d, _, _ = _rr_setup(K)
    _raise_status(status)
    i1, i2 = _extremes(K)
    rest = [i for i in np.argsort(-K, kind="stable") if i not in (i1, i2)]
    ordering = np.array([i1, *rest, i2])
    return RRWork(c, d, 1.0, ordering)


def _raise_status(status, res=None):
    if status == RR_DEGENERATE:
        raise DegenerateError("all K-factors equal one")
    if status in (RR_ALL_LIQUID, RR_ALL_VAPOR):
        side = "liquid" if status == RR_ALL_LIQUID else "vapor"
        raise SinglePhaseSignal(f"no sign change in K - 1: feed is {side}-like")
    if status == RR_MAXITER:
        raise ConvergenceError(f"Rachford-Rice Newton hit {MAX_ITER} iterations (residual {res})")


def solve_rachford_rice_trace(z_hat, K, tol: float = DEFAULT_TOL) -> RRTrace:
    z, K = _check(z_hat, K)
    sigmas = np.empty(MAX_ITER + 1)
    branches = np.zeros(MAX_ITER, dtype=np.int64)
    status, theta, it, res = _solve_rr_trace(z, K, tol, MAX_ITER, sigmas, branches)
    _raise_status(status, res)
    return RRTrace(float(theta), sigmas[: it + 1].copy(), branches[:it].copy(), float(res))


def solve_rachford_rice(z_hat, K, tol: float = DEFAULT_TOL) -> float:
    """Root theta of sum z_i (K_i - 1)/(1 + theta (K_i - 1)) in (c_1, c_n).

    The root may lie outside [0, 1]; callers decide what that means.
    """
    z, K = _check(z_hat, K)
    status, theta, _, res = _solve_rr(z, K, tol, MAX_ITER)
    _raise_status(status, res)
    return float(theta)


def rr_residual(z_hat, K, theta: float) -> float:
    z, K = _check(z_hat, K)
    return float(_rr_residual(z, K, float(theta)))


def phase_compositions(z_hat, K, theta: float):
    """Liquid and vapor mole fractions for a given split."""
    z, K = _check(z_hat, K)
    x, y, ok = _phase_compositions(z, K, float(theta))
    if not ok:
        raise DomainError(f"1 + theta (K_i - 1) <= 0 for some component at theta = {theta}")
    return x, y
