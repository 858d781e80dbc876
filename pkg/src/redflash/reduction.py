"""Spectral reduction of the interaction matrix and the h-space machinery.

With beta = 1 - kappa = sum_k lambda_k s_k s_k^T, the mixture energy
parameter becomes a = sum_k lambda_k q_k^2 with q_k = sum_i z_i s_ki sqrt(a_i).
Every ln K_i is then an affine function of m + 2 numbers h^Delta, which are
the unknowns of the reduced Newton iteration.
"""
from __future__ import annotations

import math
from functools import lru_cache
from typing import NamedTuple

import numba
import numpy as np

from .cubic_eos import R, _pure_params
from .errors import ConvergenceError, DegenerateError, DomainError
from .fluid_db import EosSpec, Mixture

jit = numba.njit(cache=True, nogil=True)

DEFAULT_TRUNC_TOL = 1e-10


class ReductionBasis(NamedTuple):
    m: int
    lam: np.ndarray  # (m,)
    s: np.ndarray  # (m, n) orthonormal rows
    s_hat: np.ndarray  # (m, n), s_ki * sqrt(a_i)
    b_hat: np.ndarray  # (n,)
    T: float


class CompositionDerivs(NamedTuple):
    """Sensitivities with respect to h^Delta; the last axis has length m + 2."""

    dK: np.ndarray  # (n, m+2)
    dtheta: np.ndarray  # (m+2,)
    dx: np.ndarray  # (n, m+2)
    dy: np.ndarray  # (n, m+2)
    dqL: np.ndarray  # (m, m+2)
    dqV: np.ndarray  # (m, m+2)
    dbL: np.ndarray  # (m+2,)
    dbV: np.ndarray  # (m+2,)


# --------------------------------------------------------------------------- eigen

@jit
def _jacobi_eigh(A, tol, max_sweeps):
    """Cyclic Jacobi rotations on a symmetric matrix.

    Returns (eigenvalues, eigenvectors as columns, sweeps); sweeps = -1 when
    the off-diagonal norm did not drop below tol * ||A||_F.
    """
    n = A.shape[0]
    A = A.copy()
    V = np.eye(n)
    fro = math.sqrt(np.sum(A * A))
    if fro == 0.0:
        return np.zeros(n), V, 0
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off += A[i, j] * A[i, j]
        if math.sqrt(off) < tol * fro:
            return np.diag(A).copy(), V, sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                th = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(th) + math.sqrt(th * th + 1.0))
                if th < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * akq
                    A[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = A[p, k]
                    aqk = A[q, k]
                    A[p, k] = c * apk - s * aqk
                    A[q, k] = s * apk + c * aqk
                for k in range(n):
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = c * vkp - s * vkq
                    V[k, q] = s * vkp + c * vkq
    return np.diag(A).copy(), V, -1


def jacobi_eigh(A: np.ndarray, tol: float = 1e-14, max_sweeps: int = 100):
    """Eigenpairs of a symmetric matrix (columns of the second output)."""
    A = np.ascontiguousarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or not np.allclose(A, A.T, rtol=0, atol=1e-14):
        raise DomainError("jacobi_eigh needs a square symmetric matrix")
    w, V, sweeps = _jacobi_eigh(A, tol, max_sweeps)
    if sweeps < 0:
        raise ConvergenceError(f"Jacobi rotations did not converge in {max_sweeps} sweeps")
    return w, V


@lru_cache(maxsize=64)
def _beta_spectrum(kappa_bytes: bytes, n: int):
    beta = 1.0 - np.frombuffer(kappa_bytes, dtype=float).reshape(n, n)
    w, V = jacobi_eigh(beta)
    order = np.argsort(-np.abs(w), kind="stable")
    w = w[order]
    S = V[:, order].T.copy()
    for k in range(n):
        j = int(np.argmax(np.abs(S[k])))
        if S[k, j] < 0.0:
            S[k] = -S[k]
    w.setflags(write=False)
    S.setflags(write=False)
    return w, S


def beta_spectrum(kappa: np.ndarray):
    """Eigenvalues of beta = 1 - kappa sorted by |lambda| (descending) and eigenvector rows."""
    kappa = np.ascontiguousarray(kappa, dtype=float)
    return _beta_spectrum(kappa.tobytes(), kappa.shape[0])


def retained_count(kappa: np.ndarray, trunc_tol: float = DEFAULT_TRUNC_TOL) -> int:
    """Smallest m whose rank-m reconstruction of beta is within trunc_tol (max-norm)."""
    lam, S = beta_spectrum(kappa)
    beta = 1.0 - np.asarray(kappa, dtype=float)
    approx = np.zeros_like(beta)
    for m in range(len(lam) + 1):
        if np.max(np.abs(beta - approx)) <= trunc_tol:
            return max(m, 1)
        if m < len(lam):
            approx += lam[m] * np.outer(S[m], S[m])
    return len(lam)


def sqrt_a_hat(mix: Mixture, eos: EosSpec, T: float) -> np.ndarray:
    a_hat, _ = _pure_params(mix.Tc, mix.pc, mix.omega, eos, float(T))
    return np.sqrt(a_hat)


def build_reduction_basis(
    mix: Mixture, eos: EosSpec | None = None, T: float = 298.15, trunc_tol: float = DEFAULT_TRUNC_TOL, full: bool = False
) -> ReductionBasis:
    """Reduction basis at temperature T.

    ``full=True`` keeps all n eigenpairs (m = n), which turns the reduced
    Newton iteration into an equivalent full-size one for comparison runs.
    """
    eos = mix.eos if eos is None else eos
    if not T > 0.0:
        raise DomainError(f"temperature must be positive, got {T}")
    lam, S = beta_spectrum(mix.kappa)
    m = len(lam) if full else retained_count(mix.kappa, trunc_tol)
    a_hat, b_hat = _pure_params(mix.Tc, mix.pc, mix.omega, eos, float(T))
    s = np.ascontiguousarray(S[:m])
    return ReductionBasis(m, np.ascontiguousarray(lam[:m]), s, s * np.sqrt(a_hat), b_hat, float(T))


def rebase_temperature(basis: ReductionBasis, mix: Mixture, eos: EosSpec, T: float) -> ReductionBasis:
    """Same eigenvectors, scaled with sqrt(a_i) at a new temperature."""
    a_hat, b_hat = _pure_params(mix.Tc, mix.pc, mix.omega, eos, float(T))
    return basis._replace(s_hat=basis.s * np.sqrt(a_hat), b_hat=b_hat, T=float(T))


# --------------------------------------------------------------------------- kernels

@jit
def _energy_from_q(q, lam):
    a = 0.0
    for k in range(q.shape[0]):
        a += lam[k] * q[k] * q[k]
    return a


@jit
def _h_coeffs(q, b, v, T, lam, d1, d2):
    m = q.shape[0]
    h = np.empty(m + 2)
    P = (v + d1 * b) * (v + d2 * b)
    F = math.log((v + d1 * b) / (v + d2 * b))
    dd = d1 - d2
    rt = R * T
    a = 0.0
    for k in range(m):
        h[k] = 2.0 * lam[k] * q[k] * F / (dd * b * rt)
        a += lam[k] * q[k] * q[k]
    h[m] = a * (v * b / P - F / dd) / (rt * b * b) - 1.0 / (v - b)
    h[m + 1] = math.log(v - b)
    return h


@jit
def _h_derivs(q, b, v, T, lam, d1, d2):
    """(dh/dq (m+2, m), dh/db (m+2,), dh/dv (m+2,)) at fixed T."""
    m = q.shape[0]
    Hq = np.zeros((m + 2, m))
    Hb = np.empty(m + 2)
    Hv = np.empty(m + 2)
    P = (v + d1 * b) * (v + d2 * b)
    F = math.log((v + d1 * b) / (v + d2 * b))
    dd = d1 - d2
    rt = R * T
    brace = v * b / P - F / dd
    a = 0.0
    for k in range(m):
        a += lam[k] * q[k] * q[k]
    for k in range(m):
        Hq[k, k] = 2.0 * lam[k] * F / (dd * b * rt)
        Hq[m, k] = 2.0 * lam[k] * q[k] * brace / (rt * b * b)
        Hb[k] = 2.0 * lam[k] * q[k] * brace / (rt * b * b)
        Hv[k] = -2.0 * lam[k] * q[k] / (rt * P)
    w = 4.0 * d1 * d2 * b * b + 3.0 * v * b * (d1 + d2) + 2.0 * v * v
    Hb[m] = a * v * (2.0 * F / (b * v * dd) - w / (P * P)) / (rt * b * b) - 1.0 / (v - b) ** 2
    Hv[m] = a * (2.0 * b * d1 * d2 + v * (d1 + d2)) / (rt * P * P) + 1.0 / (v - b) ** 2
    Hb[m + 1] = -1.0 / (v - b)
    Hv[m + 1] = 1.0 / (v - b)
    return Hq, Hb, Hv


@jit
def _ln_psi(h, s_hat, b_hat):
    m = s_hat.shape[0]
    n = s_hat.shape[1]
    out = np.empty(n)
    for i in range(n):
        acc = h[m] * b_hat[i] + h[m + 1]
        for k in range(m):
            acc += h[k] * s_hat[k, i]
        out[i] = acc
    return out


@jit
def _reduced_q(z, s_hat):
    return s_hat @ z


@jit
def _dK_dh(K, s_hat, b_hat):
    m = s_hat.shape[0]
    n = K.shape[0]
    dK = np.empty((n, m + 2))
    for i in range(n):
        for k in range(m):
            dK[i, k] = K[i] * s_hat[k, i]
        dK[i, m] = K[i] * b_hat[i]
        dK[i, m + 1] = K[i]
    return dK


@jit
def _comp_derivs(K, theta, z, s_hat, b_hat):
    """Composition, split and reduced-parameter sensitivities; ok=False if degenerate."""
    m = s_hat.shape[0]
    n = K.shape[0]
    M = m + 2
    dK = _dK_dh(K, s_hat, b_hat)
    d = np.empty(n)
    den = 0.0
    for i in range(n):
        t = 1.0 + theta * (K[i] - 1.0)
        d[i] = -z[i] / (t * t)
        den += d[i] * (K[i] - 1.0) ** 2
    dth = np.zeros(M)
    dx = np.zeros((n, M))
    dy = np.zeros((n, M))
    if den == 0.0:
        return dK, dth, dx, dy, np.zeros((m, M)), np.zeros((m, M)), np.zeros(M), np.zeros(M), False
    for be in range(M):
        acc = 0.0
        for i in range(n):
            acc += d[i] * dK[i, be]
        dth[be] = acc / den
    for i in range(n):
        km1 = K[i] - 1.0
        for be in range(M):
            dx[i, be] = d[i] * (theta * dK[i, be] + km1 * dth[be])
            dy[i, be] = d[i] * ((theta - 1.0) * dK[i, be] + K[i] * km1 * dth[be])
    dqL = s_hat @ dx
    dqV = s_hat @ dy
    dbL = b_hat @ dx
    dbV = b_hat @ dy
    return dK, dth, dx, dy, dqL, dqV, dbL, dbV, True


# --------------------------------------------------------------------------- public API

def reduced_parameters(z, basis: ReductionBasis) -> np.ndarray:
    return basis.s_hat @ np.asarray(z, dtype=float)


def energy_param_from_q(q, lam) -> float:
    q = np.asarray(q, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if q.shape != lam.shape:
        raise DomainError("q and lambda lengths differ")
    return float(np.dot(lam, q * q))


def h_coefficients(q, b: float, v: float, T: float, basis: ReductionBasis, eos: EosSpec) -> np.ndarray:
    if not v > b or not v + eos.delta2 * b > 0.0:
        raise DomainError(f"volume {v!r} outside the domain of the EoS (b = {b!r})")
    return _h_coeffs(np.asarray(q, dtype=float), float(b), float(v), float(T), basis.lam, eos.delta1, eos.delta2)


def h_derivatives(q, b: float, v: float, T: float, basis: ReductionBasis, eos: EosSpec):
    """Partial derivatives of h with respect to q, b and v."""
    if not v > b:
        raise DomainError(f"volume {v!r} must exceed the co-volume {b!r}")
    return _h_derivs(np.asarray(q, dtype=float), float(b), float(v), float(T), basis.lam, eos.delta1, eos.delta2)


def ln_psi(h, basis: ReductionBasis) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    if h.shape != (basis.m + 2,):
        raise DomainError(f"expected {basis.m + 2} h coefficients, got {h.shape}")
    return _ln_psi(h, basis.s_hat, basis.b_hat)


def ln_K_from_hdelta(h_delta, basis: ReductionBasis) -> np.ndarray:
    h_delta = np.asarray(h_delta, dtype=float)
    if not np.all(np.isfinite(h_delta)):
        raise DomainError("h_delta has non-finite entries")
    return ln_psi(h_delta, basis)


def k_theta_composition_derivs(K, theta: float, z_hat, basis: ReductionBasis) -> CompositionDerivs:
    K = np.asarray(K, dtype=float)
    if np.any(K <= 0.0):
        raise DomainError("K-factors must be positive")
    out = _comp_derivs(K, float(theta), np.asarray(z_hat, dtype=float), basis.s_hat, basis.b_hat)
    if not out[-1]:
        raise DegenerateError("sum d_i (K_i - 1)^2 vanished")
    return CompositionDerivs(*out[:-1])
