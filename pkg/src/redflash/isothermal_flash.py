"""PT- and VT-flash in the reduced h-space.

One successive-substitution pass turns the starting K-factors into m + 2
principal variables h^Delta = h^V - h^L; Newton iterations with the analytic
Jacobian then drive e = h^V - h^L - h^Delta to zero.  Phase volumes come from
the cubic at given pressure (PT) or from the quintic that combines pressure
equality with the volume constraint (VT).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numba
import numpy as np
from scipy.optimize import brentq

from .cubic_eos import R, _cubic_coeffs, _dp_db, _dp_dv, _pressure, _pure_params, _real_cubic_roots, _solve_volume
from .errors import (DomainError, FlashError, InfeasibleSplitError, NoRootError, SinglePhaseSignal,
                     SingularJacobianError)
from .fluid_db import EosSpec, Mixture
from .rachford_rice import RR_ALL_LIQUID, RR_ALL_VAPOR, RR_OK, _phase_compositions, _solve_rr
from .reduction import (
    ReductionBasis,
    _comp_derivs,
    _energy_from_q,
    _h_coeffs,
    _h_derivs,
    _ln_psi,
    _reduced_q,
    build_reduction_basis,
)

jit = numba.njit(cache=True, nogil=True)

MODE_PT = 0
MODE_VT = 1

# status codes of the compiled driver
ST_TWO_PHASE = 0
ST_SINGLE = 1
ST_MAXITER = -1
ST_SINGULAR = -2
ST_HALVING = -3
ST_NOROOT = -4

# codes of a state evaluation
EV_OK = 0
EV_RR_LIQUID = 1
EV_RR_VAPOR = 2
EV_RR_DEGENERATE = 3
EV_RR_FAIL = 4
EV_NO_ROOT = 5
EV_THETA_RANGE = 6
EV_INFEASIBLE = 7

STATUS_NAMES = {ST_TWO_PHASE: "two-phase", ST_SINGLE: "single-phase"}


@dataclass(frozen=True)
class FlashConfig:
    n_ssi: int = 1
    eps_ssi: float = 1e-2
    eps_newton: float = 1e-10
    max_newton: int = 50
    max_halvings: int = 20
    trivial_tol: float = 1e-8
    vt_pressure_init: str = "wilson-mean"  # or "eos"
    vt_pressure_floor: float = 1e3  # Pa, used with "eos"
    stability_check: bool = True  # tangent-plane test before accepting a single phase
    tpd_max_iter: int = 2000
    tpd_tol: float = 1e-10
    restart_ssi: int = 1000  # substitution passes (to 1e-6) before Newton on a restart


DEFAULT_CONFIG = FlashConfig()


class Iterations(NamedTuple):
    ssi: int
    newton: int


@dataclass
class FlashResult:
    status: str
    theta: float
    x: np.ndarray
    y: np.ndarray
    K: np.ndarray
    vL: float
    vV: float
    p: float
    T: float
    iterations: Iterations
    residual_history: np.ndarray
    h_delta: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status in ("two-phase", "single-phase")

    @property
    def two_phase(self) -> bool:
        return self.status == "two-phase"

    @property
    def v(self) -> float:
        """Overall molar volume."""
        return (1.0 - self.theta) * self.vL + self.theta * self.vV


class QuinticCoeffs(NamedTuple):
    alphaL: np.ndarray  # alpha_1..alpha_5 of the liquid
    alphaV: np.ndarray
    varsigma: np.ndarray  # varsigma_0..varsigma_5


# --------------------------------------------------------------------------- initialisation

@jit
def _wilson(Tc, pc, omega, T, p):
    n = Tc.shape[0]
    K = np.empty(n)
    for i in range(n):
        K[i] = pc[i] / p * math.exp(5.373 * (1.0 + omega[i]) * (1.0 - Tc[i] / T))
    return K


@jit
def _pressure_estimate(z, Tc, pc, omega, T):
    num = 0.0
    den = 0.0
    for i in range(z.shape[0]):
        ps = pc[i] * math.exp(5.373 * (1.0 + omega[i]) * (1.0 - Tc[i] / T))
        num += z[i] * ps
        den += z[i] / ps
    return math.sqrt(num / den)


def wilson_k(mix: Mixture, T: float, p: float) -> np.ndarray:
    if not (T > 0.0 and p > 0.0):
        raise DomainError("temperature and pressure must be positive")
    return _wilson(mix.Tc, mix.pc, mix.omega, float(T), float(p))


def estimate_pressure_vt(mix: Mixture, T: float, v_hat: float | None = None) -> float:
    """Geometric mean of the Raoult bubble and dew pressures with Wilson saturation pressures.

    ``v_hat`` is accepted for a uniform signature and not used.
    """
    if not T > 0.0:
        raise DomainError("temperature must be positive")
    return float(_pressure_estimate(mix.z, mix.Tc, mix.pc, mix.omega, float(T)))


# --------------------------------------------------------------------------- VT volumes

@jit
def _alphas(a, b, T, d1, d2):
    rt = R * T
    out = np.empty(6)
    out[0] = 0.0
    out[1] = b * (d1 + d2) - a / rt
    out[2] = b * (b * d1 * d2 + a / rt)
    out[3] = b * (d1 + d2 - 1.0)
    out[4] = b * b * (d1 * d2 - d1 - d2)
    out[5] = -b * b * b * d1 * d2
    return out


@jit
def _quintic_coeffs(theta, vh, aL, bL, aV, bV, T, d1, d2):
    A = _alphas(aL, bL, T, d1, d2)
    B = _alphas(aV, bV, T, d1, d2)
    th = theta
    th2 = th * th
    th3 = th2 * th
    vh2 = vh * vh
    s = np.empty(6)
    s[0] = ((A[2] * B[5] - B[2] * A[5]) * th3 - (A[5] * B[1] - B[4] * A[2]) * vh * th2
            + (A[2] * B[3] - A[5]) * th * vh2 + A[2] * vh2 * vh)
    s[1] = ((A[1] * B[5] - A[5] * B[1] + B[4] * A[2] - B[2] * A[4]) * th3
            + (A[1] * B[3] + 3.0 * A[2] - A[4]) * vh2 * th + (vh * A[1] - 3.0 * A[2]) * vh2
            + 2.0 * (A[5] - A[2] * B[3]) * vh * th
            + (A[1] * B[4] - B[1] * A[4] + 2.0 * A[2] * B[3] - 2.0 * A[5]) * vh * th2
            + (A[5] * B[1] - B[4] * A[2]) * th2)
    s[2] = ((A[1] * B[4] - B[1] * A[4] + A[2] * B[3] - B[2] * A[3] - A[5] + B[5]) * th3
            + (vh2 - 3.0 * vh * A[1] + 3.0 * A[2]) * vh
            + (2.0 * A[1] * B[3] - B[1] * A[3] + 3.0 * A[2] - 2.0 * A[4] + B[4]) * vh * th2
            + (B[1] * A[4] - A[1] * B[4] - 2.0 * A[2] * B[3] + 2.0 * A[5]) * th2
            + (3.0 * A[1] - A[3] + B[3]) * vh2 * th
            + 2.0 * (A[4] - A[1] * B[3] - 3.0 * A[2]) * vh * th
            + (A[2] * B[3] - A[5]) * th)
    s[3] = ((A[1] * B[3] - B[1] * A[3] + A[2] - B[2] - A[4] + B[4]) * th3
            + (3.0 * A[1] - B[1] - 2.0 * A[3] + 2.0 * B[3]) * vh * th2
            + (B[1] * A[3] - 2.0 * A[1] * B[3] - B[4] - 3.0 * A[2] + 2.0 * A[4]) * th2
            + (-6.0 * A[1] + 2.0 * A[3] - 2.0 * B[3]) * vh * th
            + (2.0 * vh2 + A[1] * B[3] + 3.0 * A[2] - A[4]) * th
            - 3.0 * vh2 + 3.0 * vh * A[1] - A[2])
    s[4] = (((A[1] - B[1] - A[3] + B[3]) * th2 + (vh - 2.0 * A[1] + A[3] - B[3]) * th - 3.0 * vh + A[1])
            * (th - 1.0))
    s[5] = -(th - 1.0) ** 2
    return s


@jit
def _poly(c, v):
    f = c[5]
    df = 0.0
    for k in range(4, -1, -1):
        df = df * v + f
        f = f * v + c[k]
    return f, df


@jit
def _vt_volumes(theta, vh, aL, bL, aV, bV, T, d1, d2):
    """(vL, vV, ok): smallest liquid root of the pressure-equality quintic.

    Newton from just above the liquid co-volume, kept inside the bracket
    where both volumes are physical; out-of-bracket iterates are replaced by
    bisection.  Two final Newton steps on p^L - p^V directly clean up the
    cancellation inherent in the polynomial form.
    """
    lo = bL * (1.0 + 1e-12)
    hi = (vh - theta * bV * (1.0 + 1e-12)) / (1.0 - theta)
    if not hi > lo:
        return np.nan, np.nan, False
    c = _quintic_coeffs(theta, vh, aL, bL, aV, bV, T, d1, d2)
    v = bL * (1.0 + 1e-5)
    if not v < hi:
        v = 0.5 * (lo + hi)
    for _ in range(300):
        f, df = _poly(c, v)
        if f > 0.0:
            lo = v
        elif f < 0.0:
            hi = v
        else:
            break
        new = v - f / df if df != 0.0 else 0.5 * (lo + hi)
        if not (lo < new < hi):
            new = 0.5 * (lo + hi)
        if abs(new - v) <= 1e-15 * v or hi - lo <= 4e-16 * hi:
            v = new
            break
        v = new
    r = (1.0 - theta) / theta
    for _ in range(2):
        vV = (vh - (1.0 - theta) * v) / theta
        if not (v > bL and vV > bV):
            break
        g = _pressure(T, v, aL, bL, d1, d2) - _pressure(T, vV, aV, bV, d1, d2)
        dg = _dp_dv(T, v, aL, bL, d1, d2) + _dp_dv(T, vV, aV, bV, d1, d2) * r
        if dg == 0.0:
            break
        new = v - g / dg
        nvV = (vh - (1.0 - theta) * new) / theta
        if new > bL and nvV > bV:
            g2 = _pressure(T, new, aL, bL, d1, d2) - _pressure(T, nvV, aV, bV, d1, d2)
            if abs(g2) <= abs(g):
                v = new
    vV = (vh - (1.0 - theta) * v) / theta
    if not (v > bL and vV > bV):
        return np.nan, np.nan, False
    return v, vV, True


# --------------------------------------------------------------------------- one state

@jit
def _evaluate(mode, T, spec, z, K, s_hat, lam, b_hat, d1, d2):
    """Split, phase parameters, volumes and h coefficients for a K vector."""
    m = s_hat.shape[0]
    n = z.shape[0]
    x = np.empty(n)
    y = np.empty(n)
    qL = np.empty(m)
    qV = np.empty(m)
    hL = np.empty(m + 2)
    hV = np.empty(m + 2)
    st, theta, _, _ = _solve_rr(z, K, 1e-14, 50)
    if st != RR_OK:
        code = EV_RR_FAIL
        if st == RR_ALL_LIQUID:
            code = EV_RR_LIQUID
        elif st == RR_ALL_VAPOR:
            code = EV_RR_VAPOR
        elif st == 3:
            code = EV_RR_DEGENERATE
        return code, theta, x, y, qL, qV, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, hL, hV
    if mode == MODE_VT and not (0.0 < theta < 1.0):
        return EV_THETA_RANGE, theta, x, y, qL, qV, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, hL, hV
    x, y, _ = _phase_compositions(z, K, theta)
    qL = s_hat @ x
    qV = s_hat @ y
    bL = b_hat @ x
    bV = b_hat @ y
    aL = _energy_from_q(qL, lam)
    aV = _energy_from_q(qV, lam)
    if mode == MODE_PT:
        p = spec
        vL, kL = _solve_volume(T, p, aL, bL, d1, d2)
        vV, kV = _solve_volume(T, p, aV, bV, d1, d2)
        if kL < 0 or kV < 0:
            return EV_NO_ROOT, theta, x, y, qL, qV, aL, aV, bL, bV, 0.0, 0.0, 0.0, hL, hV
    else:
        vL, vV, ok = _vt_volumes(theta, spec, aL, bL, aV, bV, T, d1, d2)
        if not ok:
            return EV_INFEASIBLE, theta, x, y, qL, qV, aL, aV, bL, bV, 0.0, 0.0, 0.0, hL, hV
        p = _pressure(T, vL, aL, bL, d1, d2)
    hL = _h_coeffs(qL, bL, vL, T, lam, d1, d2)
    hV = _h_coeffs(qV, bV, vV, T, lam, d1, d2)
    return EV_OK, theta, x, y, qL, qV, aL, aV, bL, bV, vL, vV, p, hL, hV


@jit
def _phase_dv(mode, T, theta, qL, qV, aL, aV, bL, bV, vL, vV, lam, d1, d2, liquid):
    """Volume sensitivities (dv/dq (m,), dv/db, dv/dtheta) of one phase."""
    m = qL.shape[0]
    PL = (vL + d1 * bL) * (vL + d2 * bL)
    PV = (vV + d1 * bV) * (vV + d2 * bV)
    pqL = np.empty(m)
    pqV = np.empty(m)
    for k in range(m):
        pqL[k] = -2.0 * lam[k] * qL[k] / PL
        pqV[k] = -2.0 * lam[k] * qV[k] / PV
    pvL = _dp_dv(T, vL, aL, bL, d1, d2)
    pvV = _dp_dv(T, vV, aV, bV, d1, d2)
    pbL = _dp_db(T, vL, aL, bL, d1, d2)
    pbV = _dp_db(T, vV, aV, bV, d1, d2)
    vq = np.empty(m)
    if mode == MODE_PT:
        if liquid:
            for k in range(m):
                vq[k] = -pqL[k] / pvL
            return vq, -pbL / pvL, 0.0
        for k in range(m):
            vq[k] = -pqV[k] / pvV
        return vq, -pbV / pvV, 0.0
    if liquid:
        r = (theta - 1.0) / theta
        fv = pvL - pvV * r
        acc = (bL - bV) * pbV + (vL - vV) * pvV
        for k in range(m):
            vq[k] = -(pqL[k] - pqV[k] * r) / fv
            acc += (qL[k] - qV[k]) * pqV[k]
        fth = -acc / theta
        return vq, -(pbL - pbV * r) / fv, -fth / fv
    r = theta / (theta - 1.0)
    fv = pvL * r - pvV
    acc = (bL - bV) * pbL + (vL - vV) * pvL
    for k in range(m):
        vq[k] = -(pqL[k] * r - pqV[k]) / fv
        acc += (qL[k] - qV[k]) * pqL[k]
    fth = acc / (1.0 - theta)
    return vq, -(pbL * r - pbV) / fv, -fth / fv


@jit
def _phase_dh(dq, db, dth, vq, vb, vth, Hq, Hb, Hv):
    """Total dh/dh^Delta of one phase by the chain rule through (q, b, v, theta)."""
    m = dq.shape[0]
    M = m + 2
    dv = np.empty(M)
    for be in range(M):
        acc = vb * db[be] + vth * dth[be]
        for k in range(m):
            acc += vq[k] * dq[k, be]
        dv[be] = acc
    out = np.empty((M, M))
    for al in range(M):
        for be in range(M):
            acc = Hb[al] * db[be] + Hv[al] * dv[be]
            for k in range(m):
                acc += Hq[al, k] * dq[k, be]
            out[al, be] = acc
    return out


@jit
def _jacobian(mode, T, z, K, theta, qL, qV, aL, aV, bL, bV, vL, vV, s_hat, lam, b_hat, d1, d2):
    """J = d(h^V - h^L)/dh^Delta - I; ok=False when the split sensitivities degenerate."""
    M = s_hat.shape[0] + 2
    _, dth, _, _, dqL, dqV, dbL, dbV, ok = _comp_derivs(K, theta, z, s_hat, b_hat)
    J = np.empty((M, M))
    if not ok:
        return J, False
    HqL, HbL, HvL = _h_derivs(qL, bL, vL, T, lam, d1, d2)
    HqV, HbV, HvV = _h_derivs(qV, bV, vV, T, lam, d1, d2)
    vqL, vbL, vthL = _phase_dv(mode, T, theta, qL, qV, aL, aV, bL, bV, vL, vV, lam, d1, d2, True)
    vqV, vbV, vthV = _phase_dv(mode, T, theta, qL, qV, aL, aV, bL, bV, vL, vV, lam, d1, d2, False)
    JL = _phase_dh(dqL, dbL, dth, vqL, vbL, vthL, HqL, HbL, HvL)
    JV = _phase_dh(dqV, dbV, dth, vqV, vbV, vthV, HqV, HbV, HvV)
    for i in range(M):
        for j in range(M):
            J[i, j] = JV[i, j] - JL[i, j]
        J[i, i] -= 1.0
    return J, True


@jit
def _gauss_solve(A, rhs):
    """Gaussian elimination with partial pivoting; ok=False on a pivot below 1e-14 of its row scale."""
    n = A.shape[0]
    M = A.copy()
    x = rhs.copy()
    scale = np.empty(n)
    for i in range(n):
        s = 0.0
        for j in range(n):
            s = max(s, abs(M[i, j]))
        scale[i] = s
    for k in range(n):
        piv = k
        best = abs(M[k, k])
        for i in range(k + 1, n):
            if abs(M[i, k]) > best:
                best = abs(M[i, k])
                piv = i
        if piv != k:
            for j in range(n):
                t = M[k, j]
                M[k, j] = M[piv, j]
                M[piv, j] = t
            t = x[k]
            x[k] = x[piv]
            x[piv] = t
            t = scale[k]
            scale[k] = scale[piv]
            scale[piv] = t
        if not best > 1e-14 * scale[k]:
            return x, False
        for i in range(k + 1, n):
            f = M[i, k] / M[k, k]
            if f != 0.0:
                for j in range(k, n):
                    M[i, j] -= f * M[k, j]
                x[i] -= f * x[k]
    for k in range(n - 1, -1, -1):
        acc = x[k]
        for j in range(k + 1, n):
            acc -= M[k, j] * x[j]
        x[k] = acc / M[k, k]
    return x, True


@jit
def _norm_diff(a, b):
    acc = 0.0
    for i in range(a.shape[0]):
        acc += (a[i] - b[i]) ** 2
    return math.sqrt(acc)


@jit
def _max_dev_one(K):
    out = 0.0
    for i in range(K.shape[0]):
        out = max(out, abs(K[i] - 1.0))
    return out


@jit
def _flash_core(mode, T, spec, z, K0, s_hat, lam, b_hat, d1, d2, n_ssi, eps_ssi, eps_newton,
                max_newton, max_halvings, trivial_tol):
    """Returns (status, evcode, theta, x, y, K, vL, vV, p, n_ssi, n_newton, history, n_hist, hd)."""
    m = s_hat.shape[0]
    n = z.shape[0]
    hist = np.zeros(n_ssi + max_newton)
    nh = 0
    lnK = np.log(K0)
    K = K0.copy()
    hd = np.zeros(m + 2)
    ev = _evaluate(mode, T, spec, z, K, s_hat, lam, b_hat, d1, d2)
    code = ev[0]
    if code != EV_OK:
        return ST_SINGLE, code, ev[1], ev[2], ev[3], K, 0.0, 0.0, 0.0, 0, 0, hist, 0, hd
    # successive substitution
    ns = 0
    for _ in range(n_ssi):
        hd = ev[14] - ev[13]
        lnK_new = _ln_psi(hd, s_hat, b_hat)
        r = _norm_diff(lnK_new, lnK)
        hist[nh] = r
        nh += 1
        ns += 1
        lnK = lnK_new
        K = np.exp(lnK)
        if _max_dev_one(K) < trivial_tol:
            return ST_SINGLE, EV_OK, ev[1], ev[2], ev[3], K, 0.0, 0.0, 0.0, ns, 0, hist, nh, hd
        ev = _evaluate(mode, T, spec, z, K, s_hat, lam, b_hat, d1, d2)
        code = ev[0]
        if code != EV_OK:
            return ST_SINGLE, code, ev[1], ev[2], ev[3], K, 0.0, 0.0, 0.0, ns, 0, hist, nh, hd
        if r <= eps_ssi:
            break
    # Newton in h^Delta
    for it in range(max_newton):
        _, theta, x, y, qL, qV, aL, aV, bL, bV, vL, vV, p, hL, hV = ev
        e = hV - hL - hd
        J, ok = _jacobian(mode, T, z, K, theta, qL, qV, aL, aV, bL, bV, vL, vV, s_hat, lam, b_hat, d1, d2)
        if not ok:
            return ST_SINGULAR, EV_OK, theta, x, y, K, vL, vV, p, ns, it, hist, nh, hd
        step, ok = _gauss_solve(J, -e)
        if not ok:
            return ST_SINGULAR, EV_OK, theta, x, y, K, vL, vV, p, ns, it, hist, nh, hd
        lam_ls = 1.0
        accepted = False
        full_code = EV_OK
        for h in range(max_halvings + 1):
            hd_try = hd + lam_ls * step
            lnK_try = _ln_psi(hd_try, s_hat, b_hat)
            finite = True
            for i in range(n):
                if not (abs(lnK_try[i]) < 700.0):
                    finite = False
            if finite:
                K_try = np.exp(lnK_try)
                ev_try = _evaluate(mode, T, spec, z, K_try, s_hat, lam, b_hat, d1, d2)
                if ev_try[0] == EV_OK:
                    accepted = True
                    break
                if h == 0:
                    full_code = ev_try[0]
                if _max_dev_one(K_try) < trivial_tol:
                    return ST_SINGLE, EV_OK, theta, x, y, K_try, vL, vV, p, ns, it + 1, hist, nh, hd_try
            lam_ls *= 0.5
        if not accepted:
            return ST_HALVING, full_code, theta, x, y, K, vL, vV, p, ns, it, hist, nh, hd
        r = _norm_diff(lnK_try, lnK)
        hist[nh] = r
        nh += 1
        hd = hd_try
        lnK = lnK_try
        K = K_try
        ev = ev_try
        if _max_dev_one(K) < trivial_tol:
            return ST_SINGLE, EV_OK, ev[1], ev[2], ev[3], K, 0.0, 0.0, 0.0, ns, it + 1, hist, nh, hd
        # a damped step is short by construction, so only a full step may signal convergence
        if r <= eps_newton and lam_ls == 1.0:
            theta = ev[1]
            status = ST_TWO_PHASE if 0.0 < theta < 1.0 else ST_SINGLE
            return status, EV_OK, theta, ev[2], ev[3], K, ev[10], ev[11], ev[12], ns, it + 1, hist, nh, hd
    return ST_MAXITER, EV_OK, ev[1], ev[2], ev[3], K, ev[10], ev[11], ev[12], ns, max_newton, hist, nh, hd


# --------------------------------------------------------------------------- single-phase classification

@jit
def _vc_over_b(omega_b, d1, d2):
    return (1.0 - (d1 + d2 - 1.0) * omega_b) / (3.0 * omega_b)


@jit
def _vapor_like(T, p, v, a, b, omega_b, d1, d2):
    """True if v is the larger-volume branch at (T, p), or above the pseudo-critical volume."""
    c2, c1, c0 = _cubic_coeffs(T, p, a, b, d1, d2)
    nr, roots = _real_cubic_roots(c2, c1, c0)
    if nr == 3 and roots[0] > b:
        return v >= roots[1]
    return v > _vc_over_b(omega_b, d1, d2) * b


@jit
def _ln_phi(T, p, v, w, s_hat, lam, b_hat, d1, d2):
    q = _reduced_q(w, s_hat)
    b = 0.0
    for i in range(w.shape[0]):
        b += b_hat[i] * w[i]
    h = _h_coeffs(q, b, v, T, lam, d1, d2)
    out = _ln_psi(h, s_hat, b_hat)
    shift = math.log(p / (R * T))
    for i in range(w.shape[0]):
        out[i] = -out[i] - shift
    return out


@jit
def _tpd_search(T, p, z, d, Kw, s_hat, lam, b_hat, d1, d2, max_iter, tol):
    """(tm, K) of the most negative tangent-plane stationary point from two Wilson trials.

    ``d`` holds ln z_i + ln phi_i of the feed.  The K-factors returned are
    oriented vapor over liquid and equal one when no negative point is found.
    """
    n = z.shape[0]
    best = 0.0
    K_best = np.ones(n)
    lnz = np.log(z)
    for trial in range(2):
        lnW = np.empty(n)
        for i in range(n):
            lnW[i] = lnz[i] + (math.log(Kw[i]) if trial == 0 else -math.log(Kw[i]))
        tm = 0.0
        w = z.copy()
        for _ in range(max_iter):
            Wsum = 0.0
            for i in range(n):
                Wsum += math.exp(lnW[i])
            for i in range(n):
                w[i] = math.exp(lnW[i]) / Wsum
            q = _reduced_q(w, s_hat)
            a = _energy_from_q(q, lam)
            b = 0.0
            for i in range(n):
                b += b_hat[i] * w[i]
            v, kind = _solve_volume(T, p, a, b, d1, d2)
            if kind < 0:
                break
            lnphi = _ln_phi(T, p, v, w, s_hat, lam, b_hat, d1, d2)
            tm = 1.0
            delta = 0.0
            trivial = 0.0
            for i in range(n):
                tm += math.exp(lnW[i]) * (lnW[i] + lnphi[i] - d[i] - 1.0)
                new = d[i] - lnphi[i]
                delta = max(delta, abs(new - lnW[i]))
                lnW[i] = new
                trivial = max(trivial, abs(new - lnz[i]))
            if delta < tol or trivial < 1e-6:
                break
        if tm < best:
            best = tm
            for i in range(n):
                K_best[i] = w[i] / z[i] if trial == 0 else z[i] / w[i]
    return best, K_best


@jit
def _pt_sweep(Ts, ps, z, Tc, pc, omega, eos, s, lam, n_ssi, eps_ssi, eps_newton, max_newton, max_halvings,
              trivial_tol):
    """Blind PT flashes on a T x p grid without leaving compiled code.

    Returns (status, theta, newton iterations) arrays of shape (nT, np);
    intended for timing the bare algorithm, so no fallbacks are applied.
    """
    nT = Ts.shape[0]
    nP = ps.shape[0]
    status = np.empty((nT, nP), dtype=np.int64)
    theta = np.empty((nT, nP))
    newton = np.empty((nT, nP), dtype=np.int64)
    for i in range(nT):
        T = Ts[i]
        a_hat, b_hat = _pure_params(Tc, pc, omega, eos, T)
        s_hat = s * np.sqrt(a_hat)
        for j in range(nP):
            K0 = _wilson(Tc, pc, omega, T, ps[j])
            out = _flash_core(MODE_PT, T, ps[j], z, K0, s_hat, lam, b_hat, eos.delta1, eos.delta2, n_ssi, eps_ssi,
                              eps_newton, max_newton, max_halvings, trivial_tol)
            status[i, j] = out[0]
            theta[i, j] = out[2]
            newton[i, j] = out[10]
    return status, theta, newton


def pt_sweep_compiled(mix: Mixture, Ts, ps, basis: ReductionBasis, config: FlashConfig = DEFAULT_CONFIG):
    """(status, theta, newton) of blind core PT flashes; status 0 two-phase, 1 single-phase, < 0 failure."""
    return _pt_sweep(np.ascontiguousarray(Ts, dtype=float), np.ascontiguousarray(ps, dtype=float), mix.z, mix.Tc,
                     mix.pc, mix.omega, mix.eos, np.ascontiguousarray(basis.s), basis.lam, config.n_ssi,
                     config.eps_ssi, config.eps_newton, config.max_newton, config.max_halvings, config.trivial_tol)


# --------------------------------------------------------------------------- public API

def _basis_for(mix: Mixture, T: float, basis: ReductionBasis | None) -> ReductionBasis:
    if basis is None:
        return build_reduction_basis(mix, mix.eos, T)
    if basis.T != T:
        from .reduction import rebase_temperature

        return rebase_temperature(basis, mix, mix.eos, T)
    return basis


def _failure_name(code: int) -> str:
    return {
        ST_MAXITER: "failed: Newton iteration cap",
        ST_SINGULAR: "failed: singular Jacobian",
        ST_HALVING: "failed: step halving exhausted",
        ST_NOROOT: "failed: no volume root",
    }.get(code, "failed")


def _single_phase_result(mix, T, p, v, theta_side, its, hist, K, hd, message=""):
    z = mix.z.copy()
    return FlashResult(
        "single-phase", float(theta_side), z, z.copy(), K, float(v), float(v), float(p), float(T),
        its, hist, hd, message,
    )


def _mixture_ab(mix, basis):
    q = basis.s_hat @ mix.z
    return float(np.dot(basis.lam, q * q)), float(basis.b_hat @ mix.z)


def _single_pt(mix, basis, T, p, side_hint, its, hist, K, hd, message=""):
    eos = mix.eos
    a, b = _mixture_ab(mix, basis)
    v, kind = _solve_volume(T, p, a, b, eos.delta1, eos.delta2)
    if kind < 0:
        return FlashResult("failed: no volume root", np.nan, mix.z.copy(), mix.z.copy(), K, np.nan, np.nan,
                           p, T, its, hist, hd, message)
    if side_hint is None:
        side = 1.0 if _vapor_like(T, p, v, a, b, eos.omega_b, eos.delta1, eos.delta2) else 0.0
    else:
        side = side_hint
    return _single_phase_result(mix, T, p, v, side, its, hist, K, hd, message)


def _single_vt(mix, basis, T, v_hat, its, hist, K, hd, message=""):
    eos = mix.eos
    a, b = _mixture_ab(mix, basis)
    p = float(_pressure(T, v_hat, a, b, eos.delta1, eos.delta2))
    side = 1.0 if _vapor_like(T, p, v_hat, a, b, eos.omega_b, eos.delta1, eos.delta2) else 0.0
    return _single_phase_result(mix, T, p, v_hat, side, its, hist, K, hd, message)


def _run(mode, mix, T, spec, K0, basis, config):
    eos = mix.eos
    out = _flash_core(
        mode, float(T), float(spec), mix.z, np.ascontiguousarray(K0, dtype=float),
        basis.s_hat, basis.lam, basis.b_hat, eos.delta1, eos.delta2,
        config.n_ssi, config.eps_ssi, config.eps_newton, config.max_newton, config.max_halvings,
        config.trivial_tol,
    )
    status, evcode, theta, x, y, K, vL, vV, p, ns, nn, hist, nh, hd = out
    return int(status), int(evcode), float(theta), x, y, K, float(vL), float(vV), float(p), Iterations(int(ns), int(nn)), hist[:nh].copy(), hd


def _two_phase_result(theta, x, y, K, vL, vV, p, T, its, hist, hd):
    """Two-phase result labelled so that the liquid is the denser phase."""
    if vL > vV:
        theta, x, y, K, vL, vV, hd = 1.0 - theta, y, x, 1.0 / K, vV, vL, -hd
    return FlashResult("two-phase", theta, x, y, K, vL, vV, float(p), float(T), its, hist, hd)


class StabilityResult(NamedTuple):
    stable: bool
    tm: float  # most negative tangent-plane distance found (0 if none)
    K: np.ndarray  # trial K-factors (vapor over liquid) for a split start


def _stability(mix, basis, T, p, v_feed, config):
    eos = mix.eos
    z = mix.z
    d = np.log(z) + _ln_phi(T, p, v_feed, z, basis.s_hat, basis.lam, basis.b_hat, eos.delta1, eos.delta2)
    tm, K = _tpd_search(T, p, z, d, _wilson(mix.Tc, mix.pc, mix.omega, T, p), basis.s_hat, basis.lam,
                        basis.b_hat, eos.delta1, eos.delta2, config.tpd_max_iter, config.tpd_tol)
    return StabilityResult(bool(tm > -1e-10), float(tm), K)


def stability_test(mix: Mixture, T: float, p: float | None = None, v_hat: float | None = None, *,
                   basis: ReductionBasis | None = None, config: FlashConfig = DEFAULT_CONFIG) -> StabilityResult:
    """Tangent-plane stability of the feed at (T, p) or at (T, v_hat).

    At given volume the feed pressure follows from the EoS and the test runs
    at that pressure with the feed held at v_hat; a mechanically unstable
    feed (dp/dv >= 0) or a non-positive pressure is reported unstable.
    """
    if (p is None) == (v_hat is None):
        raise DomainError("give exactly one of p and v_hat")
    if not T > 0.0:
        raise DomainError("temperature must be positive")
    basis = _basis_for(mix, T, basis)
    eos = mix.eos
    a, b = _mixture_ab(mix, basis)
    if p is not None:
        if not p > 0.0:
            raise DomainError("pressure must be positive")
        v, kind = _solve_volume(float(T), float(p), a, b, eos.delta1, eos.delta2)
        if kind < 0:
            raise DomainError("no volume root for the feed")
        return _stability(mix, basis, float(T), float(p), v, config)
    if not v_hat > b:
        raise DomainError("v_hat below the mixture co-volume")
    p1 = float(_pressure(T, v_hat, a, b, eos.delta1, eos.delta2))
    if not p1 > 0.0 or _dp_dv(T, v_hat, a, b, eos.delta1, eos.delta2) >= 0.0:
        return StabilityResult(False, -np.inf, _wilson(mix.Tc, mix.pc, mix.omega, float(T), max(p1, 1e5)))
    return _stability(mix, basis, float(T), p1, float(v_hat), config)


def _restart_config(config):
    # near-critical restarts need the substitution steps to stay off the trivial solution
    return replace(config, n_ssi=max(config.n_ssi, config.restart_ssi), eps_ssi=min(config.eps_ssi, 1e-6))


def _informative(K, trivial_tol):
    return bool(np.all(np.isfinite(K)) and _max_dev_one(K) > max(1e3 * trivial_tol, 1e-6))


def flash_pt(mix: Mixture, T: float, p: float, K0=None, *, basis: ReductionBasis | None = None,
             config: FlashConfig = DEFAULT_CONFIG) -> FlashResult:
    """Isothermal-isobaric flash (T in K, p in Pa).

    The Newton iteration may carry theta outside [0, 1] (negative flash); a
    converged root there means a single phase.  When the iteration stops
    without a root, or the start has no split at all, a tangent-plane test
    decides between a single phase and a restart from the trial phase.
    """
    if not (T > 0.0 and p > 0.0):
        raise DomainError("temperature and pressure must be positive")
    basis = _basis_for(mix, float(T), basis)
    K0 = wilson_k(mix, T, p) if K0 is None else np.asarray(K0, dtype=float)
    return _pt_classified(mix, basis, float(T), float(p), K0, config, retry=True)


def _pt_classified(mix, basis, T, p, K0, config, retry):
    status, evcode, theta, x, y, K, vL, vV, pp, its, hist, hd = _run(MODE_PT, mix, T, p, K0, basis, config)
    if status == ST_TWO_PHASE:
        return _two_phase_result(theta, x, y, K, vL, vV, p, T, its, hist, hd)
    if status == ST_SINGLE and evcode == EV_OK and np.isfinite(theta) and _max_dev_one(K) >= config.trivial_tol:
        # converged negative flash: theta outside (0, 1) names the side
        return _single_pt(mix, basis, T, p, 0.0 if theta <= 0.0 else 1.0, its, hist, K, hd)
    hint = {EV_RR_LIQUID: 0.0, EV_RR_VAPOR: 1.0}.get(evcode) if status == ST_SINGLE else None
    if not config.stability_check:
        if status == ST_SINGLE:
            return _single_pt(mix, basis, T, p, hint, its, hist, K, hd)
        return FlashResult(_failure_name(status), theta, x, y, K, vL, vV, p, T, its, hist, hd)
    a, b = _mixture_ab(mix, basis)
    v, kind = _solve_volume(T, p, a, b, mix.eos.delta1, mix.eos.delta2)
    if kind < 0:
        return FlashResult("failed: no volume root", np.nan, x, y, K, np.nan, np.nan, p, T, its, hist, hd)
    st = _stability(mix, basis, T, p, v, config)
    if st.stable:
        msg = "" if status == ST_SINGLE else "feed stable after " + _failure_name(status).removeprefix("failed: ")
        return _single_pt(mix, basis, T, p, hint, its, hist, K, hd, msg)
    if retry and _informative(st.K, config.trivial_tol):
        out = _pt_classified(mix, basis, T, p, st.K, _restart_config(config), retry=False)
        if out.converged:
            out.message = (out.message + "; " if out.message else "") + "restarted from a tangent-plane trial"
            return out
    name = _failure_name(status) if status != ST_SINGLE else "failed: unstable feed without a split"
    return FlashResult(name, theta, x, y, K, vL, vV, p, T, its, hist, hd, f"tangent-plane distance {st.tm:.3e}")


def flash_vt(mix: Mixture, T: float, v_hat: float, K0=None, *, basis: ReductionBasis | None = None,
             config: FlashConfig = DEFAULT_CONFIG, p0: float | None = None) -> FlashResult:
    """Isothermal-isochoric flash (T in K, v_hat in m^3/mol).

    Without K0 the Wilson factors are evaluated at ``p0`` if given, else at
    the pressure estimate selected by ``config.vt_pressure_init``.  Theta is
    kept inside (0, 1); if the iteration cannot find a split, a tangent-plane
    test at the feed's EoS pressure decides between a single phase and a
    restart from the trial phase.
    """
    if not T > 0.0:
        raise DomainError("temperature must be positive")
    basis = _basis_for(mix, float(T), basis)
    if not v_hat > float(np.min(basis.b_hat)):
        raise DomainError(f"v_hat = {v_hat!r} is below every co-volume")
    if K0 is None:
        K0 = wilson_k(mix, T, p0) if p0 is not None else _vt_initial_k(mix, basis, T, v_hat, config)
    else:
        K0 = np.asarray(K0, dtype=float)
    return _vt_classified(mix, basis, float(T), float(v_hat), K0, config, retry=True)


def _vt_initial_k(mix, basis, T, v_hat, config):
    if config.vt_pressure_init == "eos":
        a, b = _mixture_ab(mix, basis)
        p0 = max(_pressure(T, v_hat, a, b, mix.eos.delta1, mix.eos.delta2), config.vt_pressure_floor) \
            if v_hat > b else config.vt_pressure_floor
    else:
        p0 = estimate_pressure_vt(mix, T)
    return wilson_k(mix, T, p0)


def _vt_classified(mix, basis, T, v_hat, K0, config, retry):
    status, evcode, theta, x, y, K, vL, vV, p, its, hist, hd = _run(MODE_VT, mix, T, v_hat, K0, basis, config)
    if status == ST_TWO_PHASE:
        return _two_phase_result(theta, x, y, K, vL, vV, p, T, its, hist, hd)
    a, b = _mixture_ab(mix, basis)
    if status == ST_NOROOT or not v_hat > b:
        return FlashResult("failed: no volume root", np.nan, x, y, K, np.nan, np.nan, np.nan, T,
                           its, hist, hd, "v_hat below the mixture co-volume" if not v_hat > b else "")
    if not config.stability_check:
        if status == ST_SINGLE:
            return _single_vt(mix, basis, T, v_hat, its, hist, K, hd)
        return FlashResult(_failure_name(status), theta, x, y, K, vL, vV, p, T, its, hist, hd)
    # Theta is confined to (0, 1) here, so a run towards theta = 0 or 1 ends in a halving
    # failure, and a run towards K = 1 in a singular Jacobian; stability decides both.
    st = stability_test(mix, T, v_hat=v_hat, basis=basis, config=config)
    if st.stable:
        msg = "" if status == ST_SINGLE else "feed stable after " + _failure_name(status).removeprefix("failed: ")
        return _single_vt(mix, basis, T, v_hat, its, hist, K, hd, msg)
    if retry:
        alt = replace(config, vt_pressure_init="eos" if config.vt_pressure_init != "eos" else "wilson-mean")
        starts = [st.K] if _informative(st.K, config.trivial_tol) else []
        starts.append(_vt_initial_k(mix, basis, T, v_hat, alt))
        for K1 in starts:
            out = _vt_classified(mix, basis, T, v_hat, K1, _restart_config(config), retry=False)
            if out.two_phase:
                out.message = "restarted after a failed start"
                return out
        out = _vt_by_pressure(mix, basis, T, v_hat, p if np.isfinite(p) and p > 0.0 else None, config)
        if out is not None:
            return out
    name = _failure_name(status) if status != ST_SINGLE else "failed: unstable feed without a split"
    return FlashResult(name, theta, x, y, K, vL, vV, p, T, its, hist, hd, f"tangent-plane distance {st.tm:.3e}")


def _total_volume(r: FlashResult) -> float:
    return (1.0 - r.theta) * r.vL + r.theta * r.vV if r.two_phase else r.vL


def _vt_by_pressure(mix, basis, T, v_hat, p_guess, config):
    """Two-phase VT state from the PT flash whose total volume equals v_hat.

    Used close to the bubble and dew lines, where the split runs into
    theta = 0 or 1 and the direct iteration cannot cross.  The total volume
    decreases with pressure, so the root in ln p is bracketed and then
    located with Brent's method; a warm VT flash polishes the result.
    """
    cache = {}

    def g(lnp):
        r = flash_pt(mix, T, math.exp(lnp), basis=basis, config=config)
        cache[lnp] = r
        if not r.converged:
            raise ValueError(r.status)
        return math.log(_total_volume(r) / v_hat)

    if p_guess is None:
        p_guess = estimate_pressure_vt(mix, T)
    x0 = math.log(p_guess)
    try:
        f0 = g(x0)
        step = 0.1 if f0 > 0.0 else -0.1
        x1 = x0
        for _ in range(80):
            x1 = x0 + step
            if not math.log(1e2) < x1 < math.log(1e10):
                return None
            f1 = g(x1)
            if (f1 > 0.0) != (f0 > 0.0):
                break
            x0, f0 = x1, f1
            step = math.copysign(min(1.5 * abs(step), 0.5), step)
        else:
            return None
        root = brentq(g, min(x0, x1), max(x0, x1), xtol=1e-13, rtol=1e-15, maxiter=200)
    except (ValueError, FlashError):
        return None
    r = cache.get(root) or flash_pt(mix, T, math.exp(root), basis=basis, config=config)
    if not r.two_phase:
        return None
    polished = _vt_classified(mix, basis, T, v_hat, r.K, config, retry=False)
    if polished.two_phase and abs(polished.p - r.p) <= 1e-6 * r.p:
        polished.message = "started from the isobaric flash at matching volume"
        return polished
    r.message = "isobaric flash at matching volume"
    return r


def quintic_coeffs(theta: float, v_hat: float, liquid, vapor, T: float, eos: EosSpec) -> QuinticCoeffs:
    """Coefficients of the liquid-volume quintic; ``liquid``/``vapor`` carry ``a`` and ``b``."""
    d1, d2 = eos.delta1, eos.delta2
    return QuinticCoeffs(
        _alphas(liquid.a, liquid.b, T, d1, d2)[1:],
        _alphas(vapor.a, vapor.b, T, d1, d2)[1:],
        _quintic_coeffs(theta, v_hat, liquid.a, liquid.b, vapor.a, vapor.b, T, d1, d2),
    )


def solve_vt_volumes(theta: float, v_hat: float, liquid, vapor, T: float, eos: EosSpec):
    """(v_L, v_V) meeting pressure equality and the volume constraint."""
    if not 0.0 < theta < 1.0:
        raise DomainError(f"theta = {theta} must lie strictly inside (0, 1)")
    if not v_hat > (1.0 - theta) * liquid.b + theta * vapor.b:
        raise InfeasibleSplitError("volume constraint below the phase co-volumes")
    vL, vV, ok = _vt_volumes(float(theta), float(v_hat), liquid.a, liquid.b, vapor.a, vapor.b, float(T),
                             eos.delta1, eos.delta2)
    if not ok:
        raise InfeasibleSplitError("no physical liquid root of the pressure-equality quintic")
    return float(vL), float(vV)


# --------------------------------------------------------------------------- single steps

_MODES = {"pt": MODE_PT, "vt": MODE_VT}


def _mode_code(mode: str) -> int:
    try:
        return _MODES[mode]
    except KeyError:
        raise DomainError(f"mode must be 'pt' or 'vt', not {mode!r}") from None


def _checked_evaluate(mix, basis, mode, T, spec, K):
    eos = mix.eos
    ev = _evaluate(mode, float(T), float(spec), mix.z, np.ascontiguousarray(K, dtype=float), basis.s_hat,
                   basis.lam, basis.b_hat, eos.delta1, eos.delta2)
    code = ev[0]
    if code in (EV_RR_LIQUID, EV_RR_VAPOR, EV_RR_DEGENERATE, EV_RR_FAIL):
        raise SinglePhaseSignal(f"no Rachford-Rice root for these K-factors ({_EV_TEXT[code]})")
    if code == EV_NO_ROOT:
        raise NoRootError("no phase volume root above the co-volume")
    if code == EV_THETA_RANGE:
        raise InfeasibleSplitError(f"theta = {ev[1]} outside (0, 1) at given volume")
    if code == EV_INFEASIBLE:
        raise InfeasibleSplitError("no physical root of the volume quintic")
    return ev


_EV_TEXT = {EV_RR_LIQUID: "all K <= 1", EV_RR_VAPOR: "all K >= 1", EV_RR_DEGENERATE: "all K = 1",
            EV_RR_FAIL: "iteration limit"}


def ssi_step(mix: Mixture, basis: ReductionBasis, K, T: float, spec: float, mode: str = "pt") -> np.ndarray:
    """h^Delta = h^V - h^L of the split defined by K; ``spec`` is p (PT) or v_hat (VT)."""
    ev = _checked_evaluate(mix, basis, _mode_code(mode), T, spec, K)
    return ev[14] - ev[13]


def flash_jacobian(mix: Mixture, basis: ReductionBasis, h_delta, T: float, spec: float, mode: str = "pt"):
    """(e, J) at h^Delta: error e = h^V - h^L - h^Delta and its exact derivative J = de/dh^Delta."""
    code = _mode_code(mode)
    hd = np.asarray(h_delta, dtype=float)
    K = np.exp(_ln_psi(hd, basis.s_hat, basis.b_hat))
    ev = _checked_evaluate(mix, basis, code, T, spec, K)
    _, theta, x, y, qL, qV, aL, aV, bL, bV, vL, vV, p, hL, hV = ev
    eos = mix.eos
    J, ok = _jacobian(code, float(T), mix.z, K, theta, qL, qV, aL, aV, bL, bV, vL, vV, basis.s_hat, basis.lam,
                      basis.b_hat, eos.delta1, eos.delta2)
    if not ok:
        raise SingularJacobianError("split sensitivities degenerate (theta at a Rachford-Rice pole)")
    return hV - hL - hd, J


def newton_step(mix: Mixture, basis: ReductionBasis, h_delta, T: float, spec: float, mode: str = "pt"):
    """One undamped Newton update; returns (h^Delta_new, ||ln K_new - ln K||)."""
    hd = np.asarray(h_delta, dtype=float)
    e, J = flash_jacobian(mix, basis, hd, T, spec, mode)
    step, ok = _gauss_solve(J, -e)
    if not ok:
        raise SingularJacobianError("pivot below the singularity threshold")
    new = hd + step
    r = _norm_diff(_ln_psi(new, basis.s_hat, basis.b_hat), _ln_psi(hd, basis.s_hat, basis.b_hat))
    return new, float(r)
