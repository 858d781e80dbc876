"""Caloric properties: NASA-9 ideal gas plus cubic-EoS departures.

Energies are in J/mol with the formation-enthalpy reference of the NASA
records; heat capacities in J/(mol K).  Mixture values across a two-phase
split are mole-weighted at frozen composition.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numba
import numpy as np

from .cubic_eos import R, _alpha_slopes, _dp_dT, _dp_dv
from .errors import DomainError, InstabilityError, OutOfRangeError
from .fluid_db import Component, EosSpec, Mixture
from .reduction import ReductionBasis

jit = numba.njit(cache=True, nogil=True)


class CaloricState(NamedTuple):
    u: float
    h: float
    cv: float
    cp: float


@dataclass(frozen=True)
class PhaseState:
    z: np.ndarray
    v: float
    T: float
    q: np.ndarray
    a: float
    b: float

    @classmethod
    def from_composition(cls, z, v: float, basis: ReductionBasis) -> "PhaseState":
        z = np.asarray(z, dtype=float)
        q = basis.s_hat @ z
        return cls(z, float(v), basis.T, q, float(np.dot(basis.lam, q * q)), float(basis.b_hat @ z))


# --------------------------------------------------------------------------- ideal gas

@jit
def _nasa_cp_h(c, T):
    """(cp/R, h/(RT)) of a 9-coefficient block."""
    lnT = math.log(T)
    cp = c[0] / (T * T) + c[1] / T + c[2] + T * (c[3] + T * (c[4] + T * (c[5] + T * c[6])))
    h = (-c[0] / (T * T) + c[1] * lnT / T + c[2]
         + T * (c[3] / 2.0 + T * (c[4] / 3.0 + T * (c[5] / 4.0 + T * c[6] / 5.0))) + c[7] / T)
    return cp, h


@jit
def _ideal_mix(z, coeffs, ranges, T):
    """(sum z u_ig, sum z cv_ig, ok); ok=False if T leaves a polynomial range."""
    u = 0.0
    cv = 0.0
    ok = True
    for i in range(z.shape[0]):
        if T < ranges[i, 0] or T > ranges[i, 2]:
            ok = False
        blk = 0 if T <= ranges[i, 1] else 1
        cp_r, h_rt = _nasa_cp_h(coeffs[i, blk], T)
        u += z[i] * R * T * (h_rt - 1.0)
        cv += z[i] * R * (cp_r - 1.0)
    return u, cv, ok


def ideal_props(component: Component | Mixture, T: float):
    """(u_ig, cv_ig) per component; a Component yields scalars, a Mixture arrays."""
    if isinstance(component, Mixture):
        coeffs, ranges = component.nasa_coeffs, component.nasa_ranges
    else:
        if component.nasa is None:
            raise DomainError(f"{component.name} has no NASA record")
        coeffs = component.nasa.as_array()[None]
        ranges = np.array([[component.nasa.t_low, component.nasa.t_mid, component.nasa.t_high]])
    T = float(T)
    u = np.empty(len(coeffs))
    cv = np.empty(len(coeffs))
    for i in range(len(coeffs)):
        if not ranges[i, 0] <= T <= ranges[i, 2]:
            raise OutOfRangeError(f"T = {T} K outside the NASA range [{ranges[i, 0]}, {ranges[i, 2]}]")
        blk = 0 if T <= ranges[i, 1] else 1
        cp_r, h_rt = _nasa_cp_h(np.ascontiguousarray(coeffs[i, blk]), T)
        u[i] = R * T * (h_rt - 1.0)
        cv[i] = R * (cp_r - 1.0)
    if isinstance(component, Mixture):
        return u, cv
    return float(u[0]), float(cv[0])


# --------------------------------------------------------------------------- energy parameter

@jit
def _sqrt_a_T_derivs(Tc, pc, csl, omega_a, T):
    """d sqrt(a_i)/dT and d^2 sqrt(a_i)/dT^2 with the sign of theta_i."""
    n = Tc.shape[0]
    d1 = np.empty(n)
    d2 = np.empty(n)
    k = math.sqrt(omega_a / T)
    for i in range(n):
        th = 1.0 + csl[i] * (1.0 - math.sqrt(T / Tc[i]))
        sg = 1.0 if th >= 0.0 else -1.0
        g = csl[i] * sg * math.sqrt(Tc[i] / pc[i])
        d1[i] = -0.5 * R * k * g
        d2[i] = 0.25 * R / T * k * g
    return d1, d2


@jit
def _a_T_derivs(z, s, lam, Tc, pc, csl, omega_a, T):
    """(da/dT, d2a/dT2) from q_k and its temperature derivatives."""
    r1, r2 = _sqrt_a_T_derivs(Tc, pc, csl, omega_a, T)
    m = s.shape[0]
    aT = 0.0
    aTT = 0.0
    k0 = math.sqrt(omega_a)
    n = z.shape[0]
    for kk in range(m):
        q = 0.0
        qT = 0.0
        qTT = 0.0
        for i in range(n):
            th = 1.0 + csl[i] * (1.0 - math.sqrt(T / Tc[i]))
            sa = k0 * R * Tc[i] / math.sqrt(pc[i]) * abs(th)
            q += z[i] * s[kk, i] * sa
            qT += z[i] * s[kk, i] * r1[i]
            qTT += z[i] * s[kk, i] * r2[i]
        aT += 2.0 * lam[kk] * q * qT
        aTT += 2.0 * lam[kk] * (qT * qT + q * qTT)
    return aT, aTT


def energy_param_T_derivs(z, basis: ReductionBasis, mix: Mixture, eos: EosSpec | None = None, T: float | None = None):
    """(da/dT, d2a/dT2) of the mixture energy parameter at composition z."""
    eos = mix.eos if eos is None else eos
    T = basis.T if T is None else float(T)
    if not T > 0.0:
        raise DomainError("temperature must be positive")
    csl = _alpha_slopes(mix.omega, eos.alpha)
    aT, aTT = _a_T_derivs(np.asarray(z, dtype=float), basis.s, basis.lam, mix.Tc, mix.pc, csl, eos.omega_a, T)
    return float(aT), float(aTT)


def alpha_sign_flips(mix: Mixture, eos: EosSpec, T: float) -> np.ndarray:
    """Components whose alpha bracket 1 + c(1 - sqrt(T/Tc)) is negative at T."""
    csl = _alpha_slopes(mix.omega, eos.alpha)
    return 1.0 + csl * (1.0 - np.sqrt(T / mix.Tc)) < 0.0


# --------------------------------------------------------------------------- phase and mixture

@jit
def _phase_caloric(z, v, T, a, b, aT, aTT, p, coeffs, ranges, d1, d2):
    """(u, h, cv, cp, flag); flag 0 ok, 1 T out of range, 2 dp/dv >= 0."""
    u_ig, cv_ig, ok = _ideal_mix(z, coeffs, ranges, T)
    F = math.log((v + d1 * b) / (v + d2 * b))
    u = u_ig + (a - T * aT) * F / ((d2 - d1) * b)
    cv = cv_ig + T * aTT * F / ((d1 - d2) * b)
    pv = _dp_dv(T, v, a, b, d1, d2)
    pT = _dp_dT(v, aT, b, d1, d2)
    flag = 0 if ok else 1
    if pv < 0.0:
        cp = cv - T * pT * pT / pv
    else:
        cp = np.nan
        if flag == 0:
            flag = 2
    return u, u + p * v, cv, cp, flag


def phase_caloric(phase: PhaseState, basis: ReductionBasis, eos: EosSpec, p: float, mix: Mixture,
                  need_cp: bool = True) -> CaloricState:
    if not phase.v > phase.b:
        raise DomainError("phase volume must exceed its co-volume")
    aT, aTT = energy_param_T_derivs(phase.z, basis, mix, eos, phase.T)
    u, h, cv, cp, flag = _phase_caloric(
        phase.z, phase.v, phase.T, phase.a, phase.b, aT, aTT, float(p), mix.nasa_coeffs, mix.nasa_ranges,
        eos.delta1, eos.delta2,
    )
    if flag == 1:
        raise OutOfRangeError(f"T = {phase.T} K outside a NASA polynomial range")
    if flag == 2 and need_cp:
        raise InstabilityError("dp/dv >= 0: c_p undefined at a mechanically unstable state")
    return CaloricState(float(u), float(h), float(cv), float(cp))


def mixture_caloric(theta: float, liquid: CaloricState, vapor: CaloricState) -> CaloricState:
    if not 0.0 <= theta <= 1.0:
        raise DomainError(f"theta = {theta} outside [0, 1]")
    return CaloricState(*((1.0 - theta) * np.array(liquid) + theta * np.array(vapor)))


def flash_caloric(mix: Mixture, result, basis: ReductionBasis):
    """(liquid, vapor, mixture) caloric states of an isothermal flash result."""
    eos = mix.eos
    if result.status == "two-phase":
        L = phase_caloric(PhaseState.from_composition(result.x, result.vL, basis), basis, eos, result.p, mix)
        V = phase_caloric(PhaseState.from_composition(result.y, result.vV, basis), basis, eos, result.p, mix)
        return L, V, mixture_caloric(result.theta, L, V)
    if result.status == "single-phase":
        S = phase_caloric(PhaseState.from_composition(mix.z, result.vL, basis), basis, eos, result.p, mix)
        return S, S, S
    raise DomainError(f"no caloric state for a flash with status {result.status!r}")
