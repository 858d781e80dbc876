"""Analytical derivatives against central finite differences.

``derivative_report`` draws randomized states and returns the worst relative
error per derivative family; the property tests below exercise the same
comparisons through hypothesis.
"""
import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from redflash import load_mixture
from redflash.caloric import energy_param_T_derivs
from redflash.cubic_eos import MixParams, mixture_params, pressure, pressure_derivs, pure_params
from redflash.errors import FlashError
from redflash.isothermal_flash import flash_jacobian, flash_pt
from redflash.reduction import build_reduction_basis

MIXES = {name: load_mixture(name) for name in ("y8", "my10")}
WINDOWS = {"y8": ((200.0, 360.0), (20.0, 180.0)), "my10": ((300.0, 560.0), (10.0, 100.0))}


def _rel(exact, approx, scale=None):
    exact = np.asarray(exact, dtype=float)
    scale = np.max(np.abs(exact)) if scale is None else scale
    return float(np.max(np.abs(exact - approx)) / scale)


def jacobian_error(mix, T, spec, hd, mode):
    """Column-wise relative error of J against central differences of e(h^Delta)."""
    b = build_reduction_basis(mix, mix.eos, T)
    _, J = flash_jacobian(mix, b, hd, T, spec, mode)

    def central(j, d):
        up, dn = hd.copy(), hd.copy()
        up[j] += d
        dn[j] -= d
        return (flash_jacobian(mix, b, up, T, spec, mode)[0] - flash_jacobian(mix, b, dn, T, spec, mode)[0]) / (2 * d)

    worst = 0.0
    for j in range(hd.size):
        d = 1e-4 * max(abs(hd[j]), 1e-2)
        # Richardson extrapolation removes the O(d^2) truncation term
        col = (4.0 * central(j, 0.5 * d) - central(j, d)) / 3.0
        worst = max(worst, _rel(J[:, j], col))
    return worst


def _perturbed_state(name, rng):
    mix = MIXES[name]
    (T0, T1), (p0, p1) = WINDOWS[name]
    for _ in range(1000):
        T = rng.uniform(T0, T1)
        p = rng.uniform(p0, p1) * 1e5
        r = flash_pt(mix, T, p)
        if not r.two_phase or min(r.theta, 1 - r.theta) < 0.02:
            continue
        # a pre-convergence point: perturb the converged unknowns
        hd = r.h_delta * (1.0 + 0.01 * rng.standard_normal(r.h_delta.size))
        b = build_reduction_basis(mix, mix.eos, T)
        try:
            flash_jacobian(mix, b, hd, T, p, "pt")
            flash_jacobian(mix, b, hd, T, r.v, "vt")
        except FlashError:
            continue
        return T, p, r.v, hd
    raise RuntimeError("no two-phase state found")


def _energy(mix, T, z):
    return mixture_params(z, pure_params(mix, mix.eos, T), mix.kappa).a


def energy_errors(mix, T, z):
    b = build_reduction_basis(mix, mix.eos, T)
    aT, aTT = energy_param_T_derivs(z, b, mix)
    d = 1e-3
    first = (_energy(mix, T + d, z) - _energy(mix, T - d, z)) / (2 * d)
    # the second difference needs a wider step to stay clear of round-off
    d2 = 0.2
    second = (_energy(mix, T + d2, z) - 2 * _energy(mix, T, z) + _energy(mix, T - d2, z)) / (d2 * d2)
    return _rel(aT, first), _rel(aTT, second), aT


def pressure_errors(mix, T, v_factor, z):
    pp = pure_params(mix, mix.eos, T)
    mp = mixture_params(z, pp, mix.kappa)
    v = mp.b * v_factor
    aT = energy_param_T_derivs(z, build_reduction_basis(mix, mix.eos, T), mix)[0]
    der = pressure_derivs(T, v, mp, mix.eos, da_dT=aT)
    dv = 1e-6 * v
    fd_v = (pressure(T, v + dv, mp, mix.eos) - pressure(T, v - dv, mp, mix.eos)) / (2 * dv)
    dT = 1e-4
    mp_p = mixture_params(z, pure_params(mix, mix.eos, T + dT), mix.kappa)
    mp_m = mixture_params(z, pure_params(mix, mix.eos, T - dT), mix.kappa)
    # dp/dT at fixed v and b: only a varies with temperature besides RT/(v - b)
    fd_T = (pressure(T + dT, v, MixParams(mp_p.a, mp.b, mp.g), mix.eos)
            - pressure(T - dT, v, MixParams(mp_m.a, mp.b, mp.g), mix.eos)) / (2 * dT)
    db = 1e-7 * mp.b
    fd_b = (pressure(T, v, MixParams(mp.a, mp.b + db, mp.g), mix.eos)
            - pressure(T, v, MixParams(mp.a, mp.b - db, mp.g), mix.eos)) / (2 * db)
    return _rel(der.dp_dv, fd_v), _rel(der.dp_dT, fd_T), _rel(der.dp_db, fd_b)


def _random_z(n, rng):
    z = rng.uniform(0.05, 1.0, n)
    return z / z.sum()


def derivative_report(count=100, seed=0):
    rng = np.random.default_rng(seed)
    rep = {k: 0.0 for k in ("J_PT", "J_VT", "da/dT", "d2a/dT2", "dp/dv", "dp/dT", "dp/db")}
    for k in range(count):
        name = "y8" if k % 2 == 0 else "my10"
        mix = MIXES[name]
        T, p, v, hd = _perturbed_state(name, rng)
        rep["J_PT"] = max(rep["J_PT"], jacobian_error(mix, T, p, hd, "pt"))
        rep["J_VT"] = max(rep["J_VT"], jacobian_error(mix, T, v, hd, "vt"))
        z = _random_z(mix.n, rng)
        Tr = rng.uniform(200.0, 800.0)
        e1, e2, _ = energy_errors(mix, Tr, z)
        rep["da/dT"] = max(rep["da/dT"], e1)
        rep["d2a/dT2"] = max(rep["d2a/dT2"], e2)
        ev, eT, eb = pressure_errors(mix, Tr, rng.uniform(1.2, 50.0), z)
        rep["dp/dv"] = max(rep["dp/dv"], ev)
        rep["dp/dT"] = max(rep["dp/dT"], eT)
        rep["dp/db"] = max(rep["dp/db"], eb)
    return rep


# ---------------------------------------------------------------------------- property tests

compositions = st.lists(st.floats(0.05, 1.0), min_size=10, max_size=10)


@settings(max_examples=40, deadline=None)
@given(T=st.floats(200.0, 900.0), w=compositions, name=st.sampled_from(["y8", "my10"]))
def test_energy_param_temperature_derivatives(T, w, name):
    mix = MIXES[name]
    z = np.array(w[: mix.n]) / sum(w[: mix.n])
    e1, e2, _ = energy_errors(mix, T, z)
    assert e1 < 1e-5 and e2 < 1e-5


@settings(max_examples=40, deadline=None)
@given(T=st.floats(150.0, 900.0), f=st.floats(1.05, 100.0), w=compositions, name=st.sampled_from(["y8", "my10"]))
def test_pressure_derivatives(T, f, w, name):
    mix = MIXES[name]
    z = np.array(w[: mix.n]) / sum(w[: mix.n])
    assert max(pressure_errors(mix, T, f, z)) < 1e-5


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), name=st.sampled_from(["y8", "my10"]), mode=st.sampled_from(["pt", "vt"]))
def test_flash_jacobian_matches_finite_differences(seed, name, mode):
    mix = MIXES[name]
    T, p, v, hd = _perturbed_state(name, np.random.default_rng(seed))
    assert jacobian_error(mix, T, p if mode == "pt" else v, hd, mode) < 1e-5


def test_pt_volume_column_is_structurally_zero():
    from redflash.isothermal_flash import MODE_PT, MODE_VT, _evaluate, _phase_dv

    mix = MIXES["y8"]
    T, p = 335.2, 134.5e5
    r = flash_pt(mix, T, p)
    b = build_reduction_basis(mix, mix.eos, T)
    for mode, spec in ((MODE_PT, p), (MODE_VT, r.v)):
        ev = _evaluate(mode, T, spec, mix.z, r.K, b.s_hat, b.lam, b.b_hat, mix.eos.delta1, mix.eos.delta2)
        _, theta, _, _, qL, qV, aL, aV, bL, bV, vL, vV, _, _, _ = ev
        for liquid in (True, False):
            vth = _phase_dv(mode, T, theta, qL, qV, aL, aV, bL, bV, vL, vV, b.lam, mix.eos.delta1,
                            mix.eos.delta2, liquid)[2]
            if mode == MODE_PT:
                assert vth == 0.0
            else:
                assert abs(vth) > 0.0 and math.isfinite(vth)
