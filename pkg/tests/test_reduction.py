import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from redflash.cubic_eos import R, mixture_params, pure_params, solve_cubic_volume
from redflash.errors import DomainError
from redflash.fluid_db import Mixture, default_db
from redflash.oracle import fugacity_coeff
from redflash.reduction import (beta_spectrum, build_reduction_basis, energy_param_from_q, h_coefficients,
                                h_derivatives, jacobi_eigh, k_theta_composition_derivs, ln_K_from_hdelta, ln_psi,
                                rebase_temperature, reduced_parameters, retained_count)
from reference_states import MY10_EIGENVALUES, STATES, liquid_vapor


def test_zero_interaction_is_rank_one(y8):
    lam, S = beta_spectrum(y8.kappa)
    assert lam[0] == pytest.approx(6.0, rel=1e-14)
    assert np.max(np.abs(lam[1:])) < 1e-14
    assert np.allclose(np.abs(S[0]), 1.0 / math.sqrt(6.0), rtol=0, atol=1e-14)
    assert retained_count(y8.kappa) == 1


def test_ten_component_zero_interaction():
    db = default_db()
    names = ["C1", "C2", "C3", "nC4", "nC5", "nC6", "nC7", "nC8", "nC10", "nC14"]
    mix = Mixture(tuple(db[n] for n in names), np.full(10, 0.1), np.zeros((10, 10)))
    assert build_reduction_basis(mix, T=400.0).m == 1


def test_my10_spectrum(my10):
    lam, _ = beta_spectrum(my10.kappa)
    assert lam[:3] == pytest.approx(MY10_EIGENVALUES, abs=5e-5)
    assert retained_count(my10.kappa) == 3


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 8).flatmap(lambda n: st.lists(st.floats(-1.0, 1.0), min_size=n * n, max_size=n * n)))
def test_jacobi_reconstructs_symmetric_matrix(vals):
    n = int(round(math.sqrt(len(vals))))
    A = np.array(vals).reshape(n, n)
    A = 0.5 * (A + A.T)
    lam, V = jacobi_eigh(A)
    assert np.allclose(V.T @ V, np.eye(n), atol=1e-12)
    assert np.allclose((V * lam) @ V.T, A, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(w1=st.lists(st.floats(0.01, 1.0), min_size=10, max_size=10),
       w2=st.lists(st.floats(0.01, 1.0), min_size=10, max_size=10),
       t=st.floats(-3.0, 3.0))
def test_q_is_linear_and_reproduces_energy(my10, w1, w2, t):
    b = build_reduction_basis(my10, T=450.0)
    z1, z2 = np.array(w1) / sum(w1), np.array(w2) / sum(w2)
    combo = z1 + t * z2
    assert np.allclose(reduced_parameters(combo, b), reduced_parameters(z1, b) + t * reduced_parameters(z2, b),
                       rtol=1e-13, atol=1e-15)
    a_full = mixture_params(z1, pure_params(my10, my10.eos, 450.0), my10.kappa).a
    assert energy_param_from_q(reduced_parameters(z1, b), b.lam) == pytest.approx(a_full, rel=1e-9)


def test_h_at_zero_q(y8):
    b = build_reduction_basis(y8, T=300.0)
    bb, v = 4e-5, 2e-4
    h = h_coefficients(np.zeros(1), bb, v, 300.0, b, y8.eos)
    assert h[0] == 0.0
    assert h[1] == pytest.approx(-1.0 / (v - bb), rel=1e-15)
    assert h[2] == pytest.approx(math.log(v - bb), rel=1e-15)


def test_ln_k_from_unit_and_zero_hdelta(my10):
    b = build_reduction_basis(my10, T=450.0)
    assert np.all(ln_K_from_hdelta(np.zeros(b.m + 2), b) == 0.0)
    e = np.zeros(b.m + 2)
    e[-1] = 1.0
    assert np.all(ln_K_from_hdelta(e, b) == 1.0)
    with pytest.raises(DomainError):
        ln_psi(np.zeros(b.m), b)
    with pytest.raises(DomainError):
        ln_K_from_hdelta(np.full(b.m + 2, np.nan), b)


@pytest.mark.parametrize("point", ["B", "D"])
def test_psi_difference_is_ln_k(mixtures, point):
    s = STATES[point]
    mix = mixtures[s["fluid"]]
    T, p = s["T"], s["p"] * 1e5
    basis = build_reduction_basis(mix, T=T)
    pp = pure_params(mix, mix.eos, T)
    x, y = liquid_vapor(point)
    x, y = x / x.sum(), y / y.sum()
    ln_psis, ln_phis = [], []
    for z in (x, y):
        mp = mixture_params(z, pp, mix.kappa)
        v = solve_cubic_volume(T, p, mp, mix.eos)
        h = h_coefficients(reduced_parameters(z, basis), mp.b, v, T, basis, mix.eos)
        ln_psis.append(ln_psi(h, basis))
        ln_phis.append(fugacity_coeff(T, p, v, z, mp, pp, mix.eos))
    # reduced and full-space fugacities agree through ln phi = -ln psi - ln(p/RT)
    for lp, lf in zip(ln_psis, ln_phis):
        assert np.allclose(-lp - math.log(p / (R * T)), lf, rtol=0, atol=1e-9)
    lnK = ln_psis[1] - ln_psis[0]
    # equilibrium: the tabulated split reproduces ln(y/x) to the reference precision
    assert np.allclose(lnK, np.log(y / x), rtol=0, atol=2e-4)


def test_h_derivatives_match_differences(y8):
    b = build_reduction_basis(y8, T=320.0)
    q, bb, v = np.array([0.5]), 5e-5, 3e-4
    Hq, Hb, Hv = h_derivatives(q, bb, v, 320.0, b, y8.eos)

    def h(q=q, bb=bb, v=v):
        return h_coefficients(q, bb, v, 320.0, b, y8.eos)

    d = 1e-6
    assert np.allclose(Hq[:, 0], (h(q=q + d * q) - h(q=q - d * q)) / (2 * d * q[0]), rtol=1e-7)
    assert np.allclose(Hb, (h(bb=bb * (1 + d)) - h(bb=bb * (1 - d))) / (2 * d * bb), rtol=1e-6)
    assert np.allclose(Hv, (h(v=v * (1 + d)) - h(v=v * (1 - d))) / (2 * d * v), rtol=1e-6)


def test_composition_derivatives_match_differences(my10, rng):
    from redflash.isothermal_flash import flash_pt
    from redflash.rachford_rice import phase_compositions, solve_rachford_rice

    T, p = STATES["D"]["T"], STATES["D"]["p"] * 1e5
    b = build_reduction_basis(my10, T=T)
    hd = flash_pt(my10, T, p).h_delta * (1.0 + 0.01 * rng.standard_normal(b.m + 2))

    def state(h):
        K = np.exp(ln_K_from_hdelta(h, b))
        th = solve_rachford_rice(my10.z, K)
        x, y = phase_compositions(my10.z, K, th)
        return th, x, y, K

    th, x, y, K = state(hd)
    assert 0.0 < th < 1.0
    der = k_theta_composition_derivs(K, th, my10.z, b)
    for j in range(b.m + 2):
        step = 1e-6 * max(abs(hd[j]), 1.0)
        up, dn = hd.copy(), hd.copy()
        up[j] += step
        dn[j] -= step
        su, sd = state(up), state(dn)
        assert der.dtheta[j] == pytest.approx((su[0] - sd[0]) / (2 * step), rel=1e-5, abs=1e-10)
        assert np.allclose(der.dx[:, j], (su[1] - sd[1]) / (2 * step), rtol=1e-5, atol=1e-10)
        assert np.allclose(der.dy[:, j], (su[2] - sd[2]) / (2 * step), rtol=1e-5, atol=1e-10)
        assert np.allclose(der.dqL[:, j], b.s_hat @ der.dx[:, j], rtol=1e-14, atol=1e-18)


def test_rebase_keeps_eigenvectors(my10):
    b0 = build_reduction_basis(my10, T=300.0)
    b1 = rebase_temperature(b0, my10, my10.eos, 500.0)
    direct = build_reduction_basis(my10, T=500.0)
    assert np.array_equal(b1.s, b0.s)
    assert np.allclose(b1.s_hat, direct.s_hat, rtol=1e-14, atol=0)
    assert build_reduction_basis(my10, T=500.0, full=True).m == 10
