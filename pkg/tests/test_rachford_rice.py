import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from redflash.errors import DegenerateError, DomainError, SinglePhaseSignal
from redflash.oracle import rr_bisection
from redflash.rachford_rice import (phase_compositions, rr_residual, setup, solve_rachford_rice,
                                    solve_rachford_rice_trace)


@pytest.mark.parametrize("z, K, theta", [
    ([0.6, 0.4], [2.0, 0.25], 0.4),
    ([0.3, 0.7], [4.0, 0.25], 1.0 / 6.0),
])
def test_binary_examples(z, K, theta):
    assert solve_rachford_rice(z, K) == pytest.approx(theta, rel=1e-14)
    assert abs(rr_residual(z, K, theta)) < 1e-15


def test_material_balance():
    z = np.array([0.5, 0.2, 0.2, 0.1])
    K = np.array([3.0, 1.3, 0.4, 0.02])
    th = solve_rachford_rice(z, K)
    x, y = phase_compositions(z, K, th)
    assert np.allclose((1 - th) * x + th * y, z, rtol=0, atol=1e-15)
    assert np.allclose(y, K * x, rtol=1e-15)
    assert x.sum() == pytest.approx(1.0, abs=1e-14) and y.sum() == pytest.approx(1.0, abs=1e-14)


def test_negative_flash_roots_outside_unit_interval():
    # almost all light: the root sits above one but inside the asymptote bracket
    z = np.array([0.98, 0.02])
    K = np.array([1.5, 0.5])
    th = solve_rachford_rice(z, K)
    assert 1.0 < th < 1.0 / (1.0 - K.min())
    assert th == pytest.approx(rr_bisection(z, K), rel=1e-12)


def test_random_cross_check_against_bisection():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(10_000):
        n = int(rng.integers(2, 12))
        z = rng.uniform(1e-4, 1.0, n)
        z /= z.sum()
        K = np.exp(rng.uniform(-9.0, 9.0, n))
        K[0] = max(K[0], 1.0 + rng.uniform(1e-3, 5.0))
        K[1] = min(K[1], rng.uniform(1e-3, 0.999))
        th = solve_rachford_rice(z, K)
        lo, hi = 1.0 / (1.0 - K.max()), 1.0 / (1.0 - K.min())
        worst = max(worst, abs(th - rr_bisection(z, K)) / (hi - lo))
    assert worst < 1e-10


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 10).flatmap(lambda n: st.tuples(
    st.lists(st.floats(1e-3, 1.0), min_size=n, max_size=n),
    st.lists(st.floats(-6.0, 6.0), min_size=n, max_size=n))))
def test_trace_is_consistent(data):
    w, lk = data
    z = np.array(w) / sum(w)
    K = np.exp(np.array(lk))
    K[0], K[-1] = max(K[0], 1.1), min(K[-1], 0.9)
    tr = solve_rachford_rice_trace(z, K)
    assert tr.theta == pytest.approx(solve_rachford_rice(z, K), rel=1e-13, abs=1e-15)
    assert tr.branch.size == tr.sigma.size - 1
    assert set(np.unique(tr.branch)).issubset({-1, 1})
    lo, hi = 1.0 / (1.0 - K.max()), 1.0 / (1.0 - K.min())
    assert lo < tr.theta < hi


def test_setup_orders_extremes():
    K = np.array([0.5, 3.0, 1.2, 0.1])
    work = setup(K)
    assert work.ordering[0] == 1 and work.ordering[-1] == 3
    assert sorted(work.ordering.tolist()) == [0, 1, 2, 3]


def test_errors():
    with pytest.raises(SinglePhaseSignal, match="liquid"):
        solve_rachford_rice([0.5, 0.5], [0.9, 0.5])
    with pytest.raises(SinglePhaseSignal, match="vapor"):
        solve_rachford_rice([0.5, 0.5], [1.5, 2.0])
    with pytest.raises(DegenerateError):
        solve_rachford_rice([0.5, 0.5], [1.0, 1.0])
    with pytest.raises(DomainError):
        solve_rachford_rice([0.5, 0.5], [2.0, -0.5])
    with pytest.raises(DomainError):
        solve_rachford_rice([0.5, 0.5], [2.0, 0.5, 0.1])
    with pytest.raises(DomainError):
        phase_compositions([0.5, 0.5], [3.0, 0.5], 5.0)
