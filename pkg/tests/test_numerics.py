import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles as O
from goldens import PHI_1, Q_3
from oicap.errors import AccuracyError, BracketError, DomainError
from oicap.numerics import (
    RealInterval,
    integrate,
    log_poisson_cdf,
    log_poisson_pmf,
    log_poisson_sf,
    log_q_tail,
    log_sum_exp,
    one_minus_log_ratio,
    phi,
    phi_shift_bound,
    poisson_support_size,
    poisson_tail_bounds,
    q_tail,
    solve_increasing,
)


# ---------------------------------------------------------------- densities


def test_phi_values():
    assert phi(0.0) == pytest.approx(1.0 / math.sqrt(2.0 * math.pi), rel=1e-15)
    assert phi(1.0) == pytest.approx(PHI_1, rel=1e-14)
    assert phi(2.5) == phi(-2.5)


@pytest.mark.parametrize("bad", [math.inf, -math.inf, math.nan])
def test_phi_rejects_non_finite(bad):
    with pytest.raises(DomainError):
        phi(bad)
    with pytest.raises(DomainError):
        q_tail(bad)


def test_q_tail_values():
    assert q_tail(0.0) == 0.5
    assert q_tail(3.0) == pytest.approx(Q_3, rel=1e-14)


@pytest.mark.parametrize("x", [6.0, 10.0, 20.0, 37.0])
def test_q_tail_keeps_relative_accuracy_far_out(x):
    assert q_tail(x) == pytest.approx(float(O.q_tail(x)), rel=1e-12)


def test_log_q_tail_beyond_underflow():
    # Q(40) ~ 1e-350 underflows, its log does not
    assert q_tail(40.0) == 0.0
    assert log_q_tail(40.0) == pytest.approx(float(mp.log(O.q_tail(40))), rel=1e-13)


def test_q_tail_symmetry_grid():
    x = np.linspace(-8.0, 8.0, 4001)
    assert np.max(np.abs(q_tail(x) + q_tail(-x) - 1.0)) <= 1e-13


def test_q_tail_decreasing():
    x = np.linspace(-8.0, 8.0, 4001)
    d = np.diff(q_tail(x))
    assert np.all(d <= 0.0)
    # strict wherever neighbouring values are distinguishable from 1 in doubles
    assert np.all(d[x[1:] > -5.0] < 0.0)


def test_mills_inequality_on_grid():
    x = np.random.default_rng(1).uniform(0.0, 8.0, 1000)
    assert np.all(x * q_tail(x) <= phi(x))


# ---------------------------------------------------------------- shift bound


def test_phi_shift_bound_examples():
    assert phi_shift_bound(1.0, 0.0) == pytest.approx(0.2419707245, abs=1e-10)
    assert phi_shift_bound(2.0, 1.0) == pytest.approx(1.0539909665, abs=1e-9)
    assert phi_shift_bound(0.5, 3.0) == pytest.approx(12.3520653268, abs=1e-9)
    assert phi_shift_bound(0.5, 3.0) >= phi(-2.5)


@pytest.mark.parametrize("xi", [0.0, -1.0, math.inf])
def test_phi_shift_bound_rejects_bad_xi(xi):
    with pytest.raises(DomainError):
        phi_shift_bound(xi, 1.0)


@given(
    st.floats(min_value=1e-6, max_value=20.0),
    st.floats(min_value=0.0, max_value=1.0),
)
def test_phi_shift_bound_dominates(xi, frac):
    tau = 2.0 * xi * frac
    assert phi(xi - tau) <= phi_shift_bound(xi, tau)


# ---------------------------------------------------------------- Poisson


def test_log_poisson_pmf_examples():
    assert log_poisson_pmf(0, 1.0) == -1.0
    assert log_poisson_pmf(3, 2.0) == pytest.approx(math.log(8.0 * math.exp(-2.0) / 6.0), rel=1e-14)
    total = np.exp(log_poisson_pmf(np.arange(201), 10.0)).sum()
    assert abs(total - 1.0) <= 1e-12


def test_log_poisson_pmf_large_counts():
    # factorials far past 170! stay finite in the log domain
    assert log_poisson_pmf(5000, 4000.0) == pytest.approx(float(mp.log(O.poisson_pmf(5000, 4000))), rel=1e-12)


@pytest.mark.parametrize("mean", [0.0, -1.0, math.nan])
def test_log_poisson_pmf_rejects_bad_mean(mean):
    with pytest.raises(DomainError):
        log_poisson_pmf(1, mean)


@pytest.mark.parametrize("k", [-1, 1.5])
def test_log_poisson_pmf_rejects_bad_count(k):
    with pytest.raises(DomainError):
        log_poisson_pmf(k, 1.0)


def test_poisson_tail_bound_examples():
    up = poisson_tail_bounds(1.0, 2.0)
    assert up.bound == pytest.approx(math.exp(1.0 - 2.0 * math.log(2.0)), rel=1e-14)
    assert up.bound == pytest.approx(math.exp(up.exponent), rel=1e-15)
    assert 1.0 - 2.0 * math.exp(-1.0) <= up.bound
    down = poisson_tail_bounds(4.0, 1.0)
    assert down.bound == pytest.approx(math.exp(math.log(4.0) - 3.0), rel=1e-14)
    assert 5.0 * math.exp(-4.0) <= down.bound
    assert poisson_tail_bounds(1.0, 1.0000001).bound == pytest.approx(1.0, abs=1e-12)


def test_poisson_tail_bound_degenerate():
    with pytest.raises(DomainError):
        poisson_tail_bounds(2.0, 2.0)


def test_poisson_tail_bounds_dominate_exact_tails():
    rng = np.random.default_rng(7)
    for _ in range(100):
        rho = rng.uniform(0.1, 30.0)
        above = rng.random() < 0.5
        xi = rho * rng.uniform(1.01, 3.0) if above else rho * rng.uniform(0.0, 0.99)
        bound = poisson_tail_bounds(rho, xi).bound
        if above:
            exact = O.poisson_sf(math.ceil(xi), rho)
        else:
            exact = O.poisson_cdf(math.floor(xi), rho)
        assert exact <= bound * (1 + 1e-12)


@pytest.mark.parametrize("k,rho", [(8, 1.0), (3, 2.0), (50, 5.0), (400, 20.0)])
def test_log_poisson_sf_and_cdf(k, rho):
    assert log_poisson_sf(k, rho) == pytest.approx(float(mp.log(O.poisson_sf(k, rho))), rel=1e-12)
    assert log_poisson_cdf(k, rho) == pytest.approx(float(mp.log(O.poisson_cdf(k, rho))), rel=1e-12, abs=1e-15)


def test_log_poisson_cdf_deep_lower_tail():
    # P(W <= 2) for W ~ Poisson(2000) is far below double range
    assert log_poisson_cdf(2, 2000.0) == pytest.approx(float(mp.log(O.poisson_cdf(2, 2000))), rel=1e-12)


@pytest.mark.parametrize("mean", [0.01, 1.0, 10.0, 500.0])
def test_poisson_support_size_captures_mass(mean):
    n = poisson_support_size(mean)
    assert n <= mean + 50.0 * math.sqrt(mean) + 52.0
    # truncation contract, checked in high precision; float sums of large-mean
    # pmfs carry ~1e-13 relative rounding from the log-gamma cancellation
    kept = mp.fsum(O.poisson_pmf(j, mean) for j in range(n))
    assert 1 - kept <= 1e-15


# ---------------------------------------------------------------- root finding


def test_solve_increasing_examples():
    assert solve_increasing(lambda x: x * x, 2.0, RealInterval(0.0, 2.0), 1e-10) == pytest.approx(math.sqrt(2.0), abs=1e-10)
    x = solve_increasing(lambda x: x * math.log(x), 10.3617, RealInterval(1.0, 100.0))
    assert x == pytest.approx(5.86012, abs=1e-5)
    assert x * math.log(x) == pytest.approx(10.3617, abs=1e-10)
    x = solve_increasing(lambda x: (x - 1.0) * math.log(x), 7.5986, RealInterval(1.0001, 100.0))
    assert x == pytest.approx(5.4711, abs=1e-4)


def test_solve_increasing_bracket_error():
    with pytest.raises(BracketError):
        solve_increasing(lambda x: x, 5.0, RealInterval(0.0, 1.0))


def test_solve_increasing_is_deterministic():
    f = lambda x: math.exp(x) - x
    a = solve_increasing(f, 7.0, RealInterval(0.0, 5.0))
    b = solve_increasing(f, 7.0, RealInterval(0.0, 5.0))
    assert a == b


@given(st.floats(min_value=-50.0, max_value=50.0), st.floats(min_value=1e-10, max_value=1e-4))
def test_solve_increasing_idempotent_under_tightening(target, tol):
    f = lambda x: x**3 + x
    x = solve_increasing(f, target, RealInterval(-10.0, 10.0), tol)
    lo, hi = x - tol, x + tol
    if f(lo) <= target <= f(hi):
        assert abs(solve_increasing(f, target, RealInterval(lo, hi), tol) - x) <= tol


def test_real_interval_invariants():
    with pytest.raises(DomainError):
        RealInterval(1.0, 1.0)
    with pytest.raises(DomainError):
        RealInterval(0.0, math.inf)
    assert RealInterval(-1.0, 2.0).width == 3.0


# ---------------------------------------------------------------- quadrature


def test_integrate_examples():
    assert integrate(phi, RealInterval(-10.0, 10.0), 1e-12) == pytest.approx(1.0, abs=1e-10)
    assert integrate(lambda x: x, RealInterval(0.0, 1.0)) == pytest.approx(0.5, abs=1e-14)
    assert integrate(lambda x: phi(x) * x * x, RealInterval(-10.0, 10.0), 1e-12) == pytest.approx(1.0, abs=1e-9)


def test_integrate_reports_best_estimate_on_failure():
    with pytest.raises(AccuracyError) as info:
        integrate(lambda x: math.sin(1.0 / x), RealInterval(1e-6, 1.0), tol=1e-15, limit=5)
    assert info.value.best_estimate is not None


# ---------------------------------------------------------------- log-sum-exp


def test_log_sum_exp_examples():
    assert log_sum_exp([0.0, 0.0]) == pytest.approx(math.log(2.0), rel=1e-15)
    assert log_sum_exp([-1000.0, -1000.0]) == pytest.approx(-1000.0 + math.log(2.0), rel=1e-15)
    assert log_sum_exp([0.0, -745.0]) == pytest.approx(math.exp(-745.0), abs=1e-320)
    assert log_sum_exp([800.0, 800.0]) == pytest.approx(800.0 + math.log(2.0), rel=1e-15)


def test_log_sum_exp_empty():
    with pytest.raises(DomainError):
        log_sum_exp([])


@given(st.lists(st.floats(min_value=-700.0, max_value=700.0), min_size=1, max_size=20),
       st.floats(min_value=-300.0, max_value=300.0))
def test_log_sum_exp_shift_invariance(values, shift):
    base = log_sum_exp(values)
    assert log_sum_exp([v + shift for v in values]) == pytest.approx(base + shift, rel=1e-12, abs=1e-9)
    assert base >= max(values)


def test_one_minus_log_ratio_limits():
    assert one_minus_log_ratio(0.0) == 1.0
    assert one_minus_log_ratio(1.0) == 0.0
    m = 0.3
    assert one_minus_log_ratio(m) == pytest.approx(-(1 - m) * math.log(1 - m) / m, rel=1e-15)
