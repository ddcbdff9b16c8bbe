"""Scalar special functions, tail bounds, root finding and quadrature.

Everything here is a pure function; the higher-level modules build on these
and never call ``scipy.special`` directly for the Gaussian or Poisson laws.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import integrate as _integrate
from scipy.special import erfc, gammainc, gammaincc, gammaln, log_ndtr, logsumexp, xlogy

from .errors import AccuracyError, BracketError, DomainError

SQRT_2PI = math.sqrt(2.0 * math.pi)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

# Half-width of the window used for Gaussian integrands; tail mass < 1e-31.
GAUSS_WINDOW = 12.0

# Poisson truncation: stop once past the mean and the pmf is this small
# relative to the running sum.
POISSON_REL_CUTOFF = 1e-18


@dataclass(frozen=True)
class RealInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise DomainError(f"interval endpoints must be finite, got [{self.lo}, {self.hi}]")
        if not self.lo < self.hi:
            raise DomainError(f"interval needs lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class TailBoundResult:
    """Chernoff bound ``exp(exponent)`` on a Poisson tail. May exceed one."""

    bound: float
    exponent: float


def _check_finite(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def phi(x):
    """Standard normal density. Accepts scalars or arrays."""
    arr = _check_finite(x)
    return _out(np.exp(-0.5 * arr * arr) / SQRT_2PI)


def q_tail(x):
    """Gaussian upper tail ``Q(x) = P(N(0,1) > x)``.

    Evaluated through ``erfc`` so the relative accuracy survives far into the
    upper tail, where ``1 - cdf`` would round to zero.
    """
    arr = _check_finite(x)
    return _out(0.5 * erfc(arr / math.sqrt(2.0)))


def log_q_tail(x):
    """``log Q(x)``, finite even where ``Q(x)`` underflows (x up to ~1e150)."""
    arr = _check_finite(x)
    return _out(log_ndtr(-arr))


def phi_shift_bound(xi: float, tau: float) -> float:
    """Right-hand side ``phi(xi) + 2 tau / xi`` of the shifted-density bound.

    For ``xi > 0`` and ``tau >= 0`` this dominates ``phi(xi - tau)``.
    """
    if not (math.isfinite(xi) and xi > 0.0):
        raise DomainError(f"xi must be positive and finite, got {xi}")
    if not (math.isfinite(tau) and tau >= 0.0):
        raise DomainError(f"tau must be nonnegative and finite, got {tau}")
    return phi(xi) + 2.0 * tau / xi


def _check_counts(k):
    arr = np.asarray(k)
    if arr.dtype.kind not in "iu":
        farr = arr.astype(float)
        if not np.all(np.isfinite(farr)) or np.any(farr != np.floor(farr)):
            raise DomainError("k must be a nonnegative integer")
    if np.any(arr < 0):
        raise DomainError("k must be a nonnegative integer")
    return arr.astype(float)


def log_poisson_pmf(k, mean):
    """``log Poi_mean(k)`` via log-gamma; vectorised over ``k`` and ``mean``."""
    m = np.asarray(mean, dtype=float)
    if np.any(~np.isfinite(m)) or np.any(m <= 0.0):
        raise DomainError("Poisson mean must be positive and finite")
    kk = _check_counts(k)
    return _out(xlogy(kk, m) - m - gammaln(kk + 1.0))


def poisson_tail_bounds(rho: float, xi: float) -> TailBoundResult:
    """Chernoff bound on a Poisson(rho) tail at level ``xi``.

    Bounds ``P(W >= xi)`` when ``xi > rho`` and ``P(W <= xi)`` when ``xi < rho``;
    in both cases the bound is ``exp(-xi log(xi/rho) + xi - rho)``.
    """
    if not (math.isfinite(rho) and rho > 0.0):
        raise DomainError(f"rho must be positive, got {rho}")
    if not (math.isfinite(xi) and xi >= 0.0):
        raise DomainError(f"xi must be nonnegative, got {xi}")
    if xi == rho:
        raise DomainError("xi == rho: the Chernoff multiplier log(xi/rho) vanishes")
    exponent = -float(xlogy(xi, xi / rho)) + xi - rho
    return TailBoundResult(bound=math.exp(exponent), exponent=exponent)


def poisson_support_size(mean: float) -> int:
    """Number of leading terms ``y = 0..n-1`` needed to sum a Poisson(mean) law.

    Stops at the first ``y > mean`` whose pmf is below ``1e-18`` times the
    running sum, and never goes past ``mean + 50 sqrt(mean) + 50``.
    """
    if not (math.isfinite(mean) and mean > 0.0):
        raise DomainError(f"Poisson mean must be positive, got {mean}")
    cap = int(math.ceil(mean + 50.0 * math.sqrt(mean) + 50.0))
    y = np.arange(cap + 1, dtype=float)
    lp = xlogy(y, mean) - mean - gammaln(y + 1.0)
    pmf = np.exp(lp)
    running = np.cumsum(pmf)
    done = (y > mean) & (pmf < POISSON_REL_CUTOFF * running)
    idx = np.flatnonzero(done)
    return int(idx[0]) + 1 if idx.size else cap + 1


def _log_tail_series(k: int, rho: float, upward: bool) -> float:
    # log-domain summation from k outward; used only when the closed form underflows
    step = 4096
    total = -math.inf
    start = k
    while True:
        if upward:
            ys = np.arange(start, start + step, dtype=float)
        else:
            lo = max(start - step + 1, 0)
            ys = np.arange(lo, start + 1, dtype=float)
        lp = xlogy(ys, rho) - rho - gammaln(ys + 1.0)
        total = float(np.logaddexp(total, logsumexp(lp)))
        edge = lp[-1] if upward else lp[0]
        if upward:
            if ys[-1] > rho and edge < total + math.log(1e-18):
                return total
            start += step
        else:
            if ys[0] == 0 or (ys[0] < rho and edge < total + math.log(1e-18)):
                return total
            start = int(ys[0]) - 1


def log_poisson_sf(k: int, rho: float) -> float:
    """``log P(W >= k)`` for ``W ~ Poisson(rho)``, robust to underflow."""
    if k <= 0:
        return 0.0
    v = float(gammainc(k, rho))
    if v > 1e-280:
        return math.log(v)
    return _log_tail_series(int(k), rho, upward=True)


def log_poisson_cdf(k: int, rho: float) -> float:
    """``log P(W <= k)`` for ``W ~ Poisson(rho)``, robust to underflow."""
    if k < 0:
        return -math.inf
    v = float(gammaincc(k + 1, rho))
    if v > 1e-280:
        return math.log(v)
    return _log_tail_series(int(k), rho, upward=False)


def solve_increasing(
    f: Callable[[float], float],
    target: float,
    interval: RealInterval,
    tol: float = 1e-12,
    max_iter: int = 2000,
) -> float:
    """Bisection for ``f(x) = target`` with ``f`` increasing on the interval.

    Deterministic; stops when the bracket is narrower than ``tol`` or cannot
    be split further in floating point.
    """
    if not tol > 0.0:
        raise DomainError("tol must be positive")
    lo, hi = interval.lo, interval.hi
    flo, fhi = f(lo), f(hi)
    if not (flo <= target <= fhi):
        raise BracketError(
            f"[{lo}, {hi}] does not bracket target {target}: f(lo)={flo}, f(hi)={fhi}"
        )
    if flo == target:
        return lo
    if fhi == target:
        return hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol or mid <= lo or mid >= hi:
            break
        if f(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def integrate(
    f: Callable[[float], float],
    interval: RealInterval,
    tol: float = 1e-10,
    rel_tol: float = 0.0,
    points: Sequence[float] | None = None,
    limit: int = 400,
) -> float:
    """Adaptive Gauss-Kronrod quadrature of ``f`` over ``interval``.

    ``points`` are interior breakpoints (discontinuities, peaks). Raises
    :class:`AccuracyError` carrying the best estimate if the error estimate
    exceeds ``max(tol, rel_tol * |result|)``.
    """
    if not tol > 0.0 and not rel_tol > 0.0:
        raise DomainError("need a positive absolute or relative tolerance")
    inner = None
    if points is not None:
        inner = sorted({float(p) for p in points if interval.lo < p < interval.hi}) or None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", _integrate.IntegrationWarning)
        value, err, *rest = _integrate.quad(
            f,
            interval.lo,
            interval.hi,
            epsabs=tol,
            epsrel=rel_tol,
            limit=limit,
            points=inner,
            full_output=1,
        )
    allowed = max(tol, rel_tol * abs(value))
    if not math.isfinite(value) or err > allowed:
        raise AccuracyError(
            f"quadrature error estimate {err:.3g} exceeds {allowed:.3g}", best_estimate=value
        )
    return float(value)


def log_sum_exp(values: Iterable[float]) -> float:
    """Overflow-safe ``log(sum(exp(values)))``."""
    arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
    if arr.size == 0:
        raise DomainError("log_sum_exp of an empty sequence")
    return float(logsumexp(arr))


def one_minus_log_ratio(m):
    """``-(1 - m) log(1 - m) / m`` with its limit 1 at ``m = 0``.

    Used to divide two-point entropies by a vanishing mass without
    forming the mass itself.
    """
    arr = np.asarray(m, dtype=float)
    safe = np.where((arr > 0.0) & (arr < 1.0), arr, 0.5)
    val = np.where(arr > 1e-300, -(1.0 - safe) * np.log1p(-safe) / safe, 1.0)
    val = np.where(arr >= 1.0, 0.0, val)
    return _out(val)
