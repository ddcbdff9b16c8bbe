"""Bounds on the capacity of the Poisson channel with dark current ``lam``.

The upper bound uses an output law with a truncated Poisson(lam) head on
``0..eta-1`` and a geometric tail; ``eta`` is the integer part of the root of
``(x - lam) log(x / lam) = a_P L``. The lower bound sends a two-point input at
``eta0``, the root of ``x log(x / lam) = a_P L``, detects it with the MAP rule
and applies Fano's inequality. All formulas are evaluated from
``L = log(1/epsilon)``; factorials and powers go through log-gamma and
``log1p`` forms so ``eta`` can run into the thousands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .channels import DEFAULT_GEOM_P
from .errors import ConstraintError, DomainError, RegimeError, ValidityViolated
from .numerics import (
    RealInterval,
    log_poisson_cdf,
    log_poisson_sf,
    log_sum_exp,
    poisson_tail_bounds,
    solve_increasing,
)
from .reports import BinaryInput, BoundReport, resolve_budget, scaled_entropy_terms

UPPER_TERMS = (
    "log1mbeta",
    "lambda_log",
    "linear_eps",
    "head_pmf",
    "c3_dominant",
    "c3_factorial",
    "c3_sqrt",
    "c3_stirling",
)
LOWER_TERMS = ("entropy_input", "minus_hb_pe")


def _check_lam(lam):
    if not (math.isfinite(lam) and lam > 0.0):
        raise DomainError(f"dark current must be positive, got {lam}")


def _check_a(a):
    if not (math.isfinite(a) and a > 0.0):
        raise DomainError(f"a_p must be positive, got {a}")


def _exp(x: float) -> float:
    # exp that saturates to inf instead of raising
    return math.exp(x) if x < 709.0 else math.inf


# ----------------------------------------------------------------- knee eta


@dataclass(frozen=True)
class EtaSolution:
    """Root ``eta_real`` of ``(x - lam) log(x / lam) = rhs`` and its integer part.

    ``beta = exp(-(eta_int - lam) log(eta_int / lam))`` and ``log_beta`` is
    its logarithm. ``margin_ok`` is False when ``eta_int <= lam + 2``.
    """

    eta_real: float
    eta_int: int
    beta: float
    rhs: float
    log_beta: float
    margin_ok: bool


def solve_eta(lam, a_p, epsilon=None, log_inv_eps=None) -> EtaSolution:
    _check_lam(lam)
    _check_a(a_p)
    _, L = resolve_budget(epsilon, log_inv_eps)
    rhs = a_p * L

    def f(x):
        return (x - lam) * math.log(x / lam)

    bracket = RealInterval(lam * (1.0 + 1e-9), lam + rhs + math.e * lam + 10.0)
    eta_real = solve_increasing(f, rhs, bracket, tol=1e-12 * max(1.0, lam))
    eta = int(math.floor(eta_real))
    if eta == 0:
        log_beta = -math.inf
    else:
        log_beta = -(eta - lam) * math.log(eta / lam)
    return EtaSolution(
        eta_real=eta_real,
        eta_int=eta,
        beta=math.exp(log_beta),
        rhs=rhs,
        log_beta=log_beta,
        margin_ok=eta > lam + 2.0,
    )


@dataclass(frozen=True)
class EtaAsymptotics:
    """Leading-order estimates ``log eta ~ log L`` and ``eta ~ a_P L / log L``."""

    log_eta_est: float
    eta_est: float


def eta_asymptotics(lam, a_p, epsilon=None, log_inv_eps=None) -> EtaAsymptotics:
    """Asymptotic knee estimates; requires ``L > e`` so that ``log L > 1``."""
    _check_lam(lam)
    _check_a(a_p)
    _, L = resolve_budget(epsilon, log_inv_eps)
    if not L > math.e:
        raise DomainError("eta asymptotics need epsilon < exp(-e)")
    ll = math.log(L)
    return EtaAsymptotics(log_eta_est=ll, eta_est=a_p * L / ll)


# ---------------------------------------------------------------- upper bound


@dataclass(frozen=True)
class PoissonBoundParams:
    """Budget, exponent parameter, dark current and geometric-tail parameter."""

    epsilon: Optional[float]
    a_p: float
    dark_current: float
    geom_p: float = DEFAULT_GEOM_P
    log_inv_eps: Optional[float] = None

    def __post_init__(self):
        if self.epsilon is None or self.log_inv_eps is None:
            eps, L = resolve_budget(self.epsilon, self.log_inv_eps)
            object.__setattr__(self, "epsilon", eps)
            object.__setattr__(self, "log_inv_eps", L)
        _check_a(self.a_p)
        _check_lam(self.dark_current)
        if not 0.0 < self.geom_p < 1.0:
            raise DomainError(f"geom_p must lie in (0, 1), got {self.geom_p}")

    @classmethod
    def from_log(cls, log_inv_eps, a_p, dark_current, geom_p=DEFAULT_GEOM_P):
        return cls(None, a_p, dark_current, geom_p, log_inv_eps=log_inv_eps)

    @property
    def asymptotic_regime(self) -> bool:
        return self.a_p > 1.0


def validity_bracket(lam: float, eta: int, p: float) -> float:
    """Left side of the condition that must be ``<= 0`` for the upper bound.

    ``-log(1-p) - lam - eta log(1/p) - log(2 pi eta)/2 + lam (1 + log(1/p))``.
    """
    lp = -math.log(p)
    return (
        -math.log1p(-p)
        - lam
        - eta * lp
        - 0.5 * math.log(2.0 * math.pi * eta)
        + lam * (1.0 + lp)
    )


def _log_pmf(k, mean):
    return float(k * math.log(mean) - mean - gammaln(k + 1.0))


def _scaled_upper_terms(lam, eta, p, L, log_beta):
    """Return ``(terms / eps, log(terms / eps))`` for the eight addends."""
    lp = -math.log(p)
    c = 1.0 + lp
    log_ratio = math.log(eta / lam)
    nan = math.nan
    logs = {}

    # -log(1 - beta) / eps, with -log(1-beta) ~ beta once beta is tiny
    beta = math.exp(log_beta)
    corr = -math.log1p(-beta) / beta if beta > 1e-300 else 1.0
    logs["log1mbeta"] = L + log_beta + math.log(corr)

    eps = math.exp(-L)
    x = eps / lam
    logs["lambda_log"] = math.log(math.log1p(x) / x) if x > 0.0 else 0.0

    if eta - lam - 2.0 > 0.0:
        ratio = lam * math.exp(_log_pmf(eta - 1, eta - 2.0)) / (eta - lam - 2.0)
        logs["linear_eps"] = math.log(c * (1.0 + ratio))
    else:
        logs["linear_eps"] = nan

    logs["head_pmf"] = math.log(lam * c) + _log_pmf(eta - 1, lam) + L
    logs["c3_dominant"] = math.log(log_ratio)
    # log(lam^eta e^-lam / (eta-1)!) + L
    logs["c3_factorial"] = math.log(log_ratio) + eta * math.log(lam) - lam - gammaln(eta) + L
    if eta - lam - 1.0 > 0.0 and eta > 1:
        logs["c3_sqrt"] = (
            math.log(log_ratio)
            + 0.5 * math.log((eta - 1.0) / (2.0 * math.pi))
            - math.log(eta - lam - 1.0)
        )
        logs["c3_stirling"] = (
            math.log1p(math.log((eta + 1.0) / lam))
            + math.log(eta + 1.0)
            - 0.5 * math.log(2.0 * math.pi * (eta - 1.0))
            - 2.0
            + (eta - 1.0) * math.log1p(2.0 / (eta - 1.0))
            - math.log(eta - lam)
        )
    else:
        logs["c3_sqrt"] = nan
        logs["c3_stirling"] = nan
    scaled = {k: _exp(v) if math.isfinite(v) else nan for k, v in logs.items()}
    return scaled, logs


def upper_bound_poisson(params: PoissonBoundParams) -> BoundReport:
    """Non-asymptotic duality upper bound with its eight additive terms.

    Raises :class:`ValidityViolated` (with the evaluated report attached) when
    ``eta <= lam + 2`` or the validity bracket is positive. ``a_p <= 1`` only
    clears ``validity["asymptotic_regime"]``.
    """
    lam, p, L = params.dark_current, params.geom_p, params.log_inv_eps
    sol = solve_eta(lam, params.a_p, log_inv_eps=L)
    eta = sol.eta_int
    if eta < 1 or eta <= lam:
        validity = {"asymptotic_regime": params.asymptotic_regime, "eta_margin": False, "bracket": False}
        report = BoundReport(
            value=math.nan,
            terms={k: math.nan for k in UPPER_TERMS},
            params_echo={"epsilon": params.epsilon, "log_inv_eps": L, "eta": eta},
            validity=validity,
        )
        raise ValidityViolated(f"knee {eta} does not exceed dark current {lam}", report=report)

    scaled, logs = _scaled_upper_terms(lam, eta, p, L, sol.log_beta)
    bracket_value = validity_bracket(lam, eta, p)
    validity = {
        "asymptotic_regime": params.asymptotic_regime,
        "eta_margin": sol.margin_ok,
        "bracket": bracket_value <= 0.0,
    }
    echo = {
        "epsilon": params.epsilon,
        "log_inv_eps": L,
        "a_p": params.a_p,
        "dark_current": lam,
        "geom_p": p,
        "eta_real": sol.eta_real,
        "eta": eta,
        "beta": sol.beta,
        "bracket_value": bracket_value,
    }
    finite_logs = [v for v in logs.values() if not math.isnan(v)]
    log_total = log_sum_exp(finite_logs) if len(finite_logs) == len(logs) else math.nan
    report = BoundReport.from_scaled(params.epsilon, scaled, echo, validity, log_total)
    if not sol.margin_ok:
        raise ValidityViolated(f"eta = {eta} <= lam + 2", report=report)
    if not validity["bracket"]:
        raise ValidityViolated(f"validity bracket is positive ({bracket_value:.6g})", report=report)
    return report


def asymptote_poisson(epsilon=None, log_inv_eps=None) -> float:
    """Leading-order capacity ``epsilon log L``; requires ``L > 1``."""
    eps, L = resolve_budget(epsilon, log_inv_eps)
    if not L > 1.0:
        raise DomainError("asymptote needs epsilon < exp(-1)")
    return eps * math.log(L)


def asymptote_poisson_over_eps(log_inv_eps: float) -> float:
    if not log_inv_eps > 1.0:
        raise DomainError("asymptote needs log(1/epsilon) > 1")
    return math.log(log_inv_eps)


# ---------------------------------------------------------------- lower bound


def solve_eta0(lam, a_p, epsilon=None, log_inv_eps=None) -> float:
    """Root of ``x log(x / lam) = a_P L`` on ``[lam, e lam + a_P L]``."""
    _check_lam(lam)
    _check_a(a_p)
    _, L = resolve_budget(epsilon, log_inv_eps)
    rhs = a_p * L
    bracket = RealInterval(lam, math.e * lam + rhs)
    return solve_increasing(lambda x: x * math.log(x / lam), rhs, bracket, tol=1e-12 * max(1.0, lam))


def binary_input_poisson(epsilon=None, a_p=None, lam=None, log_inv_eps=None) -> BinaryInput:
    """Two-point input at ``eta0`` (not rounded) with mean exactly ``epsilon``."""
    if a_p is None or lam is None:
        raise DomainError("a_p and lam are required")
    eta0 = solve_eta0(lam, a_p, epsilon, log_inv_eps)
    try:
        return BinaryInput.with_mean(eta0, epsilon=epsilon, a_param=a_p, log_inv_eps=log_inv_eps)
    except ConstraintError as exc:
        raise DomainError(str(exc)) from exc


def _threshold_real(inp: BinaryInput, lam: float) -> float:
    _check_lam(lam)
    if not inp.mass_high < 1.0 or inp.amplitude <= inp.mean:
        raise DomainError("amplitude must exceed the mean")
    return (inp.amplitude + inp.log_prior_ratio) / math.log1p(inp.amplitude / lam)


def map_threshold_poisson(inp: BinaryInput, lam: float) -> int:
    """Integer MAP threshold ``floor((eta0 + log((eta0-eps)/eps)) / log(1 + eta0/lam))``.

    The detector decides the high symbol iff ``y > threshold``; a count equal
    to the threshold goes to the zero symbol.
    """
    return max(int(math.floor(_threshold_real(inp, lam))), 0)


def log_pe_threshold_poisson(inp: BinaryInput, lam: float, k: int) -> float:
    """``log`` error probability of the rule 'high iff y > k'."""
    return float(
        np.logaddexp(
            math.log(inp.mass_low) + log_poisson_sf(k + 1, lam),
            inp.log_mass_high + log_poisson_cdf(k, lam + inp.amplitude),
        )
    )


def pe_threshold_poisson(inp: BinaryInput, lam: float, k: int) -> float:
    return math.exp(log_pe_threshold_poisson(inp, lam, k))


def log_pe_exact_poisson(inp: BinaryInput, lam: float) -> float:
    return log_pe_threshold_poisson(inp, lam, map_threshold_poisson(inp, lam))


def pe_exact_poisson(inp: BinaryInput, lam: float) -> float:
    """Exact MAP error ``(1-m) P(Poi_lam > k) + m P(Poi_{lam+eta0} <= k)``."""
    return math.exp(log_pe_exact_poisson(inp, lam))


def pe_literal_poisson(inp: BinaryInput, lam: float) -> float:
    """Error of the rule 'high iff y >= k' at the MAP threshold ``k``.

    Off by one count from the MAP detector, so never smaller than
    :func:`pe_exact_poisson`. Kept as a diagnostic.
    """
    k = map_threshold_poisson(inp, lam)
    if k == 0:
        return inp.mass_low
    return pe_threshold_poisson(inp, lam, k - 1)


def pe_chernoff_poisson(inp: BinaryInput, lam: float) -> float:
    """Chernoff bound on the MAP error, both tails evaluated at ``xi = k``.

    Needs ``lam < k < lam + eta0``; raises RegimeError otherwise.
    """
    k = map_threshold_poisson(inp, lam)
    if not lam < k < lam + inp.amplitude:
        raise RegimeError(f"threshold {k} outside ({lam}, {lam + inp.amplitude})")
    upper_tail = poisson_tail_bounds(lam, float(k)).bound
    lower_tail = poisson_tail_bounds(lam + inp.amplitude, float(k)).bound
    return inp.mass_low * upper_tail + inp.mass_high * lower_tail


def fano_lower_bound_poisson(inp: BinaryInput, lam: float) -> BoundReport:
    """``H(X) - H_b(P_e)`` for the two-point input and its MAP error."""
    L = inp.log_inv_eps
    scaled = {
        "entropy_input": scaled_entropy_terms(inp.log_mass_high, L),
        "minus_hb_pe": -scaled_entropy_terms(log_pe_exact_poisson(inp, lam), L),
    }
    a = inp.a_param
    echo = {
        "epsilon": inp.epsilon,
        "log_inv_eps": L,
        "a_p": a,
        "dark_current": lam,
        "amplitude": inp.amplitude,
        "mass_high": inp.mass_high,
        "threshold": map_threshold_poisson(inp, lam),
    }
    validity = {
        "asymptotic_regime": bool(a > 1.0) if math.isfinite(a) else False,
        "informative": math.fsum(scaled.values()) > 0.0,
    }
    return BoundReport.from_scaled(inp.epsilon, scaled, echo, validity)


def lower_bound_poisson(params: PoissonBoundParams) -> BoundReport:
    """Fano lower bound for the two-point input built from ``params``."""
    lam = params.dark_current
    if params.epsilon > 0.0:
        inp = binary_input_poisson(params.epsilon, params.a_p, lam)
    else:
        inp = binary_input_poisson(a_p=params.a_p, lam=lam, log_inv_eps=params.log_inv_eps)
    return fano_lower_bound_poisson(inp, lam)
