"""Bounds on the capacity of the Gaussian intensity channel ``Y = x + Z``.

The upper bound comes from a duality argument with a Gaussian-body,
exponential-tail output law whose knee sits at ``t = a_G sqrt(L)``. The lower
bound uses a two-point input at ``x0 = a_G sqrt(L)``, the MAP detector and
Fano's inequality. Every formula is evaluated from ``L = log(1/epsilon)`` and
reported both as a value and divided by ``epsilon``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError, RegimeError
from .numerics import SQRT_2PI, log_q_tail, phi, q_tail
from .reports import BinaryInput, BoundReport, resolve_budget, scaled_entropy_terms

SQRT2 = math.sqrt(2.0)
LINEAR_COEF = 2.0 + 1.0 / (2.0 * SQRT_2PI)

UPPER_TERMS = ("beta_ratio", "knee_phi", "two_eps_over_t", "linear_eps", "dominant")
LOWER_TERMS = ("entropy_input", "minus_hb_pe")


@dataclass(frozen=True)
class GaussianBoundParams:
    """Budget and exponent parameter for the Gaussian bounds.

    Give ``epsilon`` directly, or leave it ``None`` and pass ``log_inv_eps``
    (useful when ``epsilon`` would underflow).
    """

    epsilon: Optional[float]
    a_g: float
    log_inv_eps: Optional[float] = None

    def __post_init__(self):
        if self.epsilon is None or self.log_inv_eps is None:
            eps, L = resolve_budget(self.epsilon, self.log_inv_eps)
            object.__setattr__(self, "epsilon", eps)
            object.__setattr__(self, "log_inv_eps", L)
        if not (math.isfinite(self.a_g) and self.a_g > 0.0):
            raise DomainError(f"a_g must be positive, got {self.a_g}")

    @classmethod
    def from_log(cls, log_inv_eps: float, a_g: float) -> "GaussianBoundParams":
        return cls(None, a_g, log_inv_eps=log_inv_eps)

    @property
    def knee(self) -> float:
        return self.a_g * math.sqrt(self.log_inv_eps)

    @property
    def asymptotic_regime(self) -> bool:
        return self.a_g > SQRT2


def asymptote_gaussian(epsilon=None, log_inv_eps=None) -> float:
    """Leading-order capacity ``epsilon sqrt(L/2)``."""
    eps, L = resolve_budget(epsilon, log_inv_eps)
    return eps * math.sqrt(0.5 * L)


def asymptote_gaussian_over_eps(log_inv_eps: float) -> float:
    resolve_budget(log_inv_eps=log_inv_eps)
    return math.sqrt(0.5 * log_inv_eps)


def upper_bound(params: GaussianBoundParams) -> BoundReport:
    """Closed-form duality upper bound with its five additive terms.

    ``beta/(1-beta) + (t/2+1) phi(t) + 2 eps/t + (2 + 1/(2 sqrt(2 pi))) eps + eps t/2``
    with ``beta = exp(-t^2/2)``. Outside ``a_g > sqrt(2)`` the value is still
    returned but ``validity["asymptotic_regime"]`` is False.
    """
    L, a = params.log_inv_eps, params.a_g
    t = params.knee
    half_t2 = 0.5 * a * a * L
    beta = math.exp(-half_t2)
    # beta and phi(t) carry a factor exp(-a^2 L / 2); dividing by eps adds L
    scaled = {
        "beta_ratio": math.exp(L - half_t2 - math.log1p(-beta)),
        "knee_phi": (0.5 * t + 1.0) * math.exp(L - half_t2) / SQRT_2PI,
        "two_eps_over_t": 2.0 / t,
        "linear_eps": LINEAR_COEF,
        "dominant": 0.5 * t,
    }
    echo = {"epsilon": params.epsilon, "log_inv_eps": L, "a_g": a, "t": t, "beta": beta}
    return BoundReport.from_scaled(
        params.epsilon, scaled, echo, {"asymptotic_regime": params.asymptotic_regime}
    )


def optimal_a_gaussian(epsilon=None, log_inv_eps=None, a_max: float = 4.0) -> float:
    """Minimise the closed-form upper bound over ``a_g`` in ``(sqrt(2), a_max]``."""
    _, L = resolve_budget(epsilon, log_inv_eps)
    res = minimize_scalar(
        lambda a: upper_bound(GaussianBoundParams.from_log(L, a)).value_over_eps,
        bounds=(SQRT2 * (1.0 + 1e-12), a_max),
        method="bounded",
        options={"xatol": 1e-10},
    )
    return float(res.x)


# ------------------------------------------------------------- lower bound


def binary_input_gaussian(epsilon=None, a_g=None, log_inv_eps=None) -> BinaryInput:
    """Two-point input with amplitude ``a_g sqrt(L)`` and mean exactly ``epsilon``."""
    _, L = resolve_budget(epsilon, log_inv_eps)
    if a_g is None or not (math.isfinite(a_g) and a_g > 0.0):
        raise DomainError(f"a_g must be positive, got {a_g}")
    x0 = a_g * math.sqrt(L)
    return BinaryInput.with_mean(x0, epsilon=epsilon, a_param=a_g, log_inv_eps=log_inv_eps)


def map_threshold_gaussian(inp: BinaryInput) -> float:
    """MAP threshold ``x0/2 + log((1-m)/m)/x0``; decide the high symbol iff ``y > t*``."""
    if not inp.mass_high < 1.0 or inp.amplitude <= inp.mean:
        raise DomainError("amplitude must exceed the mean")
    return 0.5 * inp.amplitude + inp.log_prior_ratio / inp.amplitude


def pe_threshold_gaussian(inp: BinaryInput, threshold: float) -> float:
    """Exact error probability of the rule 'high iff y > threshold'."""
    if math.isinf(threshold):
        return inp.mass_high if threshold > 0 else inp.mass_low
    return inp.mass_low * q_tail(threshold) + inp.mass_high * q_tail(inp.amplitude - threshold)


def log_pe_exact_gaussian(inp: BinaryInput) -> float:
    """``log P_e`` of the MAP detector, finite even when ``P_e`` underflows."""
    thr = map_threshold_gaussian(inp)
    return float(
        np.logaddexp(
            math.log(inp.mass_low) + log_q_tail(thr),
            inp.log_mass_high + log_q_tail(inp.amplitude - thr),
        )
    )


def pe_exact_gaussian(inp: BinaryInput) -> float:
    """Exact MAP error probability ``(1-m) Q(t*) + m Q(x0 - t*)``."""
    return math.exp(log_pe_exact_gaussian(inp))


def pe_bound_chain_gaussian(inp: BinaryInput) -> float:
    """Upper bound on the MAP error from ``Q(x) <= phi(x)/x``.

    With ``z = (a/2 + 1/a) sqrt(L)`` and
    ``w = (a/2 - 1/a) sqrt(L) - log(x0 - eps)/x0`` the bound is
    ``phi(z)/z + m phi(w)/w``. Needs ``x0 - eps >= 1`` (so the first threshold
    is at least ``z``) and ``w > 0``; otherwise raises RegimeError.
    """
    x0, eps, L = inp.amplitude, inp.epsilon, inp.log_inv_eps
    if x0 - eps < 1.0:
        raise RegimeError("needs amplitude - epsilon >= 1")
    a = x0 / math.sqrt(L)
    z = (0.5 * a + 1.0 / a) * math.sqrt(L)
    w = (0.5 * a - 1.0 / a) * math.sqrt(L) - math.log(x0 - eps) / x0
    if w <= 0.0:
        raise RegimeError("second Q argument is not positive")
    return phi(z) / z + inp.mass_high * phi(w) / w


def binary_entropy(p) -> float:
    """``-p log p - (1-p) log(1-p)`` in nats, with ``0 log 0 = 0``."""
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"probability must lie in [0, 1], got {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log(p) - (1.0 - p) * math.log1p(-p)


def entropy_input_asymptotic(inp: BinaryInput) -> float:
    """Leading-order ``H(X)``: ``(eps/x0)(L + log a + log(L)/2) + eps/x0``.

    The last ``eps/x0`` approximates ``-(1-m) log(1-m)``. Diagnostic only.
    """
    L = inp.log_inv_eps
    a = inp.amplitude / math.sqrt(L)
    m = inp.mass_high
    return m * (L + math.log(a) + 0.5 * math.log(L)) + m


def fano_lower_bound(inp: BinaryInput) -> BoundReport:
    """``H(X) - H_b(P_e)`` for the two-point input and its MAP error.

    ``validity["informative"]`` is False when the value is not positive.
    """
    L = inp.log_inv_eps
    scaled = {
        "entropy_input": scaled_entropy_terms(inp.log_mass_high, L),
        "minus_hb_pe": -scaled_entropy_terms(log_pe_exact_gaussian(inp), L),
    }
    a = inp.a_param
    echo = {
        "epsilon": inp.epsilon,
        "log_inv_eps": L,
        "a_g": a,
        "amplitude": inp.amplitude,
        "mass_high": inp.mass_high,
        "threshold": map_threshold_gaussian(inp),
    }
    validity = {
        "asymptotic_regime": bool(a > SQRT2) if math.isfinite(a) else False,
        "informative": math.fsum(scaled.values()) > 0.0,
    }
    return BoundReport.from_scaled(inp.epsilon, scaled, echo, validity)


def lower_bound(params: GaussianBoundParams) -> BoundReport:
    """Fano lower bound for the two-point input built from ``params``."""
    if params.epsilon > 0.0:
        inp = binary_input_gaussian(params.epsilon, params.a_g)
    else:
        inp = binary_input_gaussian(a_g=params.a_g, log_inv_eps=params.log_inv_eps)
    return fano_lower_bound(inp)
