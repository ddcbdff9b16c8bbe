"""Value types shared by the Gaussian and Poisson bound modules.

Budgets are carried as ``L = log(1/epsilon)`` so that every bound stays
computable when ``epsilon`` itself underflows. Quantities that scale with
``epsilon`` are also reported divided by it (``*_over_eps``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConstraintError, DomainError


def resolve_budget(epsilon=None, log_inv_eps=None):
    """Return ``(epsilon, L)`` from whichever of the two was given."""
    if (epsilon is None) == (log_inv_eps is None):
        raise DomainError("give exactly one of epsilon or log_inv_eps")
    if log_inv_eps is None:
        if not (math.isfinite(epsilon) and 0.0 < epsilon < 1.0):
            raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
        return float(epsilon), -math.log(epsilon)
    if not (math.isfinite(log_inv_eps) and log_inv_eps > 0.0):
        raise DomainError(f"log(1/epsilon) must be positive, got {log_inv_eps}")
    return math.exp(-log_inv_eps), float(log_inv_eps)


@dataclass(frozen=True)
class BoundReport:
    """A bound value with its additive breakdown and named validity checks.

    ``value == sum(terms.values())``. ``value_over_eps`` and
    ``terms_over_eps`` hold the same numbers divided by epsilon and remain
    meaningful when epsilon underflows. ``log_value_over_eps`` stays finite
    even when a scaled term overflows.
    """

    value: float
    terms: dict
    params_echo: dict
    validity: dict
    value_over_eps: float = math.nan
    terms_over_eps: dict = field(default_factory=dict)
    log_value_over_eps: float = math.nan

    @property
    def valid(self) -> bool:
        return all(self.validity.values())

    @classmethod
    def from_scaled(cls, epsilon, terms_over_eps, params_echo, validity, log_value_over_eps=None):
        terms = {k: epsilon * v for k, v in terms_over_eps.items()}
        scaled_total = math.fsum(terms_over_eps.values())
        if log_value_over_eps is None:
            log_value_over_eps = math.log(scaled_total) if scaled_total > 0.0 else math.nan
        return cls(
            value=math.fsum(terms.values()),
            terms=terms,
            params_echo=dict(params_echo),
            validity=dict(validity),
            value_over_eps=scaled_total,
            terms_over_eps=dict(terms_over_eps),
            log_value_over_eps=float(log_value_over_eps),
        )


@dataclass(frozen=True)
class BinaryInput:
    """Two-point input: ``amplitude`` with probability ``mass_high``, else 0.

    ``log_mass_high`` is kept separately because ``mass_high`` underflows in
    the large-``L`` regime.
    """

    amplitude: float
    mass_high: float
    epsilon: float
    a_param: float
    log_inv_eps: float
    log_mass_high: float

    @classmethod
    def with_mean(cls, amplitude, epsilon=None, a_param=math.nan, log_inv_eps=None):
        """Place mass ``epsilon / amplitude`` at ``amplitude`` so the mean is epsilon."""
        eps, L = resolve_budget(epsilon, log_inv_eps)
        if not (math.isfinite(amplitude) and amplitude > 0.0):
            raise DomainError(f"amplitude must be positive, got {amplitude}")
        log_m = -L - math.log(amplitude)
        if log_m >= 0.0:
            raise ConstraintError(
                f"mass on the high point would be {math.exp(log_m):.6g} >= 1 "
                f"(amplitude {amplitude:.6g} <= epsilon {eps:.6g})"
            )
        m = eps / amplitude if eps > 0.0 else math.exp(log_m)
        return cls(
            amplitude=float(amplitude),
            mass_high=m,
            epsilon=eps,
            a_param=float(a_param),
            log_inv_eps=L,
            log_mass_high=log_m,
        )

    @classmethod
    def synthetic(cls, amplitude, mass_high):
        """Arbitrary two-point law (no budget semantics); epsilon is its mean."""
        if not 0.0 < mass_high < 1.0:
            raise DomainError("mass_high must lie in (0, 1)")
        mean = amplitude * mass_high
        return cls(
            amplitude=float(amplitude),
            mass_high=float(mass_high),
            epsilon=mean,
            a_param=math.nan,
            log_inv_eps=-math.log(mean),
            log_mass_high=math.log(mass_high),
        )

    @property
    def mean(self) -> float:
        return self.mass_high * self.amplitude

    @property
    def mass_low(self) -> float:
        return -math.expm1(self.log_mass_high) if self.log_mass_high < -1e-300 else 1.0 - self.mass_high

    @property
    def log_prior_ratio(self) -> float:
        """``log((1 - m) / m)`` for the high-point mass ``m``."""
        return math.log1p(-self.mass_high) - self.log_mass_high


def scaled_entropy_terms(log_mass: float, log_inv_eps: float):
    """Two-point entropy ``H_b(m)`` divided by epsilon, computed from ``log m``.

    ``H_b(m)/eps = exp(log m + L) * (-log m - (1-m) log(1-m)/m)``.
    """
    from .numerics import one_minus_log_ratio

    if log_mass == -math.inf:
        return 0.0
    m = math.exp(log_mass)
    return math.exp(log_mass + log_inv_eps) * (-log_mass + one_minus_log_ratio(m))
