"""Channel laws, seeded samplers and the two piecewise auxiliary output laws."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, xlogy

from . import _kernels
from .errors import ConstraintError, DomainError, UsageError, ValidityViolated
from .numerics import (
    GAUSS_WINDOW,
    LOG_SQRT_2PI,
    RealInterval,
    integrate,
    log_poisson_pmf,
    phi,
    poisson_support_size,
    q_tail,
)

GAUSSIAN = "gaussian"
POISSON = "poisson"

# Default free parameter of the geometric tail.
DEFAULT_GEOM_P = 0.5


@dataclass(frozen=True)
class ChannelSpec:
    """Either the unit-variance Gaussian channel or a Poisson channel with dark current."""

    kind: str
    dark_current: float = 0.0

    def __post_init__(self):
        if self.kind not in (GAUSSIAN, POISSON):
            raise DomainError(f"unknown channel kind {self.kind!r}")
        if self.kind == POISSON and not (
            math.isfinite(self.dark_current) and self.dark_current > 0.0
        ):
            raise DomainError("a Poisson channel needs dark_current > 0")

    @classmethod
    def gaussian(cls) -> "ChannelSpec":
        return cls(GAUSSIAN)

    @classmethod
    def poisson(cls, dark_current: float) -> "ChannelSpec":
        return cls(POISSON, float(dark_current))

    @property
    def is_gaussian(self) -> bool:
        return self.kind == GAUSSIAN


@dataclass(frozen=True)
class ConstraintBudget:
    epsilon: float

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon > 0.0):
            raise DomainError("average-intensity budget must be positive")


def _check_input(x):
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0):
        raise ConstraintError("channel input must be finite and nonnegative")
    return arr


def log_likelihood(ch: ChannelSpec, x, y):
    """Log density (Gaussian) or log pmf (Poisson) of output ``y`` given input ``x``."""
    xx = _check_input(x)
    if ch.is_gaussian:
        d = np.asarray(y, dtype=float) - xx
        out = -0.5 * d * d - LOG_SQRT_2PI
        return float(out) if np.ndim(out) == 0 else out
    return log_poisson_pmf(y, ch.dark_current + xx)


def likelihood(ch: ChannelSpec, x, y):
    out = np.exp(log_likelihood(ch, x, y))
    return float(out) if np.ndim(out) == 0 else out


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based Philox generator for ``(seed, stream)``.

    Stream splitting rule: block ``b`` of any simulation draws from
    ``make_rng(seed, b)``, so results do not depend on how blocks are
    distributed over workers.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


def sample(ch: ChannelSpec, x: float, rng: np.random.Generator, size=None):
    """Draw channel outputs for input ``x``."""
    xx = float(_check_input(x))
    if ch.is_gaussian:
        return xx + rng.standard_normal(size)
    return rng.poisson(ch.dark_current + xx, size)


# --------------------------------------------------------------- auxiliaries


@dataclass(frozen=True)
class AuxDistGaussian:
    """Gaussian body on ``(-inf, knee]`` glued to an exponential tail.

    ``R(y) = (1-beta)/(sqrt(2 pi) Q(-knee)) exp(-y^2/2)`` for ``y <= knee`` and
    ``beta exp(-(y - knee))`` above, with ``beta = exp(-knee^2/2)``. The jump at
    the knee is intentional.
    """

    knee: float
    beta: float
    log_body_coef: float = field(repr=False)

    def log_density(self, y):
        y = np.asarray(y, dtype=float)
        body = self.log_body_coef - 0.5 * y * y
        tail = math.log(self.beta) - (y - self.knee)
        out = np.where(y <= self.knee, body, tail)
        return float(out) if out.ndim == 0 else out

    def density(self, y):
        out = np.exp(self.log_density(y))
        return float(out) if np.ndim(out) == 0 else out

    def total_mass(self, tol: float = 1e-13) -> float:
        body = integrate(
            lambda y: math.exp(self.log_density(y)),
            RealInterval(-GAUSS_WINDOW - 30.0, self.knee),
            tol=tol,
        )
        # exponential tail is e-folding per unit; 60 units leave < 1e-26
        tail = integrate(
            lambda y: math.exp(self.log_density(y)),
            RealInterval(self.knee, self.knee + 60.0),
            tol=tol,
        )
        return body + tail


def make_aux_gaussian(t: float) -> AuxDistGaussian:
    if not (math.isfinite(t) and t > 0.0):
        raise DomainError(f"knee must be positive, got {t}")
    beta = math.exp(-0.5 * t * t)
    if beta == 0.0:
        raise DomainError(f"knee {t} too large: exp(-t^2/2) underflows")
    log_coef = math.log1p(-beta) - LOG_SQRT_2PI - math.log(q_tail(-t))
    return AuxDistGaussian(knee=float(t), beta=beta, log_body_coef=log_coef)


@dataclass(frozen=True)
class AuxDistPoisson:
    """Truncated Poisson(dark current) head on ``0..knee-1`` with a geometric tail.

    ``R(y) = (1-beta)/head_mass * Poi_lambda(y)`` below the knee and
    ``beta (1-p) p^(y-knee)`` from the knee on.
    """

    dark_current: float
    knee: int
    geom_p: float
    beta: float
    head_mass: float

    def log_pmf(self, y):
        y = np.asarray(y, dtype=float)
        lam = self.dark_current
        head = (
            math.log1p(-self.beta)
            - math.log(self.head_mass)
            + xlogy(y, lam)
            - lam
            - gammaln(y + 1.0)
        )
        tail = math.log(self.beta) + math.log1p(-self.geom_p) + (y - self.knee) * math.log(self.geom_p)
        out = np.where(y < self.knee, head, tail)
        return float(out) if out.ndim == 0 else out

    def pmf(self, y):
        out = np.exp(self.log_pmf(y))
        return float(out) if np.ndim(out) == 0 else out

    def total_mass(self, n_terms: int | None = None) -> float:
        if n_terms is None:
            # geometric tail below 1e-18 of beta
            n_terms = self.knee + int(math.ceil(math.log(1e-18) / math.log(self.geom_p))) + 1
        return float(np.exp(self.log_pmf(np.arange(n_terms))).sum())


def make_aux_poisson(lam: float, eta: int, p: float = DEFAULT_GEOM_P) -> AuxDistPoisson:
    """Build the Poisson auxiliary law with knee ``eta`` (needs ``eta > lam``)."""
    if not (math.isfinite(lam) and lam > 0.0):
        raise DomainError("dark current must be positive")
    if int(eta) != eta or eta < 1:
        raise DomainError(f"knee must be an integer >= 1, got {eta}")
    eta = int(eta)
    if not 0.0 < p < 1.0:
        raise DomainError(f"geometric parameter must lie in (0, 1), got {p}")
    if eta <= lam:
        raise ValidityViolated(f"knee {eta} <= dark current {lam}: beta would be >= 1")
    beta = math.exp(-(eta - lam) * math.log(eta / lam))
    ys = np.arange(eta, dtype=float)
    head_mass = float(np.exp(xlogy(ys, lam) - lam - gammaln(ys + 1.0)).sum())
    return AuxDistPoisson(
        dark_current=float(lam), knee=eta, geom_p=float(p), beta=beta, head_mass=head_mass
    )


# ----------------------------------------------------------------- divergence


def _gaussian_kl_closed(x, aux: AuxDistGaussian):
    # cross-entropy of N(x,1) against R, split at the knee
    x = np.asarray(x, dtype=float)
    t = aux.knee
    below = q_tail(x - t)  # P(Y <= t)
    above = q_tail(t - x)
    body = -aux.log_body_coef * below + 0.5 * ((1.0 + x * x) * below - (x + t) * phi(x - t))
    tail = 0.5 * t * t * above + (x - t) * above + phi(t - x)
    kl = body + tail - (LOG_SQRT_2PI + 0.5)
    return np.maximum(kl, 0.0)


def _gaussian_kl_quad(x: float, aux: AuxDistGaussian) -> float:
    def integrand(y):
        d = y - x
        lw = -0.5 * d * d - LOG_SQRT_2PI
        return math.exp(lw) * (lw - aux.log_density(y))

    lo, hi = x - GAUSS_WINDOW, x + GAUSS_WINDOW
    total = 0.0
    cuts = [lo] + ([aux.knee] if lo < aux.knee < hi else []) + [hi]
    for a, b in zip(cuts[:-1], cuts[1:]):
        total += integrate(integrand, RealInterval(a, b), tol=1e-14, rel_tol=1e-12)
    return max(total, 0.0)


def _poisson_kl(xs, aux: AuxDistPoisson):
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    means = aux.dark_current + xs
    n = poisson_support_size(float(means.max()))
    ys = np.arange(n, dtype=float)
    lw = _kernels.active.log_poisson_table(means, ys)
    w = np.exp(lw)
    kl = (w * (lw - aux.log_pmf(ys)[None, :])).sum(axis=1)
    return np.maximum(kl, 0.0)


def kl_to_aux(ch: ChannelSpec, x, aux, method: str = "closed"):
    """``D(W(.|x) || R)`` in nats for one input or an array of inputs.

    Gaussian: ``method="closed"`` uses the exact split-at-knee moment
    formulas; ``method="quad"`` integrates numerically (slower, used as a
    cross-check). Poisson: truncated summation.
    """
    xx = _check_input(x)
    if ch.is_gaussian:
        if not isinstance(aux, AuxDistGaussian):
            raise UsageError("Gaussian channel needs a Gaussian auxiliary law")
        if method == "closed":
            out = _gaussian_kl_closed(xx, aux)
        elif method == "quad":
            out = np.vectorize(lambda v: _gaussian_kl_quad(float(v), aux))(xx)
        else:
            raise UsageError(f"unknown method {method!r}")
        return float(out) if np.ndim(out) == 0 else out
    if not isinstance(aux, AuxDistPoisson):
        raise UsageError("Poisson channel needs a Poisson auxiliary law")
    if aux.dark_current != ch.dark_current:
        raise UsageError("auxiliary law was built for a different dark current")
    out = _poisson_kl(xx, aux)
    return float(out[0]) if np.ndim(xx) == 0 else out
