"""Numerical ground truth: exact mutual information for finite inputs, a
mean-constrained Blahut-Arimoto solver and a numeric duality bound.

All capacities computed here are *grid-restricted*: the supremum runs over
input laws supported on the given finite grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from . import _kernels
from .channels import ChannelSpec, kl_to_aux
from .errors import ConstraintError, ConvergenceError, DomainError
from .numerics import (
    GAUSS_WINDOW,
    LOG_SQRT_2PI,
    RealInterval,
    integrate,
    poisson_support_size,
)
from .reports import BinaryInput

# Output step for the discretised Gaussian channel. Riemann sums of these
# analytic integrands converge exponentially in 1/step; at this step the
# mutual information of the two-point test inputs matches the continuous
# value to rounding level (relative 1e-12 or better when it exceeds 1e-4).
GAUSS_Y_STEP = 0.05


@dataclass(frozen=True)
class DiscreteInput:
    """Finite input law: strictly increasing ``support`` with masses ``pmf``."""

    support: np.ndarray
    pmf: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.support, dtype=float).ravel()
        p = np.asarray(self.pmf, dtype=float).ravel()
        if s.size == 0 or s.shape != p.shape:
            raise DomainError("support and pmf must be nonempty and of equal length")
        if np.any(~np.isfinite(s)) or np.any(s < 0.0):
            raise ConstraintError("support points must be finite and nonnegative")
        if np.any(np.diff(s) <= 0.0):
            raise DomainError("support must be strictly increasing")
        if np.any(~np.isfinite(p)) or np.any(p < 0.0):
            raise DomainError("masses must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise DomainError(f"masses sum to {p.sum():.17g}, not 1")
        s.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "pmf", p)

    @classmethod
    def from_binary(cls, inp: BinaryInput) -> "DiscreteInput":
        return cls(np.array([0.0, inp.amplitude]), np.array([inp.mass_low, inp.mass_high]))

    @property
    def mean(self) -> float:
        return float(self.support @ self.pmf)

    def entropy(self) -> float:
        p = self.pmf[self.pmf > 0.0]
        return float(-(p * np.log(p)).sum())


@dataclass(frozen=True)
class BAResult:
    """Grid-restricted constrained capacity from Blahut-Arimoto.

    ``capacity_estimate`` is the mutual information of the returned feasible
    ``input``; ``capacity_estimate + gap`` is a certified upper bound on the
    grid-restricted capacity.
    """

    capacity_estimate: float
    input: DiscreteInput
    multiplier: float
    iterations: int
    gap: float

    @property
    def upper(self) -> float:
        return self.capacity_estimate + self.gap


# ------------------------------------------------------------ mutual information


def _softplus(u):
    return np.logaddexp(0.0, u)


def _gauss_cross_terms(support, logp, i, y):
    # u_i(y) = log sum_{j != i} p_j W_j(y) / (p_i W_i(y))
    xi = support[i]
    others = np.delete(np.arange(support.size), i)
    xj = support[others]
    # log W_j - log W_i = (xj - xi) y - (xj^2 - xi^2)/2
    expo = logp[others] - logp[i] + (xj - xi) * y - 0.5 * (xj * xj - xi * xi)
    return logsumexp(expo)


def _mi_gaussian_posterior(support, pmf, tol):
    logp = np.log(pmf)
    h_cond = 0.0
    for i in range(support.size):
        xi = support[i]
        # decision boundaries between neighbours, where the integrand bends
        cuts = []
        for j in (i - 1, i + 1):
            if 0 <= j < support.size:
                d = support[j] - xi
                cuts.append(0.5 * (support[j] + xi) + (logp[i] - logp[j]) / d)

        def integrand(y, i=i, xi=xi):
            d = y - xi
            return math.exp(-0.5 * d * d - LOG_SQRT_2PI) * float(
                _softplus(_gauss_cross_terms(support, logp, i, y))
            )

        val = integrate(
            integrand,
            RealInterval(xi - GAUSS_WINDOW, xi + GAUSS_WINDOW),
            tol=1e-300,
            rel_tol=tol,
            points=cuts,
        )
        h_cond += pmf[i] * val
    return h_cond


def _mi_gaussian_entropy(support, pmf, tol):
    # I = h(Y) - log(2 pi e)/2 with h(Y) from the mixture density
    logp = np.log(pmf)

    def neg_dens_log_dens(y):
        lw = logp - 0.5 * (y - support) ** 2 - LOG_SQRT_2PI
        lq = logsumexp(lw)
        return -math.exp(lq) * lq

    # merge the per-component windows into disjoint intervals
    spans = sorted((x - GAUSS_WINDOW, x + GAUSS_WINDOW) for x in support)
    merged = [list(spans[0])]
    for lo, hi in spans[1:]:
        if lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    h = 0.0
    for lo, hi in merged:
        pts = [x for x in support if lo < x < hi]
        h += integrate(neg_dens_log_dens, RealInterval(lo, hi), tol=tol, points=pts, limit=2000)
    return h - (LOG_SQRT_2PI + 0.5)


def _poisson_log_table(lam, support):
    means = lam + support
    n = poisson_support_size(float(means.max()))
    ys = np.arange(n, dtype=float)
    return _kernels.active.log_poisson_table(means, ys)


def _mi_poisson_posterior(lam, support, pmf):
    lw = _poisson_log_table(lam, support)
    logp = np.log(pmf)
    a = logp[:, None] + lw
    h_cond = 0.0
    for i in range(support.size):
        rest = np.delete(a, i, axis=0)
        u = logsumexp(rest, axis=0) - a[i]
        h_cond += pmf[i] * float((np.exp(lw[i]) * _softplus(u)).sum())
    return h_cond


def _mi_poisson_entropy(lam, support, pmf):
    lw = _poisson_log_table(lam, support)
    w = np.exp(lw)
    lq = logsumexp(np.log(pmf)[:, None] + lw, axis=0)
    h_y = -float((np.exp(lq) * lq).sum())
    h_rows = -(w * lw).sum(axis=1)
    return h_y - float(pmf @ h_rows)


def mi_exact(ch: ChannelSpec, inp: DiscreteInput, method: str = "posterior", tol: float = 1e-11) -> float:
    """Mutual information ``I(X;Y)`` in nats for a finite input law.

    ``method="posterior"`` evaluates ``H(X) - H(X|Y)`` with ``H(X|Y)`` as an
    expectation of ``log(1 + sum_{j != i} p_j W_j / (p_i W_i))``; it keeps
    relative accuracy when the input is nearly deterministic. ``method="entropy"``
    evaluates ``h(Y) - h(Y|X)`` directly and serves as a cross-check.
    Gaussian outputs are integrated by adaptive quadrature, Poisson outputs by
    truncated summation.
    """
    keep = inp.pmf > 0.0
    support, pmf = inp.support[keep], inp.pmf[keep]
    if support.size == 1:
        return 0.0
    pmf = pmf / pmf.sum()
    h_x = float(-(pmf * np.log(pmf)).sum())
    if method == "posterior":
        if ch.is_gaussian:
            mi = h_x - _mi_gaussian_posterior(support, pmf, tol)
        else:
            mi = h_x - _mi_poisson_posterior(ch.dark_current, support, pmf)
    elif method == "entropy":
        if ch.is_gaussian:
            mi = _mi_gaussian_entropy(support, pmf, max(tol, 1e-13))
        else:
            mi = _mi_poisson_entropy(ch.dark_current, support, pmf)
    else:
        raise DomainError(f"unknown method {method!r}")
    return min(max(mi, 0.0), h_x)


# ---------------------------------------------------------------- Blahut-Arimoto


def default_x_grid(epsilon: float, amplitude: float, n: int = 200) -> np.ndarray:
    """``{0}`` plus ``n - 1`` geometric points from ``epsilon/10`` to ``2 amplitude``.

    ``amplitude`` itself is inserted so the two-point input lies on the grid.
    """
    if not (epsilon > 0.0 and amplitude > epsilon / 10.0):
        raise DomainError("need 0 < epsilon/10 < amplitude")
    pts = np.geomspace(epsilon / 10.0, 2.0 * amplitude, n - 1)
    return np.unique(np.concatenate(([0.0, amplitude], pts)))


def discretize(ch: ChannelSpec, grid: np.ndarray, y_step: float = GAUSS_Y_STEP):
    """Transition matrix of the channel restricted to ``grid``, rows summing to one.

    Gaussian outputs live on a uniform grid of spacing ``y_step`` covering
    every component window; Poisson outputs are truncated per component.
    """
    grid = np.asarray(grid, dtype=float)
    if ch.is_gaussian:
        y = np.arange(grid.min() - GAUSS_WINDOW, grid.max() + GAUSS_WINDOW + y_step, y_step)
        lw = -0.5 * (y[None, :] - grid[:, None]) ** 2 - LOG_SQRT_2PI + math.log(y_step)
    else:
        lw = _poisson_log_table(ch.dark_current, grid)
    w = np.exp(lw)
    # renormalise away the truncation and quadrature error (below 1e-18)
    w /= w.sum(axis=1, keepdims=True)
    return w


def _row_entropies(w):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(w > 0.0, w * np.log(w), 0.0).sum(axis=1)


def _safe_log(q):
    # output cells whose probability underflows get the same floor as the kernels
    return np.log(np.where(q > 0.0, q, 1e-300))


def _divergences(w, wlogw, p):
    return wlogw - w @ _safe_log(p @ w)


# points whose tilted score is within this many current gaps of the
# objective join the active set
ACTIVE_MARGIN = 4.0
# masses at or below this are treated as absent (the kernels floor at 1e-200)
LIVE_MASS = 1e-150
# relative rounding noise of the objective p @ (c - W log q)
ROUND_NOISE = 64 * np.finfo(float).eps
# curvature below this fraction of the largest counts as flat
FLAT_CURVATURE = 1e-13


def _newton_polish(w, wlogw, x, s, p, max_steps=60):
    """Maximise ``I(p) - s E_p[X]`` over the current support by Newton's method.

    The support is the set of points carrying non-negligible mass. Steps
    solve the equality-constrained Newton system, stay inside the simplex and
    are halved until the objective does not drop, so the objective is
    nondecreasing. Points whose mass reaches zero leave the support.
    Returns the new ``p`` and the objective after each accepted step.
    """
    idx = np.flatnonzero(p > LIVE_MASS)
    pa = p[idx] / p[idx].sum()
    W = w[idx]
    c = wlogw[idx] - s * x[idx]

    def objective(v):
        # same expression as the iteration kernels, so histories line up
        return float(v @ (c - W @ _safe_log(v @ W)))

    f = objective(pa)
    hist = []
    for _ in range(max_steps):
        m = pa.size
        if m == 1:
            break
        q = pa @ W
        grad = c - W @ _safe_log(q)
        if grad.max() - grad.min() <= 1e-14:
            break
        # Newton direction in the tangent space sum(d) = 0, in the variables
        # d = sqrt(p) z. This scaling makes the curvature O(1) for points of
        # any mass, so tiny far-out masses are solved as accurately as the
        # bulk. Near-duplicate grid points leave directions with almost no
        # curvature; there the objective is linear, so the step follows the
        # gradient until some mass reaches zero.
        r = np.sqrt(pa)
        r /= np.linalg.norm(r)
        proj = np.eye(m) - np.outer(r, r)
        curv = proj @ (r[:, None] * ((W / q) @ W.T) * r[None, :]) @ proj
        b = proj @ (r * grad)
        ev, vec = np.linalg.eigh(curv)
        stiff = ev > FLAT_CURVATURE * ev[-1]
        coef = vec.T @ b
        d = r * (vec[:, stiff] @ (coef[stiff] / ev[stiff]))
        d_flat = r * (vec[:, ~stiff] @ coef[~stiff])
        shrink = d_flat < 0.0
        if shrink.any():
            reach = float(np.min(pa[shrink] / -d_flat[shrink]))
            if math.isfinite(reach):
                d = d + reach * d_flat
        if not np.all(np.isfinite(d)):
            break
        # full step first; clipping at zero drops exhausted points. Changes
        # of tiny masses move the objective by less than its rounding noise,
        # so within that noise a step is judged by the support gap instead.
        noise = ROUND_NOISE * float(pa @ np.abs(grad))
        gap = _support_gap(grad, pa)
        t = 1.0
        accepted = False
        while t > 1e-14:
            cand = np.maximum(pa + t * d, 0.0)
            total = cand.sum()
            if not total > 0.0:
                t *= 0.5
                continue
            cand /= total
            fc = objective(cand)
            if fc > f + noise:
                accepted = True
                break
            if fc >= f - noise:
                qc = cand @ W
                if _support_gap(c - W @ _safe_log(qc), cand) < gap:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            break
        keep = cand > 0.0
        pa, f, idx, W, c = cand[keep], fc, idx[keep], W[keep], c[keep]
        pa /= pa.sum()
        hist.append(f)
    # masses below LIVE_MASS were not part of the solve and are kept as is
    live = p > LIVE_MASS
    out = np.where(live, 0.0, p)
    out[idx] = pa * p[live].sum()
    return out / out.sum(), hist


def _support_gap(g, p):
    top = float(g.max())
    return top - (top + math.log(float(p @ np.exp(g - top))))


def _seed_violators(w, wlogw, x, s, p, tol, n_seed=5):
    """Move a little mass onto the grid points that most violate optimality.

    A point with ``g_i > p @ g`` raises the objective to first order when
    mass is shifted onto it; the shifted amount is quartered until the
    objective actually rises. If the gain stays below the rounding noise of
    the objective the smallest shift is kept anyway, as long as the objective
    does not visibly drop, so that Newton steps can size the new masses.
    Returns ``(p, objective or None)``.
    """
    def objective(v):
        return float(v @ (wlogw - w @ _safe_log(v @ w) - s * x))

    q = p @ w
    g = wlogw - w @ _safe_log(q) - s * x
    f = float(p @ g)
    viol = np.flatnonzero(g > f + tol)
    if viol.size == 0:
        return p, None
    top = viol[np.argsort(g[viol])[-n_seed:]]
    noise = ROUND_NOISE * float(p @ np.abs(g))
    delta = 1e-2
    while True:
        cand = p * (1.0 - delta)
        cand[top] += delta / top.size
        fc = objective(cand)
        if fc > f or (delta < 1e-14 and fc >= f - noise):
            return cand, fc
        if delta < 1e-14:
            return p, None
        delta *= 0.25


def _tilted_scores(w, wlogw, x, s, p):
    return wlogw - w @ _safe_log(p @ w) - s * x


def _inner_solve(k, w, wlogw, x, s, p0, tol, max_iter, warmup=500, block=200, rounds=300):
    """Certified maximiser of ``I(p) - s E_p[X]`` on the grid.

    A short accelerated Blahut-Arimoto run on the full grid locates the
    support. Later rounds iterate only on the active rows (points with mass
    plus points close to optimality), polish the masses by Newton's method
    and seed any grid point that still violates optimality. The stopping
    test is always the Blahut-Arimoto gap ``max_i g_i - log sum_i p_i e^{g_i}``
    evaluated on the full grid.
    Returns ``(p, lower, upper, n_iter, history)``.
    """
    p, lower, upper, used, hist = k.ba_inner(w, wlogw, x, s, p0.copy(), tol, min(max_iter, warmup))
    history = [hist]
    for _ in range(rounds):
        if upper - lower <= tol or used >= max_iter:
            break
        g = _tilted_scores(w, wlogw, x, s, p)
        f = float(p @ g)
        act = np.flatnonzero((p > LIVE_MASS) | (g > f - ACTIVE_MARGIN * (upper - lower)))
        sub_p = np.maximum(p[act], 1e-200)
        sub_p /= sub_p.sum()
        sub_p, _, _, n, hist = k.ba_inner(
            w[act], wlogw[act], x[act], s, sub_p, tol, min(max_iter - used, block)
        )
        used += n
        history.append(hist)
        p = np.zeros_like(p)
        p[act] = sub_p
        p, h = _newton_polish(w, wlogw, x, s, p)
        history.append(np.asarray(h))
        p, f_seed = _seed_violators(w, wlogw, x, s, p, tol)
        if f_seed is not None:
            history.append(np.array([f_seed]))
        g = _tilted_scores(w, wlogw, x, s, p)
        top = float(g.max())
        upper = top
        lower = top + math.log(float((p * np.exp(g - top)).sum()))
    return p, lower, upper, used, np.concatenate(history)


def ba_capacity(
    ch: ChannelSpec,
    grid,
    epsilon: float,
    tol: float = 1e-9,
    max_iter: int = 200_000,
    y_step: float = GAUSS_Y_STEP,
    kernels=None,
) -> BAResult:
    """Mean-constrained capacity on ``grid`` by tilted Blahut-Arimoto.

    The inner loop maximises ``I(p) - s E_p[X]`` until the per-symbol bound
    gap is below ``tol``. The outer loop bisects ``s >= 0``; the input for the
    feasible end of the bracket is mixed with the infeasible end so that the
    mean equals the budget, and bisection stops once the duality gap
    ``max_i (D_i - s x_i) + s epsilon - I(p)`` of that mixture is below
    ``tol``. The reported ``gap`` is this certified gap.
    """
    k = kernels or _kernels.active
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0.0):
        raise DomainError("grid must be a nonempty strictly increasing sequence")
    if grid[0] != 0.0:
        raise DomainError("grid must include 0")
    if not (math.isfinite(epsilon) and epsilon > 0.0):
        raise DomainError("epsilon must be positive")
    if not tol > 0.0:
        raise DomainError("tol must be positive")
    if grid.size == 1:
        return BAResult(0.0, DiscreteInput(grid, np.ones(1)), 0.0, 0, 0.0)

    w = discretize(ch, grid, y_step)
    wlogw = _row_entropies(w)
    total_iter = 0

    def solve(s, p0, n_max=max_iter, strict=True):
        nonlocal total_iter
        p, lower, upper, n_it, hist = _inner_solve(k, w, wlogw, grid, s, p0, tol, n_max)
        total_iter += n_it
        done = upper - lower <= tol
        if strict and not done:
            raise ConvergenceError(
                f"inner iterations did not reach gap {tol:g} at s={s:g}", last=p
            )
        return p, max(lower, hist[-1]), upper, done

    # Unconstrained optimum first. It only has to be solved exactly when it
    # might be feasible; otherwise its certified lower bound is kept and later
    # compared with the constrained upper bound to prove that the constraint
    # binds.
    p0, free_lower, _, done0 = solve(
        0.0, np.full(grid.size, 1.0 / grid.size), min(max_iter, 20_000), strict=False
    )
    def certify(s, p):
        p = np.maximum(p, 0.0)
        p /= p.sum()
        d = _divergences(w, wlogw, p)
        # duality: C(eps) <= max_i (D_i - s x_i) + s eps for this output law
        return p, float(p @ d), float(np.max(d - s * grid)) + s * epsilon

    def spend_budget(lo_p, hi_p):
        # Mixing the two ends of the bracket spends the rest of the budget.
        # This also covers the case where the optimal mean jumps with s
        # because near-duplicate grid points make the maximiser non-unique;
        # both ends are then (nearly) optimal for the same s.
        mean = hi_p @ grid
        if mean >= epsilon or lo_p is None:
            return hi_p
        theta = (epsilon - mean) / (lo_p @ grid - mean)
        return theta * lo_p + (1.0 - theta) * hi_p

    if done0 and p0 @ grid <= epsilon:
        s = 0.0
        p, mi, cert = certify(s, p0)
    else:
        lo_s, hi_s = 0.0, 1.0
        lo_p = p0 if done0 else None
        hi_p = solve(hi_s, p0)[0]
        while hi_p @ grid > epsilon:
            lo_s, hi_s, lo_p = hi_s, 2.0 * hi_s, hi_p
            if hi_s > 1e12:
                raise ConvergenceError("could not meet the mean constraint", last=hi_p)
            hi_p = solve(hi_s, hi_p)[0]
        # bisect until the certified gap of the budget-spending mixture is
        # below tol (or the bracket cannot shrink further)
        for _ in range(200):
            p, mi, cert = certify(hi_s, spend_budget(lo_p, hi_p))
            if cert - mi <= tol or hi_s - lo_s <= 1e-12 * hi_s:
                break
            mid = 0.5 * (lo_s + hi_s)
            mid_p = solve(mid, hi_p)[0]
            if mid_p @ grid > epsilon:
                lo_s, lo_p = mid, mid_p
            else:
                hi_s, hi_p = mid, mid_p
        s = hi_s

    if s > 0.0 and not done0 and not cert < free_lower:
        raise ConvergenceError(
            "could not certify that the mean constraint binds "
            f"(constrained upper {cert:.6g} >= unconstrained lower {free_lower:.6g})",
            last=p,
        )
    return BAResult(
        capacity_estimate=max(mi, 0.0),
        input=DiscreteInput(grid, p),
        multiplier=float(s),
        iterations=total_iter,
        gap=max(cert - mi, 0.0),
    )


# ------------------------------------------------------------------ duality


def duality_numeric_bound(ch: ChannelSpec, aux, mu: float, epsilon: float, x_grid) -> float:
    """``max_x {D(W(.|x) || R) - mu x} + mu epsilon`` over ``x_grid``.

    For any ``mu >= 0`` this bounds the capacity restricted to inputs on
    ``x_grid`` with mean at most ``epsilon``.
    """
    if not (math.isfinite(mu) and mu >= 0.0):
        raise DomainError("mu must be nonnegative")
    xs = np.asarray(x_grid, dtype=float)
    kl = np.atleast_1d(kl_to_aux(ch, xs, aux))
    return float(np.max(kl - mu * xs)) + mu * epsilon


def best_duality_numeric_bound(ch, aux, epsilon, x_grid, mu_max: float = 10.0):
    """Minimise :func:`duality_numeric_bound` over ``mu`` in ``[0, mu_max]``.

    The objective is a maximum of affine functions of ``mu``, hence convex;
    bounded Brent search finds its minimum. Returns ``(bound, mu)``.
    """
    xs = np.asarray(x_grid, dtype=float)
    kl = np.atleast_1d(kl_to_aux(ch, xs, aux))

    def f(mu):
        return float(np.max(kl - mu * xs)) + mu * epsilon

    res = minimize_scalar(f, bounds=(0.0, mu_max), method="bounded", options={"xatol": 1e-12})
    candidates = [(f(0.0), 0.0), (f(mu_max), mu_max), (float(res.fun), float(res.x))]
    return min(candidates)
