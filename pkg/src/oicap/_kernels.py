"""Hot inner loops, compiled with numba when available.

Every kernel exists twice: a pure-numpy version and a numba ``@njit`` version
with identical semantics. The active set is picked once at import time from
the ``OICAP_BACKEND`` environment variable (``numba`` or ``numpy``; default
``numba``, silently falling back to numpy if numba cannot be imported).
Both sets stay importable as ``NUMPY`` and ``NUMBA`` for benchmarking and
cross-checking.
"""

import math
import os
from types import SimpleNamespace

import numpy as np
from scipy.special import gammaln

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False


# ---------------------------------------------------------------- numpy path


# Over-relaxation schedule for the multiplicative update. A step with factor
# gamma > 1 is kept only if it does not lower the objective; otherwise the
# plain (gamma = 1) step, which never lowers it, is taken.
GAMMA_GROW = 1.5
GAMMA_SHRINK = 4.0
GAMMA_MAX = 1e6
# Masses are floored here so that no grid point is lost for good; a point at
# exactly zero can never regain mass under multiplicative updates.
MASS_FLOOR = 1e-200


def _np_tilted(w, wlogw, x, s, p):
    q = p @ w
    logq = np.log(np.where(q > 0.0, q, 1e-300))
    g = wlogw - w @ logq - s * x
    return g, float(p @ g)


def _np_ba_inner(w, wlogw, x, s, p, tol, max_iter):
    """Tilted Blahut-Arimoto iterations on a discrete channel.

    ``w`` is the (n_in, n_out) transition matrix with rows summing to one,
    ``wlogw`` the row sums of ``w * log w``. With
    ``g_i = D(w_i || p @ w) - s * x_i`` the objective is ``p @ g``, i.e.
    ``I(p) - s * E_p[X]``. Iterates ``p <- p * exp(gamma * g)`` (renormalised)
    until ``max_i g_i - log sum_i p_i exp(g_i) <= tol``.

    Returns ``(p, lower, upper, n_iter, history)`` where ``history[k]`` is the
    objective before update ``k``; it never decreases.
    """
    history = np.empty(max_iter)
    g, f = _np_tilted(w, wlogw, x, s, p)
    gamma = 1.0
    lower = -np.inf
    upper = np.inf
    it = 0
    while it < max_iter:
        history[it] = f
        top = g.max()
        lower = top + math.log((p * np.exp(g - top)).sum())
        upper = top
        it += 1
        if upper - lower <= tol:
            break
        while True:
            c = p * np.exp(gamma * (g - top))
            c /= c.sum()
            np.maximum(c, MASS_FLOOR, out=c)
            gc, fc = _np_tilted(w, wlogw, x, s, c)
            if fc >= f or gamma == 1.0:
                break
            gamma = max(1.0, gamma / GAMMA_SHRINK)
        p[:] = c
        g, f = gc, fc
        gamma = min(gamma * GAMMA_GROW, GAMMA_MAX)
    return p, lower, upper, it, history[:it]


def _np_log_poisson_table(means, ys):
    """``out[i, k] = log Poi_{means[i]}(ys[k])``."""
    m = np.asarray(means, dtype=float)[:, None]
    y = np.asarray(ys, dtype=float)[None, :]
    return y * np.log(m) - m - gammaln(y + 1.0)


def _np_count_above(samples, threshold):
    return int(np.count_nonzero(samples > threshold))


NUMPY = SimpleNamespace(
    name="numpy",
    ba_inner=_np_ba_inner,
    log_poisson_table=_np_log_poisson_table,
    count_above=_np_count_above,
)


# ---------------------------------------------------------------- numba path

NUMBA = None

if HAVE_NUMBA:

    # Reassociation lets LLVM vectorise the reductions; results differ from
    # the numpy path only at rounding level.
    _VEC = {"reassoc", "contract"}

    @numba.njit(cache=True, fastmath=_VEC)
    def _nb_tilted(w, wlogw, x, s, p, q, g):
        n_in, n_out = w.shape
        for k in range(n_out):
            q[k] = 0.0
        for i in range(n_in):
            pi = p[i]
            if pi != 0.0:
                for k in range(n_out):
                    q[k] += pi * w[i, k]
        for k in range(n_out):
            q[k] = math.log(q[k]) if q[k] > 0.0 else math.log(1e-300)
        f = 0.0
        for i in range(n_in):
            acc = 0.0
            for k in range(n_out):
                acc += w[i, k] * q[k]
            g[i] = wlogw[i] - acc - s * x[i]
            f += p[i] * g[i]
        return f

    @numba.njit(cache=True)
    def _nb_ba_inner(w, wlogw, x, s, p, tol, max_iter):
        n_in, n_out = w.shape
        history = np.empty(max_iter)
        q = np.empty(n_out)
        g = np.empty(n_in)
        gc = np.empty(n_in)
        c = np.empty(n_in)
        f = _nb_tilted(w, wlogw, x, s, p, q, g)
        gamma = 1.0
        lower = -np.inf
        upper = np.inf
        it = 0
        while it < max_iter:
            history[it] = f
            top = -np.inf
            for i in range(n_in):
                if g[i] > top:
                    top = g[i]
            total = 0.0
            for i in range(n_in):
                total += p[i] * math.exp(g[i] - top)
            lower = top + math.log(total)
            upper = top
            it += 1
            if upper - lower <= tol:
                break
            while True:
                total = 0.0
                for i in range(n_in):
                    c[i] = p[i] * math.exp(gamma * (g[i] - top))
                    total += c[i]
                for i in range(n_in):
                    c[i] = max(c[i] / total, MASS_FLOOR)
                fc = _nb_tilted(w, wlogw, x, s, c, q, gc)
                if fc >= f or gamma == 1.0:
                    break
                gamma = max(1.0, gamma / GAMMA_SHRINK)
            for i in range(n_in):
                p[i] = c[i]
                g[i] = gc[i]
            f = fc
            gamma = min(gamma * GAMMA_GROW, GAMMA_MAX)
        return p, lower, upper, it, history[:it]

    @numba.njit(cache=True)
    def _nb_log_poisson_table(means, ys):
        lg = np.empty(ys.shape[0])
        for k in range(ys.shape[0]):
            lg[k] = math.lgamma(ys[k] + 1.0)
        out = np.empty((means.shape[0], ys.shape[0]))
        for i in range(means.shape[0]):
            lm = math.log(means[i])
            m = means[i]
            for k in range(ys.shape[0]):
                out[i, k] = ys[k] * lm - m - lg[k]
        return out

    @numba.njit(cache=True)
    def _nb_count_above(samples, threshold):
        c = 0
        for v in samples:
            c += v > threshold
        return c

    def _nb_log_poisson_table_wrapped(means, ys):
        return _nb_log_poisson_table(
            np.ascontiguousarray(means, dtype=np.float64),
            np.ascontiguousarray(ys, dtype=np.float64),
        )

    def _nb_count_above_wrapped(samples, threshold):
        return int(_nb_count_above(np.ascontiguousarray(samples), float(threshold)))

    def _nb_ba_inner_wrapped(w, wlogw, x, s, p, tol, max_iter):
        return _nb_ba_inner(
            np.ascontiguousarray(w), wlogw, x, float(s), p, float(tol), int(max_iter)
        )

    NUMBA = SimpleNamespace(
        name="numba",
        ba_inner=_nb_ba_inner_wrapped,
        log_poisson_table=_nb_log_poisson_table_wrapped,
        count_above=_nb_count_above_wrapped,
    )


def select(name=None):
    """Return the kernel namespace for ``name`` (defaults to the env flag)."""
    name = (name or os.environ.get("OICAP_BACKEND", "numba")).strip().lower()
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown OICAP_BACKEND {name!r}; use 'numba' or 'numpy'")
    if name == "numba" and NUMBA is not None:
        return NUMBA
    return NUMPY


active = select()
