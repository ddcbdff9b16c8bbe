"""Seeded Monte-Carlo estimate of the MAP detector's error probability.

Trials are stratified: the low and high symbols are simulated in fixed
numbers (the prior proportions, with at least ``MIN_HIGH_TRIALS`` on the high
symbol) and the error rate is reassembled with the prior weights. Each block
of ``BLOCK`` trials draws from its own Philox substream, so the result is the
same for any number of worker threads.
"""

from __future__ import annotations

import math
import numbers
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .channels import ChannelSpec, make_rng
from .errors import UsageError
from .reports import BinaryInput

BLOCK = 1 << 20
MIN_HIGH_TRIALS = 1000
# substream ids are 2 * block + symbol
_N_SYMBOLS = 2


@dataclass(frozen=True)
class SimResult:
    """Outcome of a stratified simulation.

    ``pe_hat`` is the prior-weighted mean of the two conditional error rates.
    It equals ``errors / n_trials`` only when the strata are allocated
    exactly in prior proportion. ``[ci_lo, ci_hi]`` combines the per-symbol
    Wilson intervals with the same weights.
    """

    pe_hat: float
    n_trials: int
    errors: int
    ci_lo: float
    ci_hi: float
    seed: int
    z: float
    n_low: int
    n_high: int
    errors_low: int
    errors_high: int


def wilson_interval(errors: int, n: int, z: float):
    """Wilson score interval for ``errors`` successes in ``n`` trials."""
    for name, v in (("errors", errors), ("n", n)):
        if isinstance(v, bool) or not isinstance(v, numbers.Integral):
            raise UsageError(f"{name} must be an integer, got {v!r}")
    if n < 1 or not 0 <= errors <= n:
        raise UsageError(f"need 0 <= errors <= n and n >= 1, got errors={errors}, n={n}")
    if not (isinstance(z, numbers.Real) and math.isfinite(z) and z > 0.0):
        raise UsageError(f"z must be positive, got {z!r}")
    n = int(n)
    p = errors / n
    z2n = z * z / n
    denom = 1.0 + z2n
    centre = (p + 0.5 * z2n) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + 0.25 * z2n / n) / denom
    lo = 0.0 if errors == 0 else max(0.0, centre - half)
    hi = 1.0 if errors == n else min(1.0, centre + half)
    return lo, hi


def _worker_count(n_tasks: int) -> int:
    cap = os.environ.get("OICAP_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(limit, n_tasks))


def _check_threshold(ch: ChannelSpec, threshold):
    if ch.is_gaussian:
        if not isinstance(threshold, (float, np.floating)) or math.isnan(threshold):
            raise UsageError(f"Gaussian thresholds are real numbers (float), got {threshold!r}")
        return float(threshold)
    if isinstance(threshold, bool) or not isinstance(threshold, (numbers.Integral, np.integer)):
        raise UsageError(f"Poisson thresholds are integers, got {threshold!r}")
    return int(threshold)


def _count_errors(ch, amplitude, symbol, threshold, seed, block, size):
    """Errors among ``size`` trials of one symbol in one block."""
    rng = make_rng(seed, _N_SYMBOLS * block + symbol)
    x = amplitude if symbol else 0.0
    if ch.is_gaussian:
        y = rng.standard_normal(size)
        y += x
    else:
        y = rng.poisson(ch.dark_current + x, size)
    # decide the high symbol iff y > threshold; ties go to the low symbol
    above = _kernels.active.count_above(y, threshold)
    return above if symbol == 0 else size - above


def _blocks(n: int):
    full, rest = divmod(n, BLOCK)
    sizes = [BLOCK] * full + ([rest] if rest else [])
    return list(enumerate(sizes))


def simulate_map(
    ch: ChannelSpec,
    inp: BinaryInput,
    threshold,
    n: int,
    seed: int,
    z: float = 3.0,
) -> SimResult:
    """Simulate the rule 'high iff y > threshold' on the two-point input.

    Parameters
    ----------
    threshold
        ``float`` for the Gaussian channel (``inf`` means always decide low),
        ``int`` for the Poisson channel.
    n
        Nominal number of trials. The low symbol gets ``round((1-m) n)`` (at
        least one) and the high symbol the rest, raised to at least
        ``MIN_HIGH_TRIALS``, so ``n_trials`` can exceed ``n``.
    """
    if isinstance(n, bool) or not isinstance(n, numbers.Integral) or n < 1:
        raise UsageError(f"n must be a positive integer, got {n!r}")
    if isinstance(seed, bool) or not isinstance(seed, numbers.Integral) or seed < 0:
        raise UsageError(f"seed must be a nonnegative integer, got {seed!r}")
    if not (isinstance(z, numbers.Real) and math.isfinite(z) and z > 0.0):
        raise UsageError(f"z must be positive, got {z!r}")
    thr = _check_threshold(ch, threshold)
    m = inp.mass_high
    n = int(n)
    n_low = max(int(round((1.0 - m) * n)), 1)
    n_high = max(n - n_low, MIN_HIGH_TRIALS)

    tasks = [(0, b, size) for b, size in _blocks(n_low)]
    tasks += [(1, b, size) for b, size in _blocks(n_high)]

    def run(task):
        symbol, b, size = task
        return _count_errors(ch, inp.amplitude, symbol, thr, int(seed), b, size)

    with ThreadPoolExecutor(max_workers=_worker_count(len(tasks))) as pool:
        counts = list(pool.map(run, tasks))
    e_low = sum(c for (sym, _, _), c in zip(tasks, counts) if sym == 0)
    e_high = sum(c for (sym, _, _), c in zip(tasks, counts) if sym == 1)

    w_low, w_high = inp.mass_low, m
    pe_hat = w_low * e_low / n_low + w_high * e_high / n_high
    lo0, hi0 = wilson_interval(e_low, n_low, z)
    lo1, hi1 = wilson_interval(e_high, n_high, z)
    ci_lo = min(w_low * lo0 + w_high * lo1, pe_hat)
    ci_hi = max(w_low * hi0 + w_high * hi1, pe_hat)
    return SimResult(
        pe_hat=pe_hat,
        n_trials=n_low + n_high,
        errors=e_low + e_high,
        ci_lo=ci_lo,
        ci_hi=ci_hi,
        seed=int(seed),
        z=float(z),
        n_low=n_low,
        n_high=n_high,
        errors_low=e_low,
        errors_high=e_high,
    )
