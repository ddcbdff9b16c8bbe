"""High-precision reference implementations used to derive golden values.

Everything here is written directly from the closed-form definitions in
mpmath at 50 digits and shares no code with the package.
"""

import mpmath as mp

mp.mp.dps = 50


def phi(x):
    x = mp.mpf(x)
    return mp.exp(-x * x / 2) / mp.sqrt(2 * mp.pi)


def q_tail(x):
    return mp.erfc(mp.mpf(x) / mp.sqrt(2)) / 2


def log_budget(eps):
    return -mp.log(mp.mpf(eps))


# ------------------------------------------------------------------ Gaussian


def gaussian_upper_terms(eps, a):
    eps, a = mp.mpf(eps), mp.mpf(a)
    t = a * mp.sqrt(log_budget(eps))
    beta = mp.exp(-t * t / 2)
    return {
        "beta_ratio": beta / (1 - beta),
        "knee_phi": (t / 2 + 1) * phi(t),
        "two_eps_over_t": 2 * eps / t,
        "linear_eps": (2 + 1 / (2 * mp.sqrt(2 * mp.pi))) * eps,
        "dominant": eps * t / 2,
    }


def gaussian_binary(eps, a):
    eps, a = mp.mpf(eps), mp.mpf(a)
    x0 = a * mp.sqrt(log_budget(eps))
    return x0, eps / x0


def gaussian_threshold(x0, m):
    return x0 / 2 + mp.log((1 - m) / m) / x0


def gaussian_pe(x0, m, thr=None):
    thr = gaussian_threshold(x0, m) if thr is None else mp.mpf(thr)
    return (1 - m) * q_tail(thr) + m * q_tail(x0 - thr)


def hb(p):
    p = mp.mpf(p)
    if p == 0 or p == 1:
        return mp.mpf(0)
    return -p * mp.log(p) - (1 - p) * mp.log(1 - p)


def gaussian_fano(eps, a):
    x0, m = gaussian_binary(eps, a)
    return hb(m) - hb(gaussian_pe(x0, m))


def gaussian_asymptote(eps):
    eps = mp.mpf(eps)
    return eps * mp.sqrt(log_budget(eps) / 2)


def gaussian_kl(x, t):
    """D(N(x,1) || R_t) by direct quadrature, split at the knee."""
    x, t = mp.mpf(x), mp.mpf(t)
    beta = mp.exp(-t * t / 2)
    body = (1 - beta) / (mp.sqrt(2 * mp.pi) * q_tail(-t))

    def log_r(y):
        return mp.log(body) - y * y / 2 if y <= t else mp.log(beta) - (y - t)

    def f(y):
        lw = -(y - x) ** 2 / 2 - mp.log(mp.sqrt(2 * mp.pi))
        return mp.exp(lw) * (lw - log_r(y))

    return mp.quad(f, [x - 40, t, x + 40] if x - 40 < t < x + 40 else [x - 40, x + 40])


def gaussian_mi_two_point(x0, m):
    """I(X;Y) for mass m at x0 and 1-m at 0, by quadrature of the posterior entropy."""
    x0, m = mp.mpf(x0), mp.mpf(m)

    def hpost(y):
        l0 = (1 - m) * mp.exp(-y * y / 2)
        l1 = m * mp.exp(-(y - x0) ** 2 / 2)
        tot = l0 + l1
        return (tot / mp.sqrt(2 * mp.pi)) * hb(l1 / tot)

    h_cond = mp.quad(hpost, [-40, 0, x0 / 2, x0, x0 + 40])
    return hb(m) - h_cond


# ------------------------------------------------------------------- Poisson


def poisson_pmf(k, mean):
    k, mean = int(k), mp.mpf(mean)
    return mp.exp(k * mp.log(mean) - mean - mp.loggamma(k + 1))


def poisson_sf(k, mean):
    """P(W >= k), by summing the finite complementary range."""
    if k <= 0:
        return mp.mpf(1)
    if k <= mean:
        return 1 - mp.fsum(poisson_pmf(j, mean) for j in range(k))
    # sum the upper tail directly; terms decay at least geometrically past the mean
    total, j = mp.mpf(0), k
    while True:
        term = poisson_pmf(j, mean)
        total += term
        if term < total * mp.mpf(10) ** -40:
            return total
        j += 1


def poisson_cdf(k, mean):
    if k < 0:
        return mp.mpf(0)
    return mp.fsum(poisson_pmf(j, mean) for j in range(k + 1))


def bisect(f, target, lo, hi, iters=200):
    lo, hi = mp.mpf(lo), mp.mpf(hi)
    for _ in range(iters):
        mid = (lo + hi) / 2
        if f(mid) < target:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def eta_real(lam, a, eps=None, L=None):
    lam = mp.mpf(lam)
    L = log_budget(eps) if L is None else mp.mpf(L)
    rhs = a * L
    return bisect(lambda x: (x - lam) * mp.log(x / lam), rhs, lam, lam + rhs + 3 * lam + 10)


def eta0(lam, a, eps=None, L=None):
    lam = mp.mpf(lam)
    L = log_budget(eps) if L is None else mp.mpf(L)
    rhs = a * L
    return bisect(lambda x: x * mp.log(x / lam), rhs, lam, 3 * lam + rhs)


def poisson_upper_terms(eps, a, lam, p=0.5):
    eps, lam, p = mp.mpf(eps), mp.mpf(lam), mp.mpf(p)
    eta = int(mp.floor(eta_real(lam, a, eps)))
    beta = mp.exp(-(eta - lam) * mp.log(eta / lam))
    c = 1 + mp.log(1 / p)
    lr = mp.log(eta / lam)
    return eta, {
        "log1mbeta": -mp.log(1 - beta),
        "lambda_log": lam * mp.log(1 + eps / lam),
        "linear_eps": c * (1 + lam * poisson_pmf(eta - 1, eta - 2) / (eta - lam - 2)) * eps,
        "head_pmf": lam * c * poisson_pmf(eta - 1, lam),
        "c3_dominant": eps * lr,
        "c3_factorial": lr * mp.exp(-lam) * lam**eta / mp.factorial(eta - 1),
        "c3_sqrt": lr * mp.sqrt((eta - 1) / (2 * mp.pi)) * eps / (eta - lam - 1),
        "c3_stirling": (1 + mp.log((eta + 1) / lam))
        * ((eta + 1) / (mp.sqrt(2 * mp.pi * (eta - 1)) * mp.e**2))
        * ((mp.mpf(eta) + 1) / (eta - 1)) ** (eta - 1)
        * eps
        / (eta - lam),
    }


def poisson_bracket(lam, eta, p):
    lam, p = mp.mpf(lam), mp.mpf(p)
    return (
        -mp.log(1 - p)
        - lam
        - eta * mp.log(1 / p)
        - mp.log(2 * mp.pi * eta) / 2
        + lam * (1 + mp.log(1 / p))
    )


def poisson_threshold(eps, a, lam):
    e0 = eta0(lam, a, eps)
    eps = mp.mpf(eps)
    return int(mp.floor((e0 + mp.log((e0 - eps) / eps)) / mp.log(1 + e0 / lam)))


def poisson_pe_rule(x1, m, lam, k):
    """Error of 'decide high iff y > k' for mass m at x1."""
    return (1 - m) * poisson_sf(k + 1, lam) + m * poisson_cdf(k, lam + x1)


def poisson_pe(eps, a, lam):
    e0 = eta0(lam, a, eps)
    m = mp.mpf(eps) / e0
    return poisson_pe_rule(e0, m, lam, poisson_threshold(eps, a, lam))


def poisson_fano(eps, a, lam):
    e0 = eta0(lam, a, eps)
    return hb(mp.mpf(eps) / e0) - hb(poisson_pe(eps, a, lam))


def poisson_asymptote(eps):
    eps = mp.mpf(eps)
    return eps * mp.log(log_budget(eps))


def poisson_mi_two_point(lam, x1, m, n=None):
    lam, x1, m = mp.mpf(lam), mp.mpf(x1), mp.mpf(m)
    n = n or int(lam + x1 + 60 * mp.sqrt(lam + x1) + 80)
    total = mp.mpf(0)
    for y in range(n):
        a0 = (1 - m) * poisson_pmf(y, lam)
        a1 = m * poisson_pmf(y, lam + x1)
        tot = a0 + a1
        if tot > 0:
            total += tot * hb(a1 / tot)
    return hb(m) - total


def aux_poisson_mass(lam, eta, p, n):
    lam, p = mp.mpf(lam), mp.mpf(p)
    beta = mp.exp(-(eta - lam) * mp.log(eta / lam))
    head = mp.fsum(poisson_pmf(j, lam) for j in range(eta))
    s = mp.fsum((1 - beta) / head * poisson_pmf(j, lam) for j in range(min(eta, n)))
    s += mp.fsum(beta * (1 - p) * p ** (j - eta) for j in range(eta, n))
    return s


def wilson(errors, n, z):
    errors, n, z = mp.mpf(errors), mp.mpf(n), mp.mpf(z)
    ph = errors / n
    den = 1 + z * z / n
    centre = (ph + z * z / (2 * n)) / den
    half = z * mp.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    return max(mp.mpf(0), centre - half), min(mp.mpf(1), centre + half)
