"""Scalar numeric kernels.

Everything here is written in the numba-compatible subset of Python and is
compiled by :func:`epsbai._jit.njit` unless ``EPSBAI_DISABLE_NUMBA`` is set.
Families are passed as ``(kind, sigma2)`` with ``kind`` one of
:data:`GAUSSIAN` / :data:`BERNOULLI`; ``sigma2`` is ignored for Bernoulli.

Arms are 0-based throughout.
"""
import math

import numpy as np

from ._jit import njit

GAUSSIAN = 0
BERNOULLI = 1

# distance kept from the hard Bernoulli endpoints 0 and 1 when searching
# for an alternative mean
EDGE = 1e-12
MAX_ITER = 200

# solver status codes
OK = 0
INDICATOR = 1  # mu_a > mu+ - eps and some mu_b == mu+: all weight on a
NOT_CANDIDATE = -1
FAILED = -2


@njit
def _excess(u):
    """u - ln(1 + u) for u > -1, without cancellation near 0."""
    if abs(u) > 0.2:
        return u - math.log1p(u)
    # with s = u / (2 + u): ln(1 + u) = 2 atanh(s) and u - 2s = 2 s^2 / (1 - s)
    s = u / (2.0 + u)
    s2 = s * s
    term = s * s2
    acc = 0.0
    k = 3.0
    while abs(term) > 1e-18 * abs(s2):
        acc += term / k
        term *= s2
        k += 2.0
    return 2.0 * s2 / (1.0 - s) - 2.0 * acc


@njit
def _kl_bern(mu, lam, step):
    """Bernoulli d(mu, lam) given both lam and step = lam - mu."""
    if step == 0.0:
        return 0.0
    if lam <= 0.0 or lam >= 1.0:
        return np.inf
    if mu <= 0.0:
        return -math.log1p(-lam)
    if mu >= 1.0:
        return -math.log(lam)
    # each term is mu (u - ln(1 + u)) with u the relative step; the linear
    # parts of the two terms cancel exactly, so this stays accurate when
    # lam ~ mu. Far steps towards 0 or 1 use the log form instead.
    u = step / mu
    if u < -0.5:
        ta = step + mu * math.log(mu / lam)
    else:
        ta = mu * _excess(u)
    v = -step / (1.0 - mu)
    if v < -0.5:
        tb = -step + (1.0 - mu) * math.log((1.0 - mu) / (1.0 - lam))
    else:
        tb = (1.0 - mu) * _excess(v)
    return ta + tb


@njit
def kl_step(kind, sigma2, mu, step):
    """d(mu, mu + step), accurate in relative terms for tiny steps."""
    if kind == GAUSSIAN:
        return step * step / (2.0 * sigma2)
    return _kl_bern(mu, mu + step, step)


@njit
def kl(kind, sigma2, mu, lam):
    """d(mu, lam); ``inf`` for a Bernoulli alternative on the boundary."""
    if kind == GAUSSIAN:
        diff = mu - lam
        return diff * diff / (2.0 * sigma2)
    if mu == lam:
        return 0.0
    return _kl_bern(mu, lam, lam - mu)


@njit
def dkl_step(kind, sigma2, mu, step):
    """Derivative of d(mu, l) in l at l = mu + step."""
    if kind == GAUSSIAN:
        return step / sigma2
    lam = mu + step
    return step / (lam * (1.0 - lam))


@njit
def dkl(kind, sigma2, mu, lam):
    """Partial derivative of d(mu, lam) in lam."""
    return dkl_step(kind, sigma2, mu, lam - mu)


@njit
def d2kl(kind, sigma2, mu, lam):
    """Second partial derivative of d(mu, lam) in lam."""
    if kind == GAUSSIAN:
        return 1.0 / sigma2
    return mu / (lam * lam) + (1.0 - mu) / ((1.0 - lam) * (1.0 - lam))


# Pair maps. The alternative is written lam = mu_a - u, so that
# lam + eps = mu_b + (gap - u) with gap = (mu_a - mu_b) + eps. Working with
# the offset u keeps full relative precision when the interval is tiny
# (eps ~ 1e-13 with equal means leaves only a few hundred doubles for lam).

@njit
def pair_gap(mu_a, mu_b, eps):
    return (mu_a - mu_b) + eps


@njit
def pair_offsets(kind, mu_a, mu_b, eps):
    """Allowed range [u_lo, u_hi] of the offset u = mu_a - lam."""
    gap = pair_gap(mu_a, mu_b, eps)
    if kind == GAUSSIAN:
        return 0.0, gap
    return max(0.0, mu_a - (1.0 - eps - EDGE)), min(gap, mu_a - EDGE)


@njit
def pair_interval(kind, mu_a, mu_b, eps):
    """Search interval for lambda when a must drop eps below b."""
    if kind == GAUSSIAN:
        return mu_b - eps, mu_a
    lo = max(EDGE, mu_b - eps)
    hi = min(mu_a, 1.0 - eps - EDGE)
    return lo, hi


@njit
def pair_offset(kind, sigma2, mu_a, mu_b, eps, w_a, w_b):
    """argmin over u of w_a d(mu_a, mu_a - u) + w_b d(mu_b, mu_b + gap - u)."""
    gap = pair_gap(mu_a, mu_b, eps)
    lo, hi = pair_offsets(kind, mu_a, mu_b, eps)
    if hi <= lo:
        return 0.5 * (lo + hi)
    if w_b <= 0.0:
        return lo
    if w_a <= 0.0:
        return hi
    if kind == GAUSSIAN:
        u = w_b * gap / (w_a + w_b)
        return min(max(u, lo), hi)

    # derivative in u, increasing (the objective is convex)
    f_lo = -(w_a * dkl_step(kind, sigma2, mu_a, -lo) + w_b * dkl_step(kind, sigma2, mu_b, gap - lo))
    if f_lo >= 0.0:
        return lo
    f_hi = -(w_a * dkl_step(kind, sigma2, mu_a, -hi) + w_b * dkl_step(kind, sigma2, mu_b, gap - hi))
    if f_hi <= 0.0:
        return hi

    # bisection bracket, Newton steps inside it
    a = lo
    b = hi
    u = w_b * gap / (w_a + w_b)
    if not (a < u < b):
        u = 0.5 * (a + b)
    for _ in range(MAX_ITER):
        f = -(w_a * dkl_step(kind, sigma2, mu_a, -u) + w_b * dkl_step(kind, sigma2, mu_b, gap - u))
        if f > 0.0:
            b = u
        elif f < 0.0:
            a = u
        else:
            return u
        fp = w_a * d2kl(kind, sigma2, mu_a, mu_a - u) + w_b * d2kl(kind, sigma2, mu_b, mu_b + (gap - u))
        step = f / fp
        if abs(step) <= 1e-15 * abs(u) + 1e-300:
            return min(max(u - step, a), b)
        new = u - step
        if not (a < new < b):
            new = 0.5 * (a + b)
        if b - a <= 4e-16 * abs(b):
            return new
        u = new
    return u


@njit
def pair_argmin(kind, sigma2, mu_a, mu_b, eps, w_a, w_b):
    """argmin over the pair interval of w_a d(mu_a, l) + w_b d(mu_b, l + eps)."""
    return mu_a - pair_offset(kind, sigma2, mu_a, mu_b, eps, w_a, w_b)


@njit
def _pair_divs(kind, sigma2, mu_a, mu_b, eps, u):
    """(d(mu_a, lam), d(mu_b, lam + eps)) at offset u."""
    gap = pair_gap(mu_a, mu_b, eps)
    return kl_step(kind, sigma2, mu_a, -u), kl_step(kind, sigma2, mu_b, gap - u)


@njit
def pair_value(kind, sigma2, mu_a, mu_b, eps, w_a, w_b):
    """inf over lambda of w_a d(mu_a, l) + w_b d(mu_b, l + eps)."""
    u = pair_offset(kind, sigma2, mu_a, mu_b, eps, w_a, w_b)
    da, db = _pair_divs(kind, sigma2, mu_a, mu_b, eps, u)
    out = 0.0
    if w_a > 0.0:
        out += w_a * da
    if w_b > 0.0:
        out += w_b * db
    return out


@njit
def lambda_b(kind, sigma2, mu_a, mu_b, eps, x):
    return pair_argmin(kind, sigma2, mu_a, mu_b, eps, 1.0, x)


@njit
def g_b(kind, sigma2, mu_a, mu_b, eps, x):
    return pair_value(kind, sigma2, mu_a, mu_b, eps, 1.0, x)


@njit
def g_range(kind, sigma2, mu_a, mu_b, eps):
    """(g_b(0), sup_x g_b(x)) for the pair (a, b)."""
    lo, hi = pair_offsets(kind, mu_a, mu_b, eps)
    return kl_step(kind, sigma2, mu_a, -lo), kl_step(kind, sigma2, mu_a, -hi)


@njit
def x_b(kind, sigma2, mu_a, mu_b, eps, y):
    """Inverse of g_b: the x >= 0 with g_b(x) = y (``inf`` past the range)."""
    g0, g_sup = g_range(kind, sigma2, mu_a, mu_b, eps)
    if y <= g0:
        return 0.0
    if y >= g_sup:
        return np.inf
    if kind == GAUSSIAN:
        # g_b(x) = g_sup * x / (1 + x)
        return y / (g_sup - y)

    # g_b is concave and increasing with g_b'(x) = d(mu_b, lambda_b(x) + eps):
    # Newton started at 0 climbs monotonically to the root from the left
    # (roughly doubling x per step while far from it).
    x = 0.0
    for _ in range(4 * MAX_ITER):
        u = pair_offset(kind, sigma2, mu_a, mu_b, eps, 1.0, x)
        da, slope = _pair_divs(kind, sigma2, mu_a, mu_b, eps, u)
        gx = da + x * slope
        if gx >= y:
            return x
        if not slope > 0.0:
            return np.inf
        new = x + (y - gx) / slope
        if not new < 1e300:
            return np.inf
        if new - x <= 1e-14 * x + 1e-300:
            return new
        x = new
    return x


@njit
def _ratio_sum(kind, sigma2, means, a, eps, y, xs):
    """F(y) - 1, filling xs[b] = x_b(y) for b != a."""
    mu_a = means[a]
    total = 0.0
    for b in range(means.shape[0]):
        if b == a:
            continue
        x = x_b(kind, sigma2, mu_a, means[b], eps, y)
        xs[b] = x
        if not math.isfinite(x):
            return np.inf
        u = pair_offset(kind, sigma2, mu_a, means[b], eps, 1.0, x)
        num, den = _pair_divs(kind, sigma2, mu_a, means[b], eps, u)
        if num == 0.0:
            continue
        if den <= 0.0:
            return np.inf
        total += num / den
    return total - 1.0


@njit
def solve_candidate(kind, sigma2, means, a, eps, w_out):
    """Optimal weights for candidate answer ``a``.

    Fills ``w_out`` and returns ``(status, T, y_star, residual)`` where
    ``T`` is the characteristic time restricted to answer ``a``.
    """
    n_arms = means.shape[0]
    mu_a = means[a]
    top_other = -np.inf
    for b in range(n_arms):
        if b != a and means[b] > top_other:
            top_other = means[b]
    for b in range(n_arms):
        w_out[b] = 0.0
    if not (mu_a > top_other - eps):
        return NOT_CANDIDATE, np.inf, np.nan, np.nan

    if kind == BERNOULLI and mu_a > 1.0 - eps:
        for b in range(n_arms):
            if b != a and means[b] >= 1.0:
                y = kl(kind, sigma2, mu_a, 1.0 - eps)
                w_out[a] = 1.0
                return INDICATOR, 1.0 / y, y, 0.0

    y_lo, y_hi = g_range(kind, sigma2, mu_a, top_other, eps)
    if not (y_hi > y_lo) or not math.isfinite(y_hi):
        return FAILED, np.inf, np.nan, np.nan

    xs = np.zeros(n_arms)
    left, f_left = y_lo, -1.0
    right, f_right = y_hi, np.inf
    y = 0.5 * (left + right)
    f = np.inf
    side = 0
    # bracketed Illinois iteration; plain bisection while one end is infinite
    for _ in range(MAX_ITER):
        if math.isfinite(f_right):
            y = (left * f_right - right * f_left) / (f_right - f_left)
            if not (left < y < right):
                y = 0.5 * (left + right)
        else:
            y = 0.5 * (left + right)
        f = _ratio_sum(kind, sigma2, means, a, eps, y, xs)
        if f == 0.0:
            break
        if f < 0.0:
            left, f_left = y, f
            if side == -1:
                f_right *= 0.5
            side = -1
        else:
            right, f_right = y, f
            if side == 1:
                f_left *= 0.5
            side = 1
        if abs(f) <= 1e-13 or right - left <= 4e-16 * abs(right):
            break
    if not math.isfinite(f):
        return FAILED, np.inf, np.nan, np.nan

    total = 1.0
    for b in range(n_arms):
        if b != a:
            total += xs[b]
    for b in range(n_arms):
        w_out[b] = 1.0 / total if b == a else xs[b] / total
    return OK, total / y, y, f


@njit
def solve_all(kind, sigma2, means, eps, t_out, w_out, status_out, y_out):
    """Run :func:`solve_candidate` for every arm (row ``a`` of ``w_out``)."""
    for a in range(means.shape[0]):
        status, t_a, y, _ = solve_candidate(kind, sigma2, means, a, eps, w_out[a])
        status_out[a] = status
        t_out[a] = t_a
        y_out[a] = y


@njit
def tracking_target(kind, sigma2, means, eps, w_out, tie_rtol):
    """Weights of the lowest-index optimal candidate.

    Returns 0 on success; 1 when uniform weights over the empirical best
    arms are used because no candidate exists (ties at eps = 0); 2 when
    the solver failed and uniform weights over all arms are used.
    """
    n_arms = means.shape[0]
    rows = np.zeros((n_arms, n_arms))
    t_vals = np.full(n_arms, np.inf)
    best_t = np.inf
    for a in range(n_arms):
        status, t_a, _, _ = solve_candidate(kind, sigma2, means, a, eps, rows[a])
        if status == FAILED:
            for b in range(n_arms):
                w_out[b] = 1.0 / n_arms
            return 2
        if status >= 0:
            t_vals[a] = t_a
            best_t = min(best_t, t_a)
    if not math.isfinite(best_t):
        top = means.max()
        count = 0
        for b in range(n_arms):
            if means[b] >= top:
                count += 1
        for b in range(n_arms):
            w_out[b] = (1.0 / count) if means[b] >= top else 0.0
        return 1
    for a in range(n_arms):
        if t_vals[a] <= best_t * (1.0 + tie_rtol):
            for b in range(n_arms):
                w_out[b] = rows[a, b]
            break
    return 0


@njit
def z_stat(kind, sigma2, mu_a, mu_b, n_a, n_b, eps):
    """GLR statistic for 'a is not eps-worse than b' against its negation."""
    if kind == GAUSSIAN:
        gap = mu_a - mu_b + eps
        return n_a * n_b / (n_a + n_b) * gap * gap / (2.0 * sigma2)
    return pair_value(kind, sigma2, mu_a, mu_b, eps, n_a, n_b)


@njit
def pglrt(kind, sigma2, means, counts, eps):
    """max over empirical eps-best a of min_{b != a} Z_ab; returns (value, arm)."""
    top = means.max()
    best = -1.0
    arm = -1
    n_arms = means.shape[0]
    for a in range(n_arms):
        if means[a] < top - eps:
            continue
        z_min = np.inf
        for b in range(n_arms):
            if b == a:
                continue
            z = z_stat(kind, sigma2, means[a], means[b], counts[a], counts[b], eps)
            if z < z_min:
                z_min = z
        if z_min > best:
            best = z_min
            arm = a
    return best, arm


@njit
def kl_upper(kind, sigma2, mu, n, level):
    """max{q : n d(mu, q) <= level}."""
    if level <= 0.0:
        return mu
    if kind == GAUSSIAN:
        return mu + math.sqrt(2.0 * sigma2 * level / n)
    if mu >= 1.0:
        return 1.0
    radius = level / n
    lo = mu
    hi = 1.0
    for _ in range(MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if kl(kind, sigma2, mu, mid) > radius:
            hi = mid
        else:
            lo = mid
    return lo


@njit
def kl_lower(kind, sigma2, mu, n, level):
    """min{q : n d(mu, q) <= level}."""
    if level <= 0.0:
        return mu
    if kind == GAUSSIAN:
        return mu - math.sqrt(2.0 * sigma2 * level / n)
    if mu <= 0.0:
        return 0.0
    radius = level / n
    lo = 0.0
    hi = mu
    for _ in range(MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if kl(kind, sigma2, mu, mid) > radius:
            lo = mid
        else:
            hi = mid
    return hi


@njit
def kl_bounds(kind, sigma2, means, counts, level, lower_out, upper_out):
    for a in range(means.shape[0]):
        lower_out[a] = kl_lower(kind, sigma2, means[a], counts[a], level)
        upper_out[a] = kl_upper(kind, sigma2, means[a], counts[a], level)
