"""Compiled inner loops for the crossing-probability recursion.

The recursion embeds the n uniforms into a Poisson process of rate n on
[0, 1]. Walking over the distinct boundary levels t_1 < t_2 < ..., it keeps
the (renormalized) distribution of the number of points below the current
level, truncated at the admissible count, and de-Poissonizes at the end.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# Poisson terms smaller than this fraction of the running peak are dropped.
_PMF_CUTOFF = 1e-18


@njit(cache=True)
def _poisson_pmf(lam, rmax, out):
    """Fill ``out[0..R]`` with Poisson(lam) probabilities over their peak.

    Returns ``R`` and the log of the peak probability on ``[0, rmax]``, so
    that ``out[r] * exp(log_peak)`` is the probability. Terms past the mode
    are truncated once they fall below a negligible fraction of the peak;
    terms below the mode are obtained by downward recursion and may
    underflow harmlessly to zero.
    """
    mode = int(math.floor(lam))
    r0 = mode if mode < rmax else rmax
    log_p0 = -lam + r0 * math.log(lam) - math.lgamma(r0 + 1.0)
    p0 = 1.0
    out[r0] = p0
    p = p0
    for r in range(r0, 0, -1):
        p = p * r / lam
        out[r - 1] = p
    top = r0
    p = p0
    floor = p0 * _PMF_CUTOFF
    for r in range(r0 + 1, rmax + 1):
        p = p * lam / r
        out[r] = p
        top = r
        if p < floor:
            break
    return top, log_p0


@njit(cache=True)
def log_crossprob(c, n, q, tmp, pmf):
    """Log of P(U_(i) > c_i for all i) for n iid uniforms.

    ``c`` must already be nondecreasing. ``q``, ``tmp`` and ``pmf`` are
    scratch buffers of length at least ``n + 1``. Returns ``-inf`` for the
    impossible event.
    """
    q[0] = 1.0
    top = 0
    logscale = 0.0
    t_prev = 0.0
    for i in range(n):
        t = c[i]
        if t <= t_prev:
            # Flat segment (or leading zeros): the constraint N(t) <= i is
            # implied by the tighter one already imposed at this level.
            continue
        if t >= 1.0:
            return -np.inf
        lam = n * (t - t_prev)
        limit = i
        rtop, log_peak = _poisson_pmf(lam, limit, pmf)
        newtop = top + rtop
        if newtop > limit:
            newtop = limit
        total = 0.0
        for m in range(newtop + 1):
            lo = m - rtop
            if lo < 0:
                lo = 0
            hi = m if m < top else top
            acc = 0.0
            for r in range(lo, hi + 1):
                acc += q[r] * pmf[m - r]
            tmp[m] = acc
            total += acc
        if not total > 0.0:
            return -np.inf
        inv = 1.0 / total
        for m in range(newtop + 1):
            q[m] = tmp[m] * inv
        logscale += math.log(total) + log_peak
        top = newtop
        t_prev = t
    if t_prev == 0.0:
        return 0.0
    # De-Poissonize: weight the count j below the last level by the chance
    # that the remaining n - j points land above it.
    lgn = math.lgamma(n + 1.0)
    logn = math.log(n)
    l1mt = math.log1p(-t_prev)
    best = -np.inf
    for j in range(top + 1):
        if q[j] > 0.0:
            w = (math.log(q[j]) + lgn - math.lgamma(n - j + 1.0) - j * logn
                 + n * t_prev + (n - j) * l1mt)
            tmp[j] = w
            if w > best:
                best = w
        else:
            tmp[j] = -np.inf
    if best == -np.inf:
        return -np.inf
    acc = 0.0
    for j in range(top + 1):
        acc += math.exp(tmp[j] - best)
    return best + math.log(acc) + logscale


@njit(cache=True)
def log_crossprob_rows(C):
    """Apply :func:`log_crossprob` to every row of ``C`` after monotonization."""
    B, n = C.shape
    out = np.empty(B)
    q = np.empty(n + 1)
    tmp = np.empty(n + 1)
    pmf = np.empty(n + 1)
    c = np.empty(n)
    for b in range(B):
        run = 0.0
        for i in range(n):
            v = C[b, i]
            if v > run:
                run = v
            c[i] = run
        out[b] = log_crossprob(c, n, q, tmp, pmf)
    return out


@njit(cache=True)
def _g_phi_scalar(d, s, radius, terms):
    """Scalar ``g_s(1 + d)``; mirrors the vectorized version in ``families``."""
    if abs(d) < radius:
        coef = 0.5
        power = d * d
        acc = coef * power
        for k in range(3, terms + 1):
            coef *= (s - k + 1.0) / k
            power *= d
            acc += coef * power
        return acc
    lr = math.log1p(d)
    if s == 1.0:
        return (1.0 + d) * lr - d
    if s == 0.0:
        return d - lr
    return (math.expm1(s * lr) - s * d) / (s * (s - 1.0))


@njit(cache=True)
def _phi_signed(x, y, s, n, radius, terms):
    k = (y * _g_phi_scalar((x - y) / y, s, radius, terms)
         + (1.0 - y) * _g_phi_scalar((y - x) / (1.0 - y), s, radius, terms))
    if k < 0.0:
        k = 0.0
    r = math.sqrt(2.0 * n * k)
    if x > y:
        return r
    if x < y:
        return -r
    return 0.0


@njit(cache=True)
def phi_bisect(x, b, s, n, lo0, tol, maxit, radius, terms):
    """Solve ``f(x_i, y) = b_i`` by bisection in logit(y) for each i."""
    m = x.size
    out = np.empty(m)
    for i in range(m):
        lo = lo0
        hi = -lo0
        for _ in range(maxit):
            mid = 0.5 * (lo + hi)
            y = 1.0 / (1.0 + math.exp(-mid))
            if _phi_signed(x[i], y, s, n, radius, terms) > b[i]:
                lo = mid
            else:
                hi = mid
            if hi - lo < tol:
                break
        out[i] = 1.0 / (1.0 + math.exp(-0.5 * (lo + hi)))
    return out
