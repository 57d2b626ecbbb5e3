"""Independent reference computations used as test oracles.

Each oracle shares no code with the package: crossing probabilities come
from a determinant formula or brute-force integration, Gaussian rectangle
probabilities from scipy's multivariate normal CDF, and regression
statistics from explicit normal equations.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, stats


def steck_crossprob(c) -> float:
    """``P(U_(i) > c_i for all i)`` by the Steck determinant.

    For nondecreasing lower bounds ``a`` and upper bounds 1,
    ``P = n! det[m_ij]`` with ``m_ij = (1 - a_j)_+^(j-i+1) / (j-i+1)!`` for
    ``j >= i - 1`` and 0 otherwise.
    """
    a = np.maximum.accumulate(np.asarray(c, dtype=float))
    n = a.size
    m = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            k = j - i + 1
            if k >= 0:
                m[i, j] = max(1.0 - a[j], 0.0) ** k / math.factorial(k)
    return float(math.factorial(n) * np.linalg.det(m))


def integrate_crossprob(c) -> float:
    """Brute-force ``n!`` times the ordered-uniform volume by nested adaptive quadrature.

    ``F_k(u) = integral of F_{k+1}(v) dv over v in (max(u, c_k), 1)`` with
    ``F_{n+1} = 1``; every quadrature is split at the boundary values where
    the integrand has kinks. Practical for ``n <= 3``.
    """
    c = [float(v) for v in c]
    n = len(c)
    kinks = sorted({v for v in c if 0.0 < v < 1.0})

    def F(k, u):
        lo = max(u, c[k])
        if lo >= 1.0:
            return 0.0
        if k == n - 1:
            return 1.0 - lo
        pts = [p for p in kinks if lo < p < 1.0] or None
        val, _ = integrate.quad(lambda v: F(k + 1, v), lo, 1.0, points=pts,
                                epsabs=1e-13, epsrel=1e-13, limit=200)
        return val

    return float(math.factorial(n) * F(0, 0.0))


def integrate_crossprob_pieces(c, order: int = 8) -> float:
    """Nested integration with a fixed Gauss-Legendre rule on each kink-free piece.

    Every nested integrand is a polynomial of degree at most ``n`` between
    consecutive boundary values, so ``order >= (n + 1) / 2`` nodes per piece
    integrate it exactly. Practical for ``n <= 5``.
    """
    c = [float(v) for v in c]
    n = len(c)
    kinks = sorted({v for v in c if 0.0 < v < 1.0})
    x, w = np.polynomial.legendre.leggauss(order)

    def F(k, u):
        lo = max(u, c[k])
        if lo >= 1.0:
            return 0.0
        if k == n - 1:
            return 1.0 - lo
        edges = [lo] + [p for p in kinks if lo < p < 1.0] + [1.0]
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            half = 0.5 * (b - a)
            total += half * sum(wi * F(k + 1, a + half * (xi + 1.0)) for xi, wi in zip(x, w))
        return total

    return float(math.factorial(n) * F(0, 0.0))


def bivariate_crossprob(u1: float, u2: float, rho: float, two_sided: bool) -> float:
    """``P(P_(1) > u1, P_(2) > u2)`` for two equicorrelated normal p-values.

    Expressed through rectangle probabilities of the bivariate normal:
    with ``A = {both p > u1}`` and ``B = {both p in (u1, u2]}``, the event
    equals ``A minus B`` when ``u2 > u1``.
    """
    cov = np.array([[1.0, rho], [rho, 1.0]])
    mvn = stats.multivariate_normal(mean=[0.0, 0.0], cov=cov)

    def both_above(u):
        # P(p1 > u, p2 > u)
        if u <= 0:
            return 1.0
        if u >= 1:
            return 0.0
        if two_sided:
            t = stats.norm.isf(u / 2.0)
            return float(mvn.cdf([t, t], lower_limit=[-t, -t]))
        t = stats.norm.isf(u)
        return float(mvn.cdf([t, t]))

    return both_above(u1) - _both_between(u1, u2, mvn, two_sided)


def _both_between(u1, u2, mvn, two_sided):
    """``P(u1 < p1 <= u2, u1 < p2 <= u2)``."""
    if u2 <= u1:
        return 0.0

    def box(lo_t, hi_t):
        return float(mvn.cdf([hi_t, hi_t], lower_limit=[lo_t, lo_t]))

    if two_sided:
        t1 = stats.norm.isf(u1 / 2.0) if u1 > 0 else np.inf
        t2 = stats.norm.isf(u2 / 2.0) if u2 < 1 else 0.0
        # |T| in [t2, t1) for both coordinates: four sign quadrants
        total = 0.0
        for s1 in (-1, 1):
            for s2 in (-1, 1):
                lo = [t2 if s1 > 0 else -t1, t2 if s2 > 0 else -t1]
                hi = [t1 if s1 > 0 else -t2, t1 if s2 > 0 else -t2]
                total += float(mvn.cdf(hi, lower_limit=lo))
        return total
    t1 = stats.norm.isf(u1) if u1 > 0 else np.inf
    t2 = stats.norm.isf(u2) if u2 < 1 else -np.inf
    return box(t2, t1)


def equal_corr_inverse_diag(n: int, rho: float) -> float:
    """``(Sigma^-1)_jj`` for ``Sigma = (1 - rho) I + rho 11'`` by Sherman-Morrison."""
    a = 1.0 - rho
    return (1.0 / a) * (1.0 - rho / (a + n * rho))


def ls_zscores(y, x, z=None, sigma: float = 1.0):
    """z-scores ``beta_hat / se`` of the ``x`` coefficients in ``y ~ [x z]``."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    A = x if z is None or np.size(z) == 0 else np.column_stack([x, z])
    G = A.T @ A
    beta = np.linalg.solve(G, A.T @ y)
    Ginv = np.linalg.inv(G)
    n = x.shape[1]
    return beta[:n] / (sigma * np.sqrt(np.diag(Ginv)[:n]))


def bj_literal(x: float, y: float, n: int) -> float:
    """Signed Berk-Jones kernel written directly from the Kullback-Leibler form."""
    kl = x * math.log(x / y) + (1.0 - x) * math.log((1.0 - x) / (1.0 - y))
    root = math.sqrt(2.0 * n * kl)
    return root if y <= x else -root


def hc2004(x, y, n):
    return np.sqrt(n) * (x - y) / np.sqrt(y * (1.0 - y))


def hc2008(x, y, n):
    return np.sqrt(n) * (x - y) / np.sqrt(x * (1.0 - x))
