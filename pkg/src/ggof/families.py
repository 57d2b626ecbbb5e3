"""The gGOF statistic family.

A gGOF statistic is

    S = sup_{i in R} f(i/n, P_(i)),

the largest departure of the ordered p-values from their uniform
expectations, measured by a kernel ``f(x, y)`` that is decreasing in ``y``.
This module provides the kernels, their inverses in ``y``, the statistic
itself and the per-rank rejection boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import phi_bisect
from .errors import DomainError, EmptyRegionError

#: p-values (and x = i/n) are clamped to [EPS, 1 - EPS] before evaluation.
EPS = 1e-15

_SERIES_RADIUS = 1e-2
_SERIES_TERMS = 12
_BISECT_TOL = 1e-12
_BISECT_MAXIT = 200


@dataclass(frozen=True)
class StatFamily:
    """A statistic kernel ``f(x, y)``.

    Parameters
    ----------
    kind : {"phi", "ks", "bonferroni", "fdr"}
        Kernel type.
    param : float
        ``s`` for the phi-divergence kernel, ``alpha`` for Bonferroni and
        FDR; ignored for KS.

    Notes
    -----
    ``phi(2)`` is the higher criticism statistic normalized by the p-value
    variance, ``phi(-1)`` the variant normalized at ``x``; ``phi(1)`` is the
    Berk-Jones statistic and ``phi(0)`` its reverse.
    """

    kind: str
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in ("phi", "ks", "bonferroni", "fdr"):
            raise DomainError(f"unknown family kind {self.kind!r}")
        p = float(self.param)
        if not np.isfinite(p):
            raise DomainError("family parameter must be finite")
        if self.kind in ("bonferroni", "fdr") and not 0.0 < p < 1.0:
            raise DomainError("alpha must lie in (0, 1)")
        object.__setattr__(self, "param", p)

    @classmethod
    def phi(cls, s: float) -> "StatFamily":
        return cls("phi", s)

    @classmethod
    def hc(cls) -> "StatFamily":
        """Higher criticism, ``phi(2)``."""
        return cls("phi", 2.0)

    @classmethod
    def hc2008(cls) -> "StatFamily":
        """Reverse higher criticism, ``phi(-1)``."""
        return cls("phi", -1.0)

    @classmethod
    def bj(cls) -> "StatFamily":
        """Berk-Jones, ``phi(1)``."""
        return cls("phi", 1.0)

    @classmethod
    def reverse_bj(cls) -> "StatFamily":
        return cls("phi", 0.0)

    @classmethod
    def ks_plus(cls) -> "StatFamily":
        return cls("ks")

    @classmethod
    def bonferroni(cls, alpha: float) -> "StatFamily":
        return cls("bonferroni", alpha)

    @classmethod
    def fdr(cls, alpha: float) -> "StatFamily":
        return cls("fdr", alpha)

    @property
    def label(self) -> str:
        if self.kind == "phi":
            return f"phi({self.param:g})"
        if self.kind == "ks":
            return "ks"
        return f"{self.kind}({self.param:g})"

    @classmethod
    def from_label(cls, text: str) -> "StatFamily":
        """Parse labels such as ``hc``, ``bj``, ``phi(0.5)``, ``fdr(0.05)``."""
        t = text.strip().lower()
        named = {"hc": cls.hc, "hc2004": cls.hc, "hc2008": cls.hc2008,
                 "bj": cls.bj, "rbj": cls.reverse_bj, "ks": cls.ks_plus}
        if t in named:
            return named[t]()
        if t.endswith(")") and "(" in t:
            head, arg = t[:-1].split("(", 1)
            return cls(head.strip(), float(arg))
        raise DomainError(f"cannot parse family {text!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "param": self.param}


@dataclass(frozen=True)
class TruncationScheme:
    """Index range ``[k0, k1]`` (one-based) and magnitude range ``[alpha0, alpha1]``."""

    k0: int
    k1: int
    alpha0: float = 0.0
    alpha1: float = 1.0

    def __post_init__(self):
        if int(self.k0) != self.k0 or int(self.k1) != self.k1:
            raise DomainError("k0 and k1 must be integers")
        object.__setattr__(self, "k0", int(self.k0))
        object.__setattr__(self, "k1", int(self.k1))
        if self.k0 < 1 or self.k0 > self.k1:
            raise DomainError("need 1 <= k0 <= k1")
        if not 0.0 <= self.alpha0 <= self.alpha1 <= 1.0:
            raise DomainError("need 0 <= alpha0 <= alpha1 <= 1")

    @classmethod
    def full(cls, n: int) -> "TruncationScheme":
        return cls(1, n)

    def validate(self, n: int) -> None:
        if self.k1 > n:
            raise DomainError(f"k1={self.k1} exceeds n={n}")

    @property
    def has_magnitude(self) -> bool:
        return self.alpha0 > 0.0 or self.alpha1 < 1.0

    def to_dict(self) -> dict:
        return {"k0": self.k0, "k1": self.k1, "alpha0": self.alpha0,
                "alpha1": self.alpha1}


@dataclass(frozen=True)
class GofResult:
    """Observed statistic with the setting that produced it."""

    statistic: float
    family: StatFamily
    truncation: TruncationScheme
    n: int
    argmax_index: int


def _clamp(a):
    return np.clip(a, EPS, 1.0 - EPS)


def _g_phi(d, s):
    """``g_s(1 + d)`` where ``g_s(r) = (r**s - 1 - s (r - 1)) / (s (s - 1))``.

    ``g_s >= 0`` is convex with a double zero at ``r = 1``; small ``|d|`` uses
    its Taylor series to avoid cancellation.
    """
    d = np.asarray(d, dtype=float)
    out = np.empty_like(d)
    small = np.abs(d) < _SERIES_RADIUS
    if small.any():
        ds = d[small]
        coef = 0.5
        term = coef * ds * ds
        acc = term.copy()
        power = ds * ds
        for k in range(3, _SERIES_TERMS + 1):
            coef *= (s - k + 1.0) / k
            power = power * ds
            acc += coef * power
        out[small] = acc
    big = ~small
    if big.any():
        db = d[big]
        lr = np.log1p(db)
        if s == 1.0:
            out[big] = (1.0 + db) * lr - db
        elif s == 0.0:
            out[big] = db - lr
        else:
            out[big] = (np.expm1(s * lr) - s * db) / (s * (s - 1.0))
    return out


def phi_divergence(x, y, s: float):
    """Unsigned divergence ``f^phi_s(x, y)`` between Bernoulli(x) and Bernoulli(y).

    Computed as ``y g_s(x / y) + (1 - y) g_s((1 - x) / (1 - y))`` so that every
    term is nonnegative.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    d1 = (x - y) / y
    d2 = (y - x) / (1.0 - y)
    return y * _g_phi(d1, s) + (1.0 - y) * _g_phi(d2, s)


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise DomainError("non-finite input")


def f_eval(family: StatFamily, x, y, n: int):
    """Evaluate the kernel ``f(x, y)``.

    Parameters
    ----------
    family : StatFamily
    x, y : float or array_like
        ``x = i/n`` and the ordered p-value; both clamped to ``[EPS, 1-EPS]``.
        Arrays broadcast.
    n : int
        Number of p-values.

    Returns
    -------
    float or ndarray
        For the phi-divergence kernel, the signed root
        ``sign(x - y) * sqrt(2 n f^phi_s(x, y))``.
    """
    if n < 1:
        raise DomainError("n must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_finite(x, y)
    xc, yc = _clamp(x), _clamp(y)
    kind = family.kind
    if kind == "phi":
        k = phi_divergence(xc, yc, family.param)
        out = np.sign(xc - yc) * np.sqrt(2.0 * n * np.maximum(k, 0.0))
        if not np.all(np.isfinite(out)):
            raise DomainError(f"phi({family.param:g}) is not finite here")
    elif kind == "ks":
        out = x - yc
    elif kind == "bonferroni":
        out = family.param / n - yc + 0.0 * xc
    else:
        out = family.param * x - yc
    return out[()] if out.ndim == 0 else out


def _bisect_phi(s, x, b, n):
    """Bisection in logit(y) for ``f(x, y) = b``; interior cases only."""
    lo = float(np.log(EPS) - np.log1p(-EPS))
    return phi_bisect(np.ascontiguousarray(x, dtype=float).ravel(),
                      np.ascontiguousarray(b, dtype=float).ravel(), float(s), float(n),
                      lo, _BISECT_TOL, _BISECT_MAXIT, _SERIES_RADIUS,
                      _SERIES_TERMS).reshape(np.shape(x))


def f_inverse(family: StatFamily, x, b, n: int):
    """Solve ``f(x, y) = b`` for ``y``.

    Returns 0 when ``f(x, y) < b`` for every ``y`` and 1 when ``f(x, y) > b``
    for every ``y``; interior solutions are unique because ``f`` is strictly
    decreasing in ``y``. Arrays broadcast.
    """
    x = np.asarray(x, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_finite(x, b)
    x, b = np.broadcast_arrays(x, b)
    xc = _clamp(x)
    kind = family.kind
    if kind == "ks":
        u = x - b
    elif kind == "bonferroni":
        u = family.param / n - b + 0.0 * xc
    elif kind == "fdr":
        u = family.param * x - b
    else:
        s = family.param
        if s == 2.0:
            # n (x - y)^2 = b^2 y (1 - y) with sign(x - y) = sign(b)
            b2 = b * b
            root = np.sqrt(b2 * b2 + 4.0 * n * b2 * xc * (1.0 - xc))
            big = (2.0 * n * xc + b2 + root) / (2.0 * (n + b2))
            small = n * xc * xc / ((n + b2) * big)
            u = np.where(b > 0, small, big)
        elif s == -1.0:
            u = xc - b * np.sqrt(xc * (1.0 - xc) / n)
        else:
            f_lo = f_eval(family, xc, EPS, n)
            f_hi = f_eval(family, xc, 1.0 - EPS, n)
            u = np.empty(xc.shape)
            u[...] = np.where(np.asarray(f_lo) < b, 0.0, 1.0)
            inner = (np.asarray(f_lo) >= b) & (np.asarray(f_hi) <= b)
            if inner.any():
                u[inner] = _bisect_phi(s, xc[inner], b[inner], n)
            return u[()] if u.ndim == 0 else u
    # Clamped p-values never fall below EPS or above 1 - EPS, so thresholds
    # beyond those limits act exactly like 0 and 1.
    u = np.where(u < EPS, 0.0, np.where(u > 1.0 - EPS, 1.0, u))
    return u[()] if u.ndim == 0 else u


def _kernel_rows(family, trunc, P):
    """Sorted p-values and kernel values on the truncation index range."""
    n = P.shape[-1]
    trunc.validate(n)
    Ps = np.sort(P, axis=-1, kind="stable")
    idx = np.arange(trunc.k0, trunc.k1 + 1)
    sub = Ps[..., trunc.k0 - 1: trunc.k1]
    vals = np.asarray(f_eval(family, idx / n, sub, n), dtype=float)
    if trunc.has_magnitude:
        keep = (sub >= trunc.alpha0) & (sub <= trunc.alpha1)
        vals = np.where(keep, vals, -np.inf)
    return vals, idx


def _check_pvalues(P):
    if np.isnan(P).any() or (P < 0).any() or (P > 1).any():
        raise DomainError("p-values must lie in [0, 1]")


def compute_statistic(pvalues, family: StatFamily, trunc: TruncationScheme) -> GofResult:
    """The supremum of ``f(i/n, P_(i))`` over the truncation region.

    Raises
    ------
    EmptyRegionError
        When no ordered p-value survives both index and magnitude filters.
    """
    P = np.asarray(pvalues, dtype=float).reshape(-1)
    _check_pvalues(P)
    n = P.size
    vals, idx = _kernel_rows(family, trunc, P)
    if not np.isfinite(vals).any():
        raise EmptyRegionError("truncation region is empty for these p-values")
    j = int(np.argmax(vals))
    return GofResult(float(vals[j]), family, trunc, n, int(idx[j]))


def compute_statistics(pvalues, family: StatFamily, trunc: TruncationScheme) -> np.ndarray:
    """Row-wise statistics for a 2-D array of p-values (one sample per row).

    Rows with an empty region get ``-inf``; use :func:`compute_statistic`
    for the error-raising scalar version.
    """
    P = np.asarray(pvalues, dtype=float)
    if P.ndim != 2:
        raise DomainError("expected a 2-D array")
    _check_pvalues(P)
    vals, _ = _kernel_rows(family, trunc, P)
    return vals.max(axis=-1)


def rejection_boundary(family: StatFamily, trunc: TruncationScheme, n: int, b) -> np.ndarray:
    """Per-rank p-value thresholds ``u_i = f^{-1}(i/n, b)``.

    The statistic is at most ``b`` exactly when every ordered p-value in the
    region stays above its threshold. Ranks outside ``[k0, k1]`` get 0.
    Magnitude truncation caps ``u_i`` at ``alpha1`` and zeroes thresholds
    below ``alpha0``.

    Parameters
    ----------
    b : float or array_like
        Threshold(s); an array of shape (m,) yields an (m, n) result.
    """
    trunc.validate(n)
    b_arr = np.asarray(b, dtype=float)
    scalar = b_arr.ndim == 0
    b_arr = np.atleast_1d(b_arr)
    idx = np.arange(trunc.k0, trunc.k1 + 1)
    u = np.zeros((b_arr.size, n))
    inner = f_inverse(family, (idx / n)[None, :], b_arr[:, None], n)
    if trunc.has_magnitude:
        inner = np.minimum(inner, trunc.alpha1)
        inner = np.where(inner < trunc.alpha0, 0.0, inner)
    u[:, trunc.k0 - 1: trunc.k1] = inner
    return u[0] if scalar else u


def statistic_range(family: StatFamily, trunc: TruncationScheme, n: int) -> tuple[float, float]:
    """Bounds on the attainable statistic, used to bracket threshold searches."""
    idx = np.arange(trunc.k0, trunc.k1 + 1)
    lo = np.asarray(f_eval(family, idx / n, 1.0, n)).max()
    hi = np.asarray(f_eval(family, idx / n, 0.0, n)).max()
    return float(lo), float(hi)
