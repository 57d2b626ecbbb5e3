"""Null distributions of gGOF statistics under correlated Gaussian inputs.

The input p-values come from statistics ``T ~ N(0, Sigma)`` with unit
variances. Four engines compute ``G(b) = P(S <= b)``:

* ``iid``: independent inputs, a single crossing probability.
* ``equal``: exact for an equal-correlation ``Sigma``. Writing
  ``T_i = sqrt(rho) Z + sqrt(1 - rho) e_i`` makes the inputs conditionally
  independent given ``Z``, so ``G`` is a one-dimensional integral over ``Z``
  of iid crossing probabilities with transformed boundaries.
* ``wam``: a weighted average of equal-correlation distributions at the
  mean correlation of each near-diagonal band (Toeplitz-like ``Sigma``).
* ``loess``: local quadratic smoothing, over a window of thresholds, of
  equal-correlation distributions at randomly sampled off-diagonal
  correlations (general ``Sigma``).

``mc`` is a Monte-Carlo engine used as an oracle.

Functions named ``survival_*`` follow the established naming of this
package but return the distribution function ``P(S <= b)``; the p-value of
an observed statistic ``s`` is ``1 - survival(s)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.special import ndtr, ndtri

from .crossprob import counter_rng, cross_prob_batch
from .errors import (
    ApproximationWarning,
    DimensionMismatchError,
    DomainError,
    SingularMatrixError,
    UnsupportedModelError,
)
from .families import (
    GofResult,
    StatFamily,
    TruncationScheme,
    compute_statistics,
    rejection_boundary,
)

# Beyond this many standard deviations a transformed boundary is 0 or 1 to
# double precision, which lets the z-integral skip its flat parts.
_FLAT_SD = 8.5


class Sidedness(str, Enum):
    """How input statistics are turned into p-values."""

    ONE = "one"
    TWO = "two"

    @classmethod
    def parse(cls, value) -> "Sidedness":
        if isinstance(value, cls):
            return value
        v = str(value).lower().replace("_sided", "").replace("-sided", "")
        return cls(v)


def pvalues_from_stats(t, sided) -> np.ndarray:
    """Upper-tail (one-sided) or two-sided normal p-values."""
    t = np.asarray(t, dtype=float)
    if Sidedness.parse(sided) is Sidedness.ONE:
        return ndtr(-t)
    return 2.0 * ndtr(-np.abs(t))


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature for the integral over the shared factor ``Z``.

    Parameters
    ----------
    node_count : int
        Number of nodes (at least 16).
    lo, hi : float
        Integration range in ``z``.
    rule : {"gauss", "trapezoid"}
        Gauss-Legendre, or the composite trapezoid rule used for
        cross-checking.
    """

    node_count: int = 64
    lo: float = -8.0
    hi: float = 8.0
    rule: str = "gauss"

    def __post_init__(self):
        if self.node_count < 16:
            raise DomainError("node_count must be at least 16")
        if self.rule not in ("gauss", "trapezoid"):
            raise DomainError(f"unknown quadrature rule {self.rule!r}")
        if not self.lo < self.hi:
            raise DomainError("need lo < hi")

    @classmethod
    def trapezoid(cls, node_count: int = 2001) -> "QuadratureSpec":
        return cls(node_count=node_count, rule="trapezoid")

    def reference(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights on [-1, 1]."""
        return _reference_rule(self.rule, self.node_count)


@lru_cache(maxsize=32)
def _reference_rule(rule: str, node_count: int):
    if rule == "gauss":
        x, w = np.polynomial.legendre.leggauss(node_count)
    else:
        x = np.linspace(-1.0, 1.0, node_count)
        w = np.full(node_count, 2.0 / (node_count - 1))
        w[[0, -1]] *= 0.5
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


DEFAULT_QUAD = QuadratureSpec()


@dataclass(frozen=True)
class CorrelationModel:
    """Correlation structure of the input statistics.

    Use the constructors :meth:`identity`, :meth:`equal`, :meth:`toeplitz`
    and :meth:`general` rather than the raw fields.
    """

    kind: str
    n: int
    rho: float = 0.0
    rhos: np.ndarray | None = field(default=None, repr=False)
    sigma: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def identity(cls, n: int) -> "CorrelationModel":
        return cls("identity", int(n))

    @classmethod
    def equal(cls, n: int, rho: float) -> "CorrelationModel":
        rho = float(rho)
        if n > 1 and not -1.0 / (n - 1) < rho < 1.0:
            raise DomainError(f"equal correlation must lie in (-1/(n-1), 1), got {rho}")
        return cls("equal", int(n), rho=rho)

    @classmethod
    def toeplitz(cls, rhos) -> "CorrelationModel":
        r = np.asarray(rhos, dtype=float).reshape(-1)
        if np.any(np.abs(r) >= 1):
            raise DomainError("toeplitz correlations must lie in (-1, 1)")
        r.setflags(write=False)
        return cls("toeplitz", r.size + 1, rhos=r)

    @classmethod
    def general(cls, sigma, *, check: bool = True) -> "CorrelationModel":
        S = np.array(sigma, dtype=float, copy=True)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise DimensionMismatchError("correlation matrix must be square")
        if check:
            if not np.allclose(S, S.T, atol=1e-10):
                raise DomainError("correlation matrix must be symmetric")
            if not np.allclose(np.diag(S), 1.0, atol=1e-10):
                raise DomainError("correlation matrix must have a unit diagonal")
            ev = np.linalg.eigvalsh(0.5 * (S + S.T))
            if ev[0] < -1e-10:
                raise SingularMatrixError(
                    f"correlation matrix is not positive semidefinite "
                    f"(smallest eigenvalue {ev[0]:.3g})")
        S.setflags(write=False)
        return cls("general", S.shape[0], sigma=S)

    def matrix(self) -> np.ndarray:
        n = self.n
        if self.kind == "identity":
            return np.eye(n)
        if self.kind == "equal":
            return np.full((n, n), self.rho) + (1.0 - self.rho) * np.eye(n)
        if self.kind == "toeplitz":
            from scipy.linalg import toeplitz
            return toeplitz(np.concatenate([[1.0], self.rhos]))
        return np.array(self.sigma)

    def offdiag_means(self) -> np.ndarray:
        """Mean correlation on each off-diagonal ``j = 1, ..., n - 1``."""
        n = self.n
        if self.kind == "identity":
            return np.zeros(n - 1)
        if self.kind == "equal":
            return np.full(n - 1, self.rho)
        if self.kind == "toeplitz":
            return np.array(self.rhos)
        S = self.sigma
        return np.array([np.diagonal(S, j).mean() for j in range(1, n)])

    def sample_offdiag(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """Random off-diagonal entries, band ``j`` chosen with weight ``n - j``.

        Within a band the entry is uniform, so overall every upper-triangular
        entry is equally likely and near-diagonal bands, holding more
        entries, are favored.
        """
        n = self.n
        if n < 2:
            return np.zeros(size)
        j = np.arange(1, n)
        band = rng.choice(j, size=size, p=(n - j) / np.sum(n - j))
        if self.kind == "identity":
            return np.zeros(size)
        if self.kind == "equal":
            return np.full(size, self.rho)
        if self.kind == "toeplitz":
            return self.rhos[band - 1].copy()
        pos = np.floor(rng.random(size) * (n - band)).astype(int)
        return self.sigma[pos, pos + band]

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "n": self.n}
        if self.kind == "equal":
            d["rho"] = self.rho
        elif self.kind == "toeplitz":
            d["rhos"] = self.rhos.tolist()
        elif self.kind == "general":
            d["sigma"] = self.sigma.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CorrelationModel":
        kind = d["kind"]
        if kind == "identity":
            return cls.identity(d["n"])
        if kind == "equal":
            return cls.equal(d["n"], d["rho"])
        if kind == "toeplitz":
            return cls.toeplitz(d["rhos"])
        return cls.general(d["sigma"])


# ---------------------------------------------------------------------------
# equal-correlation core


def _transformed(t, rho, z, sided):
    """Boundaries ``c_i(z)`` for rows of cut points ``t`` (shape (P, n))."""
    sr = np.sqrt(rho)[:, None, None]
    s = np.sqrt(1.0 - rho)[:, None, None]
    zz = z[:, :, None]
    tt = t[:, None, :]
    if sided is Sidedness.ONE:
        return ndtr((sr * zz - tt) / s)
    return ndtr((sr * zz - tt) / s) + ndtr((-sr * zz - tt) / s)


def conditional_boundary(u, rho: float, z: float, sided=Sidedness.TWO) -> np.ndarray:
    """Boundaries ``c_i(z)`` of the conditionally independent uniforms given ``Z = z``.

    With ``T_i = sqrt(rho) Z + sqrt(1 - rho) E_i``, the event ``P_i > u_i``
    given ``Z = z`` is ``V_i > c_i(z)`` for iid uniforms ``V_i``.
    """
    sided = Sidedness.parse(sided)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    t = -ndtri(u) if sided is Sidedness.ONE else -ndtri(0.5 * u)
    r = np.array([float(rho)])
    return _transformed(t[None, :], r, np.array([[float(z)]]), sided)[0, 0]


def boundary_cdf_equal(U, rho, sided=Sidedness.TWO, quad: QuadratureSpec = DEFAULT_QUAD) -> np.ndarray:
    """``P(P_(i) > u_i for all i)`` under equal correlation, row by row.

    Parameters
    ----------
    U : array_like, shape (P, n)
        Boundaries on the p-value scale.
    rho : float or array_like, shape (P,)
        Nonnegative correlation for each row.
    sided : Sidedness
    quad : QuadratureSpec

    Notes
    -----
    Conditional on ``Z = z`` the p-values are independent; the event that
    ``P_(i) > u_i`` becomes a uniform crossing problem with boundaries
    ``c_i(z)``. The integrand equals 1 (or 0) to double precision outside a
    window set by the largest boundary, so that mass is added analytically
    and the nodes are spent where the integrand varies.
    """
    sided = Sidedness.parse(sided)
    U = np.atleast_2d(np.asarray(U, dtype=float))
    P, n = U.shape
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (P,)).copy()
    if np.any(rho < 0):
        raise UnsupportedModelError(
            "negative equal correlation is not supported by the exact engine; "
            "use the loess or mc engine")
    if np.any(rho >= 1):
        raise DomainError("correlation must be below 1")
    out = np.empty(P)
    zero = rho == 0.0
    if zero.any():
        out[zero] = cross_prob_batch(U[zero])
    pos = np.flatnonzero(~zero)
    if pos.size == 0:
        return out
    Up, rp = U[pos], rho[pos]
    if sided is Sidedness.ONE:
        t = -ndtri(Up)
    else:
        t = -ndtri(0.5 * Up)
    active = Up > 0
    none_active = ~active.any(axis=1)
    t_min = np.where(active, t, np.inf).min(axis=1)
    sr, s = np.sqrt(rp), np.sqrt(1.0 - rp)
    with np.errstate(invalid="ignore"):
        za = (t_min - _FLAT_SD * s) / sr
        zb = (t_min + _FLAT_SD * s) / sr
    x_ref, w_ref = quad.reference()
    if sided is Sidedness.ONE:
        lo = np.clip(za, quad.lo, quad.hi)
        hi = np.clip(zb, quad.lo, quad.hi)
        base = np.where(za > quad.lo, ndtr(za), 0.0)
        scale = 1.0
    else:
        lo = np.clip(za, 0.0, quad.hi)
        hi = np.clip(zb, 0.0, quad.hi)
        base = np.where(za > 0.0, ndtr(za) - 0.5, 0.0)
        scale = 2.0
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    z = mid[:, None] + half[:, None] * x_ref[None, :]
    w = half[:, None] * w_ref[None, :] * np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)
    need = (half > 0) & ~none_active
    val = base.copy()
    if need.any():
        C = _transformed(t[need], rp[need], z[need], sided)
        k = C.shape[1]
        probs = cross_prob_batch(C.reshape(-1, n)).reshape(-1, k)
        val[need] += np.sum(w[need] * probs, axis=1)
    val = np.where(none_active, 1.0, scale * val)
    out[pos] = np.clip(val, 0.0, 1.0)
    return out


# ---------------------------------------------------------------------------
# public engines


def _boundaries(b, family, trunc, n):
    b_arr = np.atleast_1d(np.asarray(b, dtype=float))
    return b_arr, rejection_boundary(family, trunc, n, b_arr)


def _shape_like(b, values):
    return float(values[0]) if np.ndim(b) == 0 else values


def survival_iid(b, family: StatFamily, trunc: TruncationScheme, n: int):
    """``P(S <= b)`` for independent p-values."""
    _, U = _boundaries(b, family, trunc, n)
    return _shape_like(b, cross_prob_batch(U))


def survival_equal_corr(b, family: StatFamily, trunc: TruncationScheme, n: int,
                        rho: float, sided=Sidedness.TWO,
                        quad: QuadratureSpec = DEFAULT_QUAD):
    """``P(S <= b)`` for equally correlated inputs (exact up to quadrature).

    Raises
    ------
    UnsupportedModelError
        If ``rho < 0``.
    """
    if rho < 0:
        raise UnsupportedModelError(
            "negative equal correlation is not supported by the exact engine; "
            "use the loess or mc engine")
    _, U = _boundaries(b, family, trunc, n)
    return _shape_like(b, boundary_cdf_equal(U, rho, sided, quad))


def wam_weights(n: int, alpha: float = 0.5) -> np.ndarray:
    """Band weights ``omega_j`` proportional to ``n - j`` for ``j = 1..floor(alpha n)``.

    The weights are normalized to sum to one.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError("bandwidth alpha must lie in (0, 1)")
    J = max(1, min(n - 1, int(np.floor(alpha * n))))
    j = np.arange(1, J + 1)
    w = (n - j).astype(float)
    return w / w.sum()


def _clamp_rhos(rhos, engine: str):
    rhos = np.asarray(rhos, dtype=float)
    neg = int(np.count_nonzero(rhos < 0))
    if neg:
        warnings.warn(ApproximationWarning(
            f"{engine}: clamped {neg} negative correlation(s) to 0"), stacklevel=3)
    return np.maximum(rhos, 0.0), neg


def _mixture(U, rhos, weights, sided, quad):
    """``sum_k weights_k * P_{rhos_k}(no crossing of U rows)``, deduplicating rhos."""
    uniq, inv = np.unique(rhos, return_inverse=True)
    wsum = np.bincount(inv, weights=weights, minlength=uniq.size)
    m = U.shape[0]
    UU = np.repeat(U, uniq.size, axis=0)
    RR = np.tile(uniq, m)
    vals = boundary_cdf_equal(UU, RR, sided, quad).reshape(m, uniq.size)
    return vals @ wsum


def _wam_rhos(corr: CorrelationModel, alpha: float):
    if corr.n < 2:
        return np.zeros(1), np.ones(1), True
    w = wam_weights(corr.n, alpha)
    r = corr.offdiag_means()[: w.size]
    if np.all(r < 0):
        warnings.warn(ApproximationWarning(
            "wam: all band correlations are negative; using the iid distribution"),
            stacklevel=3)
        return np.zeros(1), np.ones(1), True
    r, _ = _clamp_rhos(r, "wam")
    return r, w, False


def boundary_cdf_wam(U, corr: CorrelationModel, bandwidth_alpha: float = 0.5,
                     sided=Sidedness.TWO, quad: QuadratureSpec = DEFAULT_QUAD) -> np.ndarray:
    """Weighted-average-method crossing probabilities for boundary rows ``U``."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    r, w, _ = _wam_rhos(corr, bandwidth_alpha)
    return _mixture(U, r, w, Sidedness.parse(sided), quad)


def survival_wam(b, family: StatFamily, trunc: TruncationScheme, corr: CorrelationModel,
                 bandwidth_alpha: float = 0.5, sided=Sidedness.TWO,
                 quad: QuadratureSpec = DEFAULT_QUAD):
    """``P(S <= b)`` by the weighted average method.

    ``G = sum_j omega_j G_{rho_j}`` over bands ``j <= floor(alpha n)``, where
    ``rho_j`` is the mean of the ``j``-th off-diagonal. Negative ``rho_j`` are
    clamped to 0 with an :class:`ApproximationWarning`.
    """
    _, U = _boundaries(b, family, trunc, corr.n)
    return _shape_like(b, boundary_cdf_wam(U, corr, bandwidth_alpha, sided, quad))


@dataclass(frozen=True)
class LoessSpec:
    """Settings of the local-regression surrogate.

    Parameters
    ----------
    m : int
        Number of equispaced design points in ``[b - eps, b + eps]``.
    eps : float
        Half-width of the window on the statistic scale.
    n_draws : int or None
        Sampled correlations per design point; ``None`` means ``n``.
    """

    m: int = 10
    eps: float = 1.0
    n_draws: int | None = None

    def __post_init__(self):
        if self.m < 1 or self.eps <= 0:
            raise DomainError("need m >= 1 and eps > 0")


def _tricube(d, eps):
    a = np.clip(np.abs(d) / eps, 0.0, 1.0)
    return (1.0 - a ** 3) ** 3


def loess_weights(offsets, eps: float) -> np.ndarray:
    """Linear weights ``l`` with fitted value ``l @ y`` at offset 0.

    Local quadratic regression with tri-cube kernel weights; falls back to
    the weighted mean when fewer than three design points carry weight.
    """
    d = np.asarray(offsets, dtype=float)
    w = _tricube(d, eps)
    X = np.vander(d, 3, increasing=True)
    live = w > 0
    if np.unique(d[live]).size >= 3:
        XtW = X.T * w
        try:
            A = np.linalg.solve(XtW @ X, XtW)
            return A[0]
        except np.linalg.LinAlgError:
            pass
    return w / w.sum()


def loess_fit(offsets, y, eps: float) -> float:
    """Fitted value at offset 0 of a tri-cube weighted local quadratic."""
    return float(loess_weights(offsets, eps) @ np.asarray(y, dtype=float))


class _LoessPlan:
    """Design points, sampled correlations and smoothing weights for one seed."""

    def __init__(self, corr: CorrelationModel, spec: LoessSpec, seed: int):
        n = corr.n
        N = spec.n_draws if spec.n_draws is not None else n
        rng = counter_rng(seed, 0x105E)
        draws = corr.sample_offdiag(spec.m * N, rng).reshape(spec.m, N)
        self.draws_raw = draws
        self.clamped = int(np.count_nonzero(draws < 0))
        draws = np.maximum(draws, 0.0)
        self.offsets = np.linspace(-spec.eps, spec.eps, spec.m) if spec.m > 1 else np.zeros(1)
        self.ell = loess_weights(self.offsets, spec.eps)
        self.constant = bool(np.ptp(draws) == 0.0)
        keep = self.ell != 0.0
        self.offsets_used = self.offsets[keep]
        self.ell_used = self.ell[keep]
        self.draws = draws[keep]
        self.N = N

    def warn(self):
        if self.clamped:
            warnings.warn(ApproximationWarning(
                f"loess: clamped {self.clamped} negative sampled correlation(s) to 0"),
                stacklevel=3)

    def mixture_weights(self):
        """Per-draw weights for a threshold-free boundary (all design points coincide)."""
        rhos = self.draws.reshape(-1)
        w = np.repeat(self.ell_used / self.N, self.N)
        return rhos, w


def boundary_cdf_loess(U, corr: CorrelationModel, spec: LoessSpec = LoessSpec(),
                       sided=Sidedness.TWO, seed: int = 0,
                       quad: QuadratureSpec = DEFAULT_QUAD) -> np.ndarray:
    """LOESS-engine crossing probabilities for boundary rows not indexed by a threshold.

    With no threshold axis the design points coincide, so the local fit
    reduces to the smoothing weights applied to the equal-correlation
    probabilities at the sampled correlations.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    plan = _LoessPlan(corr, spec, seed)
    plan.warn()
    sided = Sidedness.parse(sided)
    if plan.constant:
        return boundary_cdf_equal(U, float(plan.draws.flat[0]), sided, quad)
    rhos, w = plan.mixture_weights()
    return np.clip(_mixture(U, rhos, w, sided, quad), 0.0, 1.0)


def loess_cdf_family(boundary_fn, corr: CorrelationModel, spec: LoessSpec = LoessSpec(),
                     sided=Sidedness.TWO, seed: int = 0,
                     quad: QuadratureSpec = DEFAULT_QUAD) -> np.ndarray:
    """LOESS estimate for boundaries indexed by a threshold shift.

    Parameters
    ----------
    boundary_fn : callable
        Maps a 1-D array of shifts ``d`` (the design offsets) to an array
        of shape (B, len(d), n): for each of ``B`` targets, the boundary at
        threshold ``b + d``.

    Returns
    -------
    ndarray, shape (B,)
        Tri-cube weighted local quadratic fit at shift 0 of the
        equal-correlation crossing probabilities, averaged over the sampled
        correlations at each design point.
    """
    plan = _LoessPlan(corr, spec, seed)
    plan.warn()
    sided = Sidedness.parse(sided)
    if plan.constant:
        U = boundary_fn(np.zeros(1))[:, 0, :]
        return boundary_cdf_equal(U, float(plan.draws.flat[0]), sided, quad)
    U = boundary_fn(plan.offsets_used)
    B, k, n = U.shape
    Y = np.empty((B, k))
    for i in range(k):
        uniq, counts = np.unique(plan.draws[i], return_counts=True)
        UU = np.repeat(U[:, i, :], uniq.size, axis=0)
        RR = np.tile(uniq, B)
        vals = boundary_cdf_equal(UU, RR, sided, quad).reshape(B, uniq.size)
        Y[:, i] = vals @ (counts / counts.sum())
    return np.clip(Y @ plan.ell_used, 0.0, 1.0)


def survival_loess(b, family: StatFamily, trunc: TruncationScheme, corr: CorrelationModel,
                   spec: LoessSpec = LoessSpec(), sided=Sidedness.TWO, seed: int = 0,
                   quad: QuadratureSpec = DEFAULT_QUAD):
    """``P(S <= b)`` by the local-regression surrogate.

    For each of ``m`` equispaced thresholds in ``[b - eps, b + eps]``, the
    equal-correlation CDF is averaged over ``n_draws`` sampled off-diagonal
    correlations; a tri-cube weighted local quadratic fit of these averages
    is evaluated at ``b``. The sampled correlations depend only on
    ``(corr, seed)``. When every sample is identical the regression is
    degenerate and the equal-correlation value at ``b`` is returned.
    """
    n = corr.n
    b_arr = np.atleast_1d(np.asarray(b, dtype=float))

    def boundary_fn(d):
        pts = (b_arr[:, None] + d[None, :]).reshape(-1)
        return rejection_boundary(family, trunc, n, pts).reshape(b_arr.size, d.size, n)

    vals = loess_cdf_family(boundary_fn, corr, spec, sided, seed, quad)
    return _shape_like(b, vals)


def _null_pvalues(corr: CorrelationModel, sided, n_sims: int, seed: int, chunk: int = 50_000):
    """Yield blocks of null p-values drawn under ``corr``."""
    rng = counter_rng(seed, 0x3C)
    n = corr.n
    L = None if corr.kind == "identity" else _psd_factor(corr.matrix())
    done = 0
    while done < n_sims:
        m = min(chunk, n_sims - done)
        Z = rng.standard_normal((m, n))
        if L is not None:
            Z = Z @ L.T
        yield pvalues_from_stats(Z, sided)
        done += m


def _psd_factor(S):
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(S)
        return V * np.sqrt(np.clip(w, 0.0, None))


def survival_mc(b, family: StatFamily, trunc: TruncationScheme, corr: CorrelationModel,
                sided=Sidedness.TWO, n_sims: int = 100_000, seed: int = 0):
    """Monte-Carlo ``P(S <= b)``; returns ``(estimate, std_error)`` arrays or floats."""
    b_arr = np.atleast_1d(np.asarray(b, dtype=float))
    le = np.zeros(b_arr.size)
    for P in _null_pvalues(corr, sided, n_sims, seed):
        S = compute_statistics(P, family, trunc)
        le += np.sum(S[:, None] <= b_arr[None, :], axis=0)
    p = le / n_sims
    se = np.sqrt(p * (1.0 - p) / n_sims)
    if np.ndim(b) == 0:
        return float(p[0]), float(se[0])
    return p, se


def boundary_cdf_mc(U, corr: CorrelationModel, sided=Sidedness.TWO,
                    n_sims: int = 100_000, seed: int = 0) -> np.ndarray:
    """Monte-Carlo crossing probabilities for boundary rows ``U``."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    hits = np.zeros(U.shape[0])
    for P in _null_pvalues(corr, sided, n_sims, seed):
        Ps = np.sort(P, axis=1)
        hits += np.array([np.count_nonzero(np.all(Ps > u, axis=1)) for u in U])
    return hits / n_sims


# ---------------------------------------------------------------------------
# dispatch

METHODS = ("auto", "iid", "equal", "wam", "loess", "mc")


def resolve_method(method: str, corr: CorrelationModel) -> str:
    """Engine chosen for ``method`` (``auto`` picks by correlation kind)."""
    if method not in METHODS:
        raise DomainError(f"unknown method {method!r}")
    if method != "auto":
        return method
    return {"identity": "iid", "equal": "equal", "toeplitz": "wam",
            "general": "loess"}[corr.kind]


@dataclass(frozen=True)
class Engine:
    """A resolved engine with its settings, usable for statistics and raw boundaries.

    Parameters
    ----------
    corr : CorrelationModel
    method : str
        One of ``auto``, ``iid``, ``equal``, ``wam``, ``loess``, ``mc``.
    sided : Sidedness
    seed : int
        Seed for the loess draws and the mc engine.
    quad : QuadratureSpec
    loess : LoessSpec
    wam_alpha : float
    n_sims : int
        Replicates for the mc engine.
    """

    corr: CorrelationModel
    method: str = "auto"
    sided: Sidedness = Sidedness.TWO
    seed: int = 0
    quad: QuadratureSpec = DEFAULT_QUAD
    loess: LoessSpec = LoessSpec()
    wam_alpha: float = 0.5
    n_sims: int = 100_000

    def __post_init__(self):
        object.__setattr__(self, "sided", Sidedness.parse(self.sided))
        object.__setattr__(self, "method", resolve_method(self.method, self.corr))
        if self.method == "equal" and self.corr.kind not in ("equal", "identity"):
            raise UnsupportedModelError("the equal engine needs an equal-correlation model")

    @property
    def n(self) -> int:
        return self.corr.n

    def _rho(self):
        return self.corr.rho if self.corr.kind == "equal" else 0.0

    def cdf(self, b, family: StatFamily, trunc: TruncationScheme):
        """``P(S <= b)`` for one entry; ``b`` scalar or 1-D."""
        m = self.method
        if m == "iid":
            return survival_iid(b, family, trunc, self.n)
        if m == "equal":
            return survival_equal_corr(b, family, trunc, self.n, self._rho(), self.sided, self.quad)
        if m == "wam":
            return survival_wam(b, family, trunc, self.corr, self.wam_alpha, self.sided, self.quad)
        if m == "loess":
            return survival_loess(b, family, trunc, self.corr, self.loess, self.sided,
                                  self.seed, self.quad)
        est, _ = survival_mc(b, family, trunc, self.corr, self.sided, self.n_sims, self.seed)
        return est

    def boundary_cdf(self, U) -> np.ndarray:
        """Crossing probabilities ``P(P_(i) > u_i for all i)`` for boundary rows."""
        U = np.atleast_2d(np.asarray(U, dtype=float))
        m = self.method
        if m == "iid":
            return cross_prob_batch(U)
        if m == "equal":
            return boundary_cdf_equal(U, self._rho(), self.sided, self.quad)
        if m == "wam":
            return boundary_cdf_wam(U, self.corr, self.wam_alpha, self.sided, self.quad)
        if m == "loess":
            return boundary_cdf_loess(U, self.corr, self.loess, self.sided, self.seed, self.quad)
        return boundary_cdf_mc(U, self.corr, self.sided, self.n_sims, self.seed)

    def cdf_multi(self, bs, entries) -> np.ndarray:
        """``P(S_j <= b_j)`` for several entries at once (one threshold each)."""
        bs = np.asarray(bs, dtype=float)
        if self.method in ("iid", "equal", "wam"):
            U = np.vstack([rejection_boundary(f, t, self.n, float(b))
                           for b, (f, t) in zip(bs, entries)])
            return self.boundary_cdf(U)
        return np.array([self.cdf(float(b), f, t) for b, (f, t) in zip(bs, entries)])


def survival(b, family: StatFamily, trunc: TruncationScheme, corr: CorrelationModel,
             method: str = "auto", sided=Sidedness.TWO, seed: int = 0, **kwargs):
    """``P(S <= b)`` with the selected engine."""
    return Engine(corr, method, sided, seed, **kwargs).cdf(b, family, trunc)


def pvalue(observed: GofResult, corr: CorrelationModel, method: str = "auto",
           sided=Sidedness.TWO, seed: int = 0, **kwargs) -> float:
    """p-value ``1 - P(S <= s)`` of an observed statistic.

    Parameters
    ----------
    observed : GofResult
    corr : CorrelationModel
        Must have ``corr.n == observed.n``.
    method : {"auto", "iid", "equal", "wam", "loess", "mc"}
        ``auto`` maps identity to iid, equal to the exact engine, Toeplitz to
        wam and general matrices to loess.
    sided : Sidedness
        How the p-values were derived from the statistics.
    seed : int
        Used by the loess and mc engines.
    **kwargs
        Forwarded to :class:`Engine` (``quad``, ``loess``, ``wam_alpha``,
        ``n_sims``).
    """
    if corr.n != observed.n:
        raise DimensionMismatchError(
            f"correlation model has n={corr.n} but the statistic used n={observed.n}")
    eng = Engine(corr, method, sided, seed, **kwargs)
    return float(np.clip(1.0 - eng.cdf(observed.statistic, observed.family,
                                       observed.truncation), 0.0, 1.0))
