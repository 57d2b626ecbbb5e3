"""Linear transformations of correlated Gaussian statistics.

For ``T ~ N(mu, Sigma)`` with unit variances:

* DT (de-correlation): ``U T`` where ``Sigma = Q Q'`` (Cholesky) and
  ``U = Q^{-1}``; the output is white.
* IT (innovated): ``D Sigma^{-1} T`` with ``D`` rescaling to unit variances.
* banded: interpolates between the two by truncating the expansion
  ``Sigma^{-1} = U'U`` to ``b_n`` terms per row, then rescaling.

All outputs have unit variances, so transformed means are directly SNRs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack, solve_triangular

from .dependence import CorrelationModel
from .errors import DimensionMismatchError, DomainError, SingularMatrixError

#: Relative pivot tolerance of the Cholesky factorization.
PIVOT_TOL = 1e-12


def cholesky_lower(S) -> np.ndarray:
    """Lower Cholesky factor ``Q`` of ``S = Q Q'`` with a pivot check.

    Raises
    ------
    SingularMatrixError
        When a pivot is nonpositive or below ``PIVOT_TOL`` times the largest
        diagonal entry; ``.pivot`` holds its zero-based index.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionMismatchError("matrix must be square")
    scale = float(np.max(np.diag(S))) if S.size else 0.0
    if not scale > 0:
        raise SingularMatrixError("matrix has no positive diagonal entry", pivot=0)
    Q, info = lapack.dpotrf(S, lower=1, clean=1)
    if info > 0:
        k = info - 1
        raise SingularMatrixError(f"matrix is not positive definite at pivot {k}", pivot=k)
    if info < 0:
        raise DomainError("invalid matrix passed to the Cholesky factorization")
    piv = np.diag(Q) ** 2
    small = np.flatnonzero(piv < PIVOT_TOL * scale)
    if small.size:
        k = int(small[0])
        raise SingularMatrixError(
            f"matrix is numerically singular at pivot {k} "
            f"(pivot {piv[k]:.3g} below {PIVOT_TOL:g} x max diagonal)", pivot=k)
    return Q


def _as_matrix(sigma) -> np.ndarray:
    if isinstance(sigma, CorrelationModel):
        return sigma.matrix()
    return np.asarray(sigma, dtype=float)


@dataclass(frozen=True)
class GaussianStatVector:
    """Statistics ``t ~ N(mu, sigma)`` with a unit-diagonal ``sigma``.

    Parameters
    ----------
    t : array_like, shape (n,)
        Observed statistics; pass zeros when only ``mu`` matters.
    sigma : CorrelationModel or array_like
        Correlation matrix, stored as a general model.
    mu : array_like, optional
        Known or assumed mean.
    """

    t: np.ndarray = field(repr=False)
    sigma: CorrelationModel = field(repr=False)
    mu: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).reshape(-1)
        S = _as_matrix(self.sigma)
        if S.shape != (t.size, t.size):
            raise DimensionMismatchError(
                f"t has length {t.size} but sigma has shape {S.shape}")
        sigma = self.sigma if isinstance(self.sigma, CorrelationModel) \
            and self.sigma.kind == "general" else CorrelationModel.general(S)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "sigma", sigma)
        if self.mu is not None:
            mu = np.asarray(self.mu, dtype=float).reshape(-1)
            if mu.size != t.size:
                raise DimensionMismatchError("mu and t differ in length")
            object.__setattr__(self, "mu", mu)

    @classmethod
    def from_mean(cls, mu, sigma) -> "GaussianStatVector":
        """Vector carrying only a mean (``t`` set to zeros)."""
        mu = np.asarray(mu, dtype=float).reshape(-1)
        return cls(np.zeros_like(mu), sigma, mu)

    @property
    def n(self) -> int:
        return int(self.t.size)

    def apply(self, V, out_sigma) -> "GaussianStatVector":
        """Image under the matrix ``V`` with the given output correlation."""
        mu = None if self.mu is None else V @ self.mu
        return GaussianStatVector(V @ self.t, CorrelationModel.general(out_sigma, check=False),
                                  mu)


@dataclass(frozen=True)
class TransformKind:
    """Transformation selector: ``none``, ``dt``, ``it`` or ``banded`` with ``b_n``."""

    kind: str
    bandwidth: int | None = None

    def __post_init__(self):
        if self.kind not in ("none", "dt", "it", "banded"):
            raise DomainError(f"unknown transform {self.kind!r}")
        if self.kind == "banded" and (self.bandwidth is None or self.bandwidth < 1):
            raise DomainError("banded transform needs a bandwidth >= 1")

    @classmethod
    def parse(cls, text: str) -> "TransformKind":
        """Parse ``none``, ``dt``, ``it`` or ``banded:<b>``."""
        text = text.strip().lower()
        if text.startswith("banded"):
            _, _, b = text.partition(":")
            try:
                return cls("banded", int(b))
            except ValueError:
                raise DomainError(f"bad banded transform {text!r}") from None
        return cls(text)

    @property
    def label(self) -> str:
        return f"banded:{self.bandwidth}" if self.kind == "banded" else self.kind


def _inverse_factor(S) -> np.ndarray:
    Q = cholesky_lower(S)
    return solve_triangular(Q, np.eye(S.shape[0]), lower=True)


def decorrelation_matrix(sigma, *, reverse: bool = False) -> np.ndarray:
    """``U = Q^{-1}`` with ``Sigma = Q Q'``.

    With ``reverse=True`` the factorization runs over the reversed index
    order, which makes ``Q`` upper triangular (``Sigma = R R'``). The two
    choices give different, equally white, outputs.
    """
    S = _as_matrix(sigma)
    if not reverse:
        return _inverse_factor(S)
    p = np.arange(S.shape[0])[::-1]
    return _inverse_factor(S[np.ix_(p, p)])[np.ix_(p, p)]


def innovation_matrix(sigma) -> np.ndarray:
    """``D Sigma^{-1}`` with ``D = diag(1 / sqrt(diag(Sigma^{-1})))``."""
    U = _inverse_factor(_as_matrix(sigma))
    prec = U.T @ U
    d = 1.0 / np.sqrt(np.diag(prec))
    return d[:, None] * prec


def banded_matrix(sigma, b_n: int) -> np.ndarray:
    """Row-rescaled partial-sum transform ``V_{b_n}``.

    Row ``j`` before rescaling is ``sum_{k=j}^{j+b_n-1} U[k, j] U[k, :]``;
    since ``V Q`` has row ``j`` equal to ``U[j:j+b_n, j]`` placed at columns
    ``j..j+b_n-1``, its output variance is ``sum_k U[k, j]^2``.
    """
    S = _as_matrix(sigma)
    n = S.shape[0]
    if not 1 <= int(b_n) <= n:
        raise DomainError(f"bandwidth must lie in [1, {n}], got {b_n}")
    U = _inverse_factor(S)
    V = np.empty((n, n))
    for j in range(n):
        w = U[j:j + b_n, j]
        V[j] = (w @ U[j:j + b_n]) / np.sqrt(w @ w)
    return V


def transform_matrix(sigma, kind: TransformKind) -> np.ndarray:
    """Matrix of the selected transformation."""
    if kind.kind == "none":
        return np.eye(_as_matrix(sigma).shape[0])
    if kind.kind == "dt":
        return decorrelation_matrix(sigma)
    if kind.kind == "it":
        return innovation_matrix(sigma)
    return banded_matrix(sigma, kind.bandwidth)


def _output_corr(V, S) -> np.ndarray:
    C = V @ S @ V.T
    C = 0.5 * (C + C.T)
    np.fill_diagonal(C, 1.0)
    return C


def decorrelate(v: GaussianStatVector, *, reverse: bool = False) -> GaussianStatVector:
    """DT: ``U t`` with ``U`` the inverse Cholesky factor; output correlation ``I``.

    Examples
    --------
    >>> import numpy as np
    >>> out = decorrelate(GaussianStatVector([1.0, 2.0], np.eye(2)))
    >>> out.t.tolist()
    [1.0, 2.0]
    """
    U = decorrelation_matrix(v.sigma, reverse=reverse)
    return v.apply(U, np.eye(v.n))


def innovate(v: GaussianStatVector) -> GaussianStatVector:
    """IT: ``D Sigma^{-1} t``; output correlation ``D Sigma^{-1} D``."""
    S = v.sigma.matrix()
    V = innovation_matrix(S)
    return v.apply(V, _output_corr(V, S))


def banded_transform(v: GaussianStatVector, b_n: int) -> GaussianStatVector:
    """Banded transformation; ``b_n = 1`` is a row-rescaled DT, ``b_n = n`` the IT."""
    S = v.sigma.matrix()
    V = banded_matrix(S, b_n)
    return v.apply(V, _output_corr(V, S))


def transform(v: GaussianStatVector, kind: TransformKind) -> GaussianStatVector:
    """Apply the selected transformation."""
    if kind.kind == "none":
        return v
    if kind.kind == "dt":
        return decorrelate(v)
    if kind.kind == "it":
        return innovate(v)
    return banded_transform(v, kind.bandwidth)


def snr_report(mu, sigma, kind: TransformKind):
    """Transformed mean vector, its largest absolute entry and that entry's index.

    Returns
    -------
    snr : ndarray, shape (n,)
    max_snr : float
    argmax : int
        Zero-based position of ``max_snr``.
    """
    mu = np.asarray(mu, dtype=float).reshape(-1)
    S = _as_matrix(sigma)
    if S.shape != (mu.size, mu.size):
        raise DimensionMismatchError("mu and sigma dimensions disagree")
    snr = transform_matrix(S, kind) @ mu
    j = int(np.argmax(np.abs(snr)))
    return snr, float(abs(snr[j])), j


def bivariate_snrs(a: float, b: float, rho: float):
    """Means of the unit-variance statistics for two standardized covariates.

    With effects ``(a, b)`` and covariate correlation ``rho``, returns the
    marginal statistic's mean for the second covariate ``rho a + b``, the
    joint statistic's mean ``b sqrt(1 - rho^2)`` and the summed statistic's
    mean ``(a + b) sqrt((1 + rho) / 2)``.

    Examples
    --------
    >>> [round(v, 12) for v in bivariate_snrs(-1.0, 1.0, 0.5)]
    [0.5, 0.866025403784, 0.0]
    """
    if not -1.0 < rho < 1.0:
        raise DomainError("rho must lie in (-1, 1)")
    return (float(rho * a + b), float(b * np.sqrt(1.0 - rho * rho)),
            float((a + b) * np.sqrt((1.0 + rho) / 2.0)))


def detection_boundary(alpha):
    """Sparse-signal detection boundary ``rho(alpha)`` for ``alpha in (1/2, 1)``.

    ``alpha - 1/2`` up to ``3/4`` and ``(1 - sqrt(1 - alpha))^2`` beyond.
    """
    a = np.asarray(alpha, dtype=float)
    if np.any(~((a > 0.5) & (a < 1.0))):
        raise DomainError("alpha must lie in (1/2, 1)")
    out = np.where(a <= 0.75, a - 0.5, (1.0 - np.sqrt(1.0 - a)) ** 2)
    return out[()] if out.ndim == 0 else out


def detection_boundary_glm(alpha, quadratic_form):
    """Boundary for a regression coefficient: ``rho(alpha) / quadratic_form``.

    ``quadratic_form`` is the conditional variance ``X_j'(I - H)X_j`` in the
    weighted metric and must be positive.
    """
    q = np.asarray(quadratic_form, dtype=float)
    if np.any(~(q > 0)):
        raise DomainError("quadratic form must be positive")
    out = detection_boundary(alpha) / q
    return out[()] if np.ndim(out) == 0 else out
