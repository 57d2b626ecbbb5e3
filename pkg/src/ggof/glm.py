"""gGOF input statistics from linear and logistic regression.

For ``g(E Y) = X beta + Z gamma`` with inquiry covariates ``X`` (N x n) and
controls ``Z`` (N x m), testing ``beta = 0``:

* the null fit gives ``mu0`` and working weights ``w`` (``1/sigma^2`` or
  ``mu0 (1 - mu0)``);
* with ``Xt = W^{1/2} X``, ``Ht`` the projection onto ``W^{1/2} Z`` and
  ``M = Xt'(I - Ht)Xt``, the score is ``s = X'(Y - mu0) / a`` where
  ``a = sigma^2`` (linear) or 1 (logistic);
* joint statistics ``T_J = Lambda M^{-1} s`` with
  ``Lambda = diag(M^{-1})^{-1/2}``, correlation ``Lambda M^{-1} Lambda``;
* marginal statistics ``T_M = C s`` with ``C = diag(M)^{-1/2}``,
  correlation ``C M C``.

``T_M`` is exactly the innovated transform of ``T_J``. For the linear model
``T_J`` are the least-squares z-scores; for the logistic model it is the
one-step estimator from the null fit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, qr
from scipy.special import expit

from .errors import ConvergenceError, DimensionMismatchError, DomainError, SingularMatrixError
from .transforms import decorrelation_matrix

IRLS_TOL = 1e-10
IRLS_MAXIT = 100
# relative size below which a QR diagonal marks a dependent column
_RANK_TOL = 1e-10


@dataclass(frozen=True)
class GlmDataset:
    """Regression data.

    Parameters
    ----------
    y : array_like, shape (N,)
    x : array_like, shape (N, n)
        Inquiry covariates.
    z : array_like, shape (N, m), optional
        Controls; include a column of ones for an intercept. ``None`` or an
        empty matrix means no controls.
    model : {"linear", "logistic"}
    sigma : float or "estimate"
        Error standard deviation of the linear model; ``"estimate"`` uses the
        residual standard error of the null fit with ``N - m`` degrees of
        freedom.
    """

    y: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    z: np.ndarray | None = field(default=None, repr=False)
    model: str = "linear"
    sigma: float | str = 1.0

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] != y.size:
            raise DimensionMismatchError(
                f"x has {x.shape[0] if x.ndim else 0} rows but y has length {y.size}")
        z = self.z
        if z is None:
            z = np.empty((y.size, 0))
        z = np.asarray(z, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        if z.shape[0] != y.size:
            raise DimensionMismatchError(f"z has {z.shape[0]} rows but y has length {y.size}")
        if self.model not in ("linear", "logistic"):
            raise DomainError(f"unknown model {self.model!r}")
        if self.model == "logistic" and not np.all((y == 0) | (y == 1)):
            raise DomainError("logistic responses must be 0 or 1")
        if self.model == "linear" and self.sigma != "estimate":
            if not float(self.sigma) > 0:
                raise DomainError("sigma must be positive or 'estimate'")
        for name, a in (("y", y), ("x", x), ("z", z)):
            if not np.all(np.isfinite(a)):
                raise DomainError(f"{name} contains non-finite values")
        zero = np.flatnonzero(~np.any(x != 0, axis=0))
        if zero.size:
            raise DomainError(f"x column {int(zero[0])} is identically zero")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)

    @property
    def N(self) -> int:
        return int(self.y.size)

    @property
    def n(self) -> int:
        return int(self.x.shape[1])

    @property
    def m(self) -> int:
        return int(self.z.shape[1])


@dataclass(frozen=True)
class FitOutput:
    """Statistics and their correlation matrices; unset parts are None."""

    t_j: np.ndarray | None = None
    t_m: np.ndarray | None = None
    sigma_tj: np.ndarray | None = None
    sigma_tm: np.ndarray | None = None
    lambda_diag: np.ndarray | None = None
    c_diag: np.ndarray | None = None
    sigma_hat: float | None = None


def _orthobasis(A, what: str) -> np.ndarray:
    """Orthonormal basis of the column space of ``A``; raises on dependence."""
    if A.shape[1] == 0:
        return A
    Q, R, piv = qr(A, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    if d[0] == 0 or d[-1] <= _RANK_TOL * d[0]:
        bad = int(piv[np.flatnonzero(d <= _RANK_TOL * max(d[0], 1e-300))[0]])
        raise SingularMatrixError(f"{what} column {bad} is linearly dependent on the others",
                                  pivot=bad)
    return Q


def _residualize(Q, A):
    if Q.shape[1] == 0:
        return A.copy()
    return A - Q @ (Q.T @ A)


def _logistic_null(y, Z):
    N, m = Z.shape
    if m == 0:
        return np.full(N, 0.5)
    _orthobasis(Z, "z")
    gamma = np.zeros(m)
    for _ in range(IRLS_MAXIT):
        eta = Z @ gamma
        mu = expit(eta)
        w = mu * (1.0 - mu)
        if np.any(w < 1e-12):
            raise ConvergenceError("logistic null fit diverges (separation in z)")
        sw = np.sqrt(w)
        work = eta + (y - mu) / w
        new, *_ = np.linalg.lstsq(sw[:, None] * Z, sw * work, rcond=None)
        step = np.max(np.abs(new - gamma))
        gamma = new
        if step < IRLS_TOL * (1.0 + np.max(np.abs(gamma))):
            return expit(Z @ gamma)
    raise ConvergenceError(f"logistic null fit did not converge in {IRLS_MAXIT} iterations")


def null_fit(ds: GlmDataset):
    """Fitted means and working weights under ``beta = 0``.

    Returns
    -------
    mu0 : ndarray, shape (N,)
    w : ndarray, shape (N,)
        ``1/sigma^2`` (linear) or ``mu0 (1 - mu0)`` (logistic).
    """
    mu0, w, _ = _null(ds)
    return mu0, w


def _null(ds: GlmDataset):
    if ds.model == "logistic":
        mu0 = _logistic_null(ds.y, ds.z)
        return mu0, mu0 * (1.0 - mu0), None
    Q = _orthobasis(ds.z, "z")
    mu0 = ds.y - _residualize(Q, ds.y[:, None])[:, 0]
    if ds.sigma == "estimate":
        dof = ds.N - ds.m
        if dof < 1:
            raise DomainError("no residual degrees of freedom to estimate sigma")
        r = ds.y - mu0
        sigma = float(np.sqrt(r @ r / dof))
        if not sigma > 0:
            raise DomainError("residual standard error is zero")
    else:
        sigma = float(ds.sigma)
    return mu0, np.full(ds.N, 1.0 / sigma ** 2), sigma


def _core(ds: GlmDataset):
    """Score vector, information matrix ``M`` and the estimated sigma."""
    mu0, w, sigma = _null(ds)
    sw = np.sqrt(w)
    Q = _orthobasis(sw[:, None] * ds.z, "z")
    Xr = _residualize(Q, sw[:, None] * ds.x)
    _orthobasis(Xr, "x")
    M = Xr.T @ Xr
    a = sigma ** 2 if ds.model == "linear" else 1.0
    s = ds.x.T @ (ds.y - mu0) / a
    return s, 0.5 * (M + M.T), sigma


def _unit(C):
    C = 0.5 * (C + C.T)
    np.fill_diagonal(C, 1.0)
    return C


def _joint(s, M):
    try:
        fac = cho_factor(M, lower=True)
    except np.linalg.LinAlgError:
        raise SingularMatrixError("information matrix of x is singular") from None
    Minv = cho_solve(fac, np.eye(M.shape[0]))
    lam = 1.0 / np.sqrt(np.diag(Minv))
    t_j = lam * cho_solve(fac, s)
    return t_j, _unit(lam[:, None] * Minv * lam[None, :]), lam


def _marginal(s, M):
    dM = np.diag(M)
    bad = np.flatnonzero(~(dM > 0))
    if bad.size:
        raise SingularMatrixError(f"x column {int(bad[0])} has zero conditional variance",
                                  pivot=int(bad[0]))
    c = 1.0 / np.sqrt(dM)
    return c * s, _unit(c[:, None] * M * c[None, :]), c


def joint_statistics(ds: GlmDataset) -> FitOutput:
    """Joint-fit statistics ``T_J`` and their correlation matrix.

    Examples
    --------
    >>> import numpy as np
    >>> x = np.eye(4)[:, :2]
    >>> out = joint_statistics(GlmDataset([1.0, 2.0, 0.0, 0.0], x))
    >>> out.t_j.tolist()
    [1.0, 2.0]
    """
    s, M, sigma = _core(ds)
    t_j, S, lam = _joint(s, M)
    return FitOutput(t_j=t_j, sigma_tj=S, lambda_diag=lam, sigma_hat=sigma)


def marginal_statistics(ds: GlmDataset) -> FitOutput:
    """Marginal-fit statistics ``T_M`` and their correlation matrix."""
    s, M, sigma = _core(ds)
    t_m, S, c = _marginal(s, M)
    return FitOutput(t_m=t_m, sigma_tm=S, c_diag=c, sigma_hat=sigma)


def fit_statistics(ds: GlmDataset) -> FitOutput:
    """Both joint and marginal statistics from one null fit."""
    s, M, sigma = _core(ds)
    t_j, Sj, lam = _joint(s, M)
    t_m, Sm, c = _marginal(s, M)
    return FitOutput(t_j, t_m, Sj, Sm, lam, c, sigma)


def decorrelated_statistics(ds: GlmDataset) -> np.ndarray:
    """DT of the marginal statistics, ``U_M T_M`` with ``U_M Sigma_TM U_M' = I``.

    The same vector is obtained from the joint statistics by decorrelating
    with the factor taken over the reversed index order.
    """
    out = marginal_statistics(ds)
    return decorrelation_matrix(out.sigma_tm) @ out.t_m
