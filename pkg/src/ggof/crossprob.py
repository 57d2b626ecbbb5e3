"""Crossing probabilities of iid uniform order statistics.

Every null distribution in this package reduces to

    P(U_(i) > c_i for all i),

where U_(1) <= ... <= U_(n) are order statistics of n iid Uniform(0, 1)
variables and ``c`` is a boundary vector. :func:`cross_prob_iid` evaluates it
exactly with an O(n * active range) Poisson-embedding recursion run in log
space; :func:`cross_prob_mc` is an independent Monte-Carlo oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import log_crossprob_rows
from .errors import DomainError

#: Probabilities below this are reported as zero and flagged.
UNDERFLOW = 1e-300
_LOG_UNDERFLOW = np.log(UNDERFLOW)


@dataclass(frozen=True)
class BoundaryVector:
    """Lower boundaries for the ordered uniforms.

    Parameters
    ----------
    c : array_like
        Boundary values, one per rank, each in [0, 1]. Entries that are 0
        impose no constraint.
    """

    c: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.c, dtype=float, copy=True).reshape(-1)
        if c.size == 0:
            raise DomainError("boundary must have at least one entry")
        if np.isnan(c).any():
            raise DomainError("boundary contains NaN")
        if (c < 0).any():
            raise DomainError("boundary entries must be nonnegative")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return int(self.c.size)

    @property
    def active_range(self) -> tuple[int, int] | None:
        """One-based ``(k0, k1)`` span of nonzero entries, or None if all zero."""
        nz = np.flatnonzero(self.c > 0)
        if nz.size == 0:
            return None
        return int(nz[0]) + 1, int(nz[-1]) + 1

    def monotonized(self) -> "BoundaryVector":
        """Running maximum of the boundary; leaves the probability unchanged."""
        return BoundaryVector(np.maximum.accumulate(self.c))


@dataclass(frozen=True)
class CrossProbResult:
    """Crossing probability with its logarithm and an underflow flag."""

    prob: float
    log_prob: float
    underflow: bool


def _as_matrix(bounds) -> np.ndarray:
    if isinstance(bounds, BoundaryVector):
        return bounds.c[None, :]
    C = np.asarray(bounds, dtype=float)
    if C.ndim == 1:
        C = C[None, :]
    if C.ndim != 2 or C.shape[1] == 0:
        raise DomainError("boundaries must be a vector or a 2-D array of rows")
    if np.isnan(C).any():
        raise DomainError("boundary contains NaN")
    return np.ascontiguousarray(C)


def cross_prob_log_batch(bounds) -> np.ndarray:
    """Natural log of the crossing probability for each row of ``bounds``."""
    C = _as_matrix(bounds)
    return log_crossprob_rows(C)


def cross_prob_batch(bounds, *, return_flags: bool = False):
    """Crossing probabilities for each row of a 2-D boundary array.

    Parameters
    ----------
    bounds : array_like, shape (B, n)
        One boundary per row.
    return_flags : bool
        Also return a boolean array marking rows that underflowed.

    Returns
    -------
    prob : ndarray, shape (B,)
    flags : ndarray of bool, shape (B,)
        Only when ``return_flags`` is true.
    """
    logp = cross_prob_log_batch(bounds)
    under = (logp < _LOG_UNDERFLOW) & np.isfinite(logp)
    prob = np.where(logp < _LOG_UNDERFLOW, 0.0, np.exp(np.minimum(logp, 0.0)))
    if return_flags:
        return prob, under
    return prob


def cross_prob_iid(bounds, *, full_output: bool = False):
    """Exact ``P(U_(i) > c_i for all i)`` for iid uniform order statistics.

    Parameters
    ----------
    bounds : BoundaryVector or array_like
        Boundary vector of length n. Entries >= 1 make the event impossible.
    full_output : bool
        Return a :class:`CrossProbResult` instead of a float.

    Examples
    --------
    >>> round(cross_prob_iid([0.2, 0, 0, 0, 0]), 12)
    0.32768
    """
    C = _as_matrix(bounds)
    if C.shape[0] != 1:
        raise DomainError("cross_prob_iid expects a single boundary")
    logp = float(log_crossprob_rows(C)[0])
    under = bool(np.isfinite(logp) and logp < _LOG_UNDERFLOW)
    prob = 0.0 if logp < _LOG_UNDERFLOW else float(np.exp(min(logp, 0.0)))
    if full_output:
        return CrossProbResult(prob=prob, log_prob=logp, underflow=under)
    return prob


def counter_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, *keys)``.

    Distinct keys give statistically independent streams, so replicates can
    be generated in any order or in parallel with identical results.
    """
    ss = np.random.SeedSequence([int(seed), *[int(k) for k in keys]])
    return np.random.Generator(np.random.Philox(ss))


def cross_prob_mc(bounds, n_sims: int, seed: int, *, chunk: int = 100_000):
    """Monte-Carlo estimate of the crossing probability.

    Returns
    -------
    estimate : float
    std_error : float
        Binomial standard error ``sqrt(p (1 - p) / n_sims)``.
    """
    if n_sims < 1:
        raise DomainError("n_sims must be positive")
    c = _as_matrix(bounds)[0]
    n = c.size
    rng = counter_rng(seed)
    hits = 0
    done = 0
    while done < n_sims:
        m = min(chunk, n_sims - done)
        U = np.sort(rng.random((m, n)), axis=1)
        hits += int(np.count_nonzero(np.all(U > c, axis=1)))
        done += m
    p = hits / n_sims
    return p, float(np.sqrt(p * (1.0 - p) / n_sims))
