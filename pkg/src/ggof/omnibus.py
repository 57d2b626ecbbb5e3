"""The digGOF omnibus test.

Each entry of a grid of (kernel, truncation) pairs gives a gGOF statistic
and its p-value; the omnibus statistic ``s_o`` is the smallest of them.
Its null distribution is again a crossing probability: ``s_o > s`` exactly
when every entry's statistic stays below its ``1 - s`` quantile, that is,
when every ordered p-value stays above the pointwise largest of the entry
boundaries at those quantiles.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dependence import (
    CorrelationModel,
    Engine,
    Sidedness,
    _null_pvalues,
    loess_cdf_family,
)
from .errors import ApproximationWarning, DomainError
from .families import (
    StatFamily,
    TruncationScheme,
    compute_statistic,
    compute_statistics,
    rejection_boundary,
    statistic_range,
)

Entry = tuple[StatFamily, TruncationScheme]

_PROB_TOL = 1e-8
# relative accuracy of small tail probabilities and the double-precision floor
_REL_TOL = 1e-4
_TAIL_FLOOR = 1e-15
_MAX_IT = 200


@dataclass(frozen=True)
class AdaptationGrid:
    """Grid of (family, truncation) pairs over which the omnibus adapts."""

    entries: tuple
    n: int

    def __post_init__(self):
        entries = tuple((f, t) for f, t in self.entries)
        if not entries:
            raise DomainError("adaptation grid must not be empty")
        for _, t in entries:
            t.validate(self.n)
        object.__setattr__(self, "entries", entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @classmethod
    def default(cls, n: int, s_values: Sequence[float] = (-1.0, 0.0, 1.0, 2.0),
                k0_values: Sequence[int] = (1, 2),
                k1_values: Sequence[int] | None = None) -> "AdaptationGrid":
        """Phi-divergence kernels crossed with index truncations.

        ``k1_values`` defaults to ``(ceil(n/2), n)``; duplicates are dropped.
        """
        if k1_values is None:
            k1_values = (math.ceil(n / 2), n)
        entries = []
        for s in s_values:
            for k0 in k0_values:
                for k1 in k1_values:
                    if k0 <= k1 <= n:
                        e = (StatFamily.phi(s), TruncationScheme(k0, k1))
                        if e not in entries:
                            entries.append(e)
        return cls(tuple(entries), n)

    def to_list(self) -> list:
        return [{"family": f.to_dict(), "truncation": t.to_dict()} for f, t in self.entries]

    @classmethod
    def from_list(cls, items: list, n: int) -> "AdaptationGrid":
        entries = []
        for it in items:
            fam = it["family"]
            f = StatFamily(fam["kind"], fam.get("param", 0.0)) if isinstance(fam, dict) \
                else StatFamily.from_label(fam)
            t = TruncationScheme(**it["truncation"]) if "truncation" in it else \
                TruncationScheme(it.get("k0", 1), it.get("k1", n),
                                 it.get("alpha0", 0.0), it.get("alpha1", 1.0))
            entries.append((f, t))
        return cls(tuple(entries), n)


@dataclass(frozen=True)
class OmnibusResult:
    """Minimum p-value over a grid with its provenance.

    Attributes
    ----------
    s_o : float
        Smallest per-entry p-value.
    chosen_entry : int
        Grid index attaining ``s_o`` (lowest index on ties).
    per_entry_pvalues : ndarray
    statistics : ndarray
        Observed statistic of every entry.
    """

    s_o: float
    chosen_entry: int
    per_entry_pvalues: np.ndarray
    statistics: np.ndarray


def _as_engine(corr_or_engine, method="auto", sided=Sidedness.TWO, seed=0, **kw) -> Engine:
    if isinstance(corr_or_engine, Engine):
        return corr_or_engine
    return Engine(corr_or_engine, method, sided, seed, **kw)


def diggof_statistic(pvalues, grid: AdaptationGrid, corr, method: str = "auto",
                     sided=Sidedness.TWO, seed: int = 0, **engine_kw) -> OmnibusResult:
    """Per-entry statistics and p-values, and their minimum ``s_o``.

    Parameters
    ----------
    pvalues : array_like, shape (n,)
    grid : AdaptationGrid
    corr : CorrelationModel or Engine
        An :class:`Engine` carries its own method, sidedness and seed.
    """
    eng = _as_engine(corr, method, sided, seed, **engine_kw)
    P = np.asarray(pvalues, dtype=float).reshape(-1)
    if P.size != grid.n or eng.n != grid.n:
        raise DomainError("p-values, grid and correlation model must share n")
    stats = np.array([compute_statistic(P, f, t).statistic for f, t in grid])
    cdf = eng.cdf_multi(stats, grid.entries)
    pv = np.clip(1.0 - np.asarray(cdf, dtype=float), 0.0, 1.0)
    j = int(np.argmin(pv))
    return OmnibusResult(float(pv[j]), j, pv, stats)


def _solve_thresholds(eng: Engine, entries: list, target: float, starts, start_cdf,
                      tol: float = _PROB_TOL):
    """Lockstep Illinois root finding of ``G_j(b) = target`` for many entries.

    ``starts``/``start_cdf`` give one known point per entry. Returns the
    thresholds and a mask of entries whose target lay inside a jump. The
    probability tolerance shrinks with the tail ``1 - target`` so that tiny
    p-values are matched in relative terms.
    """
    tol = max(min(tol, _REL_TOL * (1.0 - target)), _TAIL_FLOOR)
    K = len(entries)
    n = eng.n
    lo_lim = np.empty(K)
    hi_lim = np.empty(K)
    for k, (f, t) in enumerate(entries):
        a, b = statistic_range(f, t, n)
        lo_lim[k], hi_lim[k] = a - 1e-9, b
    x0 = np.asarray(starts, dtype=float).copy()
    g0 = np.asarray(start_cdf, dtype=float).copy()
    lo = np.where(g0 <= target, x0, np.nan)
    glo = np.where(g0 <= target, g0, np.nan)
    hi = np.where(g0 >= target, x0, np.nan)
    ghi = np.where(g0 >= target, g0, np.nan)
    done = np.abs(g0 - target) <= tol
    result = np.where(done, x0, np.nan)
    atom = np.zeros(K, dtype=bool)

    def evaluate(idx, pts):
        return np.asarray(eng.cdf_multi(pts, [entries[i] for i in idx]), dtype=float)

    # geometric expansion until each target is bracketed
    step = np.minimum(1.0, 0.25 * (hi_lim - lo_lim))
    for _ in range(60):
        need = ~done & (np.isnan(lo) | np.isnan(hi))
        if not need.any():
            break
        idx = np.flatnonzero(need)
        up = np.isnan(hi[idx])
        pts = np.where(up, np.minimum(x0[idx] + step[idx], hi_lim[idx]),
                       np.maximum(x0[idx] - step[idx], lo_lim[idx]))
        g = evaluate(idx, pts)
        for k, i in enumerate(idx):
            if abs(g[k] - target) <= tol:
                done[i], result[i] = True, pts[k]
            elif g[k] < target:
                lo[i], glo[i] = pts[k], g[k]
                if up[k] and pts[k] >= hi_lim[i]:
                    done[i], result[i], atom[i] = True, hi_lim[i], True
            else:
                hi[i], ghi[i] = pts[k], g[k]
                if not up[k] and pts[k] <= lo_lim[i]:
                    done[i], result[i], atom[i] = True, lo_lim[i], True
            x0[i] = pts[k]
        step[idx] *= 2.0

    side = np.zeros(K, dtype=int)
    flo = glo - target
    fhi = ghi - target
    for _ in range(_MAX_IT):
        active = ~done
        if not active.any():
            break
        idx = np.flatnonzero(active)
        a, b = lo[idx], hi[idx]
        fa, fb = flo[idx], fhi[idx]
        denom = fb - fa
        x = np.where(denom > 0, b - fb * (b - a) / np.where(denom > 0, denom, 1.0), 0.5 * (a + b))
        bad = ~((x > a) & (x < b))
        x = np.where(bad, 0.5 * (a + b), x)
        width = b - a
        tiny = width <= 1e-12 * (1.0 + np.abs(b))
        g = evaluate(idx, x)
        for k, i in enumerate(idx):
            if tiny[k]:
                # the target sits inside a jump of G: take the conservative end
                done[i], result[i], atom[i] = True, hi[i], True
                continue
            fx = g[k] - target
            if abs(fx) <= tol:
                done[i], result[i] = True, x[k]
            elif fx < 0:
                lo[i], flo[i] = x[k], fx
                if side[i] == -1:
                    fhi[i] *= 0.5
                side[i] = -1
            else:
                hi[i], fhi[i] = x[k], fx
                if side[i] == 1:
                    flo[i] *= 0.5
                side[i] = 1
    left = ~done
    if left.any():
        result[left] = hi[left]
        atom[left] = True
    return result, atom


def critical_threshold(entry: Entry, s_o: float, corr, sided=Sidedness.TWO,
                       method: str = "auto", seed: int = 0, tol: float = _PROB_TOL,
                       **engine_kw) -> float:
    """Threshold ``b`` with ``1 - G(b) = s_o`` for one grid entry.

    Found by bracketing and a safeguarded secant (Illinois) iteration to a
    probability tolerance ``tol``. When ``s_o`` falls inside a jump of
    ``G`` the upper end of the jump is returned (the smaller rejection
    region) and an :class:`ApproximationWarning` is issued.
    """
    if not 0.0 < s_o < 1.0:
        raise DomainError("s_o must lie in (0, 1)")
    eng = _as_engine(corr, method, sided, seed, **engine_kw)
    f, t = entry
    lo_b, hi_b = statistic_range(f, t, eng.n)
    x0 = float(np.clip(0.0, lo_b, hi_b))
    g0 = float(np.asarray(eng.cdf(x0, f, t)))
    b, atom = _solve_thresholds(eng, [entry], 1.0 - s_o, [x0], [g0], tol)
    if atom[0]:
        warnings.warn(ApproximationWarning(
            "critical_threshold: target inside a jump of the distribution; "
            "returned the conservative endpoint"), stacklevel=2)
    return float(b[0])


def omnibus_boundary(result: OmnibusResult, grid: AdaptationGrid, eng: Engine,
                     tol: float = _PROB_TOL):
    """Thresholds ``G_j^{-1}(1 - s_o)`` for every entry and the combined boundary.

    Returns
    -------
    thresholds : ndarray, shape (len(grid),)
    u_star : ndarray, shape (n,)
        Pointwise maximum of the entry boundaries at their thresholds.
    """
    target = 1.0 - result.s_o
    pv = result.per_entry_pvalues
    exact = pv == result.s_o
    thresholds = np.array(result.statistics, dtype=float)
    pending = np.flatnonzero(~exact)
    if pending.size:
        entries = [grid.entries[i] for i in pending]
        b, atom = _solve_thresholds(eng, entries, target, result.statistics[pending],
                                    1.0 - pv[pending], tol)
        thresholds[pending] = b
        if atom.any():
            warnings.warn(ApproximationWarning(
                f"omnibus: {int(atom.sum())} entry threshold(s) fell inside a jump"),
                stacklevel=2)
    u_star = _u_star(grid, thresholds, np.zeros(1))[:, 0, :][0]
    return thresholds, u_star


def _u_star(grid: AdaptationGrid, thresholds, shifts):
    """Combined boundaries for thresholds shifted by each value in ``shifts``.

    Returns shape (1, len(shifts), n).
    """
    n = grid.n
    U = np.zeros((shifts.size, n))
    for (f, t), b in zip(grid.entries, thresholds):
        U = np.maximum(U, rejection_boundary(f, t, n, b + shifts))
    return U[None, :, :]


def diggof_pvalue(result: OmnibusResult, grid: AdaptationGrid, corr, sided=Sidedness.TWO,
                  method: str = "auto", seed: int = 0, **engine_kw) -> float:
    """p-value of the omnibus statistic ``s_o``.

    ``1 - P(no ordered p-value crosses u*)`` where ``u*`` is the pointwise
    maximum over entries of their boundaries at the ``1 - s_o`` quantile,
    under the same engine used for the per-entry p-values. The loess engine
    smooths along a common shift of all entry thresholds, so that a
    singleton grid reproduces the single-test p-value.
    """
    eng = _as_engine(corr, method, sided, seed, **engine_kw)
    s_o = result.s_o
    if s_o >= 1.0:
        return 1.0
    if len(grid) == 1:
        return float(s_o)
    if eng.method == "mc":
        return _diggof_pvalue_mc(result, grid, eng)
    if s_o <= 0.0:
        return 0.0
    thresholds, u_star = omnibus_boundary(result, grid, eng)
    if eng.method == "loess":
        cdf = loess_cdf_family(lambda d: _u_star(grid, thresholds, d), eng.corr, eng.loess,
                               eng.sided, eng.seed, eng.quad)[0]
    else:
        cdf = eng.boundary_cdf(u_star)[0]
    p = 1.0 - float(cdf)
    # u* dominates the chosen entry's boundary, so the omnibus p-value cannot
    # fall below s_o; the guard absorbs rounding and the signed loess weights.
    return float(np.clip(max(p, s_o), 0.0, 1.0))


def _diggof_pvalue_mc(result: OmnibusResult, grid: AdaptationGrid, eng: Engine) -> float:
    """Monte-Carlo omnibus p-value from simulated null minimum p-values."""
    stats = []
    for P in _null_pvalues(eng.corr, eng.sided, eng.n_sims, eng.seed):
        stats.append(np.column_stack([compute_statistics(P, f, t) for f, t in grid]))
    S = np.vstack(stats)
    R = S.shape[0]
    # per-entry null p-values: fraction of null statistics at least as large
    null_p = np.empty_like(S)
    for j in range(S.shape[1]):
        order = np.sort(S[:, j])
        null_p[:, j] = (R - np.searchsorted(order, S[:, j], side="left")) / R
    null_min = null_p.min(axis=1)
    return float(np.mean(null_min <= result.s_o))


def diggof_test(pvalues, grid: AdaptationGrid, corr, method: str = "auto",
                sided=Sidedness.TWO, seed: int = 0, **engine_kw):
    """Convenience wrapper returning ``(OmnibusResult, p-value)``."""
    eng = _as_engine(corr, method, sided, seed, **engine_kw)
    res = diggof_statistic(pvalues, grid, eng)
    return res, diggof_pvalue(res, grid, eng)
