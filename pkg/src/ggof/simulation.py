"""Scenario generators and Monte-Carlo studies.

Every replicate draws from its own counter-based stream keyed by
``(seed, replicate_index)``, so results do not depend on execution order or
on the number of worker threads.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit, ndtri

from .crossprob import counter_rng
from .dependence import CorrelationModel, Engine, LoessSpec, QuadratureSpec, Sidedness, \
    pvalues_from_stats, _null_pvalues
from .errors import ApproximationWarning, DomainError, SingularMatrixError
from .families import StatFamily, TruncationScheme, compute_statistics
from .glm import GlmDataset, fit_statistics
from .omnibus import AdaptationGrid, diggof_pvalue, diggof_statistic
from .transforms import TransformKind, cholesky_lower, decorrelation_matrix, transform_matrix

_NULL_KEY = 0x4E55

#: Smallest eigenvalue below which a generated matrix is flagged as near singular.
NEAR_SINGULAR = 1e-3

#: Effect sizes per signal count (1..10) for the genotype cases and the
#: block/decay cases of the regression power designs.
EFFECT_SIZES = {
    "A": (0.110, 0.080, 0.060, 0.050, 0.040, 0.040, 0.035, 0.035, 0.035, 0.035),
    "B": (0.110, 0.080, 0.060, 0.050, 0.040, 0.040, 0.035, 0.035, 0.035, 0.035),
    "C": (0.100, 0.073, 0.055, 0.045, 0.036, 0.036, 0.032, 0.032, 0.032, 0.032),
    "D": (0.085, 0.062, 0.046, 0.038, 0.031, 0.031, 0.027, 0.027, 0.027, 0.027),
    "1": (0.120, 0.100, 0.090, 0.090, 0.090, 0.090, 0.090, 0.090, 0.090, 0.090),
    "2": (0.110, 0.080, 0.060, 0.050, 0.040, 0.040, 0.035, 0.030, 0.030, 0.030),
    "3": (0.110, 0.090, 0.060, 0.050, 0.050, 0.040, 0.030, 0.030, 0.030, 0.030),
    "4": (0.100, 0.070, 0.050, 0.040, 0.035, 0.030, 0.025, 0.025, 0.025, 0.025),
    "5": (0.110, 0.080, 0.060, 0.050, 0.040, 0.040, 0.035, 0.030, 0.030, 0.030),
    "6": (0.110, 0.080, 0.060, 0.050, 0.040, 0.040, 0.035, 0.030, 0.030, 0.030),
    "7": (0.110, 0.080, 0.060, 0.050, 0.040, 0.040, 0.035, 0.030, 0.030, 0.030),
}

_TABLE1 = {
    # case: (within A, within B, across)
    1: (0.0, 0.0, 0.0),
    2: ("rho", 0.0, 0.0),
    3: ("rho", "rho", 0.0),
    4: ("rho", "rho", "rho"),
    5: ("decay", 0.0, 0.0),
    6: ("decay", "decay", 0.0),
    7: ("decay", "decay", "decay"),
}

_GENOTYPE_CASES = {
    "A": (0.5, 0.0, 0.0),
    "B": (0.5, 0.2, 0.0),
    "C": (0.5, 0.2, 0.2),
    "D": (0.5, 0.2, 0.33),
}


# ---------------------------------------------------------------------------
# correlation matrices

@dataclass(frozen=True)
class CorrelationSpec:
    """Recipe for a correlation matrix.

    Kinds are ``equal`` (all off-diagonals ``gamma``), ``poly_decay``
    (``(offset + |i - j|)^-gamma``), ``exp_decay`` (``gamma^|i - j|``),
    ``block`` and ``matrix`` (explicit). Block entries are either a number
    or ``"decay"``, the polynomial decay with exponent ``decay_gamma`` in
    the global index distance.
    """

    kind: str
    n: int
    gamma: float = 0.0
    offset: float = 1.0
    sizes: tuple = ()
    within: tuple = ()
    cross: tuple = ()
    decay_gamma: float = 1.0
    values: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind not in ("equal", "poly_decay", "exp_decay", "block", "matrix"):
            raise DomainError(f"unknown correlation kind {self.kind!r}")
        if self.n < 1:
            raise DomainError("n must be positive")
        if self.kind == "block":
            if sum(self.sizes) != self.n or len(self.within) != len(self.sizes):
                raise DomainError("block sizes must sum to n with one within value per block")
            k = len(self.sizes)
            if self.cross and (len(self.cross) != k or any(len(r) != k for r in self.cross)):
                raise DomainError("cross must be a square table over the blocks")

    @classmethod
    def equal(cls, n: int, gamma: float) -> "CorrelationSpec":
        return cls("equal", n, gamma=float(gamma))

    @classmethod
    def poly_decay(cls, n: int, gamma: float, offset: float = 1.0) -> "CorrelationSpec":
        return cls("poly_decay", n, gamma=float(gamma), offset=float(offset))

    @classmethod
    def exp_decay(cls, n: int, gamma: float) -> "CorrelationSpec":
        return cls("exp_decay", n, gamma=float(gamma))

    @classmethod
    def block(cls, sizes, within, cross=None, decay_gamma: float = 1.0) -> "CorrelationSpec":
        sizes = tuple(int(s) for s in sizes)
        k = len(sizes)
        if cross is None:
            cross = tuple(tuple(0.0 for _ in range(k)) for _ in range(k))
        elif np.isscalar(cross) or isinstance(cross, str):
            cross = tuple(tuple(cross for _ in range(k)) for _ in range(k))
        return cls("block", sum(sizes), sizes=sizes, within=tuple(within),
                   cross=tuple(tuple(r) for r in cross), decay_gamma=float(decay_gamma))

    @classmethod
    def from_matrix(cls, S) -> "CorrelationSpec":
        S = np.asarray(S, dtype=float)
        return cls("matrix", S.shape[0], values=tuple(map(tuple, S)))

    @classmethod
    def table1_case(cls, case: int, rho: float = 0.5, sizes=(10, 10),
                    gamma: float = 1.0) -> "CorrelationSpec":
        """Two-block regression design: cases 1-4 use ``rho``, 5-7 the decay."""
        if case not in _TABLE1:
            raise DomainError("case must be 1..7")
        a, b, ab = (rho if v == "rho" else v for v in _TABLE1[case])
        return cls.block(sizes, (a, b), ((a, ab), (ab, b)), decay_gamma=gamma)

    @classmethod
    def genotype_case(cls, case: str, n_a: int, n: int) -> "CorrelationSpec":
        """Signal block of size ``n_a`` and noise block of size ``n - n_a`` (cases A-D)."""
        case = case.upper()
        if case not in _GENOTYPE_CASES:
            raise DomainError("genotype case must be A, B, C or D")
        if not 1 <= n_a < n:
            raise DomainError("need 1 <= n_a < n")
        a, b, ab = _GENOTYPE_CASES[case]
        return cls.block((n_a, n - n_a), (a, b), ((a, ab), (ab, b)))

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "n": self.n}
        if self.kind in ("equal", "poly_decay", "exp_decay"):
            d["gamma"] = self.gamma
        if self.kind == "poly_decay":
            d["offset"] = self.offset
        if self.kind == "block":
            d.update(sizes=list(self.sizes), within=list(self.within),
                     cross=[list(r) for r in self.cross], decay_gamma=self.decay_gamma)
        if self.kind == "matrix":
            d["values"] = [list(r) for r in self.values]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CorrelationSpec":
        kind = d["kind"]
        if kind == "equal":
            return cls.equal(d["n"], d["gamma"])
        if kind == "poly_decay":
            return cls.poly_decay(d["n"], d["gamma"], d.get("offset", 1.0))
        if kind == "exp_decay":
            return cls.exp_decay(d["n"], d["gamma"])
        if kind == "block":
            return cls.block(d["sizes"], d["within"], d.get("cross"), d.get("decay_gamma", 1.0))
        if kind == "matrix":
            return cls.from_matrix(d["values"])
        raise DomainError(f"unknown correlation kind {kind!r}")


def _decay(dist, gamma, offset=1.0):
    with np.errstate(divide="ignore"):
        return (offset + dist) ** (-gamma)


def gen_correlation(spec: CorrelationSpec) -> np.ndarray:
    """Correlation matrix for ``spec``, checked to be positive definite.

    Raises
    ------
    SingularMatrixError
        When the smallest eigenvalue is not positive; the message reports it.

    Examples
    --------
    >>> gen_correlation(CorrelationSpec.equal(2, 0.3)).tolist()
    [[1.0, 0.3], [0.3, 1.0]]
    """
    n = spec.n
    idx = np.arange(n)
    dist = np.abs(idx[:, None] - idx[None, :]).astype(float)
    if spec.kind == "equal":
        S = np.full((n, n), spec.gamma)
    elif spec.kind == "poly_decay":
        S = _decay(dist, spec.gamma, spec.offset)
    elif spec.kind == "exp_decay":
        S = spec.gamma ** dist
    elif spec.kind == "matrix":
        S = np.array(spec.values, dtype=float)
    else:
        S = np.zeros((n, n))
        starts = np.concatenate([[0], np.cumsum(spec.sizes)])
        decay = _decay(dist, spec.decay_gamma)
        k = len(spec.sizes)
        for a in range(k):
            for b in range(k):
                v = spec.within[a] if a == b else spec.cross[a][b]
                ra = slice(starts[a], starts[a + 1])
                rb = slice(starts[b], starts[b + 1])
                S[ra, rb] = decay[ra, rb] if v == "decay" else float(v)
    np.fill_diagonal(S, 1.0)
    ev = float(np.linalg.eigvalsh(S)[0])
    if ev <= 0.0:
        raise SingularMatrixError(
            f"correlation matrix is not positive definite (smallest eigenvalue {ev:.6g})")
    if ev < NEAR_SINGULAR:
        warnings.warn(ApproximationWarning(
            f"correlation matrix is close to singular (smallest eigenvalue {ev:.3g})"),
            stacklevel=2)
    return S


def correlation_model(S, tol: float = 1e-12) -> CorrelationModel:
    """Most specific :class:`CorrelationModel` for a matrix (identity, equal, general)."""
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    off = S[~np.eye(n, dtype=bool)]
    if off.size == 0 or np.max(np.abs(off)) <= tol:
        return CorrelationModel.identity(n)
    if np.ptp(off) <= tol:
        return CorrelationModel.equal(n, float(off.mean()))
    return CorrelationModel.general(S, check=False)


# ---------------------------------------------------------------------------
# draws

def sample_gmm(mu, sigma, seed: int, size: int | None = None, *, key: int = 0) -> np.ndarray:
    """Draw ``T ~ N(mu, sigma)`` through the Cholesky factor.

    Parameters
    ----------
    mu : array_like, shape (n,)
    sigma : array_like, shape (n, n)
    seed, key : int
        Stream ``(seed, key)``; identical arguments give identical draws.
    size : int, optional
        Number of draws; returns shape (size, n) instead of (n,).
    """
    mu = np.asarray(mu, dtype=float).reshape(-1)
    Q = cholesky_lower(sigma)
    rng = counter_rng(seed, key)
    m = 1 if size is None else int(size)
    T = mu + rng.standard_normal((m, mu.size)) @ Q.T
    return T[0] if size is None else T


@dataclass(frozen=True)
class SignalSpec:
    """Nonzero mean (or effect) positions and sizes.

    Parameters
    ----------
    count : int
        Number of signals ``K``.
    amplitude : float or sequence
        Common size, or one size per signal.
    placement : {"uniform_random", "fixed", "clustered"}
        Random distinct positions per replicate, the given ``indices``, or a
        run of ``K`` positions starting at ``start`` (zero-based).
    """

    count: int = 0
    amplitude: float | tuple = 0.0
    placement: str = "uniform_random"
    indices: tuple = ()
    start: int = 0

    def __post_init__(self):
        if self.placement not in ("uniform_random", "fixed", "clustered"):
            raise DomainError(f"unknown placement {self.placement!r}")
        if self.count < 0:
            raise DomainError("signal count must be nonnegative")
        if self.placement == "fixed":
            if len(self.indices) != self.count or len(set(self.indices)) != self.count:
                raise DomainError("fixed placement needs count distinct indices")
        if not np.isscalar(self.amplitude) and len(self.amplitude) != self.count:
            raise DomainError("amplitude vector must have one value per signal")

    def vector(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Signal vector of length ``n``."""
        if self.count > n:
            raise DomainError("more signals than coordinates")
        out = np.zeros(n)
        if self.count == 0:
            return out
        if self.placement == "fixed":
            pos = np.asarray(self.indices, dtype=int)
        elif self.placement == "clustered":
            if self.start + self.count > n:
                raise DomainError("clustered signals run past the last coordinate")
            pos = np.arange(self.start, self.start + self.count)
        else:
            pos = rng.choice(n, size=self.count, replace=False)
        out[pos] = self.amplitude if np.isscalar(self.amplitude) else np.asarray(self.amplitude)
        return out

    def to_dict(self) -> dict:
        amp = self.amplitude if np.isscalar(self.amplitude) else list(self.amplitude)
        return {"count": self.count, "amplitude": amp, "placement": self.placement,
                "indices": list(self.indices), "start": self.start}

    @classmethod
    def from_dict(cls, d: dict) -> "SignalSpec":
        amp = d.get("amplitude", 0.0)
        return cls(int(d.get("count", 0)), amp if np.isscalar(amp) else tuple(amp),
                   d.get("placement", "uniform_random"), tuple(d.get("indices", ())),
                   int(d.get("start", 0)))


@dataclass(frozen=True)
class StudyConfig:
    """A simulation study.

    Parameters
    ----------
    scenario : {"gmm", "linear", "logistic", "uniform"}
        Gaussian statistics drawn directly, statistics from regression
        data, or iid uniform p-values.
    correlation : CorrelationSpec
        Correlation of the statistics (``gmm``) or of the covariates.
    signal : SignalSpec
        Mean vector (``gmm``) or coefficients of ``x`` (regressions).
    n, N, replicates : int
        Statistics, observations per dataset and replicates.
    alphas : tuple of float
        Levels at which rates are reported.
    entries : tuple of (StatFamily, TruncationScheme)
        Tests; each is reported alone when ``report_entries`` is true.
    omnibus : bool
        Also report the omnibus test over all entries.
    method : str
        Engine for p-values and critical values.
    seed : int
    sided : {"one", "two"}
    fit : {"joint", "marginal", "decorrelated"}
        Statistics derived from regression data.
    transform : str
        ``none``, ``dt``, ``it`` or ``banded:<b>``, applied to the statistics.
    covariates : {"gaussian", "genotype"}
        Multivariate normal columns or Gaussian-copula genotypes in {0, 1, 2}.
    maf : float
        Minor allele frequency of the genotypes.
    controls : bool
        Add an intercept, a Bernoulli(0.5) and a standard normal control.
    control_effects : tuple of float
        Effects of the two non-intercept controls on the response.
    sigma : float or "estimate"
        Error standard deviation used by the linear fit (data use 1).
    critical : {"engine", "mc"}
        Power studies: critical values from the engine or from simulated
        null statistics (``gmm`` only).
    null_sims : int
        Null replicates for ``critical="mc"`` and the ``mc`` engine.
    grid : tuple of float
        Power studies: values substituted for the signal amplitude (or the
        count when ``grid_kind="count"``).
    quad_nodes : int
        Quadrature nodes of the equal-correlation integral.
    loess : LoessSpec
    threads : int
        Worker threads; results do not depend on it.
    """

    scenario: str = "gmm"
    correlation: CorrelationSpec = None
    signal: SignalSpec = SignalSpec()
    n: int = 20
    N: int = 1000
    replicates: int = 1000
    alphas: tuple = (0.05,)
    entries: tuple = ()
    omnibus: bool = False
    report_entries: bool = True
    method: str = "auto"
    seed: int = 0
    sided: str = "two"
    fit: str = "marginal"
    transform: str = "none"
    covariates: str = "gaussian"
    maf: float = 0.3
    controls: bool = False
    control_effects: tuple = (0.5, 0.1)
    sigma: float | str = 1.0
    critical: str = "engine"
    null_sims: int = 100_000
    grid: tuple = ()
    grid_kind: str = "amplitude"
    quad_nodes: int = 64
    loess: LoessSpec = LoessSpec()
    threads: int = 1

    def __post_init__(self):
        if self.scenario not in ("gmm", "linear", "logistic", "uniform"):
            raise DomainError(f"unknown scenario {self.scenario!r}")
        if self.correlation is None:
            object.__setattr__(self, "correlation", CorrelationSpec.equal(self.n, 0.0))
        if self.correlation.n != self.n:
            raise DomainError("correlation spec and n disagree")
        if self.fit not in ("joint", "marginal", "decorrelated"):
            raise DomainError(f"unknown fit {self.fit!r}")
        if self.covariates not in ("gaussian", "genotype"):
            raise DomainError(f"unknown covariates {self.covariates!r}")
        if self.critical not in ("engine", "mc"):
            raise DomainError("critical must be 'engine' or 'mc'")
        if self.grid_kind not in ("amplitude", "count"):
            raise DomainError("grid_kind must be 'amplitude' or 'count'")
        if not self.entries:
            object.__setattr__(self, "entries", ((StatFamily.hc(), TruncationScheme(1, self.n)),))
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        TransformKind.parse(self.transform)
        Sidedness.parse(self.sided)

    @property
    def test_labels(self) -> list:
        labels = []
        if self.report_entries:
            labels += [_entry_label(f, t) for f, t in self.entries]
        if self.omnibus:
            labels.append("omnibus")
        return labels

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario, "correlation": self.correlation.to_dict(),
            "signal": self.signal.to_dict(), "n": self.n, "N": self.N,
            "replicates": self.replicates, "alphas": list(self.alphas),
            "entries": AdaptationGrid(self.entries, self.n).to_list(),
            "omnibus": self.omnibus, "report_entries": self.report_entries,
            "method": self.method, "seed": self.seed, "sided": str(Sidedness.parse(self.sided).value),
            "fit": self.fit, "transform": self.transform, "covariates": self.covariates,
            "maf": self.maf, "controls": self.controls,
            "control_effects": list(self.control_effects), "sigma": self.sigma,
            "critical": self.critical, "null_sims": self.null_sims, "grid": list(self.grid),
            "grid_kind": self.grid_kind, "quad_nodes": self.quad_nodes,
            "loess": {"m": self.loess.m, "eps": self.loess.eps, "n_draws": self.loess.n_draws},
            "threads": self.threads,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StudyConfig":
        d = dict(d)
        n = int(d.get("n", 20))
        if "correlation" in d:
            d["correlation"] = CorrelationSpec.from_dict(d["correlation"])
        if "signal" in d:
            d["signal"] = SignalSpec.from_dict(d["signal"])
        if "entries" in d:
            d["entries"] = AdaptationGrid.from_list(d["entries"], n).entries
        if "loess" in d:
            d["loess"] = LoessSpec(**d["loess"])
        for k in ("alphas", "control_effects", "grid"):
            if k in d:
                d[k] = tuple(d[k])
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise DomainError(f"unknown study settings: {sorted(extra)}")
        return cls(**d)


def _entry_label(f: StatFamily, t: TruncationScheme) -> str:
    lab = f"{f.label}[{t.k0}:{t.k1}]"
    if t.has_magnitude:
        lab += f"({t.alpha0:g},{t.alpha1:g})"
    return lab


def _genotypes(latent, maf):
    q0 = ndtri((1.0 - maf) ** 2)
    q1 = ndtri(1.0 - maf * maf)
    return (latent > q0).astype(float) + (latent > q1).astype(float)


def sample_glm_dataset(cfg: StudyConfig, replicate_index: int, beta=None) -> GlmDataset:
    """Regression dataset for one replicate.

    Covariates are multivariate normal with the configured correlation, or
    genotypes obtained by thresholding such a latent vector at the
    Binomial(2, maf) quantiles. ``beta`` defaults to the configured signal.
    """
    rng = counter_rng(cfg.seed, replicate_index, 1)
    S = gen_correlation(cfg.correlation)
    Q = cholesky_lower(S)
    latent = rng.standard_normal((cfg.N, cfg.n)) @ Q.T
    X = _genotypes(latent, cfg.maf) if cfg.covariates == "genotype" else latent
    if beta is None:
        beta = cfg.signal.vector(cfg.n, rng)
    eta = X @ beta
    Z = None
    if cfg.controls:
        z1 = (rng.random(cfg.N) < 0.5).astype(float)
        z2 = rng.standard_normal(cfg.N)
        Z = np.column_stack([np.ones(cfg.N), z1, z2])
        eta = eta + cfg.control_effects[0] * z1 + cfg.control_effects[1] * z2
    if cfg.scenario == "logistic":
        y = (rng.random(cfg.N) < expit(eta)).astype(float)
        return GlmDataset(y, X, Z, "logistic")
    y = eta + rng.standard_normal(cfg.N)
    return GlmDataset(y, X, Z, "linear", cfg.sigma)


# ---------------------------------------------------------------------------
# studies

def _engine_kwargs(cfg: StudyConfig) -> dict:
    return {"quad": QuadratureSpec(node_count=cfg.quad_nodes), "loess": cfg.loess,
            "n_sims": cfg.null_sims}


def _replicate_seed(seed: int, idx: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(idx), 0x5EED]).generate_state(1)[0])


def _statistics(cfg: StudyConfig, idx: int, signal=None):
    """Transformed statistics and their correlation for one replicate."""
    kind = TransformKind.parse(cfg.transform)
    if cfg.scenario == "gmm":
        S = gen_correlation(cfg.correlation)
        rng = counter_rng(cfg.seed, idx, 1)
        mu = cfg.signal.vector(cfg.n, rng) if signal is None else signal.vector(cfg.n, rng)
        T = sample_gmm(mu, S, cfg.seed, key=_replicate_seed(cfg.seed, idx))
    else:
        beta = None
        if signal is not None:
            beta = signal.vector(cfg.n, counter_rng(cfg.seed, idx, 2))
        ds = sample_glm_dataset(cfg, idx, beta)
        out = fit_statistics(ds)
        if cfg.fit == "joint":
            T, S = out.t_j, out.sigma_tj
        elif cfg.fit == "marginal":
            T, S = out.t_m, out.sigma_tm
        else:
            T, S = decorrelation_matrix(out.sigma_tm) @ out.t_m, np.eye(cfg.n)
    if kind.kind != "none":
        V = transform_matrix(S, kind)
        T = V @ T
        S = V @ S @ V.T
        S = 0.5 * (S + S.T)
        np.fill_diagonal(S, 1.0)
    return T, S


def _replicate_pvalues(cfg: StudyConfig, idx: int) -> np.ndarray:
    """p-values of every reported test for replicate ``idx``."""
    grid = AdaptationGrid(cfg.entries, cfg.n)
    if cfg.scenario == "uniform":
        P = counter_rng(cfg.seed, idx, 1).random(cfg.n)
        corr = CorrelationModel.identity(cfg.n)
    else:
        T, S = _statistics(cfg, idx)
        P = pvalues_from_stats(T, cfg.sided)
        corr = correlation_model(S)
    eng = Engine(corr, cfg.method, cfg.sided, _replicate_seed(cfg.seed, idx),
                 **_engine_kwargs(cfg))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ApproximationWarning)
        res = diggof_statistic(P, grid, eng)
        out = list(res.per_entry_pvalues) if cfg.report_entries else []
        if cfg.omnibus:
            out.append(diggof_pvalue(res, grid, eng))
    return np.array(out)


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def simulate_pvalues(cfg: StudyConfig) -> np.ndarray:
    """Array (replicates, tests) of p-values, in replicate order."""
    rows = _map(lambda i: _replicate_pvalues(cfg, i), range(cfg.replicates), cfg.threads)
    return np.vstack(rows)


def run_type1_study(cfg: StudyConfig) -> list[dict]:
    """Empirical rejection rates ``P(p <= alpha)`` with binomial standard errors.

    Returns
    -------
    list of dict
        One row per (test, alpha) with keys ``test``, ``alpha``,
        ``empirical_rate``, ``mc_std_error``.
    """
    if cfg.scenario != "uniform" and np.any(cfg.signal.vector(cfg.n, counter_rng(0)) != 0):
        raise DomainError("type-I studies need a zero signal")
    P = simulate_pvalues(cfg)
    R = P.shape[0]
    rows = []
    for j, lab in enumerate(cfg.test_labels):
        for a in cfg.alphas:
            r = float(np.mean(P[:, j] <= a))
            rows.append({"test": lab, "alpha": a, "empirical_rate": r,
                         "mc_std_error": float(np.sqrt(r * (1.0 - r) / R))})
    return rows


def _null_statistics(cfg: StudyConfig, S) -> np.ndarray:
    """Statistics of every entry under the null, shape (null_sims, entries)."""
    corr = CorrelationModel.general(S, check=False)
    blocks = []
    for P in _null_pvalues(corr, cfg.sided, cfg.null_sims, _replicate_seed(cfg.seed, _NULL_KEY)):
        blocks.append(np.column_stack([compute_statistics(P, f, t) for f, t in cfg.entries]))
    return np.vstack(blocks)


def _empirical_pvalues(null_sorted, stats):
    """Fraction of null statistics at least as large as each observed one."""
    R = null_sorted.shape[0]
    out = np.empty_like(stats, dtype=float)
    for j in range(stats.shape[1]):
        out[:, j] = (R - np.searchsorted(null_sorted[:, j], stats[:, j], side="left")) / R
    return out


def _mc_decisions(cfg: StudyConfig, S, stat_rows, alpha):
    """Rejections from simulated null statistics (``critical="mc"``)."""
    null = _null_statistics(cfg, S)
    null_sorted = np.sort(null, axis=0)
    obs_p = _empirical_pvalues(null_sorted, stat_rows)
    cols = []
    if cfg.report_entries:
        cols += [obs_p[:, j] <= alpha for j in range(obs_p.shape[1])]
    if cfg.omnibus:
        null_min = np.sort(_empirical_pvalues(null_sorted, null).min(axis=1))
        omni_p = np.searchsorted(null_min, obs_p.min(axis=1), side="right") / null_min.size
        cols.append(omni_p <= alpha)
    return np.column_stack(cols)


def run_power_study(cfg: StudyConfig) -> list[dict]:
    """Rejection rates at level ``alphas[0]`` across the signal grid.

    Each grid value replaces the signal amplitude (or count). With
    ``critical="engine"`` a replicate rejects when its p-value is at most
    alpha. With ``critical="mc"`` (``gmm`` scenario) statistics are
    compared with simulated null statistics under the transformed
    correlation.

    Returns
    -------
    list of dict
        Keys ``test``, ``grid_value``, ``power``, ``mc_std_error``.
    """
    alpha = cfg.alphas[0]
    grid = cfg.grid or (cfg.signal.amplitude if cfg.grid_kind == "amplitude"
                        else cfg.signal.count,)
    rows = []
    S_mc = None
    for g in grid:
        sig = (replace(cfg.signal, amplitude=float(g)) if cfg.grid_kind == "amplitude"
               else replace(cfg.signal, count=int(g)))
        sub = replace(cfg, signal=sig)
        if cfg.critical == "mc":
            if cfg.scenario != "gmm":
                raise DomainError("simulated critical values need the gmm scenario")
            if S_mc is None:
                S_mc = _statistics(replace(cfg, signal=SignalSpec()), 0)[1]
            stats = np.vstack(_map(
                lambda i: np.array([compute_statistics(
                    pvalues_from_stats(_statistics(sub, i)[0], cfg.sided)[None, :], f, t)[0]
                    for f, t in cfg.entries]),
                range(cfg.replicates), cfg.threads))
            rej = _mc_decisions(cfg, S_mc, stats, alpha)
        else:
            rej = simulate_pvalues(sub) <= alpha
        R = rej.shape[0]
        for j, lab in enumerate(cfg.test_labels):
            p = float(np.mean(rej[:, j]))
            rows.append({"test": lab, "grid_value": float(g), "power": p,
                         "mc_std_error": float(np.sqrt(p * (1.0 - p) / R))})
    return rows
