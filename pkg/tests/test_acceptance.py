"""Acceptance criteria; each check records one pass/fail line for the summary."""

import time
import warnings
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats
from scipy.special import ndtr

from ggof import (
    AdaptationGrid,
    ApproximationWarning,
    CorrelationModel,
    CorrelationSpec,
    Engine,
    GaussianStatVector,
    GlmDataset,
    SignalSpec,
    StatFamily,
    StudyConfig,
    TruncationScheme,
    bivariate_snrs,
    compute_statistics,
    cross_prob_iid,
    decorrelate,
    detection_boundary,
    diggof_test,
    f_eval,
    fit_statistics,
    innovate,
    run_power_study,
    run_type1_study,
    survival_equal_corr,
)
from oracles import hc2004, hc2008, integrate_crossprob_pieces

HC, BJ = StatFamily.hc(), StatFamily.bj()


def test_criterion_1_cross_boundary(acceptance):
    rng = np.random.default_rng(101)
    worst = 0.0
    lib_time = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 6))
        c = rng.random(n) * rng.choice([0.4, 0.8, 1.0])
        c[rng.random(n) < 0.25] = 0.0
        t0 = time.perf_counter()
        got = cross_prob_iid(c)
        lib_time += time.perf_counter() - t0
        worst = max(worst, abs(got - integrate_crossprob_pieces(c)))
    closed = 0.0
    for n in range(1, 31):
        for cv in np.linspace(0, 1, 21):
            c = np.zeros(n)
            c[0] = cv
            t0 = time.perf_counter()
            got = cross_prob_iid(c)
            lib_time += time.perf_counter() - t0
            closed = max(closed, abs(got - (1 - cv) ** n))
    ok = worst <= 1e-7 and closed <= 1e-12 and lib_time < 1.0
    acceptance(1, ok, f"integration max|diff|={worst:.2e}, closed form max|diff|={closed:.2e}, "
                      f"library time {lib_time:.2f}s")
    assert ok


def test_criterion_2_equal_correlation(acceptance):
    n, rho, R = 20, 0.5, 50_000
    t = TruncationScheme.full(n)
    start = time.perf_counter()
    rng = np.random.default_rng(202)
    Z = np.sqrt(rho) * rng.standard_normal((R, 1)) + np.sqrt(1 - rho) * rng.standard_normal((R, n))
    P = 2 * ndtr(-np.abs(Z))
    S = compute_statistics(P, HC, t)
    bs = np.linspace(np.quantile(S, 0.02), np.quantile(S, 0.995), 30)
    mc = np.array([np.mean(S <= b) for b in bs])
    eng = np.array([survival_equal_corr(b, HC, t, n, rho, sided="two") for b in bs])
    dev = float(np.max(np.abs(eng - mc)))
    elapsed = time.perf_counter() - start
    ok = dev <= 0.01 and elapsed < 120
    acceptance(2, ok, f"max|engine - MC| = {dev:.4f} over 30 thresholds, {elapsed:.1f}s")
    assert ok


@pytest.mark.parametrize("case", [1, 4])
def test_criterion_3_type1_loess(acceptance, case):
    n = 20
    entries = ((HC, TruncationScheme(1, n // 2)), (BJ, TruncationScheme(1, n // 2)))
    cfg = StudyConfig(scenario="linear", correlation=CorrelationSpec.table1_case(case, rho=0.3),
                      n=n, N=1000, replicates=5000, entries=entries, omnibus=True,
                      method="loess", fit="marginal", seed=300 + case, quad_nodes=32,
                      alphas=(0.05, 0.01))
    start = time.perf_counter()
    rows = run_type1_study(cfg)
    elapsed = time.perf_counter() - start
    band = {0.05: (0.042, 0.062), 0.01: (0.006, 0.014)}
    ok = all(band[r["alpha"]][0] <= r["empirical_rate"] <= band[r["alpha"]][1] for r in rows)
    ok = ok and elapsed < 1800
    text = ", ".join(f"{r['test']}@{r['alpha']:g}={r['empirical_rate']:.4f}" for r in rows)
    acceptance(3, ok, f"case {case}: {text} ({elapsed:.0f}s)")
    assert ok


def test_criterion_4_diggof_type1(acceptance):
    n = 20
    grid = AdaptationGrid.default(n, (-1.0, 0.0, 1.0, 2.0), (1, 2), (10, 15, 20))
    cfg = StudyConfig(scenario="linear", correlation=CorrelationSpec.exp_decay(n, 0.6), n=n,
                      N=500, replicates=5000, entries=grid.entries, omnibus=True,
                      report_entries=False, method="wam", fit="marginal",
                      covariates="genotype", maf=0.3, controls=True, sigma="estimate",
                      seed=404, quad_nodes=32)
    start = time.perf_counter()
    r = run_type1_study(cfg)[0]["empirical_rate"]
    elapsed = time.perf_counter() - start
    ok = 0.04 <= r <= 0.07 and elapsed < 3600
    acceptance(4, ok, f"{len(grid)}-entry omnibus rate at 0.05 = {r:.4f} ({elapsed:.0f}s)")
    assert ok


def _criterion_5_datasets():
    rng = np.random.default_rng(505)
    for k in range(50):
        n = (5, 20)[k % 2]
        N = 500
        A = rng.normal(size=(n, n)) * rng.uniform(0.1, 1.0)
        X = rng.normal(size=(N, n)) @ (np.eye(n) + A) + rng.normal(size=(N, 1))
        z = None
        if (k // 2) % 2:
            z = np.column_stack([np.ones(N), rng.integers(0, 2, N), rng.normal(size=N)])
        beta = np.zeros(n)
        beta[rng.choice(n, 2, replace=False)] = 0.1
        y = X @ beta + rng.normal(size=N)
        yield fit_statistics(GlmDataset(y, X, z))


def test_criterion_5_innovated_identity(acceptance):
    worst = 0.0
    for out in _criterion_5_datasets():
        it = innovate(GaussianStatVector(out.t_j, out.sigma_tj)).t
        worst = max(worst, float(np.max(np.abs(it - out.t_m) / np.abs(out.t_m))))
    ok = worst <= 1e-8
    acceptance(5, ok, f"innovate(T_J) vs T_M max rel err {worst:.2e}")
    assert ok


def test_criterion_5_decorrelated_identity(acceptance):
    worst = 0.0
    for out in _criterion_5_datasets():
        dj = decorrelate(GaussianStatVector(out.t_j, out.sigma_tj)).t
        dm = decorrelate(GaussianStatVector(out.t_m, out.sigma_tm)).t
        worst = max(worst, float(np.max(np.abs(dj - dm) / np.abs(dm))))
    ok = worst <= 1e-8
    acceptance(5, ok, f"DT(T_J) vs DT(T_M) max rel err {worst:.2e}")
    assert ok


def test_criterion_6_bivariate(acceptance):
    m2, j2, ms = bivariate_snrs(-1.0, 1.0, 0.5)
    exact = j2 == np.sqrt(0.75) and m2 == 0.5 and ms == 0.0 and j2 > m2 > ms
    rng = np.random.default_rng(606)
    worst = 0.0
    for k in range(100):
        N = int(rng.integers(50, 400))
        r = rng.uniform(-0.9, 0.9)
        X = rng.normal(size=(N, 2)) @ np.linalg.cholesky([[1, r], [r, 1]]).T
        z = np.column_stack([np.ones(N), rng.normal(size=N)]) if k % 2 else None
        y = X @ rng.normal(size=2) * 0.1 + rng.normal(size=N)
        out = fit_statistics(GlmDataset(y, X, z))
        t_js = out.t_j.sum() / np.sqrt(2 * (1 + out.sigma_tj[0, 1]))
        t_ms = out.t_m.sum() / np.sqrt(2 * (1 + out.sigma_tm[0, 1]))
        worst = max(worst, abs(t_js - t_ms))
    ok = exact and worst <= 1e-10
    acceptance(6, ok, f"SNRs (J2, M2, S) = ({j2:.6f}, {m2:g}, {ms:g}); "
                      f"max|T_JS - T_MS| = {worst:.2e}")
    assert ok


def test_criterion_7_family_identities(acceptance):
    g = np.linspace(0.0005, 0.9995, 100)
    x, y = (a.ravel() for a in np.meshgrid(g, g))
    d1 = np.max(np.abs(f_eval(StatFamily.phi(2.0), x, y, 50) - hc2004(x, y, 50)))
    d2 = np.max(np.abs(f_eval(StatFamily.phi(-1.0), x, y, 50) - hc2008(x, y, 50)))
    ok = d1 <= 1e-10 and d2 <= 1e-10
    acceptance(7, ok, f"{x.size} points: s=2 max|diff|={d1:.2e}, s=-1 max|diff|={d2:.2e}")
    assert ok


def test_criterion_8_detection_boundary(acceptance):
    lower = 0.75 - 0.5
    upper = float((1 - np.sqrt(1 - 0.75)) ** 2)
    at = float(detection_boundary(0.75))
    a = np.linspace(0.5, 1.0, 102)[1:-1]
    mono = bool(np.all(np.diff(detection_boundary(a)) > 0))
    ok = abs(at - 0.25) <= 1e-15 and abs(lower - 0.25) <= 1e-15 \
        and abs(upper - 0.25) <= 1e-15 and mono
    acceptance(8, ok, f"rho(0.75)={at!r}, branches {lower!r}/{upper!r}, increasing={mono}")
    assert ok


def test_criterion_9_it_power(acceptance):
    n = 100
    cfg = StudyConfig(scenario="gmm", correlation=CorrelationSpec.equal(n, 0.3), n=n,
                      replicates=2000, signal=SignalSpec(1, 2.0), critical="mc",
                      null_sims=50_000, seed=909, sided="two",
                      entries=((HC, TruncationScheme.full(n)),))
    start = time.perf_counter()
    plain = run_power_study(cfg)[0]
    it = run_power_study(replace(cfg, transform="it"))[0]
    elapsed = time.perf_counter() - start
    lo_it = it["power"] - 1.96 * it["mc_std_error"]
    hi_plain = plain["power"] + 1.96 * plain["mc_std_error"]
    ok = it["power"] > plain["power"] and lo_it > hi_plain and elapsed < 1200
    acceptance(9, ok, f"power HC={plain['power']:.4f}, HC-IT={it['power']:.4f}, "
                      f"95% intervals {'disjoint' if lo_it > hi_plain else 'overlap'} "
                      f"({elapsed:.0f}s)")
    assert ok


def test_criterion_10_omnibus(acceptance):
    n = 10
    grid = AdaptationGrid.default(n)
    eng = Engine(CorrelationModel.identity(n))
    rng = np.random.default_rng(1010)
    bad = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ApproximationWarning)
        for _ in range(500):
            p = rng.random(n) ** rng.uniform(1, 5)
            res, pv = diggof_test(p, grid, eng)
            bad += not (res.s_o - 1e-12 <= pv <= len(grid) * res.s_o + 1e-12)
        null = np.array([diggof_test(rng.random(n), grid, eng)[1] for _ in range(5000)])
    ks = stats.kstest(null, "uniform").statistic
    ok = bad == 0 and ks <= 0.03
    acceptance(10, ok, f"dominance violations {bad}/500, null KS = {ks:.4f}")
    assert ok
