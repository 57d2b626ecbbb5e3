"""The double-adaptation omnibus test."""

import warnings

import numpy as np
import pytest

from ggof import (
    AdaptationGrid,
    ApproximationWarning,
    CorrelationModel,
    DomainError,
    Engine,
    StatFamily,
    TruncationScheme,
    compute_statistic,
    compute_statistics,
    critical_threshold,
    diggof_pvalue,
    diggof_statistic,
    diggof_test,
    pvalue,
    survival,
    survival_iid,
)
from ggof.omnibus import omnibus_boundary
from ggof.simulation import CorrelationSpec, gen_correlation

HC, BJ = StatFamily.hc(), StatFamily.bj()


def _grid(n, entries):
    return AdaptationGrid(tuple(entries), n)


class TestGrid:
    def test_default(self):
        g = AdaptationGrid.default(20)
        assert len(g) == 4 * 2 * 2
        assert (StatFamily.phi(-1.0), TruncationScheme(2, 10)) in g.entries

    def test_default_drops_duplicates(self):
        g = AdaptationGrid.default(2, k1_values=(1, 2, 2))
        assert len(g.entries) == len(set(g.entries))

    def test_empty_and_invalid(self):
        with pytest.raises(DomainError):
            AdaptationGrid((), 5)
        with pytest.raises(DomainError):
            AdaptationGrid(((HC, TruncationScheme(1, 6)),), 5)

    def test_list_round_trip(self):
        g = AdaptationGrid.default(10)
        assert AdaptationGrid.from_list(g.to_list(), 10) == g


class TestStatistic:
    def test_singleton(self):
        n = 10
        p = np.random.default_rng(1).random(n)
        t = TruncationScheme(1, 5)
        corr = CorrelationModel.identity(n)
        res = diggof_statistic(p, _grid(n, [(HC, t)]), corr)
        assert res.s_o == pvalue(compute_statistic(p, HC, t), corr)
        assert diggof_pvalue(res, _grid(n, [(HC, t)]), corr) == res.s_o

    def test_duplicated_entry(self):
        n = 10
        p = np.random.default_rng(2).random(n)
        corr = CorrelationModel.identity(n)
        e = [(HC, TruncationScheme(1, 5)), (BJ, TruncationScheme(1, 5))]
        a = diggof_statistic(p, _grid(n, e), corr)
        b = diggof_statistic(p, _grid(n, e + e[:1]), corr)
        assert a.s_o == b.s_o
        np.testing.assert_array_equal(b.per_entry_pvalues[:2], a.per_entry_pvalues)
        assert b.per_entry_pvalues[2] == a.per_entry_pvalues[0]

    def test_recomputation(self):
        n = 10
        rng = np.random.default_rng(3)
        corr = CorrelationModel.identity(n)
        t = TruncationScheme(1, n // 2)
        for _ in range(20):
            p = rng.random(n)
            res = diggof_statistic(p, _grid(n, [(HC, t), (BJ, t)]), corr)
            want = [pvalue(compute_statistic(p, f, t), corr) for f in (HC, BJ)]
            assert res.s_o == pytest.approx(min(want), abs=1e-14)
            assert res.chosen_entry == int(np.argmin(want))
            assert res.s_o == res.per_entry_pvalues.min()

    def test_tie_lowest_index(self):
        n = 6
        p = np.full(n, 0.9)
        e = [(HC, TruncationScheme(1, 6)), (HC, TruncationScheme(1, 6))]
        res = diggof_statistic(p, _grid(n, e), CorrelationModel.identity(n))
        assert res.chosen_entry == 0

    def test_size_mismatch(self):
        with pytest.raises(DomainError):
            diggof_statistic(np.full(5, 0.5), AdaptationGrid.default(6),
                             CorrelationModel.identity(6))


class TestCriticalThreshold:
    def test_round_trip_iid(self):
        n = 15
        t = TruncationScheme.full(n)
        corr = CorrelationModel.identity(n)
        b_star = 3.1
        s = 1.0 - survival_iid(b_star, HC, t, n)
        assert critical_threshold((HC, t), s, corr) == pytest.approx(b_star, abs=1e-6)

    def test_bonferroni_closed_form(self):
        n, a, s_o = 10, 0.05, 0.2
        t = TruncationScheme.full(n)
        b = critical_threshold((StatFamily.bonferroni(a), t), s_o, CorrelationModel.identity(n))
        assert b == pytest.approx((1 - s_o) ** (1 / n) - 1 + a / n, abs=1e-9)

    def test_round_trip_equal(self):
        n = 20
        t = TruncationScheme.full(n)
        corr = CorrelationModel.equal(n, 0.3)
        for s in (0.5, 0.05, 0.001):
            b = critical_threshold((HC, t), s, corr)
            assert 1 - survival(b, HC, t, corr) == pytest.approx(s, abs=1e-6)

    def test_atom_warns(self):
        # with no p-value below 0.01 the region is empty, an atom of mass 0.99^4
        n = 4
        t = TruncationScheme(1, 4, 0.0, 0.01)
        with pytest.warns(ApproximationWarning):
            critical_threshold((StatFamily.bonferroni(0.05), t), 0.999,
                               CorrelationModel.identity(n))

    def test_domain(self):
        with pytest.raises(DomainError):
            critical_threshold((HC, TruncationScheme.full(5)), 1.0, CorrelationModel.identity(5))


class TestPvalue:
    def test_vs_monte_carlo_min_p(self):
        n, R = 10, 100_000
        t = TruncationScheme.full(n)
        grid = _grid(n, [(HC, t), (BJ, t)])
        corr = CorrelationModel.identity(n)
        p = np.array([0.004, 0.03, 0.1, 0.2, 0.35, 0.5, 0.6, 0.7, 0.8, 0.95])
        res, pv = diggof_test(p, grid, corr)
        U = np.random.default_rng(4).random((R, n))
        mins = np.minimum(1 - survival_iid(compute_statistics(U, HC, t), HC, t, n),
                          1 - survival_iid(compute_statistics(U, BJ, t), BJ, t, n))
        mc = np.mean(mins <= res.s_o)
        se = np.sqrt(mc * (1 - mc) / R)
        assert abs(pv - mc) <= 4 * se

    def test_dominance_identity(self):
        n = 12
        rng = np.random.default_rng(5)
        grid = AdaptationGrid.default(n)
        corr = CorrelationModel.identity(n)
        for _ in range(60):
            p = rng.random(n) ** rng.uniform(1, 4)
            res, pv = diggof_test(p, grid, corr)
            assert res.s_o - 1e-12 <= pv <= len(grid) * res.s_o + 1e-12

    def test_adding_entry(self):
        n = 12
        rng = np.random.default_rng(6)
        corr = CorrelationModel.identity(n)
        eng = Engine(corr)
        small = AdaptationGrid.default(n, s_values=(1.0, 2.0))
        big = AdaptationGrid.default(n)
        for _ in range(20):
            p = rng.random(n) ** 2
            a = diggof_statistic(p, small, eng)
            b = diggof_statistic(p, big, eng)
            assert b.s_o <= a.s_o
            _, ua = omnibus_boundary(a, small, eng)
            # u* of the larger grid at the same level dominates pointwise
            at_same = type(b)(a.s_o, b.chosen_entry, np.maximum(b.per_entry_pvalues, a.s_o),
                              b.statistics)
            _, ub = omnibus_boundary(at_same, big, eng)
            assert np.all(ub >= ua - 1e-12)

    def test_equal_engine_vs_mc(self):
        n = 10
        t = TruncationScheme.full(n)
        grid = _grid(n, [(HC, t), (BJ, t)])
        p = np.array([0.002, 0.04, 0.1, 0.2, 0.35, 0.5, 0.6, 0.7, 0.8, 0.95])
        corr = CorrelationModel.equal(n, 0.3)
        _, pe = diggof_test(p, grid, corr)
        _, pm = diggof_test(p, grid, corr, method="mc", n_sims=100_000, seed=2)
        se = np.sqrt(pe * (1 - pe) / 1e5)
        assert abs(pe - pm) <= 4 * se

    @pytest.mark.parametrize("method", ["wam", "loess"])
    def test_general_engines(self, method):
        n = 12
        S = gen_correlation(CorrelationSpec.exp_decay(n, 0.5))
        corr = CorrelationModel.toeplitz(S[0, 1:]) if method == "wam" \
            else CorrelationModel.general(S)
        p = np.random.default_rng(7).random(n) ** 3
        grid = AdaptationGrid.default(n)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ApproximationWarning)
            res, pv = diggof_test(p, grid, corr, method=method)
        assert res.s_o <= pv <= 1.0

    def test_trivial_s_o(self):
        n = 5
        grid = AdaptationGrid.default(n)
        res = diggof_statistic(np.full(n, 0.999), grid, CorrelationModel.identity(n))
        assert diggof_pvalue(res, grid, CorrelationModel.identity(n)) <= 1.0
