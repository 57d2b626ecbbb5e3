"""De-correlation, innovated and banded transformations; SNR formulas."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ggof import (
    DomainError,
    GaussianStatVector,
    SingularMatrixError,
    TransformKind,
    banded_transform,
    bivariate_snrs,
    decorrelate,
    detection_boundary,
    detection_boundary_glm,
    innovate,
    snr_report,
)
from ggof.simulation import CorrelationSpec, gen_correlation
from ggof.transforms import (
    banded_matrix,
    cholesky_lower,
    decorrelation_matrix,
    innovation_matrix,
)
from oracles import equal_corr_inverse_diag


def random_corr(rng, n):
    A = rng.normal(size=(n, n + 3))
    C = A @ A.T
    d = 1 / np.sqrt(np.diag(C))
    return d[:, None] * C * d[None, :]


def banded_oracle(S, b):
    """Partial sums of ``Sigma^-1 = U'U`` with output variances from ``V S V'``."""
    U = np.linalg.inv(np.linalg.cholesky(S))
    n = S.shape[0]
    V = np.zeros((n, n))
    for j in range(n):
        for k in range(j, min(n, j + b)):
            V[j] += U[k, j] * U[k]
        V[j] /= np.sqrt(V[j] @ S @ V[j])
    return V


class TestCholesky:
    def test_pivot_reported(self):
        S = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        with pytest.raises(SingularMatrixError) as e:
            cholesky_lower(S)
        assert e.value.pivot == 1

    def test_not_pd(self):
        S = np.array([[1.0, 0.9, -0.9], [0.9, 1.0, 0.9], [-0.9, 0.9, 1.0]])
        with pytest.raises(SingularMatrixError):
            decorrelation_matrix(S)


class TestDecorrelate:
    def test_identity(self):
        t = np.array([0.3, -1.0, 2.0])
        out = decorrelate(GaussianStatVector(t, np.eye(3), mu=t))
        np.testing.assert_array_equal(out.t, t)
        np.testing.assert_array_equal(out.mu, t)

    def test_two_by_two(self):
        r = 0.6
        S = np.array([[1, r], [r, 1]])
        U = decorrelation_matrix(S)
        want = np.array([[1, 0], [-r / np.sqrt(1 - r * r), 1 / np.sqrt(1 - r * r)]])
        np.testing.assert_allclose(U, want, atol=1e-14)
        np.testing.assert_allclose(U @ S @ U.T, np.eye(2), atol=1e-12)

    def test_white_random(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            S = random_corr(rng, 8)
            U = decorrelation_matrix(S)
            np.testing.assert_allclose(U @ S @ U.T, np.eye(8), atol=1e-10)
            R = decorrelation_matrix(S, reverse=True)
            np.testing.assert_allclose(R @ S @ R.T, np.eye(8), atol=1e-10)
            assert np.allclose(np.tril(R, -1), 0)

    def test_empirical_covariance(self):
        rng = np.random.default_rng(2)
        S = random_corr(rng, 10)
        T = rng.standard_normal((100_000, 10)) @ np.linalg.cholesky(S).T
        out = T @ decorrelation_matrix(S).T
        assert np.max(np.abs(np.cov(out.T) - np.eye(10))) <= 0.02


class TestInnovate:
    def test_identity(self):
        t = np.array([1.0, 2.0])
        np.testing.assert_allclose(innovate(GaussianStatVector(t, np.eye(2))).t, t)

    def test_single_signal(self):
        rng = np.random.default_rng(3)
        A = 1.7
        for _ in range(50):
            n = 6
            S = random_corr(rng, n)
            j = int(rng.integers(n))
            mu = np.zeros(n)
            mu[j] = A
            out = innovate(GaussianStatVector.from_mean(mu, S))
            want = A * np.sqrt(np.linalg.inv(S)[j, j])
            assert out.mu[j] == pytest.approx(want, rel=1e-10)
            assert out.mu[j] >= A

    @pytest.mark.parametrize("n,rho", [(5, 0.3), (20, 0.5), (100, 0.1), (10, -0.05)])
    def test_sherman_morrison(self, n, rho):
        S = np.full((n, n), rho) + (1 - rho) * np.eye(n)
        V = innovation_matrix(S)
        prec = np.linalg.inv(S)
        for j in (0, n // 2, n - 1):
            assert prec[j, j] == pytest.approx(equal_corr_inverse_diag(n, rho), rel=1e-10)
            assert V[j, j] == pytest.approx(np.sqrt(equal_corr_inverse_diag(n, rho)), rel=1e-10)

    def test_unit_diagonal_and_inverse(self):
        rng = np.random.default_rng(4)
        S = random_corr(rng, 9)
        out = innovate(GaussianStatVector(rng.normal(size=9), S))
        np.testing.assert_allclose(np.diag(out.sigma.matrix()), 1.0, atol=1e-12)
        V = innovation_matrix(S)
        D = np.diag(V) / np.diag(np.linalg.inv(S))
        np.testing.assert_allclose(V @ S @ np.diag(1 / D), np.eye(9), atol=1e-10)


class TestBanded:
    def test_endpoints(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            n = 7
            S = random_corr(rng, n)
            v = GaussianStatVector(rng.normal(size=n), S, mu=rng.normal(size=n))
            full = banded_transform(v, n)
            it = innovate(v)
            np.testing.assert_allclose(full.t, it.t, atol=1e-10)
            np.testing.assert_allclose(full.mu, it.mu, atol=1e-10)
            one = banded_transform(v, 1)
            np.testing.assert_allclose(one.mu, decorrelate(v).mu, atol=1e-10)

    def test_matches_oracle(self):
        S = gen_correlation(CorrelationSpec.poly_decay(50, 1.0))
        for b in (1, 2, 3, 7, 20, 50):
            np.testing.assert_allclose(banded_matrix(S, b), banded_oracle(S, b), atol=1e-10)

    def test_figure_shape(self):
        n = 50
        S = gen_correlation(CorrelationSpec.poly_decay(n, 1.0))
        mu = np.zeros(n)
        mu[[15, 31, 47]] = 1.0
        curve = np.array([np.max(np.abs(banded_oracle(S, b) @ mu)) for b in range(1, n + 1)])
        got = np.array([snr_report(mu, S, TransformKind("banded", b))[1]
                        for b in range(1, n + 1)])
        np.testing.assert_allclose(got, curve, atol=1e-10)
        it = snr_report(mu, S, TransformKind("it"))[1]
        assert curve[-1] == pytest.approx(it, abs=1e-10)
        # rises from the DT value, then stays flat near the IT value
        assert curve[1] > curve[0]
        assert np.all(curve[1:] > curve[0])
        assert np.max(np.abs(curve[1:] / it - 1)) <= 0.005

    def test_bandwidth_domain(self):
        with pytest.raises(DomainError):
            banded_matrix(np.eye(3), 4)


class TestSnr:
    def test_zero(self):
        snr, m, j = snr_report(np.zeros(4), np.eye(4), TransformKind("it"))
        assert m == 0 and np.all(snr == 0)

    def test_chain(self):
        rng = np.random.default_rng(6)
        A = 1.3
        for _ in range(100):
            n = 8
            S = random_corr(rng, n)
            j = int(rng.integers(n))
            mu = np.zeros(n)
            mu[j] = A
            it_max = snr_report(mu, S, TransformKind("it"))[1]
            dt_j = snr_report(mu, S, TransformKind("dt"))[0][j]
            assert it_max >= dt_j - 1e-12
            assert dt_j >= A - 1e-12

    def test_three_signals(self):
        n = 50
        S = gen_correlation(CorrelationSpec.poly_decay(n, 1.0))
        mu = np.zeros(n)
        mu[[15, 31, 47]] = 1.0
        it = snr_report(mu, S, TransformKind("it"))[0]
        dt = snr_report(mu, S, TransformKind("dt"))[0]
        assert np.all(it[[15, 31, 47]] > dt[[15, 31, 47]])

    def test_kind_parse(self):
        assert TransformKind.parse("banded:5") == TransformKind("banded", 5)
        assert TransformKind.parse("IT").label == "it"
        with pytest.raises(DomainError):
            TransformKind.parse("banded:x")
        with pytest.raises(DomainError):
            TransformKind("banded")


class TestBivariate:
    def test_worked_example(self):
        m2, j2, ms = bivariate_snrs(-1.0, 1.0, 0.5)
        assert m2 == pytest.approx(0.5, abs=1e-15)
        assert j2 == pytest.approx(np.sqrt(0.75), abs=1e-15)
        assert ms == pytest.approx(0.0, abs=1e-15)

    @settings(max_examples=200, deadline=None)
    @given(rho=st.floats(-0.99, 0.99), b=st.floats(0.01, 5))
    def test_sparse_marginal_dominates(self, rho, b):
        m2, j2, ms = bivariate_snrs(0.0, b, rho)
        assert m2 == b
        assert m2 >= j2 and m2 >= ms - 1e-12

    @settings(max_examples=200, deadline=None)
    @given(rho=st.floats(-0.99, 0.99), b=st.floats(0.01, 5))
    def test_equal_effects_sum_best(self, rho, b):
        m2, j2, ms = bivariate_snrs(b, b, rho)
        assert ms == pytest.approx(b * np.sqrt(2) * np.sqrt(1 + rho), rel=1e-12)
        assert ms >= max(m2, j2) - 1e-12

    def test_rho_domain(self):
        with pytest.raises(DomainError):
            bivariate_snrs(1, 1, 1.0)


class TestDetectionBoundary:
    def test_values(self):
        assert detection_boundary(0.6) == pytest.approx(0.1, abs=1e-15)
        assert detection_boundary(0.96) == pytest.approx(0.64, abs=1e-12)
        assert detection_boundary(0.75) == pytest.approx(0.25, abs=1e-15)
        assert (1 - np.sqrt(1 - 0.75)) ** 2 == pytest.approx(0.25, abs=1e-15)

    def test_monotone(self):
        a = np.linspace(0.5, 1, 102)[1:-1]
        assert np.all(np.diff(detection_boundary(a)) > 0)

    def test_domain(self):
        for a in (0.5, 1.0, 0.2):
            with pytest.raises(DomainError):
                detection_boundary(a)
        with pytest.raises(DomainError):
            detection_boundary_glm(0.7, 0.0)

    def test_glm_scaling(self):
        assert detection_boundary_glm(0.6, 4.0) == pytest.approx(0.025)
