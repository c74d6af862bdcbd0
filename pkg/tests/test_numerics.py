import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jointcrm.joint import generation_correlation
from jointcrm.numerics import (
    NotPositiveDefinite,
    RngStream,
    cholesky,
    condition_gaussian,
    normal_cdf,
    normal_quantile,
    sample_mvn,
)


def bisect_quantile(p, lo=-10.0, hi=10.0, iters=200):
    """Independent quantile oracle: bisection on normal_cdf."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if normal_cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestNormalCdf:
    def test_symmetry_at_zero(self):
        assert normal_cdf(0.0) == 0.5

    def test_reference_values(self):
        # reference-dose probabilities quoted for fixed intercepts 0.5 and 3
        assert abs(normal_cdf(0.5) - 0.691) <= 5e-4
        assert abs(normal_cdf(3.0) - 0.998) <= 1e-3

    def test_matches_erfc_expansion(self):
        zs = np.linspace(-8, 8, 1601)
        ref = np.array([0.5 * math.erfc(-z / math.sqrt(2)) for z in zs])
        assert np.max(np.abs(normal_cdf(zs) - ref)) <= 1e-12

    def test_monotone_and_tail_saturation(self):
        zs = np.linspace(-40, 40, 2001)
        vals = normal_cdf(zs)
        assert np.all(np.diff(vals) >= 0)
        assert normal_cdf(-40.0) == 0.0
        assert normal_cdf(40.0) == 1.0


class TestNormalQuantile:
    def test_median(self):
        assert normal_quantile(0.5) == 0.0

    def test_paper_roundtrip_value(self):
        # latent 0.46 prints as profile 0.68 at two decimals
        assert abs(normal_quantile(0.68) - 0.468) <= 5e-4

    def test_against_bisection_oracle(self):
        assert abs(normal_quantile(0.25) - (-0.6745)) <= 1e-4
        for p in (0.01, 0.25, 0.4, 0.77, 0.999):
            assert abs(normal_quantile(p) - bisect_quantile(p)) <= 1e-9

    def test_roundtrip_error_bound(self):
        grid = np.concatenate(
            [np.logspace(-8, -1, 30), np.linspace(0.1, 0.9, 30), 1 - np.logspace(-8, -1, 30)]
        )
        err = np.abs(normal_cdf(normal_quantile(grid)) - grid)
        assert np.max(err) <= 1e-10

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.2, 1.5])
    def test_domain_errors(self, bad):
        with pytest.raises(ValueError):
            normal_quantile(bad)


class TestCholesky:
    def test_identity(self):
        assert np.allclose(cholesky(np.eye(2)), np.eye(2))

    def test_two_by_two_closed_form(self):
        factor = cholesky([[1.0, 0.4], [0.4, 1.0]])
        expected = [[1.0, 0.0], [0.4, math.sqrt(1 - 0.16)]]
        assert np.allclose(factor, expected, atol=1e-12)
        assert abs(factor[1][1] - 0.9165) < 1e-4

    def test_reconstruction(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=(6, 6))
        spd = a @ a.T + 6 * np.eye(6)
        factor = cholesky(spd)
        assert np.allclose(factor @ factor.T, spd, rtol=1e-10)

    def test_invalid_latent_correlation_rejected(self):
        # strong outcome correlation with weak serial correlation is infeasible
        bad = generation_correlation(0.99, 0.1)
        assert np.linalg.eigvalsh(bad).min() < 0  # independent oracle
        with pytest.raises(NotPositiveDefinite):
            cholesky(bad)

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            cholesky([[1.0, 0.2], [0.3, 1.0]])


class TestConditionGaussian:
    def test_zero_cross_covariance(self):
        cov = np.diag([2.0, 3.0, 4.0])
        cond = condition_gaussian(cov, 2, [0, 1])
        assert np.allclose(cond.coefficients, 0.0)
        assert cond.conditional_variance == pytest.approx(4.0)

    def test_bivariate_schur_by_hand(self):
        rho_b, sigma_c = 0.35, 1.7
        cov = np.array([[sigma_c**2, -rho_b * sigma_c], [-rho_b * sigma_c, 1.0]])
        cond = condition_gaussian(cov, 1, [0])
        assert cond.coefficients[0] == pytest.approx(-rho_b / sigma_c, abs=1e-12)
        assert cond.conditional_variance == pytest.approx(1 - rho_b**2, abs=1e-12)

    def test_nine_dim_last_coefficient_closed_form(self):
        from jointcrm.joint import model_covariance

        rho_b = rho_c = 0.4
        sigma_c = 1.0
        cond = condition_gaussian(model_covariance(rho_b, rho_c, sigma_c), 8, range(8))
        closed = -(-rho_b + rho_b**2 * rho_c) / (sigma_c * (rho_c**2 - 1.0))
        assert cond.coefficients[-1] == pytest.approx(closed, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(min_value=0, max_value=10_000))
    def test_conditional_variance_bounded(self, seed):
        rng = np.random.default_rng(seed)
        dim = int(rng.integers(2, 7))
        a = rng.normal(size=(dim, dim))
        spd = a @ a.T + dim * np.eye(dim)
        target = int(rng.integers(0, dim))
        given_idx = [i for i in range(dim) if i != target]
        cond = condition_gaussian(spd, target, given_idx)
        assert 0.0 <= cond.conditional_variance <= spd[target, target] + 1e-12


class TestRngAndSampling:
    def test_identical_streams_reproduce(self):
        a = RngStream(123, 7).standard_normal(16)
        b = RngStream(123, 7).standard_normal(16)
        assert a.tobytes() == b.tobytes()

    def test_distinct_streams_differ(self):
        a = RngStream(123, 7).standard_normal(16)
        b = RngStream(123, 8).standard_normal(16)
        c = RngStream(124, 7).standard_normal(16)
        assert not np.allclose(a, b)
        assert not np.allclose(a, c)

    def test_sample_mvn_deterministic(self):
        cov = np.eye(3)
        x = sample_mvn(np.zeros(3), cov, RngStream(5))
        y = sample_mvn(np.zeros(3), cov, RngStream(5))
        assert x.tobytes() == y.tobytes()

    def test_sample_mvn_ar1_lag_correlation(self):
        from jointcrm.joint import ar1_covariance

        cov = ar1_covariance(1.0, 0.4, 4)
        draws = sample_mvn(np.zeros(4), cov, RngStream(11), size=100_000)
        lag1 = np.corrcoef(draws[:, 0], draws[:, 1])[0, 1]
        assert abs(lag1 - 0.4) <= 0.01

    def test_sample_mvn_mean_shift(self):
        mean = np.array([4.0, -2.0])
        draws = sample_mvn(mean, np.eye(2), RngStream(3), size=50_000)
        se = 3.0 / math.sqrt(50_000)
        assert np.all(np.abs(draws.mean(axis=0) - mean) <= 3 * se)

    def test_sample_mvn_requires_positive_definite(self):
        with pytest.raises(NotPositiveDefinite):
            sample_mvn(np.zeros(2), [[1.0, 2.0], [2.0, 1.0]], RngStream(0))
