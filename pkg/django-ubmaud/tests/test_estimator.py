"""
Tests for the two-stage estimator: OLS, Fisher scoring and the fit result.
"""
import numpy as np
import pytest

from ubmaud.blocks import PartitionVector, expand_dense
from ubmaud.exceptions import DimensionMismatch, InadmissibleStart, NotConverged, RankDeficient
from ubmaud.estimator import (
    Dataset,
    FitOptions,
    beta_score,
    estimate_gamma,
    fgls_fit,
    fisher_scoring,
    fit,
    gls_dense,
    moment_start,
    ols_fit,
)
from ubmaud.likelihood import block_summaries, log_likelihood, score, score_floor
from ubmaud.oracles import random_gamma, stacked_gls
from ubmaud.params import GammaVector, gamma_to_omega, is_admissible
from ubmaud.simulation import ScenarioConfig, sample_dataset


def make_config(sizes, gamma, n, seed=11, p=2, **kwargs):
    part = PartitionVector(sizes)
    return ScenarioConfig(
        name='test', part=part, gamma=GammaVector(gamma, part), n=n, p=p, replicates=1, seed=seed, **kwargs
    )


@pytest.fixture
def reference_data(reference_gamma):
    cfg = ScenarioConfig(
        name='reference', part=reference_gamma.part, gamma=reference_gamma, n=300, replicates=1, seed=5
    )
    return cfg, sample_dataset(cfg, 0)


@pytest.fixture
def small_summaries():
    data = sample_dataset(make_config((3, 4), [0.1, 0.03, 0.08], n=60, seed=6), 0)
    _, residuals = ols_fit(data)
    return block_summaries(residuals, data.part)


@pytest.mark.unit
class TestDataset:
    def test_partition_total_checked(self, rng):
        """
        What we are testing: Y columns must equal the partition total
        Why we are testing: Community blocks would be misaligned otherwise
        Expected Result: DimensionMismatch naming both counts
        """
        with pytest.raises(DimensionMismatch) as exc_info:
            Dataset(rng.standard_normal((20, 2)), rng.standard_normal((20, 5)), (2, 4))
        assert 'partition sums to 6 but Y has 5 columns' in str(exc_info.value)

    def test_rank_deficient_design(self, rng):
        x = rng.standard_normal((20, 1))
        with pytest.raises(RankDeficient):
            Dataset(np.hstack([x, 2.0 * x]), rng.standard_normal((20, 5)), (2, 3))

    def test_names_length(self, rng):
        with pytest.raises(DimensionMismatch):
            Dataset(rng.standard_normal((20, 2)), rng.standard_normal((20, 5)), (2, 3), feature_names=('a',))


@pytest.mark.unit
class TestOls:
    def test_exact_recovery(self, rng):
        """
        What we are testing: Y = X B^T with no noise
        Why we are testing: OLS must reproduce the coefficients exactly
        Expected Result: beta = B and residuals numerically zero
        """
        X = np.column_stack([np.ones(30), rng.standard_normal((30, 2))])
        B = rng.standard_normal((7, 3))
        beta, residuals = ols_fit(Dataset(X, X @ B.T, (3, 4)))
        np.testing.assert_allclose(beta, B, atol=1e-12)
        assert np.max(np.abs(residuals)) < 1e-12

    def test_intercept_only(self, rng):
        Y = rng.standard_normal((25, 5))
        beta, _ = ols_fit(Dataset(np.ones((25, 1)), Y, (2, 3)))
        np.testing.assert_allclose(beta[:, 0], Y.mean(axis=0), atol=1e-12)

    @pytest.mark.oracle
    def test_matches_stacked_normal_equations(self, rng):
        part = PartitionVector((2, 3))
        X = np.column_stack([np.ones(15), rng.standard_normal((15, 1))])
        Y = rng.standard_normal((15, 5))
        beta, _ = ols_fit(Dataset(X, Y, part))
        np.testing.assert_allclose(beta, stacked_gls(X, Y, np.eye(5)), atol=1e-10)


@pytest.mark.unit
class TestFisherScoring:
    def test_converges_to_stationary_point(self, reference_data):
        """
        What we are testing: Fisher scoring on one replicate of the reference design
        Why we are testing: The optimum must satisfy the score equation and be a local maximum
        Expected Result: ||score||_inf below the tolerance reported as met, and no random
                         perturbation of radius 0.01 does better
        """
        cfg, data = reference_data
        _, residuals = ols_fit(data)
        s = block_summaries(residuals, data.part)
        gamma, diag = estimate_gamma(s, FitOptions())
        assert diag.converged
        assert np.max(np.abs(score(gamma, s))) < diag.tolerance
        assert diag.tolerance == pytest.approx(1e-8) or diag.tolerance == pytest.approx(score_floor(gamma, s))
        best = log_likelihood(gamma, s)
        rng = np.random.default_rng(0)
        for _ in range(100):
            step = rng.standard_normal(gamma.values.size)
            step *= 0.01 / np.linalg.norm(step)
            other = GammaVector(gamma.values + step, gamma.part)
            if is_admissible(other):
                assert log_likelihood(other, s) <= best + 1e-9 * abs(best)

    def test_estimate_near_truth(self, reference_data):
        """
        What we are testing: gamma-hat for a fixture generated at the reference gamma, n = 300
        Why we are testing: The estimator should land within sampling error of the truth
        Expected Result: |gamma-hat - gamma| < 4 SE componentwise
        """
        cfg, data = reference_data
        result = fit(data)
        assert np.all(np.abs(result.gamma.values - cfg.gamma.values) < 4.0 * result.gamma_se)
        assert np.all(result.gamma_se > 0)

    def test_zero_start_and_moment_start_agree(self):
        """
        What we are testing: Scoring from the moment start and from gamma = 0
        Why we are testing: With a positive definite I - Upsilon both starts share one basin
        Expected Result: Same optimum within 1e-6
        """
        data = sample_dataset(make_config((4, 5, 6), [0.05, 0.01, -0.02, 0.04, 0.02, 0.03], n=200), 0)
        _, residuals = ols_fit(data)
        s = block_summaries(residuals, data.part)
        from_moment, _ = fisher_scoring(s, moment_start(s), FitOptions())
        from_zero, _ = fisher_scoring(s, GammaVector.zeros(data.part), FitOptions())
        np.testing.assert_allclose(from_moment.values, from_zero.values, atol=1e-6)

    def test_inadmissible_start(self, rng):
        part = PartitionVector((3,))
        s = block_summaries(rng.standard_normal((20, 3)), part)
        with pytest.raises(InadmissibleStart):
            fisher_scoring(s, GammaVector([-1.0], part))

    def test_small_problem_meets_absolute_tolerance(self, small_summaries):
        """
        What we are testing: Fisher scoring where round-off is far below 1e-8
        Why we are testing: The rounding floor must not replace the absolute tolerance
                            when the absolute tolerance is reachable
        Expected Result: ||score||_inf < 1e-8 with precision_limited False
        """
        s = small_summaries
        gamma, diag = fisher_scoring(s, GammaVector.zeros(s.part), FitOptions())
        assert diag.converged
        assert not diag.precision_limited
        assert diag.tolerance == 1e-8
        assert np.max(np.abs(score(gamma, s))) < 1e-8

    def test_stall_above_floor_raises(self, small_summaries):
        """
        What we are testing: A tolerance of zero with the rounding floor switched off
        Why we are testing: A stalled iterate must never be reported as converged
        Expected Result: NotConverged carrying the last iterate
        """
        s = small_summaries
        with pytest.raises(NotConverged) as exc_info:
            fisher_scoring(s, GammaVector.zeros(s.part), FitOptions(tol=0.0, score_rtol=0.0))
        assert exc_info.value.gamma.shape == (3,)
        assert exc_info.value.score_norm >= 0.0

    def test_precision_limited_is_reported(self, small_summaries):
        """
        What we are testing: A tolerance of zero with the default rounding floor
        Why we are testing: Large problems bottom out at round-off; the diagnostics must say so
        Expected Result: converged with precision_limited True and score norm below the floor
        """
        s = small_summaries
        gamma, diag = fisher_scoring(s, GammaVector.zeros(s.part), FitOptions(tol=0.0))
        assert diag.converged
        assert diag.precision_limited
        assert diag.tolerance == pytest.approx(score_floor(gamma, s))
        assert diag.score_norm < diag.tolerance
        assert diag.to_dict()['precision_limited'] is True

    def test_not_converged_carries_iterate(self, reference_data):
        """
        What we are testing: max_iter = 1 with a tight tolerance
        Why we are testing: Callers need the last iterate when scoring stops early
        Expected Result: NotConverged with gamma, score_norm and iterations set
        """
        _, data = reference_data
        _, residuals = ols_fit(data)
        s = block_summaries(residuals, data.part)
        options = FitOptions(max_iter=1, tol=1e-14)
        with pytest.raises(NotConverged) as exc_info:
            fisher_scoring(s, GammaVector.zeros(data.part), options)
        assert exc_info.value.iterations == 1
        assert exc_info.value.gamma.shape == (6,)
        assert exc_info.value.score_norm > 0

    def test_null_model(self):
        """
        What we are testing: Data generated at gamma = 0 with a large sample
        Why we are testing: The estimate should be within sampling noise of zero
        Expected Result: |gamma-hat_j| < 4 SE_j
        """
        cfg = make_config((4, 5, 6), [0.0] * 6, n=2000, seed=3)
        result = fit(sample_dataset(cfg, 0))
        assert np.all(np.abs(result.gamma.values) < 4.0 * result.gamma_se)

    def test_user_start_option(self, reference_data):
        _, data = reference_data
        base = fit(data)
        again = fit(data, FitOptions(start=base.gamma))
        assert again.diagnostics.start == 'user'
        np.testing.assert_allclose(again.gamma.values, base.gamma.values, atol=1e-6)


@pytest.mark.unit
class TestFit:
    def test_standard_errors_match_dense_kronecker(self, rng):
        """
        What we are testing: SE(beta_rq) = sqrt(Sigma_rr [(X^T X)^-1]_qq)
        Why we are testing: Standard errors are read from the factored covariance
        Expected Result: Equal to the diagonal of the dense Kronecker product
        """
        cfg = make_config((2, 3), [0.1, 0.05, 0.1], n=80)
        result = fit(sample_dataset(cfg, 0))
        dense = np.kron(expand_dense(result.sigma), result.beta_cov.right)
        np.testing.assert_allclose(result.beta_se.ravel(), np.sqrt(np.diag(dense)), rtol=1e-12)

    def test_zero_noise(self, rng):
        """
        What we are testing: A fit on noise-free data
        Why we are testing: Degenerate but defined; must not crash
        Expected Result: Exact beta, gamma at the zero start, degenerate flag set
        """
        X = np.column_stack([np.ones(40), rng.standard_normal(40)])
        B = rng.standard_normal((5, 2))
        result = fit(Dataset(X, X @ B.T, (2, 3)))
        np.testing.assert_allclose(result.beta, B, atol=1e-12)
        assert result.diagnostics.degenerate
        assert np.all(result.gamma.values == 0.0)

    def test_rho_standard_errors(self, reference_data):
        _, data = reference_data
        result = fit(data)
        scale = np.array([29.0, np.sqrt(29 * 39), np.sqrt(29 * 59), 39.0, np.sqrt(39 * 59), 59.0])
        np.testing.assert_allclose(result.rho_se, scale * result.gamma_se, rtol=1e-12)

    def test_diagnostics_recorded(self, reference_data):
        _, data = reference_data
        result = fit(data)
        diag = result.diagnostics
        assert diag.fisher_eigenvalues[0] > 0
        assert diag.sigma_eigen_range[0] > 0
        assert set(diag.to_dict()) >= {'iterations', 'score_norm', 'log_likelihood', 'start'}


@pytest.mark.oracle
class TestGlsEquivalence:
    def test_gls_equals_ols_on_instances(self):
        """
        What we are testing: Dense FGLS with the fitted Omega on 20 small instances
        Why we are testing: Under a Kronecker covariance GLS and FGLS coincide with OLS
        Expected Result: Max abs difference below 1e-8
        """
        rng = np.random.default_rng(7)
        for k in range(20):
            sizes = tuple(int(s) for s in rng.integers(2, 5, size=int(rng.integers(1, 4))))
            part = PartitionVector(sizes)
            p = int(rng.integers(1, 4))
            cfg = ScenarioConfig(
                name='gls', part=part, gamma=random_gamma(rng, part, strength=0.3),
                n=int(rng.integers(30, 61)), p=p, replicates=1, seed=k,
            )
            data = sample_dataset(cfg, 0)
            result = fit(data)
            beta = gls_dense(data, result.omega)
            assert np.max(np.abs(beta - result.beta)) < 1e-8
            np.testing.assert_allclose(
                beta, stacked_gls(data.X, data.Y, expand_dense(result.omega)), atol=1e-8
            )

    def test_fgls_iteration(self):
        cfg = make_config((4, 6), [0.05, 0.02, 0.03], n=40, p=2)
        data = sample_dataset(cfg, 0)
        beta, gamma, iterations = fgls_fit(data)
        np.testing.assert_allclose(beta, ols_fit(data)[0], atol=1e-8)
        assert iterations >= 1
        result = fit(data, FitOptions(fgls_check=True))
        assert result.fgls['max_abs_difference'] < 1e-8

    def test_beta_score_vanishes(self):
        """
        What we are testing: Coefficient score at the OLS solution
        Why we are testing: Joint stationarity of (beta-hat, gamma-hat)
        Expected Result: Zero within 1e-6 for the fitted Omega and for an arbitrary one
        """
        cfg = make_config((3, 4), [0.1, 0.02, 0.05], n=60, p=3)
        data = sample_dataset(cfg, 0)
        result = fit(data)
        assert np.max(np.abs(beta_score(data, result.beta, result.omega))) < 1e-6
        other = gamma_to_omega(GammaVector([0.2, -0.05, 0.1], data.part))
        assert np.max(np.abs(beta_score(data, result.beta, other))) < 1e-6
        shifted = result.beta + 0.1
        assert np.max(np.abs(beta_score(data, shifted, result.omega))) > 1e-3
