"""
Tests for the Monte-Carlo harness: data generation, scenario parsing and
worker-independent aggregation.
"""
import dataclasses

import numpy as np
import pandas as pd
import pytest

from ubmaud import simulation
from ubmaud.algebra import ub_apply
from ubmaud.blocks import PartitionVector, UniformBlockMatrix
from ubmaud.exceptions import InadmissibleGamma, InvalidScenario
from ubmaud.params import GammaVector, RhoVector, i_minus_upsilon, rho_to_gamma
from ubmaud.simulation import (
    ScenarioConfig,
    configs_from_dict,
    draw_replicate,
    perturb_covariance,
    random_stream,
    run_replicate,
    run_study,
    sample_dataset,
)


def small_config(**kwargs):
    part = PartitionVector((3, 4))
    defaults = dict(name='small', part=part, gamma=GammaVector([0.1, 0.03, 0.08], part), n=40, replicates=4, seed=2)
    defaults.update(kwargs)
    return ScenarioConfig(**defaults)


@pytest.mark.unit
class TestDataGeneration:
    def test_replicates_are_reproducible(self):
        """
        What we are testing: Dataset for (seed, replicate index)
        Why we are testing: Replicate k must not depend on worker scheduling
        Expected Result: Bit-identical X and Y on repeat; different replicates differ
        """
        cfg = small_config()
        first = sample_dataset(cfg, 3)
        again = sample_dataset(cfg, 3)
        np.testing.assert_array_equal(first.X, again.X)
        np.testing.assert_array_equal(first.Y, again.Y)
        other = sample_dataset(cfg, 4)
        assert not np.array_equal(first.Y, other.Y)

    def test_design_has_intercept(self):
        data = sample_dataset(small_config(p=3), 0)
        assert data.X.shape == (40, 3)
        np.testing.assert_array_equal(data.X[:, 0], 1.0)

    def test_null_errors_are_white(self):
        """
        What we are testing: Errors generated at gamma = 0 with beta = 0
        Why we are testing: Sigma = I in that case
        Expected Result: Sample covariance within 0.05 of the identity at n = 20000
        """
        part = PartitionVector((3, 4))
        cfg = ScenarioConfig(name='null', part=part, gamma=GammaVector.zeros(part), n=20000, beta_mode='zero', seed=1)
        Y = sample_dataset(cfg, 0).Y
        cov = Y.T @ Y / cfg.n
        assert np.max(np.abs(cov - np.eye(7))) < 0.05

    def test_reference_design_errors(self, reference_gamma):
        """
        What we are testing: Errors drawn for the reference three-community design
        Why we are testing: (I - Upsilon) e must be standard normal
        Expected Result: Whitened sample covariance within 0.1 of I at n = 5000
        """
        cfg = ScenarioConfig(
            name='reference', part=reference_gamma.part, gamma=reference_gamma, n=5000, beta_mode='zero', seed=4
        )
        Y = sample_dataset(cfg, 0).Y
        white = ub_apply(i_minus_upsilon(reference_gamma), Y.T).T
        cov = white.T @ white / cfg.n
        assert np.max(np.abs(cov - np.eye(130))) < 0.1

    def test_truth_is_ub_without_noise(self):
        cfg = small_config()
        _, truth = draw_replicate(cfg, 0)
        assert isinstance(truth, UniformBlockMatrix)
        noisy = small_config(noise_level=0.03)
        _, dense_truth = draw_replicate(noisy, 0)
        assert dense_truth.shape == (7, 7)
        np.testing.assert_allclose(dense_truth, dense_truth.T)

    def test_sparse_beta(self):
        cfg = ScenarioConfig(
            name='beta', part=PartitionVector((10, 20)), gamma=GammaVector.zeros((10, 20)), n=50, seed=8
        )
        beta = cfg.true_beta
        nonzero_rows = np.any(beta != 0.0, axis=1)
        assert nonzero_rows[:10].sum() == 3
        assert nonzero_rows[10:].sum() == 6
        values = np.abs(beta[nonzero_rows])
        assert np.all((values >= 0.5) & (values <= 1.5))
        np.testing.assert_array_equal(beta, dataclasses.replace(cfg).true_beta)


@pytest.mark.unit
class TestPerturbation:
    def test_wishart_mean(self):
        """
        What we are testing: Mean of E = sigma * M^T M over 500 draws, R = 100
        Why we are testing: E[M^T M] = R I for standard normal M
        Expected Result: Diagonal within 10% of 0.03 * 100, off-diagonal near zero
        """
        part = PartitionVector((50, 50))
        sigma = UniformBlockMatrix.identity(part)
        rng = random_stream(0, 9)
        total = np.zeros((100, 100))
        for _ in range(500):
            total += perturb_covariance(sigma, 0.03, rng) - np.eye(100)
        mean = total / 500
        np.testing.assert_allclose(np.diag(mean), 3.0, rtol=0.1)
        off = mean - np.diag(np.diag(mean))
        assert np.max(np.abs(off)) < 0.3

    def test_rejects_non_positive_noise(self, rng):
        with pytest.raises(InvalidScenario):
            perturb_covariance(UniformBlockMatrix.identity(PartitionVector((2,))), 0.0, rng)


@pytest.mark.unit
class TestScenarioConfig:
    def test_sample_size_check(self):
        with pytest.raises(InvalidScenario):
            small_config(n=3)

    def test_inadmissible_truth(self):
        part = PartitionVector((3,))
        with pytest.raises(InadmissibleGamma):
            ScenarioConfig(name='bad', part=part, gamma=GammaVector([-1.0], part), n=20)

    def test_partition_mismatch(self):
        with pytest.raises(InvalidScenario):
            ScenarioConfig(name='bad', part=PartitionVector((3, 3)), gamma=GammaVector.zeros((2, 4)), n=20)

    def test_default_replicates_from_settings(self):
        part = PartitionVector((3,))
        cfg = ScenarioConfig(name='default', part=part, gamma=GammaVector.zeros(part), n=20)
        assert cfg.replicates == 20


@pytest.mark.unit
class TestConfigsFromDict:
    def test_variants_expand(self):
        """
        What we are testing: A scenario with three labelled variants
        Why we are testing: Studies sweep n or sizes from one declaration
        Expected Result: Three configs with suffixed names and overridden fields
        """
        configs = configs_from_dict({
            'name': 'sweep',
            'sizes': [3, 4],
            'gamma': [0.1, 0.0, 0.1],
            'n': 30,
            'variants': [{'label': 'a'}, {'label': 'b', 'n': 60}, {'label': 'c', 'sizes': [4, 4]}],
        })
        assert [c.name for c in configs] == ['sweep-a', 'sweep-b', 'sweep-c']
        assert configs[1].n == 60
        assert configs[2].part.sizes == (4, 4)

    def test_rho_truth(self):
        cfg = configs_from_dict({'sizes': [5, 5], 'rho': [0.4, 0.1, 0.4], 'n': 30})[0]
        expected = rho_to_gamma(RhoVector([0.4, 0.1, 0.4], cfg.part))
        np.testing.assert_allclose(cfg.gamma.values, expected.values)

    def test_gamma_defaults_to_zero(self):
        cfg = configs_from_dict({'sizes': [2, 3], 'n': 30})[0]
        assert np.all(cfg.gamma.values == 0.0)

    def test_given_beta(self):
        beta = [[1.0, 0.0]] * 5
        cfg = configs_from_dict({'sizes': [2, 3], 'n': 30, 'beta': beta})[0]
        assert cfg.beta_mode == 'given'
        np.testing.assert_array_equal(cfg.true_beta, np.array(beta))

    @pytest.mark.parametrize('spec', [
        {'sizes': [2, 3]},
        {'n': 30},
        {'sizes': [2, 3], 'n': 30, 'gamma': [0.1], 'rho': [0.1]},
        {'sizes': [2, 3], 'n': 30, 'gamma': [0.1, 0.2]},
        {'sizes': [2, 3], 'n': 30, 'beta': 'dense'},
        {'sizes': [2, 3], 'n': 30, 'beta': [[1.0]]},
        {'sizes': [2, 3], 'n': 30, 'noise_level': -1.0},
    ])
    def test_invalid_specs(self, spec):
        with pytest.raises(InvalidScenario):
            configs_from_dict(spec)


@pytest.mark.unit
class TestRunStudy:
    def test_report_contents(self):
        report = run_study(small_config(), workers=1)
        assert report.successes + report.failures == 4
        assert [s.label for s in report.parameters] == ['gamma_11', 'gamma_12', 'gamma_22']
        assert set(report.losses) == {'maud', 'diagonal'}
        assert set(report.rejection) == {'maud', 'diagonal', 'true'}
        frame = report.replicate_frame()
        assert list(frame['replicate']) == [0, 1, 2, 3]
        assert 'loss_maud_frobenius' in frame.columns
        assert report.runtime['workers'] == 1

    def test_worker_count_does_not_change_results(self):
        """
        What we are testing: The same study with one and with two workers
        Why we are testing: Per-replicate random streams make results schedule-free
        Expected Result: Identical reports apart from runtime
        """
        cfg = small_config()
        serial = run_study(cfg, workers=1)
        parallel = run_study(cfg, workers=2)
        left = serial.to_dict()
        right = parallel.to_dict()
        left.pop('runtime')
        right.pop('runtime')
        assert left == right
        pd.testing.assert_frame_equal(serial.replicate_frame(), parallel.replicate_frame())

    def test_replicates_record_losses(self):
        report = run_study(small_config(replicates=2), workers=1)
        for rec in report.records:
            assert rec.ok
            assert rec.losses['maud']['frobenius'] >= 0.0
            assert rec.losses['diagonal']['spectral'] >= 0.0

    def test_linear_algebra_failure_is_recorded(self, monkeypatch):
        """
        What we are testing: A replicate whose fit raises numpy's LinAlgError
        Why we are testing: One singular replicate must not abort a whole study
        Expected Result: The replicate is recorded as failed and counted in the report
        """
        real_fit = simulation.fit
        calls = []

        def flaky_fit(data, options=None):
            calls.append(1)
            if len(calls) == 2:
                raise np.linalg.LinAlgError('Singular matrix')
            return real_fit(data, options)

        monkeypatch.setattr(simulation, 'fit', flaky_fit)
        report = run_study(small_config(), workers=1)
        assert report.failures == 1
        assert report.successes == 3
        failed = [rec for rec in report.records if not rec.ok]
        assert failed[0].index == 1
        assert 'Singular matrix' in failed[0].message

    def test_single_replicate_catches_linalg_error(self, monkeypatch):
        def singular_fit(data, options=None):
            raise np.linalg.LinAlgError('Singular matrix')

        monkeypatch.setattr(simulation, 'fit', singular_fit)
        rec = run_replicate(small_config(), 0)
        assert not rec.ok
        assert rec.gamma_hat is None
