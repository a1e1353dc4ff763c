"""
Tests for the dense reference implementations and the validation suite.
"""
import numpy as np
import pytest

from ubmaud.blocks import PartitionVector, expand_dense
from ubmaud.oracles import (
    TOLERANCES,
    CheckResult,
    random_gamma,
    random_partition,
    random_ub,
    run_validation_suite,
    stacked_design,
)
from ubmaud.params import is_admissible


@pytest.mark.oracle
def test_validation_suite_small_scale_passes():
    """
    What we are testing: run_validation_suite('small') on a fixed seed
    Why we are testing: The validate command reports these results
    Expected Result: Every identity within its tolerance and exercised at least once
    """
    lines = []
    results = run_validation_suite('small', seed=0, progress=lines.append)

    assert [r.name for r in results] == list(TOLERANCES)
    failed = [(r.name, r.max_error) for r in results if not r.passed]
    assert failed == []
    assert all(r.count > 0 for r in results if r.name != 'det')
    assert lines == ['50 instances checked']


@pytest.mark.unit
def test_check_result_passed():
    assert CheckResult('mul', 1e-12, 1e-10, 3).passed
    assert not CheckResult('mul', 1e-9, 1e-10, 3).passed


@pytest.mark.unit
def test_random_generators(rng):
    part = random_partition(rng, max_groups=3, max_size=6)
    assert 1 <= part.G <= 3
    assert all(2 <= s <= 6 for s in part.sizes)
    m = random_ub(rng, part)
    assert np.linalg.eigvalsh(expand_dense(m))[0] > 0
    assert is_admissible(random_gamma(rng, part))


@pytest.mark.unit
def test_stacked_design_shape():
    X = np.arange(6.0).reshape(3, 2)
    stacked = stacked_design(X, 4)
    assert stacked.shape == (12, 8)
    np.testing.assert_array_equal(stacked[:4], np.kron(np.eye(4), X[0][None, :]))
    assert stacked[4 * 2 + 3, 3 * 2 + 1] == X[2, 1]


@pytest.mark.unit
def test_random_ub_indefinite_allowed(rng):
    part = PartitionVector((3, 4))
    m = random_ub(rng, part, positive_definite=False)
    np.testing.assert_allclose(expand_dense(m), expand_dense(m).T)
