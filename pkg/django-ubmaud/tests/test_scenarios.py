"""
Unit tests for the scenario registry.

Tests scenario loading, validation, and configuration structure.
"""
import numpy as np
import pytest

from ubmaud.exceptions import InvalidScenario
from ubmaud.params import gamma_to_rho, is_admissible
from ubmaud.scenarios import VALID_SCENARIOS, get_all_scenarios, is_valid_scenario, load_scenario
from ubmaud.simulation import configs_from_dict


@pytest.mark.unit
def test_load_scenario_returns_valid_structure():
    """
    What we are testing: load_scenario() returns a complete scenario dictionary
    Why we are testing: The simulate command relies on a consistent format
    Expected Result: Dictionary with name, sizes and n
    """
    scenario = load_scenario('gamma_recovery')

    assert isinstance(scenario, dict)
    assert scenario['name'] == 'gamma_recovery'
    assert scenario['sizes'] == [30, 40, 60]
    assert scenario['gamma'] == [0.40, 0.01, -0.51, 0.19, -0.91, -0.64]


@pytest.mark.unit
def test_load_scenario_returns_copy():
    scenario = load_scenario('gamma_recovery')
    scenario['sizes'].append(10)

    assert load_scenario('gamma_recovery')['sizes'] == [30, 40, 60]


@pytest.mark.unit
def test_invalid_scenario_raises():
    """
    What we are testing: load_scenario() with an unknown name
    Why we are testing: Typos must not run a default study
    Expected Result: InvalidScenario listing the valid names
    """
    with pytest.raises(InvalidScenario) as exc_info:
        load_scenario('nonexistent')

    assert 'gamma_recovery' in str(exc_info.value)
    assert not is_valid_scenario('nonexistent')


@pytest.mark.unit
def test_all_scenarios_build_configs():
    """
    What we are testing: Every registered scenario expands into configs
    Why we are testing: A broken registry entry would only fail at run time
    Expected Result: Each variant gives an admissible truth
    """
    scenarios = get_all_scenarios()

    assert set(scenarios) == set(VALID_SCENARIOS)
    for name, spec in scenarios.items():
        configs = configs_from_dict(spec)
        assert configs, name
        for cfg in configs:
            assert is_admissible(cfg.gamma), cfg.name


@pytest.mark.unit
def test_relative_loss_variants_keep_rho():
    configs = configs_from_dict(load_scenario('relative_loss_g3'))

    assert [c.part.R for c in configs] == [100, 150, 200]
    for cfg in configs:
        np.testing.assert_allclose(gamma_to_rho(cfg.gamma).values, [0.55, -0.15, 0.12, 0.45, -0.10, 0.40], rtol=1e-12)


@pytest.mark.unit
def test_misspecification_noise_levels():
    configs = configs_from_dict(load_scenario('misspecification'))

    assert [c.noise_level for c in configs] == [0.0, 0.03, 0.06, 0.09]


@pytest.mark.unit
def test_null_calibration_is_global_null():
    cfg = configs_from_dict(load_scenario('null_calibration'))[0]

    assert np.all(cfg.true_beta == 0.0)
    assert np.all(cfg.gamma.values == 0.0)
