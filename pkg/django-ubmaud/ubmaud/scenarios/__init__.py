"""
Scenario registry for Monte-Carlo studies.

Provides the simulation designs as declarative dictionaries:
- gamma_recovery: finite-sample behaviour of gamma-hat
- relative_loss_g3: covariance accuracy and rejection rates, G=3
- relative_loss_g4: covariance accuracy and rejection rates, G=4
- misspecification: Wishart-perturbed outcome covariance
- null_calibration: type-1 error under the global null
"""
import copy
from typing import Dict

from .gamma_recovery import get_scenario as get_gamma_recovery
from .misspecification import get_scenario as get_misspecification
from .null_calibration import get_scenario as get_null_calibration
from .relative_loss import get_scenario_g3 as get_relative_loss_g3
from .relative_loss import get_scenario_g4 as get_relative_loss_g4
from ..exceptions import InvalidScenario

# Scenario registry
_SCENARIO_REGISTRY = {
    'gamma_recovery': get_gamma_recovery,
    'relative_loss_g3': get_relative_loss_g3,
    'relative_loss_g4': get_relative_loss_g4,
    'misspecification': get_misspecification,
    'null_calibration': get_null_calibration,
}

VALID_SCENARIOS = list(_SCENARIO_REGISTRY.keys())


def load_scenario(name: str) -> Dict:
    """
    Load a scenario dictionary by name.

    Args:
        name: Scenario identifier (e.g., 'gamma_recovery')

    Returns:
        A fresh copy of the scenario dictionary

    Raises:
        InvalidScenario: If the name is not registered

    Example:
        >>> load_scenario('gamma_recovery')['sizes']
        [30, 40, 60]
    """
    if name not in _SCENARIO_REGISTRY:
        raise InvalidScenario(
            f"Invalid scenario: '{name}'. Valid scenarios: {', '.join(VALID_SCENARIOS)}"
        )
    return copy.deepcopy(_SCENARIO_REGISTRY[name]())


def get_all_scenarios() -> Dict[str, Dict]:
    return {name: load_scenario(name) for name in VALID_SCENARIOS}


def is_valid_scenario(name: str) -> bool:
    return name in _SCENARIO_REGISTRY
