"""Global null (beta = 0, gamma = 0) for type-1 error calibration."""
from typing import Dict


def get_scenario() -> Dict:
    return {
        "name": "null_calibration",
        "description": "Per-test type-1 error under the global null",
        "sizes": [10, 10, 10],
        "gamma": [0.0] * 6,
        "beta": "zero",
        "p": 2,
        "n": 100,
        "replicates": 50,
        "seed": 20240305,
    }
