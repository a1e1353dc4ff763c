"""
Covariance-accuracy scenarios.

n = 50 with three or four communities and R in {100, 150, 200}. The truth is
given through rho so the dependence strength stays comparable as the
community sizes grow. Compares the relative loss of the MAUD coefficient
covariance with the diagonal baseline and runs the FDR rejection study.
"""
from typing import Dict

_RHO_G3 = [0.55, -0.15, 0.12, 0.45, -0.10, 0.40]
_RHO_G4 = [0.50, 0.10, -0.08, 0.06, 0.40, 0.10, -0.05, 0.50, 0.08, 0.40]


def get_scenario_g3() -> Dict:
    return {
        "name": "relative_loss_g3",
        "description": "Relative loss and rejection rates, G=3",
        "sizes": [30, 30, 40],
        "rho": _RHO_G3,
        "p": 2,
        "n": 50,
        "seed": 20240302,
        "variants": [
            {"label": "R100", "sizes": [30, 30, 40]},
            {"label": "R150", "sizes": [45, 45, 60]},
            {"label": "R200", "sizes": [60, 60, 80]},
        ],
    }


def get_scenario_g4() -> Dict:
    return {
        "name": "relative_loss_g4",
        "description": "Relative loss and rejection rates, G=4",
        "sizes": [20, 30, 20, 30],
        "rho": _RHO_G4,
        "p": 2,
        "n": 50,
        "seed": 20240303,
        "variants": [
            {"label": "R100", "sizes": [20, 30, 20, 30]},
            {"label": "R150", "sizes": [30, 45, 30, 45]},
            {"label": "R200", "sizes": [40, 60, 40, 60]},
        ],
    }
