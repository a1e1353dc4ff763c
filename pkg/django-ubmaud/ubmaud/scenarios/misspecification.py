"""
Misspecified-covariance scenario.

The outcome covariance is the MAUD Sigma plus a Wishart perturbation
noise_level * M^T M; the relative loss should grow with the noise level.
"""
from typing import Dict

from .relative_loss import _RHO_G3


def get_scenario() -> Dict:
    return {
        "name": "misspecification",
        "description": "Relative loss under a Wishart perturbation of Sigma",
        "sizes": [30, 30, 40],
        "rho": _RHO_G3,
        "p": 2,
        "n": 50,
        "seed": 20240304,
        "variants": [
            {"label": "sigma0", "noise_level": 0.0},
            {"label": "sigma0.03", "noise_level": 0.03},
            {"label": "sigma0.06", "noise_level": 0.06},
            {"label": "sigma0.09", "noise_level": 0.09},
        ],
    }
