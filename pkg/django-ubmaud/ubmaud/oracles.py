"""
Dense and finite-difference reference implementations.

These materialize R x R (or nR x Rp) matrices and are only meant for small
problems: the ``validate`` command and the test-suite compare every closed
form in the package against them.
"""
import logging
import time
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from . import algebra
from .blocks import PartitionVector, UniformBlockMatrix, expand_dense, extract_ub
from .exceptions import MaudNumericalError
from .likelihood import LOG_2PI, BlockSummaries, block_summaries, log_likelihood, omega_partials, score
from .params import (
    GammaVector,
    RhoVector,
    gamma_to_omega,
    i_minus_upsilon,
    is_admissible,
    omega_to_sigma,
    rho_to_gamma,
    sigma_to_gamma,
)

logger = logging.getLogger(__name__)

SCALES = {
    'small': {'instances': 50, 'max_groups': 4, 'max_size': 12},
    'large': {'instances': 500, 'max_groups': 5, 'max_size': 60},
}


def random_partition(rng: np.random.Generator, max_groups: int = 5, max_size: int = 60) -> PartitionVector:
    G = int(rng.integers(1, max_groups + 1))
    return PartitionVector(tuple(int(s) for s in rng.integers(2, max_size + 1, size=G)))


def random_ub(rng: np.random.Generator, part: PartitionVector, positive_definite: bool = True) -> UniformBlockMatrix:
    """Random UB matrix; positive definite ones have a PSD B and a positive A."""
    G = part.G
    if positive_definite:
        a = rng.uniform(0.5, 2.0, size=G)
        m = rng.standard_normal((G, G))
        b = (m @ m.T) / (G * np.sqrt(part.R))
    else:
        a = rng.uniform(0.5, 2.0, size=G) * rng.choice((-1.0, 1.0), size=G)
        m = rng.uniform(-1.0, 1.0, size=(G, G)) / np.sqrt(part.R)
        b = m + m.T
    return UniformBlockMatrix(a, b, part)


def random_gamma(rng: np.random.Generator, part: PartitionVector, strength: float = 0.6) -> GammaVector:
    """
    Random gamma with I - Upsilon positive definite.

    Draws rho and rescales it; the diagonal of rho stays below ``strength``
    and each off-diagonal row sum below the matching diagonal margin.
    """
    G = part.G
    while True:
        diag = rng.uniform(-strength, strength, size=G)
        off = rng.uniform(-1.0, 1.0, size=(G, G))
        off = (off + off.T) / 2.0
        np.fill_diagonal(off, 0.0)
        margin = 1.0 - diag
        limit = 0.5 * margin.min() / max(G - 1, 1)
        off *= limit
        rho = off.copy()
        np.fill_diagonal(rho, diag)
        gamma = rho_to_gamma(RhoVector.from_matrix(rho, part))
        if is_admissible(gamma):
            return gamma


def dense_log_likelihood(gamma: GammaVector, residuals: np.ndarray) -> float:
    """Gaussian log-likelihood with a dense Omega and dense S."""
    n, R = residuals.shape
    omega = expand_dense(gamma_to_omega(gamma))
    sign, logdet = np.linalg.slogdet(omega)
    S = residuals.T @ residuals / n
    return 0.5 * n * (-R * LOG_2PI + logdet - np.sum(omega * S))


def dense_omega(gamma: GammaVector) -> np.ndarray:
    n_mat = expand_dense(i_minus_upsilon(gamma))
    return n_mat @ n_mat


def _step(x: float) -> float:
    return 1e-6 * max(1.0, abs(x))


def finite_difference_score(gamma: GammaVector, s: BlockSummaries) -> np.ndarray:
    values = gamma.values
    out = np.empty(values.size)
    for j in range(values.size):
        h = _step(values[j])
        up, down = values.copy(), values.copy()
        up[j] += h
        down[j] -= h
        out[j] = (log_likelihood(GammaVector(up, gamma.part), s) - log_likelihood(GammaVector(down, gamma.part), s)) / (2 * h)
    return out


def finite_difference_partial(gamma: GammaVector, j: int) -> UniformBlockMatrix:
    values = gamma.values
    h = _step(values[j])
    up, down = values.copy(), values.copy()
    up[j] += h
    down[j] -= h
    hi = gamma_to_omega(GammaVector(up, gamma.part))
    lo = gamma_to_omega(GammaVector(down, gamma.part))
    return UniformBlockMatrix((hi.a - lo.a) / (2 * h), (hi.b - lo.b) / (2 * h), gamma.part)


def stacked_design(X: np.ndarray, R: int) -> np.ndarray:
    """The (nR) x (Rp) design whose i-th block of R rows is I_R (x) x_i^T."""
    eye = np.eye(R)
    return np.vstack([np.kron(eye, row[None, :]) for row in X])


def stacked_gls(X: np.ndarray, Y: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """GLS on the stacked system; returns the R x p coefficient matrix."""
    n, p = X.shape
    R = Y.shape[1]
    x = stacked_design(X, R)
    y = Y.reshape(-1)
    weight = np.kron(np.eye(n), omega)
    lhs = x.T @ weight @ x
    rhs = x.T @ weight @ y
    return np.linalg.solve(lhs, rhs).reshape(R, p)


@dataclass
class CheckResult:
    name: str
    max_error: float
    tolerance: float
    count: int

    @property
    def passed(self) -> bool:
        return bool(self.max_error <= self.tolerance)


def _rel(x: np.ndarray, y: np.ndarray) -> float:
    x = np.asarray(x)
    y = np.asarray(y)
    scale = max(1.0, float(np.max(np.abs(y))))
    return float(np.max(np.abs(x - y)) / scale)


def _ub_checks(rng: np.random.Generator, part: PartitionVector) -> List[Tuple[str, float]]:
    x = random_ub(rng, part)
    y = random_ub(rng, part)
    dx, dy = expand_dense(x), expand_dense(y)
    errors = [
        ('extract_roundtrip', _rel(expand_dense(extract_ub(dx, part)), dx)),
        ('add', _rel(expand_dense(algebra.ub_add(x, y)), dx + dy)),
        ('mul', _rel(expand_dense(algebra.ub_mul(x, y)), dx @ dy)),
        ('square', _rel(expand_dense(algebra.ub_square(x)), dx @ dx)),
        ('eigenvalues', _rel(algebra.ub_eigenvalues(x), np.linalg.eigvalsh(dx))),
        ('log_det', _rel(algebra.ub_log_det(x), np.linalg.slogdet(dx)[1])),
        ('trace_product', _rel(algebra.ub_trace_product(dy, x), np.trace(dy @ dx))),
        ('trace_ub_product', _rel(algebra.ub_trace_ub_product(x, y), np.trace(dx @ dy))),
    ]
    sign, logdet = np.linalg.slogdet(dx)
    if logdet < 600:
        errors.append(('det', abs(algebra.ub_det(x) - np.exp(logdet)) / max(1.0, np.exp(logdet))))
    if np.linalg.cond(dx) <= 1e6:
        errors.append(('inverse', _rel(expand_dense(algebra.ub_inverse(x)), np.linalg.inv(dx))))
    root = expand_dense(algebra.ub_sqrt(x))
    errors.append(('sqrt', _rel(root @ root, dx)))
    return errors


def _gamma_checks(rng: np.random.Generator, part: PartitionVector) -> List[Tuple[str, float]]:
    gamma = random_gamma(rng, part)
    n = 40
    residuals = rng.standard_normal((n, part.R))
    s = block_summaries(residuals, part)
    analytic = score(gamma, s)
    numeric = finite_difference_score(gamma, s)
    partial_err = max(
        float(np.max(np.abs(expand_dense(omega_partials(gamma, j)) - expand_dense(finite_difference_partial(gamma, j)))))
        for j in range(len(gamma))
    )
    recovered = sigma_to_gamma(omega_to_sigma(gamma_to_omega(gamma)))
    return [
        ('omega', _rel(expand_dense(gamma_to_omega(gamma)), dense_omega(gamma))),
        ('likelihood', _rel(log_likelihood(gamma, s), dense_log_likelihood(gamma, residuals))),
        ('score', float(np.max(np.abs(analytic - numeric)) / (1.0 + np.max(np.abs(analytic))))),
        ('partials', partial_err),
        ('transform_roundtrip', float(np.max(np.abs(recovered.values - gamma.values)))),
    ]


TOLERANCES = {
    'extract_roundtrip': 1e-12,
    'add': 1e-10,
    'mul': 1e-10,
    'square': 1e-10,
    'eigenvalues': 1e-10,
    'log_det': 1e-10,
    'det': 1e-10,
    'trace_product': 1e-10,
    'trace_ub_product': 1e-10,
    'inverse': 1e-8,
    'sqrt': 1e-10,
    'omega': 1e-12,
    'likelihood': 1e-10,
    'score': 1e-4,
    'partials': 1e-6,
    'transform_roundtrip': 1e-10,
}


def run_validation_suite(scale: str = 'small', seed: int = 0, progress: Callable[[str], None] = None) -> List[CheckResult]:
    """
    Compare every closed form with its dense oracle on random instances.

    Args:
        scale: 'small' (quick) or 'large' (500 instances, sizes up to 60)
        seed: Seed for the instance generator
        progress: Optional callback receiving one line per finished batch

    Returns:
        One CheckResult per identity, holding the worst error seen
    """
    settings = SCALES[scale]
    rng = np.random.default_rng(seed)
    worst = {name: 0.0 for name in TOLERANCES}
    counts = {name: 0 for name in TOLERANCES}
    started = time.perf_counter()
    for k in range(settings['instances']):
        part = random_partition(rng, settings['max_groups'], settings['max_size'])
        checks = _ub_checks(rng, part)
        if k % 10 == 0 and part.R <= 80:
            try:
                checks += _gamma_checks(rng, part)
            except MaudNumericalError as exc:
                logger.warning("validate: gamma checks skipped for sizes=%s: %s", part, exc)
        for name, error in checks:
            worst[name] = max(worst[name], float(error))
            counts[name] += 1
        if progress and (k + 1) % 50 == 0:
            progress(f"{k + 1} instances checked")
    logger.info("validate: scale=%s instances=%d seconds=%.2f", scale, settings['instances'], time.perf_counter() - started)
    return [CheckResult(name, worst[name], TOLERANCES[name], counts[name]) for name in TOLERANCES]
