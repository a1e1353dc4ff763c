"""
Wald tests, multiplicity control and covariance losses.

Coefficient tests use a t reference with n - 1 degrees of freedom and the
factored coefficient covariance; dependence-parameter tests use the normal
reference and the inverse Fisher information.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from . import conf
from .covariance import KroneckerCovariance, difference_operator, operator_spectral_norm
from .exceptions import DimensionMismatch, MaudInputError, RankDeficientContrast, SingularContrastCovariance
from .validators import validate_p_values

logger = logging.getLogger(__name__)

NORMS = ('frobenius', 'spectral')


@dataclass
class TestResult:
    label: str
    estimate: float
    standard_error: float
    statistic: float
    p_value: float
    adjusted_p_value: Optional[float] = None
    rejected: bool = False

    __test__ = False


@dataclass(frozen=True, eq=False)
class ContrastSpec:
    """H0: C beta = c0, with C of shape s x Rp in vec(B^T) order."""

    C: np.ndarray
    null: Optional[np.ndarray] = None

    def __post_init__(self):
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        rank = np.linalg.matrix_rank(C)
        if rank < C.shape[0]:
            raise RankDeficientContrast(f"Contrast matrix has rank {rank} < {C.shape[0]} rows")
        null = np.zeros(C.shape[0]) if self.null is None else np.asarray(self.null, dtype=float).reshape(-1)
        if null.shape != (C.shape[0],):
            raise DimensionMismatch(f"Null value needs {C.shape[0]} entries, got {null.size}")
        object.__setattr__(self, 'C', C)
        object.__setattr__(self, 'null', null)


@dataclass
class ContrastResult:
    statistic: float
    df: int
    p_value: float


def bh_adjust(p_values, alpha: float = 0.05) -> Tuple[np.ndarray, np.ndarray]:
    """
    Benjamini-Hochberg step-up.

    Ties are ranked by original position. Returns (adjusted p-values,
    rejection mask) in input order; rejections are exactly the hypotheses
    with adjusted p-value <= alpha.

    Raises:
        InvalidPValue: If any p-value is outside [0, 1] or not finite
    """
    p = validate_p_values(p_values)
    m = p.size
    if m == 0:
        return np.empty(0), np.zeros(0, dtype=bool)
    order = np.argsort(p, kind='stable')
    ranked = p[order] * m / np.arange(1, m + 1)
    monotone = np.minimum.accumulate(ranked[::-1])[::-1]
    adjusted = np.empty(m)
    adjusted[order] = np.minimum(monotone, 1.0)
    return adjusted, adjusted <= alpha


def _two_sided(statistic: np.ndarray, df: Optional[int]) -> np.ndarray:
    if df is None:
        return 2.0 * stats.norm.sf(np.abs(statistic))
    return 2.0 * stats.t.sf(np.abs(statistic), df)


def _finish(labels, estimates, ses, df, alpha, fdr) -> List[TestResult]:
    estimates = np.asarray(estimates, dtype=float)
    ses = np.asarray(ses, dtype=float)
    statistic = np.divide(estimates, ses, out=np.zeros_like(estimates), where=ses > 0)
    p_values = _two_sided(statistic, df)
    adjusted, rejected = (None, None)
    if fdr:
        adjusted, rejected = bh_adjust(p_values, alpha)
    else:
        rejected = p_values <= alpha
    return [
        TestResult(
            label=label,
            estimate=float(estimates[k]),
            standard_error=float(ses[k]),
            statistic=float(statistic[k]),
            p_value=float(p_values[k]),
            adjusted_p_value=None if adjusted is None else float(adjusted[k]),
            rejected=bool(rejected[k]),
        )
        for k, label in enumerate(labels)
    ]


def beta_tests(
    fit,
    df_mode: str = 't',
    alpha: float = 0.05,
    fdr: bool = False,
    covariates: Optional[Sequence[int]] = None,
) -> List[TestResult]:
    """
    Wald test of every coefficient beta_rq = 0.

    Args:
        fit: FitResult
        df_mode: 't' for a t(n - 1) reference, 'normal' for N(0, 1)
        alpha: Level for the rejection flags
        fdr: Apply Benjamini-Hochberg across the tested coefficients
        covariates: Restrict to these covariate columns (0-based)

    Returns:
        TestResults in vec(B^T) order
    """
    if df_mode not in ('t', 'normal'):
        raise MaudInputError(f"df_mode must be 't' or 'normal', got {df_mode!r}")
    keep = range(fit.p) if covariates is None else list(covariates)
    ses = fit.beta_se
    labels, estimates, errors = [], [], []
    for r in range(fit.R):
        for q in keep:
            labels.append(f"{fit.feature_label(r)}:{fit.covariate_label(q)}")
            estimates.append(fit.beta[r, q])
            errors.append(ses[r, q])
    df = fit.n - 1 if df_mode == 't' else None
    return _finish(labels, estimates, errors, df, alpha, fdr)


def gamma_tests(fit, alpha: float = 0.05, fdr: bool = False) -> List[TestResult]:
    """Wald tests of gamma_j = 0 against the normal reference."""
    return _finish(fit.gamma.labels(), fit.gamma.values, fit.gamma_se, None, alpha, fdr)


def rho_tests(fit, alpha: float = 0.05, fdr: bool = False) -> List[TestResult]:
    return _finish(fit.rho.labels(), fit.rho.values, fit.rho_se, None, alpha, fdr)


def contrast_test(fit, spec: ContrastSpec) -> ContrastResult:
    """
    Joint Wald test of C beta = c0 with a chi-square(s) reference.

    Raises:
        SingularContrastCovariance: If C Sigma_beta C^T is not invertible
    """
    cov = fit.beta_cov.contract(spec.C)
    diff = spec.C @ fit.beta_vector - spec.null
    try:
        factor = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise SingularContrastCovariance("C Sigma_beta C^T is not positive definite")
    if np.linalg.cond(cov) > conf.get('UBMAUD_CONDITION_LIMIT'):
        raise SingularContrastCovariance("C Sigma_beta C^T is numerically singular")
    whitened = np.linalg.solve(factor, diff)
    statistic = float(whitened @ whitened)
    df = spec.C.shape[0]
    return ContrastResult(statistic=statistic, df=df, p_value=float(stats.chi2.sf(statistic, df)))


def relative_loss(
    estimated: KroneckerCovariance,
    truth: KroneckerCovariance,
    norm: str = 'frobenius',
    dense: bool = False,
) -> float:
    """
    ||estimated - truth|| / ||truth|| without forming either Rp x Rp matrix.

    Args:
        estimated: Estimated coefficient covariance
        truth: True coefficient covariance
        norm: 'frobenius' or 'spectral'
        dense: Materialize both matrices instead (cross-check; needs Rp <= UBMAUD_DENSE_LIMIT)
    """
    if norm not in NORMS:
        raise MaudInputError(f"norm must be one of {NORMS}, got {norm!r}")
    if (estimated.R, estimated.p) != (truth.R, truth.p):
        raise DimensionMismatch(
            f"Covariances have different shapes: R={estimated.R}, p={estimated.p} vs R={truth.R}, p={truth.p}"
        )
    if dense:
        diff = estimated.to_dense() - truth.to_dense()
        if norm == 'frobenius':
            return float(np.linalg.norm(diff) / np.linalg.norm(truth.to_dense()))
        return float(np.linalg.norm(diff, 2) / np.linalg.norm(truth.to_dense(), 2))

    if norm == 'frobenius':
        denominator = truth.frobenius_norm()
        if estimated.shares_right(truth):
            return estimated.left_difference(truth).frobenius_norm() / denominator
        squared = (
            estimated.frobenius_inner(estimated)
            + truth.frobenius_inner(truth)
            - 2.0 * estimated.frobenius_inner(truth)
        )
        return float(np.sqrt(max(squared, 0.0)) / denominator)

    denominator = truth.spectral_norm()
    if estimated.shares_right(truth):
        return estimated.left_difference(truth).spectral_norm() / denominator
    return operator_spectral_norm(difference_operator(estimated, truth)) / denominator
