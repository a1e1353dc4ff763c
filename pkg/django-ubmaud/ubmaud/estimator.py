"""
Two-stage MAUD regression estimator.

Stage one is ordinary least squares for the coefficient matrix, which is
exactly the feasible GLS estimator under a Kronecker covariance. Stage two
maximizes the Gaussian likelihood of the OLS residuals in gamma by Fisher
scoring, working only with G-dimensional block summaries.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from . import conf
from .algebra import solve_pd, ub_apply, ub_eigenvalues
from .blocks import PartitionVector, UniformBlockMatrix, expand_dense
from .covariance import KroneckerCovariance
from .exceptions import (
    DimensionMismatch,
    InadmissibleStart,
    MaudError,
    MaudNumericalError,
    NotConverged,
    NotPositiveDefinite,
)
from .likelihood import (
    BlockSummaries,
    block_summaries,
    fisher_information,
    log_likelihood,
    score,
    score_floor,
)
from .params import (
    GammaVector,
    RhoVector,
    gamma_to_omega,
    gamma_to_rho,
    gamma_to_sigma,
    is_admissible,
    rho_scale,
    sigma_to_gamma,
)
from .validators import DatasetValidator

logger = logging.getLogger(__name__)

STARTS_AGREE_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design X (n x p), outcomes Y (n x R) and the community partition."""

    X: np.ndarray
    Y: np.ndarray
    part: PartitionVector
    feature_names: Optional[Tuple[str, ...]] = None
    covariate_names: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        X, Y, part = DatasetValidator().validate(self.X, self.Y, self.part)
        object.__setattr__(self, 'X', X)
        object.__setattr__(self, 'Y', Y)
        object.__setattr__(self, 'part', part)
        if self.feature_names is not None and len(self.feature_names) != part.R:
            raise DimensionMismatch(f"Got {len(self.feature_names)} feature names for R={part.R}")
        if self.covariate_names is not None and len(self.covariate_names) != X.shape[1]:
            raise DimensionMismatch(f"Got {len(self.covariate_names)} covariate names for p={X.shape[1]}")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def R(self) -> int:
        return self.part.R


def _setting(name):
    return field(default_factory=lambda: conf.get(name))


@dataclass(frozen=True)
class FitOptions:
    """Tuning knobs for ``fit``; defaults come from the UBMAUD_* settings."""

    tol: float = _setting('UBMAUD_SCORE_TOL')
    score_rtol: float = _setting('UBMAUD_SCORE_RTOL')
    max_iter: int = _setting('UBMAUD_MAX_ITER')
    max_halvings: int = _setting('UBMAUD_MAX_HALVINGS')
    compare_starts: bool = _setting('UBMAUD_COMPARE_STARTS')
    start: Optional[GammaVector] = None
    fgls_check: bool = False
    fgls_max_iter: int = 20
    fgls_tol: float = 1e-10

    def with_overrides(self, **changes) -> 'FitOptions':
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


@dataclass
class ScoringDiagnostics:
    iterations: int
    score_norm: float
    log_likelihood: float
    converged: bool
    start: str
    halvings: int = 0
    tolerance: Optional[float] = None
    precision_limited: bool = False
    degenerate: bool = False
    starts_disagree: bool = False
    fisher_eigenvalues: Optional[np.ndarray] = None
    sigma_eigen_range: Optional[Tuple[float, float]] = None

    def to_dict(self) -> Dict:
        return {
            'iterations': self.iterations,
            'score_norm': self.score_norm,
            'log_likelihood': self.log_likelihood,
            'converged': self.converged,
            'start': self.start,
            'halvings': self.halvings,
            'tolerance': self.tolerance,
            'precision_limited': self.precision_limited,
            'degenerate': self.degenerate,
            'starts_disagree': self.starts_disagree,
            'fisher_eigenvalues': None if self.fisher_eigenvalues is None else self.fisher_eigenvalues.tolist(),
            'sigma_eigen_range': None if self.sigma_eigen_range is None else list(self.sigma_eigen_range),
        }


@dataclass(eq=False)
class FitResult:
    """Everything ``fit`` estimates, with covariances kept factored."""

    beta: np.ndarray
    beta_cov: KroneckerCovariance
    gamma: GammaVector
    gamma_cov: np.ndarray
    diagnostics: ScoringDiagnostics
    n: int
    summaries: BlockSummaries
    feature_names: Optional[Tuple[str, ...]] = None
    covariate_names: Optional[Tuple[str, ...]] = None
    fgls: Optional[Dict] = None

    @property
    def part(self) -> PartitionVector:
        return self.gamma.part

    @property
    def R(self) -> int:
        return self.beta.shape[0]

    @property
    def p(self) -> int:
        return self.beta.shape[1]

    @property
    def beta_vector(self) -> np.ndarray:
        """vec(B^T): coefficient (r, q) at index r * p + q."""
        return self.beta.ravel()

    @property
    def beta_se(self) -> np.ndarray:
        return self.beta_cov.standard_errors()

    @property
    def sigma(self) -> UniformBlockMatrix:
        return self.beta_cov.left

    @property
    def omega(self) -> UniformBlockMatrix:
        return gamma_to_omega(self.gamma)

    @property
    def gamma_se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.gamma_cov))

    @property
    def rho(self) -> RhoVector:
        return gamma_to_rho(self.gamma)

    @property
    def rho_cov(self) -> np.ndarray:
        scale = rho_scale(self.part)
        return scale[:, None] * self.gamma_cov * scale[None, :]

    @property
    def rho_se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.rho_cov))

    def feature_label(self, r: int) -> str:
        return self.feature_names[r] if self.feature_names else f"y{r + 1}"

    def covariate_label(self, q: int) -> str:
        return self.covariate_names[q] if self.covariate_names else f"x{q + 1}"


def ols_fit(d: Dataset) -> Tuple[np.ndarray, np.ndarray]:
    """
    Least squares for all R outcomes at once.

    Returns:
        (beta, residuals) with beta of shape R x p
    """
    coef, _, _, _ = scipy.linalg.lstsq(d.X, d.Y)
    residuals = d.Y - d.X @ coef
    return coef.T.copy(), residuals


def moment_start(s: BlockSummaries) -> GammaVector:
    """
    Starting gamma from within/between block means of the residual covariance.

    The block means define a UB covariance that is projected onto MAUD form
    through the closest square-root branch.
    """
    ell = s.part.ell
    within_var = s.traces / ell
    within_cov = (np.diag(s.sums) - s.traces) / (ell * (ell - 1.0))
    between = s.sums / np.outer(ell, ell)
    between[np.diag_indices_from(between)] = within_cov
    sigma = UniformBlockMatrix(within_var - within_cov, between, s.part)
    gamma = sigma_to_gamma(sigma, strict=False)
    if not is_admissible(gamma):
        raise InadmissibleStart("Moment start lands on a singular I - Upsilon")
    return gamma


def fisher_scoring(
    s: BlockSummaries,
    start: GammaVector,
    options: Optional[FitOptions] = None,
    start_label: str = 'user',
) -> Tuple[GammaVector, ScoringDiagnostics]:
    """
    Maximize the residual log-likelihood in gamma.

    Each iteration takes the step psi^-1 score and halves it until the new
    point is admissible and the likelihood does not decrease. Stops when the
    score's max-norm drops below ``options.tol``. At large n R the score can
    bottom out above that tolerance. Whenever scoring has to stop early, the
    last iterate is still accepted if its score norm is below ``score_floor``;
    the floor is then recorded as the tolerance met.

    Raises:
        InadmissibleStart: If ``start`` makes I - Upsilon singular
        NotConverged: If scoring stops early above the rounding floor
    """
    options = options or FitOptions()
    if not is_admissible(start):
        raise InadmissibleStart(f"Start gamma={start.values.tolist()} is not admissible")
    part = s.part
    gamma = start
    current = log_likelihood(gamma, s)
    halvings = 0
    grad = score(gamma, s)
    norm = float(np.max(np.abs(grad)))
    iterations = 0
    slack = 64.0 * np.finfo(float).eps
    tolerance = options.tol

    failure = None
    while norm >= options.tol:
        if iterations >= options.max_iter:
            failure = f"Fisher scoring did not converge in {options.max_iter} iterations"
            break
        info = fisher_information(gamma, s.n)
        direction = solve_pd(info, grad)
        if np.max(np.abs(direction)) <= 16.0 * np.finfo(float).eps * (1.0 + np.max(np.abs(gamma.values))):
            failure = f"Step fell below double precision at iteration {iterations}"
            break
        step = 1.0
        accepted = None
        for _ in range(options.max_halvings + 1):
            candidate = GammaVector(gamma.values + step * direction, part)
            if is_admissible(candidate):
                try:
                    value = log_likelihood(candidate, s)
                except MaudNumericalError:
                    value = -np.inf
                if value >= current - slack * (1.0 + abs(current)):
                    accepted = (candidate, value)
                    break
            step /= 2.0
            halvings += 1
        if accepted is None:
            failure = f"Step halving failed after {options.max_halvings} halvings at iteration {iterations}"
            break
        gamma, current = accepted
        iterations += 1
        grad = score(gamma, s)
        norm = float(np.max(np.abs(grad)))
        logger.debug("fisher_scoring: iter=%d loglik=%.10g score_norm=%.3g step=%g", iterations, current, norm, step)

    if failure is not None:
        floor = score_floor(gamma, s, options.score_rtol)
        if norm >= floor:
            raise NotConverged(
                f"{failure} (score norm {norm:.3g}, rounding floor {floor:.3g})",
                gamma=gamma.values.copy(), score_norm=norm, iterations=iterations,
            )
        logger.debug("fisher_scoring: precision limited at iter=%d norm=%.3g floor=%.3g", iterations, norm, floor)
        tolerance = floor

    return gamma, ScoringDiagnostics(
        iterations=iterations,
        score_norm=norm,
        log_likelihood=current,
        converged=norm < tolerance,
        start=start_label,
        halvings=halvings,
        tolerance=tolerance,
        precision_limited=tolerance > options.tol,
    )


def _candidate_starts(s: BlockSummaries, options: FitOptions) -> List[Tuple[str, GammaVector]]:
    if options.start is not None:
        return [('user', options.start)]
    starts = []
    try:
        starts.append(('moment', moment_start(s)))
    except MaudError as exc:
        logger.warning("moment start unavailable (%s); starting from gamma=0", exc)
    if options.compare_starts or not starts:
        starts.append(('zero', GammaVector.zeros(s.part)))
    return starts


def estimate_gamma(s: BlockSummaries, options: Optional[FitOptions] = None) -> Tuple[GammaVector, ScoringDiagnostics]:
    """Run Fisher scoring from every candidate start and keep the best optimum."""
    options = options or FitOptions()
    results = []
    failure = None
    for label, start in _candidate_starts(s, options):
        try:
            results.append(fisher_scoring(s, start, options, start_label=label))
        except MaudError as exc:
            logger.debug("start=%s failed: %s", label, exc)
            failure = exc
    if not results:
        raise failure
    best = max(results, key=lambda r: r[1].log_likelihood)
    if len(results) > 1:
        spread = max(np.max(np.abs(r[0].values - best[0].values)) for r in results)
        if spread > STARTS_AGREE_TOL:
            best[1].starts_disagree = True
            logger.warning(
                "Starting points reached different optima (max |delta gamma| = %.3g); keeping start=%s loglik=%.10g",
                spread, best[1].start, best[1].log_likelihood,
            )
    return best


def fit(d: Dataset, options: Optional[FitOptions] = None) -> FitResult:
    """
    Fit the MAUD regression model.

    Args:
        d: Validated dataset
        options: Fit options (defaults from settings)

    Returns:
        FitResult with OLS coefficients, Sigma-hat (x) (X^T X)^-1 coefficient
        covariance, gamma-hat and its inverse-Fisher covariance

    Raises:
        NotConverged: If no start reaches the score tolerance
        NotPositiveDefinite: If the Fisher information at gamma-hat is singular
    """
    options = options or FitOptions()
    beta, residuals = ols_fit(d)
    summaries = block_summaries(residuals, d.part)

    if summaries.is_degenerate():
        gamma = options.start if options.start is not None else GammaVector.zeros(d.part)
        logger.warning("Residuals are numerically zero; keeping gamma at its start value")
        diagnostics = ScoringDiagnostics(
            iterations=0, score_norm=0.0, log_likelihood=float('nan'),
            converged=True, start='user' if options.start is not None else 'zero', degenerate=True,
            tolerance=options.tol,
        )
    else:
        gamma, diagnostics = estimate_gamma(summaries, options)

    sigma = gamma_to_sigma(gamma)
    xtx_inv = scipy.linalg.cho_solve(scipy.linalg.cho_factor(d.X.T @ d.X), np.eye(d.p))
    xtx_inv = (xtx_inv + xtx_inv.T) / 2.0

    info = fisher_information(gamma, d.n)
    gamma_cov = solve_pd(info, np.eye(info.shape[0]))
    gamma_cov = (gamma_cov + gamma_cov.T) / 2.0
    diagnostics.fisher_eigenvalues = np.linalg.eigvalsh(info / d.n)
    sigma_eigen = ub_eigenvalues(sigma)
    diagnostics.sigma_eigen_range = (float(sigma_eigen[0]), float(sigma_eigen[-1]))
    if diagnostics.fisher_eigenvalues[0] <= 0.0:
        raise NotPositiveDefinite("Fisher information at gamma-hat is not positive definite")

    result = FitResult(
        beta=beta,
        beta_cov=KroneckerCovariance(sigma, xtx_inv),
        gamma=gamma,
        gamma_cov=gamma_cov,
        diagnostics=diagnostics,
        n=d.n,
        summaries=summaries,
        feature_names=d.feature_names,
        covariate_names=d.covariate_names,
    )
    if options.fgls_check:
        result.fgls = fgls_check(d, result, options)
    logger.info(
        "fit: n=%d R=%d p=%d G=%d iterations=%d start=%s score_norm=%.3g",
        d.n, d.R, d.p, d.part.G, diagnostics.iterations, diagnostics.start, diagnostics.score_norm,
    )
    return result


def beta_score(d: Dataset, beta: np.ndarray, omega: UniformBlockMatrix) -> np.ndarray:
    """
    Coefficient score sum_i (I (x) x_i) Omega (y_i - B x_i) in vec(B^T) order.

    Vanishes at the OLS solution for every Omega.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (d.R, d.p):
        raise DimensionMismatch(f"beta must be {d.R}x{d.p}, got {beta.shape}")
    residuals = d.Y - d.X @ beta.T
    return (ub_apply(omega, residuals.T) @ d.X).ravel()


def gls_dense(d: Dataset, omega: UniformBlockMatrix) -> np.ndarray:
    """
    Dense GLS {x^T (I (x) Omega) x}^-1 x^T (I (x) Omega) y, as an R x p matrix.

    Uses x^T (I (x) Omega) x = Omega (x) X^T X. Guarded by UBMAUD_DENSE_LIMIT.
    """
    size = d.R * d.p
    limit = conf.get('UBMAUD_DENSE_LIMIT')
    if size > limit:
        raise DimensionMismatch(f"Dense GLS needs Rp <= {limit} (got {size})")
    dense = expand_dense(omega)
    lhs = np.kron(dense, d.X.T @ d.X)
    rhs = (dense @ d.Y.T @ d.X).ravel()
    return solve_pd(lhs, rhs).reshape(d.R, d.p)


def fgls_fit(d: Dataset, options: Optional[FitOptions] = None) -> Tuple[np.ndarray, GammaVector, int]:
    """
    Iterated dense feasible GLS: alternate the GLS step and the gamma fit.

    Returns:
        (beta, gamma, iterations)
    """
    options = options or FitOptions()
    beta, _ = ols_fit(d)
    gamma = options.start
    iterations = 0
    for iterations in range(1, options.fgls_max_iter + 1):
        summaries = block_summaries(d.Y - d.X @ beta.T, d.part)
        if summaries.is_degenerate():
            gamma = gamma if gamma is not None else GammaVector.zeros(d.part)
            break
        if gamma is None:
            gamma, _ = estimate_gamma(summaries, options)
        else:
            gamma, _ = fisher_scoring(summaries, gamma, options, start_label='warm')
        updated = gls_dense(d, gamma_to_omega(gamma))
        change = float(np.max(np.abs(updated - beta)))
        beta = updated
        if change < options.fgls_tol:
            break
    return beta, gamma, iterations


def fgls_check(d: Dataset, result: FitResult, options: Optional[FitOptions] = None) -> Dict:
    """Compare the OLS coefficients with iterated dense FGLS."""
    beta, gamma, iterations = fgls_fit(d, options)
    diff = float(np.max(np.abs(beta - result.beta)))
    if diff > 1e-8 * max(1.0, float(np.max(np.abs(result.beta)))):
        logger.warning("FGLS and OLS coefficients differ by %.3g", diff)
    return {
        'max_abs_difference': diff,
        'iterations': iterations,
        'gamma': gamma.values.tolist(),
    }
