"""
Log-likelihood, score and Fisher information for gamma.

All three depend on the residuals only through ``BlockSummaries``: the G
block traces and G x G block sums of the sample covariance S = E^T E / n.
"""
from dataclasses import dataclass

import numpy as np

from .algebra import ub_inverse, ub_log_det, ub_mul, ub_trace_ub_product
from .blocks import PartitionVector, UniformBlockMatrix, as_partition, block_sums, block_traces
from .exceptions import DimensionMismatch, IndexOutOfRange
from .params import GammaVector, check_admissible, gamma_to_omega, index_pairs

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True, eq=False)
class BlockSummaries:
    """tr(S_gg) and sum(S_gg') for the residual covariance S."""

    traces: np.ndarray
    sums: np.ndarray
    n: int
    part: PartitionVector

    def is_degenerate(self, rtol: float = 1e-20) -> bool:
        """True when the residuals are numerically zero."""
        return float(np.sum(self.traces)) <= rtol * max(1.0, float(np.max(np.abs(self.sums), initial=0.0)))


def block_summaries(residuals: np.ndarray, part: PartitionVector) -> BlockSummaries:
    """
    Compress an n x R residual matrix into block summaries in O(nR).

    Args:
        residuals: Residual matrix, one row per subject
        part: Community sizes, summing to R

    Raises:
        DimensionMismatch: If the column count does not match the partition
    """
    part = as_partition(part)
    residuals = np.asarray(residuals, dtype=float)
    if residuals.ndim != 2 or residuals.shape[1] != part.R:
        raise DimensionMismatch(
            f"Residuals have shape {residuals.shape}; partition ({part}) needs {part.R} columns"
        )
    n = residuals.shape[0]
    if n < 1:
        raise DimensionMismatch("Residual matrix has no rows")
    squares = np.einsum('ij,ij->j', residuals, residuals)
    traces = np.add.reduceat(squares, part.offsets) / n
    row_sums = np.add.reduceat(residuals, part.offsets, axis=1)
    sums = row_sums.T @ row_sums / n
    return BlockSummaries(traces, (sums + sums.T) / 2.0, n, part)


def summaries_from_covariance(cov: np.ndarray, n: int, part: PartitionVector) -> BlockSummaries:
    part = as_partition(part)
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (part.R, part.R):
        raise DimensionMismatch(f"Covariance is {cov.shape}, expected {part.R}x{part.R}")
    return BlockSummaries(block_traces(cov, part), block_sums(cov, part), int(n), part)


def _check_pair(gamma: GammaVector, s: BlockSummaries) -> None:
    if gamma.part != s.part:
        raise DimensionMismatch(f"gamma partition ({gamma.part}) differs from data partition ({s.part})")


def _fit_term(m: UniformBlockMatrix, s: BlockSummaries) -> float:
    """tr(M S) from block summaries, for block-constant M."""
    return float(m.a @ s.traces + np.sum(m.b * s.sums))


def log_likelihood(gamma: GammaVector, s: BlockSummaries) -> float:
    """
    Gaussian log-likelihood of the residuals at gamma.

    (n/2) [-R log 2pi + sum (L_g - 1) log a_Omega,gg + log det Delta_Omega
    - tr(A_Omega diag(tr S_gg)) - sum(B_Omega o sum S_gg')]

    Raises:
        NotPositiveDefinite: If gamma is not admissible
    """
    _check_pair(gamma, s)
    check_admissible(gamma)
    omega = gamma_to_omega(gamma)
    return 0.5 * s.n * (-s.part.R * LOG_2PI + ub_log_det(omega) - _fit_term(omega, s))


def omega_partials(gamma: GammaVector, j: int) -> UniformBlockMatrix:
    """
    d Omega / d gamma_j as a UB matrix (j is 0-based in parameter order).

    Diagonal parameter gamma_gg:
        dA = 2(1 + gamma_gg) E_gg
        dB = -2(1 + gamma_gg) E_gg - (E_gg B + B E_gg) + E_gg L B + B L E_gg
    Off-diagonal gamma_gg', with F = E_gg' + E_g'g:
        dA = 0
        dB = -2F + F (A + L B) + (A + B L) F
    where A, B are A_Upsilon, B_Upsilon.
    """
    part = gamma.part
    pairs = index_pairs(part.G)
    if not 0 <= j < len(pairs):
        raise IndexOutOfRange(f"Parameter index {j} outside 0..{len(pairs) - 1}")
    g, h = pairs[j]
    G = part.G
    L = np.diag(part.ell)
    b_ups = gamma.to_matrix()
    a_ups = np.diag(-np.diag(b_ups))
    d_a = np.zeros(G)
    if g == h:
        E = np.zeros((G, G))
        E[g, g] = 1.0
        scale = 1.0 + b_ups[g, g]
        d_a[g] = 2.0 * scale
        d_b = -2.0 * scale * E - (E @ b_ups + b_ups @ E) + E @ L @ b_ups + b_ups @ L @ E
    else:
        F = np.zeros((G, G))
        F[g, h] = F[h, g] = 1.0
        d_b = -2.0 * F + F @ (a_ups + L @ b_ups) + (a_ups + b_ups @ L) @ F
    return UniformBlockMatrix(d_a, d_b, part)


def score(gamma: GammaVector, s: BlockSummaries) -> np.ndarray:
    """
    Gradient of ``log_likelihood`` with respect to gamma.

    score_j = (n/2) [tr(dOmega_j Sigma) - tr(dOmega_j S)]
    """
    _check_pair(gamma, s)
    check_admissible(gamma)
    sigma = ub_inverse(gamma_to_omega(gamma))
    out = np.empty(s.part.n_params)
    for j in range(out.size):
        partial = omega_partials(gamma, j)
        out[j] = ub_trace_ub_product(partial, sigma) - _fit_term(partial, s)
    return 0.5 * s.n * out


def _magnitude(m: UniformBlockMatrix) -> UniformBlockMatrix:
    return UniformBlockMatrix(np.abs(m.a), np.abs(m.b), m.part)


def score_floor(gamma: GammaVector, s: BlockSummaries, rtol: float = 1e-12) -> float:
    """
    Rounding level of ``score`` at gamma.

    Each score entry is a difference of two traces that grow with n and the
    community sizes; ``rtol`` times the larger of their absolute sums bounds
    what double precision can resolve. Fisher scoring accepts a stalled
    iterate only when its score norm is below this floor.
    """
    _check_pair(gamma, s)
    sigma = _magnitude(ub_inverse(gamma_to_omega(gamma)))
    absolute = BlockSummaries(np.abs(s.traces), np.abs(s.sums), s.n, s.part)
    scale = 0.0
    for j in range(s.part.n_params):
        partial = _magnitude(omega_partials(gamma, j))
        scale = max(scale, ub_trace_ub_product(partial, sigma) + _fit_term(partial, absolute))
    return rtol * 0.5 * s.n * scale


def fisher_information(gamma: GammaVector, n: int) -> np.ndarray:
    """
    Expected information: psi_jj' = (n/2) tr(dOmega_j Sigma dOmega_j' Sigma).

    Symmetric positive definite at every admissible gamma.
    """
    check_admissible(gamma)
    sigma = ub_inverse(gamma_to_omega(gamma))
    m = gamma.part.n_params
    products = [ub_mul(omega_partials(gamma, j), sigma) for j in range(m)]
    traces = np.empty((m, m))
    for j in range(m):
        for k in range(j, m):
            traces[j, k] = traces[k, j] = ub_trace_ub_product(products[j], products[k])
    return (n / 2.0) * traces
