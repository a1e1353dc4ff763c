"""
Dependence-parameter vectors and the maps between parameterizations.

gamma holds the G(G+1)/2 free entries of Upsilon in row-major order over the
upper triangle, diagonal included: (1,1), (1,2), ..., (1,G), (2,2), ...
Upsilon has a zero diagonal, so A_Upsilon = -diag(gamma_gg) and
B_Upsilon = (gamma_gg'). Omega = (I - Upsilon)^2 and Sigma = Omega^-1.
"""
import logging
from dataclasses import dataclass
from typing import Iterable, List, NamedTuple, Tuple

import numpy as np

from . import conf
from .algebra import check_positive_definite, ub_inverse, ub_roots_by_diagonal, ub_sqrt
from .blocks import PartitionVector, UniformBlockMatrix, as_partition
from .exceptions import (
    DimensionMismatch,
    IndexOutOfRange,
    NotMaudRepresentable,
    NotPositiveDefinite,
    Singular,
)

logger = logging.getLogger(__name__)


def index_pairs(G: int) -> List[Tuple[int, int]]:
    """(g, g') pairs, 0-based, in parameter order."""
    return [(g, h) for g in range(G) for h in range(g, G)]


def pair_index(g: int, h: int, G: int) -> int:
    """Position of (g, h) in parameter order; accepts either orientation."""
    if g > h:
        g, h = h, g
    if not (0 <= g < G and 0 <= h < G):
        raise IndexOutOfRange(f"Pair ({g}, {h}) outside 0..{G - 1}")
    return g * G - g * (g - 1) // 2 + (h - g)


@dataclass(frozen=True, eq=False)
class _ParameterVector:
    values: np.ndarray
    part: PartitionVector

    symbol = 'theta'

    def __post_init__(self):
        part = as_partition(self.part)
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.shape != (part.n_params,):
            raise DimensionMismatch(
                f"{self.symbol} needs {part.n_params} entries for G={part.G}, got {values.size}"
            )
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'part', part)

    def __len__(self):
        return self.values.size

    def __getitem__(self, j):
        return self.values[j]

    def to_matrix(self) -> np.ndarray:
        """Symmetric G x G matrix holding the parameters."""
        G = self.part.G
        out = np.zeros((G, G))
        iu = np.triu_indices(G)
        out[iu] = self.values
        out.T[iu] = self.values
        return out

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, part: PartitionVector):
        part = as_partition(part)
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape != (part.G, part.G):
            raise DimensionMismatch(f"Expected a {part.G}x{part.G} matrix, got {matrix.shape}")
        return cls(matrix[np.triu_indices(part.G)], part)

    @classmethod
    def zeros(cls, part: PartitionVector):
        part = as_partition(part)
        return cls(np.zeros(part.n_params), part)

    def labels(self) -> List[str]:
        return [f"{self.symbol}_{g + 1}{h + 1}" for g, h in index_pairs(self.part.G)]

    def allclose(self, other, atol: float = 1e-10) -> bool:
        return self.part == other.part and bool(np.allclose(self.values, other.values, rtol=0.0, atol=atol))

    def __repr__(self):
        return f"{type(self).__name__}({self.values.tolist()}, sizes={self.part.sizes})"


class GammaVector(_ParameterVector):
    symbol = 'gamma'


class RhoVector(_ParameterVector):
    """Size-invariant reparameterization of gamma."""

    symbol = 'rho'


def rho_scale(part: PartitionVector) -> np.ndarray:
    """sqrt((L_g - 1)(L_g' - 1)) per parameter; equals L_g - 1 on the diagonal."""
    m1 = part.ell - 1.0
    return np.array([np.sqrt(m1[g] * m1[h]) for g, h in index_pairs(part.G)])


def gamma_to_rho(gamma: GammaVector) -> RhoVector:
    return RhoVector(gamma.values * rho_scale(gamma.part), gamma.part)


def rho_to_gamma(rho: RhoVector) -> GammaVector:
    return GammaVector(rho.values / rho_scale(rho.part), rho.part)


def gamma_to_upsilon(gamma: GammaVector) -> UniformBlockMatrix:
    matrix = gamma.to_matrix()
    return UniformBlockMatrix(-np.diag(matrix), matrix, gamma.part)


def i_minus_upsilon(gamma: GammaVector) -> UniformBlockMatrix:
    matrix = gamma.to_matrix()
    return UniformBlockMatrix(1.0 + np.diag(matrix), -matrix, gamma.part)


def gamma_to_omega(gamma: GammaVector) -> UniformBlockMatrix:
    """
    Omega = (I - Upsilon)^2 directly from gamma.

    A_Omega = (I - A_Upsilon)^2 and
    B_Omega = -2 B_Upsilon + A_Upsilon B_Upsilon + B_Upsilon A_Upsilon + B_Upsilon L B_Upsilon.
    """
    ell = gamma.part.ell
    b_ups = gamma.to_matrix()
    a_ups = -np.diag(b_ups)
    a_omega = (1.0 - a_ups) ** 2
    b_omega = (
        -2.0 * b_ups
        + a_ups[:, None] * b_ups
        + b_ups * a_ups[None, :]
        + b_ups @ (ell[:, None] * b_ups)
    )
    return UniformBlockMatrix(a_omega, (b_omega + b_omega.T) / 2.0, gamma.part)


def check_admissible(gamma: GammaVector) -> None:
    """
    Raise unless I - Upsilon is nonsingular (so Omega is positive definite).

    Raises:
        NotPositiveDefinite: If some gamma_gg = -1 or Delta_{I-Upsilon} is singular
    """
    try:
        ub_inverse(i_minus_upsilon(gamma))
    except Singular as exc:
        raise NotPositiveDefinite(f"I - Upsilon is singular at gamma={gamma.values.tolist()}: {exc}")


def is_admissible(gamma: GammaVector) -> bool:
    try:
        check_admissible(gamma)
    except NotPositiveDefinite:
        return False
    return True


def omega_to_sigma(omega: UniformBlockMatrix) -> UniformBlockMatrix:
    check_positive_definite(omega, 'Omega')
    return ub_inverse(omega)


def gamma_to_sigma(gamma: GammaVector) -> UniformBlockMatrix:
    check_admissible(gamma)
    return ub_inverse(gamma_to_omega(gamma))


class PluginEstimates(NamedTuple):
    upsilon: UniformBlockMatrix
    omega: UniformBlockMatrix
    sigma: UniformBlockMatrix


def plugin_estimates(gamma: GammaVector) -> PluginEstimates:
    """Upsilon, Omega and Sigma evaluated at an estimated gamma."""
    omega = gamma_to_omega(gamma)
    return PluginEstimates(gamma_to_upsilon(gamma), omega, omega_to_sigma(omega))


def _root_discrepancy(root: UniformBlockMatrix) -> float:
    return float(np.max(np.abs(root.a + np.diag(root.b) - 1.0)))


def _root_to_gamma(root: UniformBlockMatrix, reconcile: bool) -> GammaVector:
    gamma = -root.b.copy()
    if reconcile:
        diag = (root.a - 1.0 - np.diag(root.b)) / 2.0
    else:
        diag = root.a - 1.0
    gamma[np.diag_indices_from(gamma)] = diag
    return GammaVector.from_matrix(gamma, root.part)


def sigma_to_gamma(
    sigma: UniformBlockMatrix,
    strict: bool = True,
    search: bool = True,
    tol: float = None,
) -> GammaVector:
    """
    Recover gamma from a UB covariance Sigma of MAUD form.

    Takes the principal root of Omega = Sigma^-1 first. When that root does
    not satisfy a_gg + b_gg = 1 (a zero-diagonal Upsilon), the real roots are
    ranked by ``ub_roots_by_diagonal``; the search is skipped with a warning
    above UBMAUD_ROOT_SEARCH_MAX_G communities.

    Args:
        sigma: Positive definite UB covariance
        strict: Raise when no root meets the constraint; otherwise take the
                closest root and split its diagonal discrepancy evenly
        search: Try non-principal roots
        tol: Constraint tolerance (defaults to UBMAUD_REPRESENTABLE_TOL)

    Raises:
        NotPositiveDefinite: If sigma is not positive definite
        NotMaudRepresentable: If strict and no root meets the constraint
    """
    if tol is None:
        tol = conf.get('UBMAUD_REPRESENTABLE_TOL')
    check_positive_definite(sigma, 'Sigma')
    omega = ub_inverse(sigma)
    principal = ub_sqrt(omega)
    best, best_gap = principal, _root_discrepancy(principal)
    if best_gap <= tol:
        return _root_to_gamma(principal, reconcile=False)
    max_groups = conf.get('UBMAUD_ROOT_SEARCH_MAX_G')
    if search and sigma.G > max_groups:
        logger.warning(
            "sigma_to_gamma: G=%d exceeds UBMAUD_ROOT_SEARCH_MAX_G=%d; only the principal root was tried",
            sigma.G, max_groups,
        )
    elif search:
        ranked = ub_roots_by_diagonal(omega)
        gap, root = next(ranked)
        if gap < best_gap:
            best, best_gap = root, gap
        if gap <= tol:
            if next(ranked, (np.inf, None))[0] <= tol:
                logger.warning("sigma_to_gamma: several roots satisfy the zero-diagonal constraint; using the closest")
            logger.debug("sigma_to_gamma: non-principal root selected")
            return _root_to_gamma(root, reconcile=False)
    if strict:
        raise NotMaudRepresentable(
            f"Sigma is not of MAUD form: smallest diagonal discrepancy {best_gap:.3g} exceeds {tol:.3g}"
        )
    logger.debug("sigma_to_gamma: relaxed projection with discrepancy %.3g", best_gap)
    return _root_to_gamma(best, reconcile=True)


def gamma_from_values(values: Iterable[float], part) -> GammaVector:
    return GammaVector(np.asarray(list(values), dtype=float), as_partition(part))
