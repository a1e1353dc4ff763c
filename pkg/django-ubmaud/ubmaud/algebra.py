"""
Closed-form arithmetic on uniform-block matrices.

Every operation works on the G-dimensional (A, B) representation and never
forms an R x R matrix, so costs are O(G^3) (or O(nR) for ``ub_apply``)
regardless of the community sizes.
"""
import itertools
import logging
from typing import Iterator, Tuple, Union

import numpy as np
import scipy.linalg

from . import conf
from .blocks import GeneralizedBlockMatrix, PartitionVector, UniformBlockMatrix, block_sums, block_traces
from .exceptions import DimensionMismatch, NotPositiveDefinite, PartitionMismatch, Singular

logger = logging.getLogger(__name__)

BlockLike = Union[GeneralizedBlockMatrix, UniformBlockMatrix]


def _same_partition(x: GeneralizedBlockMatrix, y: GeneralizedBlockMatrix) -> PartitionVector:
    if x.part != y.part:
        raise PartitionMismatch(f"Partitions differ: ({x.part}) vs ({y.part})")
    return x.part


def _build(a, b, part, symmetric: bool) -> GeneralizedBlockMatrix:
    if symmetric:
        return UniformBlockMatrix(a, (b + b.T) / 2.0, part)
    return GeneralizedBlockMatrix(a, b, part)


def _both_uniform(*ms) -> bool:
    return all(isinstance(m, UniformBlockMatrix) for m in ms)


def ub_add(x: BlockLike, y: BlockLike) -> BlockLike:
    part = _same_partition(x, y)
    return _build(x.a + y.a, x.b + y.b, part, _both_uniform(x, y))


def ub_sub(x: BlockLike, y: BlockLike) -> BlockLike:
    part = _same_partition(x, y)
    return _build(x.a - y.a, x.b - y.b, part, _both_uniform(x, y))


def ub_scale(x: BlockLike, c: float) -> BlockLike:
    return _build(c * x.a, c * x.b, x.part, _both_uniform(x))


def ub_mul(x: BlockLike, y: BlockLike) -> GeneralizedBlockMatrix:
    """
    Product of two block-constant matrices.

    (A1, B1)(A2, B2) = (A1 A2, A1 B2 + B1 A2 + B1 L B2). The result is a
    generalized triple: B is not symmetric unless the factors commute.
    """
    part = _same_partition(x, y)
    ell = part.ell
    a = x.a * y.a
    b = x.a[:, None] * y.b + x.b * y.a[None, :] + x.b @ (ell[:, None] * y.b)
    return GeneralizedBlockMatrix(a, b, part)


def ub_square(x: UniformBlockMatrix) -> UniformBlockMatrix:
    product = ub_mul(x, x)
    return UniformBlockMatrix(product.a, (product.b + product.b.T) / 2.0, x.part)


def _check_invertible(m: GeneralizedBlockMatrix) -> np.ndarray:
    rtol = conf.get('UBMAUD_SINGULAR_RTOL')
    limit = conf.get('UBMAUD_CONDITION_LIMIT')
    abs_a = np.abs(m.a)
    if np.any(abs_a == 0.0) or abs_a.min() < rtol * abs_a.max():
        raise Singular(f"A has a (near) zero diagonal entry: min |a| = {abs_a.min():.3g}")
    delta = m.delta().values
    cond = np.linalg.cond(delta)
    if not np.isfinite(cond) or cond > limit:
        raise Singular(f"Delta = A + BL is singular (condition number {cond:.3g})")
    return delta


def ub_inverse(m: BlockLike) -> BlockLike:
    """
    Inverse in closed form: (A^-1, -Delta^-1 B A^-1).

    Raises:
        Singular: If some a_gg is zero or Delta is numerically singular
    """
    delta = _check_invertible(m)
    a_inv = 1.0 / m.a
    b_inv = -np.linalg.solve(delta, m.b * a_inv[None, :])
    return _build(a_inv, b_inv, m.part, _both_uniform(m))


def ub_eigenvalues(m: BlockLike) -> np.ndarray:
    """
    All R eigenvalues, ascending: a_gg repeated L_g - 1 times plus eig(Delta).

    Symmetric inputs go through the symmetrized Delta and return real values;
    generalized triples may return complex ones.
    """
    repeated = np.repeat(m.a, m.part.ell.astype(int) - 1)
    delta = m.delta()
    if isinstance(m, UniformBlockMatrix):
        sym = delta.symmetrized()
        top = np.linalg.eigvalsh((sym + sym.T) / 2.0)
        return np.sort(np.concatenate([repeated, top]))
    top = np.linalg.eigvals(delta.values)
    if np.all(np.abs(top.imag) <= 1e-12 * max(1.0, np.abs(top).max())):
        return np.sort(np.concatenate([repeated, top.real]))
    return np.sort_complex(np.concatenate([repeated, top]))


def ub_det(m: BlockLike) -> float:
    return float(np.prod(np.power(m.a, m.part.ell - 1)) * np.linalg.det(m.delta().values))


def ub_log_det(m: BlockLike) -> float:
    """
    log det of a positive definite UB matrix.

    Raises:
        NotPositiveDefinite: If some a_gg <= 0 or det(Delta) <= 0
    """
    if np.any(m.a <= 0.0):
        raise NotPositiveDefinite(f"A has a non-positive entry (min a = {m.a.min():.3g})")
    sign, logdet = np.linalg.slogdet(m.delta().values)
    if sign <= 0:
        raise NotPositiveDefinite("det(Delta) is not positive")
    return float(np.sum((m.part.ell - 1) * np.log(m.a)) + logdet)


def check_positive_definite(m: UniformBlockMatrix, what: str = 'matrix') -> None:
    """Raise ``NotPositiveDefinite`` unless every eigenvalue of ``m`` is positive."""
    rtol = conf.get('UBMAUD_SINGULAR_RTOL')
    if np.any(m.a <= 0.0):
        raise NotPositiveDefinite(f"{what} is not positive definite: min a = {m.a.min():.3g}")
    sym = m.delta().symmetrized()
    low = np.linalg.eigvalsh((sym + sym.T) / 2.0)
    scale = max(float(np.max(np.abs(low))), float(np.max(m.a)))
    if low.min() <= rtol * scale:
        raise NotPositiveDefinite(
            f"{what} is not positive definite: smallest Delta eigenvalue {low.min():.3g}"
        )


def principal_sqrt(delta: np.ndarray, max_iter: int = 100, tol: float = 1e-14) -> np.ndarray:
    """
    Principal square root of a G x G matrix with no eigenvalues on (-inf, 0].

    Uses the eigendecomposition when it is well conditioned and real; falls
    back to the Denman-Beavers iteration otherwise.
    """
    values, vectors = np.linalg.eig(delta)
    if np.any((np.abs(values.imag) < 1e-14) & (values.real <= 0.0)):
        raise NotPositiveDefinite("Matrix has a non-positive real eigenvalue")
    if np.all(np.abs(values.imag) <= 1e-12 * np.abs(values).max()) and np.linalg.cond(vectors) < 1e8:
        root = (vectors.real * np.sqrt(values.real)) @ np.linalg.inv(vectors.real)
        return root
    x = np.array(delta, dtype=float)
    y = np.eye(delta.shape[0])
    for _ in range(max_iter):
        x_next = 0.5 * (x + np.linalg.inv(y))
        y_next = 0.5 * (y + np.linalg.inv(x))
        step = np.max(np.abs(x_next - x))
        x, y = x_next, y_next
        if step <= tol * max(1.0, np.max(np.abs(x))):
            break
    else:
        logger.warning("Denman-Beavers square root hit max_iter=%d", max_iter)
    return x


def _root_parts(m: UniformBlockMatrix):
    """Eigen-decomposition of the symmetrized Delta used by every root branch."""
    check_positive_definite(m, 'UB matrix')
    sym = m.delta().symmetrized()
    lam, q = np.linalg.eigh((sym + sym.T) / 2.0)
    return lam, q


def _assemble_root(m, a_root, lam_root, q) -> UniformBlockMatrix:
    inv_root = 1.0 / np.sqrt(m.part.ell)
    sym_root = (q * lam_root) @ q.T
    sym_root = (sym_root + sym_root.T) / 2.0
    b_root = inv_root[:, None] * (sym_root - np.diag(a_root)) * inv_root[None, :]
    return UniformBlockMatrix(a_root, b_root, m.part)


def ub_sqrt(m: BlockLike) -> BlockLike:
    """
    Principal square root: A* = A^(1/2), Delta* = Delta^(1/2), B* = (Delta* - A*) L^-1.

    Symmetric inputs must be positive definite and are rooted through the
    symmetrized Delta; generalized triples use ``principal_sqrt``.
    """
    if isinstance(m, UniformBlockMatrix):
        lam, q = _root_parts(m)
        return _assemble_root(m, np.sqrt(m.a), np.sqrt(lam), q)
    if np.any(m.a <= 0.0):
        raise NotPositiveDefinite("A must be positive for a real principal root")
    a_root = np.sqrt(m.a)
    delta_root = principal_sqrt(m.delta().values)
    b_root = (delta_root - np.diag(a_root)) / m.part.ell[None, :]
    return GeneralizedBlockMatrix(a_root, b_root, m.part)


def ub_square_roots(m: UniformBlockMatrix) -> Iterator[UniformBlockMatrix]:
    """
    Every real symmetric UB square root reachable by sign choices.

    Roots pick a sign for each sqrt(a_gg) and for each eigenvalue root of the
    symmetrized Delta, giving 4^G candidates; the principal root comes first
    and later roots flip progressively more signs.
    """
    lam, q = _root_parts(m)
    G = m.G
    patterns = sorted(itertools.product((1.0, -1.0), repeat=2 * G), key=lambda s: sum(v < 0 for v in s))
    a_abs = np.sqrt(m.a)
    lam_abs = np.sqrt(lam)
    for signs in patterns:
        signs = np.asarray(signs)
        yield _assemble_root(m, signs[:G] * a_abs, signs[G:] * lam_abs, q)


def ub_roots_by_diagonal(m: UniformBlockMatrix, target: float = 1.0) -> Iterator[Tuple[float, UniformBlockMatrix]]:
    """
    Real symmetric UB square roots ordered by max_g |a_gg + b_gg - target|.

    The sign of sqrt(a_gg) only moves the diagonal of community g, so each of
    the 2^G eigenvalue sign patterns is paired with its closest sqrt(a) signs
    and only those 2^G roots are ranked. Ties are broken by the number of
    flipped signs, so the principal root wins among equals. Roots are built
    lazily in rank order.
    """
    lam, q = _root_parts(m)
    G = m.G
    ell = m.part.ell
    eig_signs = np.array(list(itertools.product((1.0, -1.0), repeat=G)))
    lam_roots = eig_signs * np.sqrt(lam)
    sym_diag = lam_roots @ (q ** 2).T
    a_abs = np.sqrt(m.a)
    shrink = 1.0 - 1.0 / ell
    plus = np.abs(a_abs * shrink + sym_diag / ell - target)
    minus = np.abs(-a_abs * shrink + sym_diag / ell - target)
    a_signs = np.where(plus <= minus, 1.0, -1.0)
    gaps = np.minimum(plus, minus).max(axis=1)
    flips = np.sum(eig_signs < 0, axis=1) + np.sum(a_signs < 0, axis=1)
    for k in np.lexsort((flips, gaps)):
        yield float(gaps[k]), _assemble_root(m, a_signs[k] * a_abs, lam_roots[k], q)


def ub_apply(m: BlockLike, x: np.ndarray) -> np.ndarray:
    """
    Multiply the R x R matrix represented by ``m`` with ``x`` (R or R x k).

    Rows in community g get a_gg x_r + sum_g' b_gg' (column sums of x over g').
    """
    x = np.asarray(x, dtype=float)
    if x.shape[0] != m.R:
        raise DimensionMismatch(f"Operand has {x.shape[0]} rows, expected R={m.R}")
    labels = m.part.labels
    sums = np.add.reduceat(x, m.part.offsets, axis=0)
    mixed = m.b @ sums
    if x.ndim == 1:
        return m.a[labels] * x + mixed[labels]
    return m.a[labels][:, None] * x + mixed[labels]


def ub_trace_product(dense: np.ndarray, n: BlockLike) -> float:
    """
    tr(M N) for a dense R x R ``M`` and a block-constant ``N``.

    Needs only the G block traces and G x G block sums of M.
    """
    dense = np.asarray(dense, dtype=float)
    if dense.shape != (n.R, n.R):
        raise DimensionMismatch(f"Dense operand is {dense.shape}, expected {n.R}x{n.R}")
    traces = block_traces(dense, n.part)
    sums = block_sums(dense, n.part)
    return float(n.a @ traces + np.sum(sums * n.b.T))


def ub_trace_ub_product(m: BlockLike, n: BlockLike) -> float:
    """tr(M N) for two block-constant matrices, in O(G^2)."""
    part = _same_partition(m, n)
    ell = part.ell
    diag = m.a * n.a + m.a * np.diag(n.b) + np.diag(m.b) * n.a
    return float(ell @ diag + np.sum(m.b * n.b.T * np.outer(ell, ell)))


def ub_frobenius_inner(m: BlockLike, n: BlockLike) -> float:
    """<M, N>_F = tr(M^T N); equals ``ub_trace_ub_product`` for symmetric inputs."""
    transposed = GeneralizedBlockMatrix(m.a, m.b.T, m.part)
    return ub_trace_ub_product(transposed, n)


def ub_spectral_norm(m: UniformBlockMatrix) -> float:
    return float(np.max(np.abs(ub_eigenvalues(m))))


def solve_pd(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve with a Cholesky factorization; raises ``NotPositiveDefinite`` when it fails."""
    try:
        factor = scipy.linalg.cho_factor(matrix)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"Matrix is not positive definite: {exc}")
    return scipy.linalg.cho_solve(factor, rhs)
