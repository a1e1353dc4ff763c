"""
Kronecker-factored covariance U (x) V.

Coefficient covariances in this package all factor as a left R x R factor
(a UB matrix, or a dense/diagonal matrix for baselines and perturbed truths)
times a right p x p factor such as (X^T X)^-1. Vectors are ordered
vec(B^T): coefficient (r, q) sits at index r * p + q, so a length-Rp vector
reshapes row-major to an R x p matrix C and (U (x) V) c = vec((U C V)^T).
"""
from typing import Union

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from . import conf
from .algebra import ub_apply, ub_eigenvalues, ub_frobenius_inner, ub_sub, ub_trace_product
from .blocks import UniformBlockMatrix, expand_dense
from .exceptions import DimensionMismatch

LeftFactor = Union[UniformBlockMatrix, np.ndarray]


class KroneckerCovariance:
    """Covariance ``left (x) right`` kept in factored form."""

    def __init__(self, left: LeftFactor, right: np.ndarray):
        if not isinstance(left, UniformBlockMatrix):
            left = np.asarray(left, dtype=float)
            if left.ndim != 2 or left.shape[0] != left.shape[1]:
                raise DimensionMismatch(f"Left factor must be square, got {left.shape}")
        right = np.asarray(right, dtype=float)
        if right.ndim != 2 or right.shape[0] != right.shape[1]:
            raise DimensionMismatch(f"Right factor must be square, got {right.shape}")
        self.left = left
        self.right = right

    @property
    def R(self) -> int:
        return self.left.R if self.is_uniform else self.left.shape[0]

    @property
    def p(self) -> int:
        return self.right.shape[0]

    @property
    def is_uniform(self) -> bool:
        return isinstance(self.left, UniformBlockMatrix)

    def left_dense(self) -> np.ndarray:
        return expand_dense(self.left) if self.is_uniform else self.left

    def left_diagonal(self) -> np.ndarray:
        return self.left.diagonal() if self.is_uniform else np.diag(self.left).copy()

    def diagonal(self) -> np.ndarray:
        """Variances in vec(B^T) order."""
        return np.outer(self.left_diagonal(), np.diag(self.right)).ravel()

    def standard_errors(self) -> np.ndarray:
        """R x p matrix of coefficient standard errors."""
        return np.sqrt(np.outer(self.left_diagonal(), np.diag(self.right)))

    def apply_left(self, x: np.ndarray) -> np.ndarray:
        return ub_apply(self.left, x) if self.is_uniform else self.left @ x

    def matvec(self, vec: np.ndarray) -> np.ndarray:
        mat = np.asarray(vec, dtype=float).reshape(self.R, self.p)
        return (self.apply_left(mat) @ self.right).ravel()

    def contract(self, contrast: np.ndarray) -> np.ndarray:
        """
        C (U (x) V) C^T for an s x Rp contrast matrix, without forming U (x) V.
        """
        contrast = np.atleast_2d(np.asarray(contrast, dtype=float))
        if contrast.shape[1] != self.R * self.p:
            raise DimensionMismatch(
                f"Contrast has {contrast.shape[1]} columns, expected Rp={self.R * self.p}"
            )
        s = contrast.shape[0]
        shaped = contrast.reshape(s, self.R, self.p)
        mixed = np.stack([self.apply_left(c) @ self.right for c in shaped])
        out = np.einsum('krp,lrp->kl', shaped, mixed)
        return (out + out.T) / 2.0

    def to_dense(self) -> np.ndarray:
        size = self.R * self.p
        limit = conf.get('UBMAUD_DENSE_LIMIT')
        if size > limit:
            raise DimensionMismatch(f"Refusing to materialize a {size}x{size} covariance (limit {limit})")
        return np.kron(self.left_dense(), self.right)

    def _left_inner(self, other: 'KroneckerCovariance') -> float:
        if self.is_uniform and other.is_uniform:
            return ub_frobenius_inner(self.left, other.left)
        if self.is_uniform:
            return ub_trace_product(other.left.T, self.left)
        if other.is_uniform:
            return ub_trace_product(self.left.T, other.left)
        return float(np.vdot(self.left, other.left))

    def frobenius_inner(self, other: 'KroneckerCovariance') -> float:
        """<U1 (x) V1, U2 (x) V2>_F = <U1, U2>_F <V1, V2>_F."""
        return self._left_inner(other) * float(np.vdot(self.right, other.right))

    def frobenius_norm(self) -> float:
        return float(np.sqrt(max(self.frobenius_inner(self), 0.0)))

    def left_spectral_norm(self) -> float:
        if self.is_uniform:
            return float(np.max(np.abs(ub_eigenvalues(self.left))))
        return float(np.max(np.abs(np.linalg.eigvalsh((self.left + self.left.T) / 2.0))))

    def spectral_norm(self) -> float:
        """||U (x) V||_2 = ||U||_2 ||V||_2 for symmetric factors."""
        right = float(np.max(np.abs(np.linalg.eigvalsh((self.right + self.right.T) / 2.0))))
        return self.left_spectral_norm() * right

    def left_difference(self, other: 'KroneckerCovariance') -> 'KroneckerCovariance':
        """(U1 - U2) (x) V for two covariances sharing the right factor."""
        if self.is_uniform and other.is_uniform:
            left = ub_sub(self.left, other.left)
        else:
            left = self.left_dense() - other.left_dense()
        return KroneckerCovariance(left, self.right)

    def shares_right(self, other: 'KroneckerCovariance') -> bool:
        return self.right.shape == other.right.shape and bool(np.array_equal(self.right, other.right))


def difference_operator(x: KroneckerCovariance, y: KroneckerCovariance) -> LinearOperator:
    """Matrix-free symmetric operator for x - y."""
    size = x.R * x.p

    def matvec(vec):
        vec = np.asarray(vec, dtype=float).reshape(-1)
        return x.matvec(vec) - y.matvec(vec)

    return LinearOperator((size, size), matvec=matvec, rmatvec=matvec, dtype=float)


def operator_spectral_norm(op: LinearOperator) -> float:
    """Largest absolute eigenvalue of a symmetric operator."""
    if op.shape[0] == 1:
        return float(abs(op.matvec(np.ones(1))[0]))
    if op.shape[0] <= 2:
        dense = op.matmat(np.eye(op.shape[0]))
        return float(np.max(np.abs(np.linalg.eigvalsh((dense + dense.T) / 2.0))))
    value = eigsh(op, k=1, which='LM', return_eigenvectors=False, tol=1e-12)
    return float(np.abs(value[0]))
