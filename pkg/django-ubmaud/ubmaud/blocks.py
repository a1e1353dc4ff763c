"""
Partition vectors and uniform-block (UB) matrix types.

A symmetric R x R matrix with G communities of sizes L_1..L_G is uniform-block
when every diagonal block is ``a_gg I + b_gg J`` and every off-diagonal block
is ``b_gg' J``. Such a matrix is stored as the triple (A, B, partition): the
G-vector ``a`` of A's diagonal and the symmetric G x G matrix ``b``. The
generalized triple drops the symmetry of ``b``; products of two UB matrices
land there.
"""
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np

from .exceptions import DimensionMismatch, InputParseError, InvalidPartition, StructureViolation

_SYMMETRY_RTOL = 1e-8


@dataclass(frozen=True, eq=True)
class PartitionVector:
    """Community sizes (L_1, ..., L_G); every size is at least 2."""

    sizes: Tuple[int, ...]

    def __post_init__(self):
        try:
            sizes = tuple(int(s) for s in self.sizes)
        except (TypeError, ValueError):
            raise InvalidPartition(f"Partition sizes must be integers, got {self.sizes!r}")
        if any(float(s) != float(o) for s, o in zip(sizes, self.sizes)):
            raise InvalidPartition(f"Partition sizes must be integers, got {self.sizes!r}")
        if not sizes:
            raise InvalidPartition("Partition must contain at least one community")
        bad = [s for s in sizes if s < 2]
        if bad:
            raise InvalidPartition(
                f"Every community needs at least 2 features (got sizes {list(sizes)})"
            )
        object.__setattr__(self, 'sizes', sizes)

    @classmethod
    def parse(cls, text: str) -> 'PartitionVector':
        """Build a partition from a comma-separated string such as ``"30,40,60"``."""
        parts = [p.strip() for p in str(text).split(',') if p.strip()]
        try:
            return cls(tuple(int(p) for p in parts))
        except ValueError:
            raise InputParseError(f"Cannot parse partition {text!r}; expected e.g. '30,40,60'")

    @property
    def G(self) -> int:
        return len(self.sizes)

    @property
    def R(self) -> int:
        return int(sum(self.sizes))

    @property
    def n_params(self) -> int:
        """Number of free dependence parameters, G(G+1)/2."""
        return self.G * (self.G + 1) // 2

    @cached_property
    def ell(self) -> np.ndarray:
        out = np.asarray(self.sizes, dtype=float)
        out.setflags(write=False)
        return out

    @cached_property
    def offsets(self) -> np.ndarray:
        """Start index of every community in feature order."""
        out = np.concatenate([[0], np.cumsum(self.sizes)[:-1]]).astype(np.intp)
        out.setflags(write=False)
        return out

    @cached_property
    def labels(self) -> np.ndarray:
        """Community index (0-based) of every feature."""
        out = np.repeat(np.arange(self.G), self.sizes)
        out.setflags(write=False)
        return out

    def slices(self) -> List[slice]:
        return [slice(int(o), int(o) + s) for o, s in zip(self.offsets, self.sizes)]

    def __str__(self):
        return ','.join(str(s) for s in self.sizes)


def as_partition(value: Union[PartitionVector, Sequence[int], str]) -> PartitionVector:
    if isinstance(value, PartitionVector):
        return value
    if isinstance(value, str):
        return PartitionVector.parse(value)
    return PartitionVector(tuple(value))


def block_sums(dense: np.ndarray, part: PartitionVector) -> np.ndarray:
    """G x G matrix of the sums of every (g, g') block of an R x R matrix."""
    rows = np.add.reduceat(dense, part.offsets, axis=0)
    return np.add.reduceat(rows, part.offsets, axis=1)


def block_traces(dense: np.ndarray, part: PartitionVector) -> np.ndarray:
    """Traces of the G diagonal blocks of an R x R matrix."""
    return np.add.reduceat(np.diagonal(dense), part.offsets)


@dataclass(frozen=True, eq=False)
class DeltaMatrix:
    """The G x G matrix A + B L attached to a (generalized) UB triple."""

    values: np.ndarray
    part: PartitionVector

    def symmetrized(self) -> np.ndarray:
        """L^(1/2) Delta L^(-1/2); symmetric whenever B is."""
        root = np.sqrt(self.part.ell)
        return root[:, None] * self.values / root[None, :]

    def condition(self) -> float:
        return float(np.linalg.cond(self.values))


class GeneralizedBlockMatrix:
    """
    Block-constant R x R matrix ``A o I + B o J`` with an arbitrary G x G ``B``.

    Instances are immutable; arithmetic lives in ``ubmaud.algebra``.
    """

    __slots__ = ('a', 'b', 'part')

    def __init__(self, a: Iterable[float], b: Iterable[Iterable[float]], part: PartitionVector):
        part = as_partition(part)
        a = np.array(a, dtype=float).reshape(-1)
        b = np.array(b, dtype=float)
        if a.shape != (part.G,):
            raise DimensionMismatch(
                f"A must have {part.G} diagonal entries for partition ({part}), got {a.shape}"
            )
        if b.shape != (part.G, part.G):
            raise DimensionMismatch(
                f"B must be {part.G}x{part.G} for partition ({part}), got {b.shape}"
            )
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise StructureViolation("UB entries must be finite")
        b = self._normalize_b(b)
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, 'a', a)
        object.__setattr__(self, 'b', b)
        object.__setattr__(self, 'part', part)

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    def __reduce__(self):
        return (type(self), (self.a, self.b, self.part))

    @staticmethod
    def _normalize_b(b: np.ndarray) -> np.ndarray:
        return b

    @property
    def G(self) -> int:
        return self.part.G

    @property
    def R(self) -> int:
        return self.part.R

    def delta(self) -> DeltaMatrix:
        return DeltaMatrix(np.diag(self.a) + self.b * self.part.ell[None, :], self.part)

    def is_symmetric(self, rtol: float = _SYMMETRY_RTOL) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.b))))
        return bool(np.allclose(self.b, self.b.T, rtol=0.0, atol=rtol * scale))

    def to_uniform(self) -> 'UniformBlockMatrix':
        """Reinterpret as a symmetric UB matrix; raises when B is not symmetric."""
        return UniformBlockMatrix(self.a, self.b, self.part)

    def diagonal(self) -> np.ndarray:
        """The R diagonal entries a_gg + b_gg, expanded per feature."""
        per_block = self.a + np.diag(self.b)
        return per_block[self.part.labels]

    def __repr__(self):
        return f"{type(self).__name__}(a={self.a.tolist()}, b={self.b.tolist()}, sizes={self.part.sizes})"


class UniformBlockMatrix(GeneralizedBlockMatrix):
    """
    Symmetric uniform-block matrix.

    ``b`` is stored exactly symmetric; inputs that are not symmetric up to
    round-off are rejected with ``StructureViolation``.
    """

    __slots__ = ()

    @staticmethod
    def _normalize_b(b: np.ndarray) -> np.ndarray:
        scale = max(1.0, float(np.max(np.abs(b))))
        if not np.allclose(b, b.T, rtol=0.0, atol=_SYMMETRY_RTOL * scale):
            raise StructureViolation("B of a uniform-block matrix must be symmetric")
        return (b + b.T) / 2.0

    @classmethod
    def identity(cls, part: PartitionVector) -> 'UniformBlockMatrix':
        part = as_partition(part)
        return cls(np.ones(part.G), np.zeros((part.G, part.G)), part)

    @classmethod
    def zeros(cls, part: PartitionVector) -> 'UniformBlockMatrix':
        part = as_partition(part)
        return cls(np.zeros(part.G), np.zeros((part.G, part.G)), part)


def expand_dense(m: GeneralizedBlockMatrix) -> np.ndarray:
    """Materialize the R x R matrix. Only meant for small R and oracles."""
    labels = m.part.labels
    dense = m.b[np.ix_(labels, labels)]
    dense[np.diag_indices(m.R)] += m.a[labels]
    return dense


def _block_value(values: np.ndarray) -> float:
    lo, hi = values.min(), values.max()
    if lo == hi:
        return float(lo)
    return float(values.mean())


def extract_ub(dense: np.ndarray, part: PartitionVector, tol: float = 1e-10) -> UniformBlockMatrix:
    """
    Recover (A, B) from a dense matrix with uniform-block structure.

    Args:
        dense: Symmetric R x R matrix
        part: Community sizes, summing to R
        tol: Largest accepted deviation of any entry from its block pattern

    Raises:
        DimensionMismatch: If the matrix is not R x R
        StructureViolation: If the matrix is not symmetric or not block-uniform
    """
    part = as_partition(part)
    dense = np.asarray(dense, dtype=float)
    if dense.shape != (part.R, part.R):
        raise DimensionMismatch(
            f"Matrix is {dense.shape} but partition ({part}) needs {part.R}x{part.R}"
        )
    if np.max(np.abs(dense - dense.T), initial=0.0) > tol:
        raise StructureViolation("Matrix is not symmetric within tolerance")

    G = part.G
    a = np.empty(G)
    b = np.empty((G, G))
    worst = 0.0
    slices = part.slices()
    for g, sg in enumerate(slices):
        block = dense[sg, sg]
        diag = np.diagonal(block)
        off = block[~np.eye(block.shape[0], dtype=bool)]
        d = _block_value(diag)
        o = _block_value(off)
        worst = max(worst, np.max(np.abs(diag - d)), np.max(np.abs(off - o)))
        b[g, g] = o
        a[g] = d - o
        for h in range(g + 1, G):
            cross = dense[sg, slices[h]]
            v = _block_value(cross.ravel())
            worst = max(worst, np.max(np.abs(cross - v)))
            b[g, h] = b[h, g] = v
    if worst > tol:
        raise StructureViolation(
            f"Matrix is not uniform-block for partition ({part}): "
            f"largest deviation {worst:.3g} exceeds tolerance {tol:.3g}"
        )
    return UniformBlockMatrix(a, b, part)
