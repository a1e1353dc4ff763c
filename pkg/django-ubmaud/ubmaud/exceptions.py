"""
Exception hierarchy for ubmaud.

Input problems (bad partitions, mismatched shapes, rank-deficient designs)
derive from ``MaudInputError``, which is also a Django ``ValidationError`` so
callers already catching validation errors keep working. Numerical failures
(singular or indefinite matrices, non-convergence) derive from
``MaudNumericalError``. Each class carries the process exit code the
management commands map it to.
"""
from typing import Optional

import numpy as np
from django.core.exceptions import ValidationError


class MaudError(Exception):
    """Base class for every ubmaud error."""

    exit_code = 4


class MaudInputError(MaudError, ValidationError):
    """Invalid input: the caller can fix it by changing arguments."""

    exit_code = 3

    def __str__(self):
        return '; '.join(self.messages)


class InputParseError(MaudInputError):
    """A file could not be parsed into the expected numeric form."""

    exit_code = 2


class InvalidPartition(MaudInputError):
    pass


class PartitionMismatch(MaudInputError):
    pass


class DimensionMismatch(MaudInputError):
    pass


class StructureViolation(MaudInputError):
    pass


class IndexOutOfRange(MaudInputError):
    pass


class InvalidPValue(MaudInputError):
    pass


class RankDeficient(MaudInputError):
    """The design matrix X does not have full column rank."""


class RankDeficientContrast(MaudInputError):
    pass


class InadmissibleStart(MaudInputError):
    """The starting dependence parameters make I - Upsilon singular."""


class InadmissibleGamma(MaudInputError):
    pass


class InvalidScenario(MaudInputError):
    pass


class MaudNumericalError(MaudError):
    """A numerical precondition failed on otherwise well-formed input."""

    exit_code = 4


class Singular(MaudNumericalError):
    pass


class NotPositiveDefinite(MaudNumericalError):
    pass


class NotMaudRepresentable(MaudNumericalError):
    """No real square root of Sigma^-1 has a zero-diagonal Upsilon."""


class SingularContrastCovariance(MaudNumericalError):
    pass


class PerturbationNotPD(MaudNumericalError):
    pass


class NotConverged(MaudNumericalError):
    """
    Fisher scoring stopped without meeting the score tolerance.

    The best iterate reached is kept so callers can inspect or reuse it.
    """

    def __init__(
        self,
        message: str,
        gamma: Optional[np.ndarray] = None,
        score_norm: Optional[float] = None,
        iterations: Optional[int] = None,
    ):
        super().__init__(message)
        self.gamma = gamma
        self.score_norm = score_norm
        self.iterations = iterations
