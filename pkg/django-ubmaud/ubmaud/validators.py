"""
Validators for regression inputs.

Checks the shapes, finiteness, design rank and sample size a dataset needs
before fitting, and the range of p-values handed to multiplicity
corrections. ``DatasetValidator`` bundles the dataset checks and is
callable; ``check_dataset`` is the non-raising variant used for reporting.
"""
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import conf
from .algebra import ub_eigenvalues
from .blocks import PartitionVector, as_partition
from .exceptions import DimensionMismatch, InvalidPValue, MaudInputError, RankDeficient


class DatasetValidator:
    """
    Validator for (X, Y, partition) triples.

    Performs, in order:
    - Shape checks (2-D arrays, matching row counts, Y columns = sum of sizes)
    - Finiteness of every entry
    - Full column rank of X
    - Sample size n > max(p, G(G+1)/2)

    Usage:
        validator = DatasetValidator()
        X, Y, part = validator.validate(X, Y, (30, 40, 60))
    """

    def __init__(self, condition_limit: Optional[float] = None):
        self.condition_limit = condition_limit or conf.get('UBMAUD_CONDITION_LIMIT')

    def validate(self, X, Y, part) -> Tuple[np.ndarray, np.ndarray, PartitionVector]:
        """
        Validate and normalize a dataset.

        Returns:
            (X, Y, partition) as float arrays and a PartitionVector

        Raises:
            DimensionMismatch: If shapes disagree or the sample is too small
            RankDeficient: If X does not have full column rank
            MaudInputError: If an entry is not finite
        """
        part = as_partition(part)
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or Y.ndim != 2:
            raise DimensionMismatch(f"X and Y must be 2-D (got {X.ndim}-D and {Y.ndim}-D)")
        if X.shape[0] != Y.shape[0]:
            raise DimensionMismatch(
                f"X has {X.shape[0]} rows but Y has {Y.shape[0]} rows"
            )
        if Y.shape[1] != part.R:
            raise DimensionMismatch(
                f"partition sums to {part.R} but Y has {Y.shape[1]} columns"
            )
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise MaudInputError("X and Y must contain only finite values")

        n, p = X.shape
        validate_sample_size(n, p, part)
        validate_design(X, self.condition_limit)
        return X, Y, part

    def __call__(self, X, Y, part):
        return self.validate(X, Y, part)


def validate_sample_size(n: int, p: int, part: PartitionVector) -> None:
    needed = max(p, part.n_params)
    if n <= needed:
        raise DimensionMismatch(
            f"Need more subjects than max(p, G(G+1)/2) = {needed} (got n={n})"
        )


def validate_design(X: np.ndarray, condition_limit: Optional[float] = None) -> None:
    """Raise ``RankDeficient`` unless X^T X is well conditioned."""
    limit = condition_limit or conf.get('UBMAUD_CONDITION_LIMIT')
    singular = np.linalg.svd(X, compute_uv=False)
    if singular.size == 0 or singular[-1] <= 0.0:
        raise RankDeficient(f"X is rank deficient (rank < {X.shape[1]})")
    cond = (singular[0] / singular[-1]) ** 2
    if cond > limit:
        raise RankDeficient(f"X^T X is ill-conditioned (condition number {cond:.3g})")


def validate_p_values(p_values) -> np.ndarray:
    p_values = np.asarray(p_values, dtype=float).reshape(-1)
    bad = ~np.isfinite(p_values) | (p_values < 0.0) | (p_values > 1.0)
    if np.any(bad):
        first = int(np.flatnonzero(bad)[0])
        raise InvalidPValue(f"p-value at position {first} is {p_values[first]!r}; must lie in [0, 1]")
    return p_values


def check_dataset(X, Y, part) -> Tuple[bool, List[str]]:
    """
    Non-raising dataset check.

    Returns:
        (is_valid, messages)
    """
    try:
        DatasetValidator().validate(X, Y, part)
    except MaudInputError as exc:
        return False, list(exc.messages)
    return True, []


def check_conditions(X, fit) -> Dict[str, Dict]:
    """
    Report the regularity conditions behind the asymptotic theory.

    Conditions 1-3 are checked outright (Sigma-hat positive definite, full
    column rank, sample size); the Fisher information spectrum divided by n
    is recorded for the limiting conditions, which cannot be checked on a
    single sample.

    Returns:
        Mapping condition name -> {'ok': bool or None, 'detail': str}
    """
    X = np.asarray(X, dtype=float)
    report = {}
    eig = ub_eigenvalues(fit.sigma)
    report['positive_definite'] = {
        'ok': bool(eig[0] > 0.0),
        'detail': f"Sigma-hat eigenvalues in [{eig[0]:.4g}, {eig[-1]:.4g}]",
    }
    try:
        validate_design(X)
        report['full_rank'] = {'ok': True, 'detail': f"rank(X) = {X.shape[1]}"}
    except RankDeficient as exc:
        report['full_rank'] = {'ok': False, 'detail': str(exc)}
    needed = max(X.shape[1], fit.part.n_params)
    report['sample_size'] = {'ok': fit.n > needed, 'detail': f"n = {fit.n}, needs > {needed}"}
    spectrum = fit.diagnostics.fisher_eigenvalues
    report['information_spectrum'] = {
        'ok': None if spectrum is None else bool(spectrum[0] > 0.0),
        'detail': 'not computed' if spectrum is None else
        f"eig(Psi/n) in [{spectrum[0]:.4g}, {spectrum[-1]:.4g}]",
    }
    return report
