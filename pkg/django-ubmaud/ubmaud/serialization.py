"""
File formats.

Dense matrices are CSV (row-major, optional header row). UB matrices are JSON
``{"kind": "ub", "sizes": [...], "A": [...], "B": [...]}`` with B as its upper
triangle in row-major order. Parameter vectors carry an explicit
``"order": "row-major-upper"`` tag. Every JSON document written here has a
``spec_version`` field.
"""
import configparser
import json
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from django.core.serializers.json import DjangoJSONEncoder

from . import conf
from .blocks import PartitionVector, UniformBlockMatrix, as_partition
from .exceptions import DimensionMismatch, InputParseError
from .params import GammaVector, RhoVector

PARAM_ORDER = 'row-major-upper'
PathLike = Union[str, Path]


class NumpyJSONEncoder(DjangoJSONEncoder):
    """JSON encoder that also understands numpy scalars and arrays."""

    def default(self, o):
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.bool_):
            return bool(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, PartitionVector):
            return list(o.sizes)
        return super().default(o)


def write_json(path: PathLike, payload: Dict) -> None:
    payload = {'spec_version': conf.get('UBMAUD_SPEC_VERSION'), **payload}
    Path(path).write_text(json.dumps(payload, cls=NumpyJSONEncoder, indent=2), encoding='utf-8')


def read_json(path: PathLike) -> Dict:
    try:
        return json.loads(Path(path).read_text(encoding='utf-8'))
    except (OSError, ValueError) as exc:
        raise InputParseError(f"Cannot read JSON from {path}: {exc}")


SCENARIO_SECTION = 'scenario'
VARIANT_PREFIX = 'variant:'


def _scenario_value(raw: str):
    try:
        return json.loads(raw)
    except ValueError:
        return raw.strip()


def read_scenario(path: PathLike) -> Dict:
    """
    Read a scenario file.

    ``.json`` files are read as JSON. Anything else is a key/value file: a
    ``[scenario]`` section of ``key = value`` lines plus one
    ``[variant:LABEL]`` section per variant. Values are JSON literals
    (``sizes = [30, 40, 60]``); bare words are kept as strings.

    Raises:
        InputParseError: If the file cannot be read or has no [scenario] section
    """
    path = Path(path)
    if path.suffix.lower() == '.json':
        return read_json(path)
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=('#', ';'))
    parser.optionxform = str
    try:
        with open(path, encoding='utf-8') as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise InputParseError(f"Cannot read scenario from {path}: {exc}")
    if not parser.has_section(SCENARIO_SECTION):
        raise InputParseError(f"{path} has no [{SCENARIO_SECTION}] section")
    spec = {key: _scenario_value(raw) for key, raw in parser.items(SCENARIO_SECTION)}
    variants = []
    for section in parser.sections():
        if section.startswith(VARIANT_PREFIX):
            variant = {key: _scenario_value(raw) for key, raw in parser.items(section)}
            variant.setdefault('label', section[len(VARIANT_PREFIX):].strip())
            variants.append(variant)
    if variants:
        spec['variants'] = variants
    return spec


def read_matrix_csv(path: PathLike, header: bool = False) -> Tuple[np.ndarray, Optional[Tuple[str, ...]]]:
    """
    Read a numeric CSV into a 2-D float array.

    Returns:
        (matrix, column names or None)

    Raises:
        InputParseError: If the file is missing, empty or not fully numeric
    """
    try:
        frame = pd.read_csv(path, header=0 if header else None)
    except (OSError, ValueError, pd.errors.ParserError) as exc:
        raise InputParseError(f"Cannot parse CSV {path}: {exc}")
    try:
        values = frame.to_numpy(dtype=float)
    except (TypeError, ValueError):
        raise InputParseError(f"CSV {path} contains non-numeric entries")
    if values.size == 0:
        raise InputParseError(f"CSV {path} is empty")
    if np.isnan(values).any():
        raise InputParseError(f"CSV {path} has missing entries")
    names = tuple(str(c) for c in frame.columns) if header else None
    return values, names


def write_matrix_csv(path: PathLike, matrix: np.ndarray, columns: Optional[Sequence[str]] = None) -> None:
    frame = pd.DataFrame(np.atleast_2d(matrix), columns=columns)
    frame.to_csv(path, index=False, header=columns is not None, float_format='%.17g')


def ub_to_dict(m: UniformBlockMatrix) -> Dict:
    return {
        'kind': 'ub',
        'sizes': list(m.part.sizes),
        'A': m.a.tolist(),
        'B': m.b[np.triu_indices(m.G)].tolist(),
    }


def ub_from_dict(payload: Dict, part=None) -> UniformBlockMatrix:
    try:
        part = as_partition(payload.get('sizes', part))
        upper = np.asarray(payload['B'], dtype=float)
        a = np.asarray(payload['A'], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputParseError(f"Malformed UB document: {exc}")
    if upper.ndim == 2:
        return UniformBlockMatrix(a, upper, part)
    if upper.size != part.n_params:
        raise DimensionMismatch(f"B upper triangle needs {part.n_params} entries, got {upper.size}")
    b = np.zeros((part.G, part.G))
    iu = np.triu_indices(part.G)
    b[iu] = upper
    b.T[iu] = upper
    return UniformBlockMatrix(a, b, part)


def params_to_dict(vector: Union[GammaVector, RhoVector]) -> Dict:
    return {
        'kind': vector.symbol,
        'order': PARAM_ORDER,
        'sizes': list(vector.part.sizes),
        'values': vector.values.tolist(),
    }


def params_from_dict(payload, part=None) -> Union[GammaVector, RhoVector]:
    """Parse a gamma/rho document, or a bare list when ``part`` is given."""
    if isinstance(payload, list):
        if part is None:
            raise InputParseError("A bare parameter list needs an explicit partition")
        return GammaVector(payload, as_partition(part))
    try:
        order = payload.get('order', PARAM_ORDER)
        if order != PARAM_ORDER:
            raise InputParseError(f"Unsupported parameter order {order!r}; expected {PARAM_ORDER!r}")
        part = as_partition(payload.get('sizes', part))
        cls = RhoVector if payload.get('kind') == 'rho' else GammaVector
        return cls(payload['values'], part)
    except (KeyError, TypeError) as exc:
        raise InputParseError(f"Malformed parameter document: {exc}")


def fit_result_to_dict(fit) -> Dict:
    return {
        'kind': 'fit_result',
        'sizes': list(fit.part.sizes),
        'n': fit.n,
        'p': fit.p,
        'feature_names': list(fit.feature_names) if fit.feature_names else None,
        'covariate_names': list(fit.covariate_names) if fit.covariate_names else None,
        'beta': fit.beta.tolist(),
        'beta_se': fit.beta_se.tolist(),
        'gamma': params_to_dict(fit.gamma),
        'gamma_se': fit.gamma_se.tolist(),
        'gamma_cov': fit.gamma_cov.tolist(),
        'rho': params_to_dict(fit.rho),
        'rho_se': fit.rho_se.tolist(),
        'sigma': ub_to_dict(fit.sigma),
        'xtx_inv': fit.beta_cov.right.tolist(),
        'diagnostics': fit.diagnostics.to_dict(),
        'fgls': fit.fgls,
    }


TEST_COLUMNS = ['label', 'estimate', 'se', 'statistic', 'p_value', 'adjusted_p_value', 'rejected']


def tests_to_records(results) -> List[Dict]:
    """One JSON-ready row per test result, in ``TEST_COLUMNS`` order."""
    return [
        {
            'label': r.label,
            'estimate': r.estimate,
            'se': r.standard_error,
            'statistic': r.statistic,
            'p_value': r.p_value,
            'adjusted_p_value': r.adjusted_p_value,
            'rejected': r.rejected,
        }
        for r in results
    ]


def tests_to_frame(results) -> pd.DataFrame:
    return pd.DataFrame(tests_to_records(results), columns=TEST_COLUMNS)


def write_report(report, outdir: PathLike) -> List[Path]:
    """
    Write a Monte-Carlo report: report.json, parameters.csv, replicates.csv.

    Returns:
        The paths written
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = [outdir / 'report.json', outdir / 'parameters.csv', outdir / 'replicates.csv']
    write_json(paths[0], report.to_dict())
    report.parameter_frame().to_csv(paths[1], index=False)
    report.replicate_frame().to_csv(paths[2], index=False)
    return paths
