"""
Settings access for ubmaud.

Every tunable is read from Django settings under a ``UBMAUD_`` prefix and
falls back to the module default when settings are not configured, so the
numerical modules work inside a Django project and as a plain library.
"""
import os
from typing import Any, Optional

from django.conf import settings

DEFAULTS = {
    'UBMAUD_SINGULAR_RTOL': 1e-12,
    'UBMAUD_CONDITION_LIMIT': 1e12,
    'UBMAUD_SCORE_TOL': 1e-8,
    'UBMAUD_SCORE_RTOL': 1e-12,
    'UBMAUD_MAX_ITER': 100,
    'UBMAUD_MAX_HALVINGS': 30,
    'UBMAUD_REPRESENTABLE_TOL': 1e-8,
    'UBMAUD_ROOT_SEARCH_MAX_G': 16,
    'UBMAUD_COMPARE_STARTS': True,
    'UBMAUD_DENSE_LIMIT': 2000,
    'UBMAUD_THREADS': None,
    'UBMAUD_DEFAULT_REPLICATES': 200,
    'UBMAUD_SPEC_VERSION': '1.0',
}

THREADS_ENV = 'UBMAUD_THREADS'


def _get_setting(name, default):
    """Get Django setting with fallback if not configured."""
    try:
        return getattr(settings, name, default)
    except Exception:
        return default


def get(name: str) -> Any:
    """
    Read a ``UBMAUD_*`` setting.

    Args:
        name: Setting name, one of the keys of ``DEFAULTS``

    Returns:
        The configured value, or the documented default

    Raises:
        KeyError: If the name is not a known ubmaud setting
    """
    return _get_setting(name, DEFAULTS[name])


def worker_cap() -> Optional[int]:
    """
    Upper bound on worker processes.

    The ``UBMAUD_THREADS`` environment variable wins over the setting of the
    same name. Non-positive or unparsable values mean "no cap".
    """
    raw = os.environ.get(THREADS_ENV)
    if raw is None or not raw.strip():
        raw = get('UBMAUD_THREADS')
    if raw is None:
        return None
    try:
        cap = int(raw)
    except (TypeError, ValueError):
        return None
    return cap if cap > 0 else None


def resolve_workers(requested: Optional[int] = None) -> int:
    """
    Number of workers to use for a parallel task.

    Args:
        requested: Worker count asked for by the caller (None means one
                   worker per CPU)

    Returns:
        A positive worker count, capped by ``worker_cap()``
    """
    if requested is None or requested <= 0:
        requested = os.cpu_count() or 1
    cap = worker_cap()
    if cap is not None:
        requested = min(requested, cap)
    return max(1, int(requested))
