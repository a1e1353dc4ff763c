"""
Pytest configuration for django-ubmaud tests.

Sets up Django settings and shared numerical fixtures.
"""
import os
import sys
from pathlib import Path

import django
import numpy as np
import pytest
from django.conf import settings

# Ensure we can import from the ubmaud package and tests.settings
# Handle both running from root directory and from django-ubmaud directory
current_dir = Path(__file__).parent  # django-ubmaud/tests/
parent_dir = current_dir.parent       # django-ubmaud/

if str(parent_dir) not in sys.path:
    sys.path.insert(0, str(parent_dir))

# Set Django settings module if not already set
if not os.environ.get('DJANGO_SETTINGS_MODULE'):
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'tests.settings')

# Configure Django if not already configured
if not settings.configured:
    django.setup()

from ubmaud.blocks import PartitionVector  # noqa: E402
from ubmaud.params import GammaVector  # noqa: E402

REFERENCE_SIZES = (30, 40, 60)
REFERENCE_GAMMA = (0.40, 0.01, -0.51, 0.19, -0.91, -0.64)


@pytest.fixture
def rng():
    """Deterministic generator; every test gets a fresh stream."""
    return np.random.default_rng(20240301)


@pytest.fixture
def small_partition():
    return PartitionVector((3, 4, 5))


@pytest.fixture
def reference_partition():
    return PartitionVector(REFERENCE_SIZES)


@pytest.fixture
def reference_gamma(reference_partition):
    return GammaVector(np.array(REFERENCE_GAMMA), reference_partition)
