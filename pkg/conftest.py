"""
Root conftest.py - Configure Django and provide pytest fixtures
"""
import os
import sys

import numpy as np
import pytest

# ========== DJANGO CONFIGURATION - RUNS BEFORE EVERYTHING ==========

project_root = os.path.normpath(os.getcwd())
if project_root not in sys.path:
    sys.path.insert(0, project_root)

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'test_settings')

import django  # noqa: E402

django.setup()

# ========== FIXTURES ==========

from series_service.services.synth_service import SynthConfig, synth_service  # noqa: E402
from series_service.types import MonthDate, MonthlySeries  # noqa: E402
from shared.logging_context import LoggingContext  # noqa: E402


@pytest.fixture(autouse=True)
def clean_logging_context():
    """Reset run/stage/origin context between tests"""
    LoggingContext.clear_context()
    yield
    LoggingContext.clear_context()


@pytest.fixture
def rng():
    """Seeded generator for test data"""
    return np.random.default_rng(12345)


@pytest.fixture
def make_series():
    """Factory: make_series([1, 2, 3], start='2020-01', name='x')"""
    def _make(values, start='2020-01', name='x'):
        return MonthlySeries(name=name, start=MonthDate.parse(start), values=values)
    return _make


@pytest.fixture
def small_synth_config():
    """Small but complete synthetic geometry (10 years, 6 predictors)"""
    return SynthConfig(
        n_months=120,
        start='2012-06',
        n_predictors=6,
        class_sizes=(2, 2, 1, 1),
        n_factors=2,
        seed=7,
    )


@pytest.fixture
def synth_result(small_synth_config):
    return synth_service.generate_bundle(small_synth_config)


@pytest.fixture
def synth_bundle(synth_result):
    return synth_result.bundle


@pytest.fixture
def run_dir(tmp_path):
    """Empty run directory"""
    path = tmp_path / 'run'
    path.mkdir()
    return path
