"""
Test configuration and fixtures.

Shared pytest configuration for all test modules.
"""

import pytest
import sys
from pathlib import Path

# Add parent directory to Python path
sys.path.insert(0, str(Path(__file__).parent.parent))
# Add web directory so 'from utils import ...' works in app.py
sys.path.insert(0, str(Path(__file__).parent.parent / 'web'))

from execution import settings
from execution.device_model import build_topology, static_noise
from execution.settings import ScenarioConfig


def pytest_configure(config):
    """Configure pytest with custom markers."""
    config.addinivalue_line(
        "markers", "unit: mark test as a unit test"
    )
    config.addinivalue_line(
        "markers", "component: mark test as a component test"
    )
    config.addinivalue_line(
        "markers", "integration: mark test as an integration test"
    )
    config.addinivalue_line(
        "markers", "slow: full-size experiment checks (set JITQ_RUN_SLOW=true)"
    )


def pytest_collection_modifyitems(config, items):
    """Skip slow tests unless JITQ_RUN_SLOW is set."""
    if settings.RUN_SLOW:
        return
    skip_slow = pytest.mark.skip(reason="slow test; set JITQ_RUN_SLOW=true to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def line5():
    """Five qubits in a line."""
    return build_topology('line(5)')


@pytest.fixture
def quiet_noise(line5):
    """Noise-free device (every channel pinned to zero)."""
    return static_noise(line5)


@pytest.fixture
def small_config():
    """A scenario small enough to run in a few seconds."""
    return ScenarioConfig(
        device='line(5)',
        mode='dedicated',
        runs=2,
        shots=256,
        repetitions=2,
        cotd_age_min=120.0,
        jit_delay_min=10.0,
        span_min=120.0,
        suite='bv(2),hs(2)',
        seed=3,
        cal_shots=512,
        rb_lengths=(1, 4, 12),
        rb_samples=2,
        probe_span_min=120.0,
        probe_interval_min=60.0,
    )
