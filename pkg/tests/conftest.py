"""
Shared systems, configurations and scenes for the test suite.
"""

import pytest

from rayforge.core.config import load_config
from rayforge.core.manifold import ChartDomain, MetricField, OneFormField
from rayforge.core.scene import load_scene

from .helpers import make_system


@pytest.fixture
def euclid():
    return make_system()


@pytest.fixture
def field_05():
    return make_system(omega=OneFormField.constant_field(0.5))


@pytest.fixture
def hyperbolic():
    return make_system(MetricField.hyperbolic(), OneFormField.swirl(0.3, 0.5), ChartDomain.disk(0.6))


@pytest.fixture
def fast_config():
    """Coarse steps and small chunks so that threading is exercised on tiny fans."""
    return load_config(None, {"flow": {"step": 5e-3}, "transform": {"chunk_size": 8}})


@pytest.fixture(scope="session")
def scenes():
    """Built-in scenes, built once per session without the validation probe."""
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = load_scene(name, validate=False)
        return cache[name]

    return get
