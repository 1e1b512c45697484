"""Shared fixtures and hypothesis settings for the test suite."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lse.grid import Field, make_grid

# Numerical kernels have wildly varying per-example cost; wall-clock deadlines
# only produce flaky failures on loaded CI boxes.
settings.register_profile(
    "numeric",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("numeric")


@pytest.fixture
def grid1d():
    """Small 1D grid with the origin off-grid (even interior count)."""
    return make_grid(1, 4.0, 32)


@pytest.fixture
def grid2d():
    return make_grid(2, 3.0, 16)


def random_field(g, rng, scale=1.0):
    return Field(grid=g, values=scale * rng.standard_normal(g.npoints))


def gausson_field(g):
    """Exact closed-form solution for the doubled-square-well potential."""
    r2 = g.radius_squared().ravel()
    return Field(grid=g, values=np.exp(float(g.dim)) * np.exp(-r2))
