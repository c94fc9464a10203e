from __future__ import annotations

import math

import pytest
from hypothesis import HealthCheck, settings

from nashpde import Grid, builtin_scenario, default_resolver, picard_solve

settings.register_profile(
    "det",
    derandomize=True,
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("det")


@pytest.fixture(scope="session")
def heat_solved():
    """Converged heat benchmark on the grid the accuracy checks quote."""
    spec = builtin_scenario("heat-oracle")
    grid = Grid(1, math.pi / 2, 201, 1000, 1.0)
    field, diag = picard_solve(spec, grid, default_resolver(spec))
    assert diag.converged
    return spec, grid, field, diag


@pytest.fixture(scope="session")
def case2_solved():
    """Bang-bang scenario solved once on a radius-6 box; shared by the
    slower simulation tests."""
    spec = builtin_scenario("case2-bangbang")
    grid = Grid(1, 6.0, 241, 200, 1.0)
    field, diag = picard_solve(
        spec, grid, default_resolver(spec), epsilon_schedule=(0.5, 0.25, 0.125))
    assert diag.converged
    return spec, grid, field, diag
