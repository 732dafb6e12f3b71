import pytest

from agesched import ServiceDistribution, WaitGrid, bisection_solve


@pytest.fixture(scope="session")
def half():
    """Two-point service (0 or 3 w.p. 1/2) on the quarter-time lattice."""
    return ServiceDistribution.two_point(0.5).with_tick(0.25)


@pytest.fixture(scope="session")
def half_grid(half):
    return WaitGrid.from_time(3, 0.25, half.tick)


@pytest.fixture(scope="session")
def half_table(half, half_grid):
    return bisection_solve(half, half_grid, 3)
