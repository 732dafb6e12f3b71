import numpy as np
import pytest

from agesched import (ConvergenceError, ServiceDistribution, SolverConfig, WaitGrid, bisection_solve,
                      build_state_space, rvi_solve, saturating_max_wait, stage_cost, zero_wait_taa,
                      zero_wait_tapa)
from agesched.exceptions import ConfigError, StateSpaceError
from agesched.solver import projected_size


def test_zero_wait_closed_forms(half):
    assert zero_wait_taa(half, 3) == pytest.approx(13.5)
    assert zero_wait_tapa(half, 3) == pytest.approx(6.0)
    d = ServiceDistribution.deterministic(2)
    assert zero_wait_taa(d, 1) == pytest.approx(3.0)


def test_stage_cost_by_hand(half):
    # A=4, z=1, beta=10, m=3: (4-10)(1+1.5) + 1.5(1 + 3 + 4.5)
    assert stage_cost(4.0, 1.0, 10.0, half, 3) == pytest.approx(-15 + 12.75)


def test_state_space_is_closed(half, half_grid):
    space = build_state_space(half, half_grid, 3)
    assert len(space) == 1250 <= projected_size(half, half_grid, 3)
    assert space.succ.min() >= 0 and space.succ.max() < len(space)
    assert space.reference == 0
    assert list(map(tuple, space.states)) == sorted(map(tuple, space.states))


def test_state_cap():
    d = ServiceDistribution.two_point(0.5).with_tick(0.25)
    with pytest.raises(StateSpaceError):
        build_state_space(d, WaitGrid.from_time(3, 0.25, d.tick), 3, max_states=100)


@pytest.mark.parametrize("c", [1, 2, 3])
def test_degenerate_closed_form(c):
    d = ServiceDistribution.deterministic(c)
    table = bisection_solve(d, WaitGrid.zero(d.tick), 1)
    assert table.beta_star == pytest.approx(1.5 * c, abs=1e-4)


def test_half_solution(half_table):
    assert len(half_table.space) <= 3500
    assert 13.0 < half_table.beta_star < 13.5
    assert half_table.threshold_violations() == 0
    assert half_table.wait.max() > 0
    steps = half_table.history
    assert len(steps) <= 60 and all(s.rvi_iterations >= 1 for s in steps)


def test_policy_is_threshold_in_age_sum(half_table):
    """Waits never increase with the age sum."""
    sums = half_table.space.sum_ticks
    waits = half_table.wait
    for s in np.unique(sums):
        above = sums > s
        if above.any():
            assert waits[above].max() <= waits[sums == s].max()


def test_reversed_convention_misses_the_optimum(half, half_grid, half_table):
    rev = bisection_solve(half, half_grid, 3, SolverConfig(convention="reversed"))
    assert rev.beta_star < 1.0 < half_table.beta_star


def test_sign_of_p_beta(half, half_grid, half_table):
    space = half_table.space
    assert rvi_solve(space, half_table.beta_star - 0.1).lam > 0
    assert rvi_solve(space, half_table.beta_star + 0.1).lam < 0
    assert abs(rvi_solve(space, half_table.beta_star).lam) < 1e-3


def test_rvi_reference_invariance(half_table):
    space = half_table.space
    a = rvi_solve(space, 12.0)
    b = rvi_solve(space, 12.0, reference=len(space) - 1)
    assert a.lam == pytest.approx(b.lam, abs=1e-8)
    np.testing.assert_array_equal(a.greedy_wait, b.greedy_wait)


def test_aperiodicity_transform_keeps_gain(half_table):
    space = half_table.space
    a = rvi_solve(space, 12.0, SolverConfig(tau=0.0))
    b = rvi_solve(space, 12.0, SolverConfig(tau=0.3))
    assert a.lam == pytest.approx(b.lam, abs=1e-7)


def test_convergence_error_carries_residual(half_table):
    with pytest.raises(ConvergenceError) as err:
        rvi_solve(half_table.space, 12.0, SolverConfig(max_rvi_iters=2))
    assert err.value.residual > 0 and err.value.iterations == 2


@pytest.mark.parametrize("kwargs", [dict(eps1=0), dict(tau=1.0), dict(convention="x"),
                                    dict(max_rvi_iters=0)])
def test_bad_solver_config(kwargs):
    with pytest.raises(ConfigError):
        SolverConfig(**kwargs)


@pytest.mark.parametrize("p,expected", [(0.1, 4.25), (0.3, 3.75), (0.5, 3.0), (0.7, 2.5)])
def test_saturating_max_wait(p, expected):
    d = ServiceDistribution.two_point(p).with_tick(0.25)
    assert saturating_max_wait(d, 3, 1) * d.tick == expected


def test_saturation_bound_holds(half_table):
    bound = (zero_wait_taa(half_table.space.dist, 3) - 3 * half_table.space.dist.mean) / 3
    assert half_table.wait.max() * half_table.space.tick <= bound
