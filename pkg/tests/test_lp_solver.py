import itertools

import numpy as np
import pytest

from app.errors import InfeasibleLPError, PreconditionError
from app.allocation.lp_solver import LpInstance, solve_lp, solve_lp_simplex


def test_two_action_worked_example():
    solution = solve_lp(LpInstance(np.array([[1.0], [2.0]]), np.array([0.1, 0.2]), 0.15))
    assert solution.value == pytest.approx(1.5, abs=1e-6)
    np.testing.assert_allclose(solution.allocation[:, 0], [0.5, 0.5], atol=1e-6)


def test_unconstrained_picks_column_maxima():
    rewards = np.array([[0.3, 0.9], [0.5, 0.1]])
    solution = solve_lp(LpInstance(rewards, np.array([0.1, 0.2]), 0.5))
    assert solution.value == pytest.approx((0.5 + 0.9) / 2)
    assert solution.multiplier == 0.0


def test_equal_rewards():
    rewards = np.full((3, 2), 0.4)
    costs = np.array([0.1, 0.2, 0.3])
    solution = solve_lp(LpInstance(rewards, costs, 0.12))
    assert solution.value == pytest.approx(0.4)
    assert solution.average_cost(costs) <= 0.12 + 1e-9


def test_infeasible_cap():
    with pytest.raises(InfeasibleLPError):
        solve_lp(LpInstance(np.array([[1.0], [2.0]]), np.array([0.1, 0.2]), 0.05))


def test_instance_validation():
    with pytest.raises(PreconditionError):
        LpInstance(np.array([[1.0], [2.0]]), np.array([0.2, 0.1]), 0.15)
    with pytest.raises(PreconditionError):
        LpInstance(np.array([[1.0], [np.nan]]), np.array([0.1, 0.2]), 0.15)


def _grid_oracle(instance, resolution):
    """Best value over every column-mixture on a simplex grid."""
    steps = int(round(1 / resolution))
    columns = []
    for j in range(instance.num_columns):
        options = []
        for parts in itertools.product(range(steps + 1), repeat=instance.num_actions - 1):
            if sum(parts) <= steps:
                weights = np.array(list(parts) + [steps - sum(parts)]) / steps
                options.append((weights @ instance.rewards[:, j], weights @ instance.costs))
        columns.append(options)
    best = -np.inf
    for combo in itertools.product(*columns):
        cost = sum(c for _, c in combo) / instance.num_columns
        if cost <= instance.cap + 1e-12:
            best = max(best, sum(v for v, _ in combo) / instance.num_columns)
    return best


def _random_instance(rng, max_actions=4, max_columns=4):
    num_actions = int(rng.integers(2, max_actions + 1))
    num_columns = int(rng.integers(1, max_columns + 1))
    costs = np.sort(rng.choice(np.arange(1, 20), size=num_actions, replace=False)) / 10
    cap = float(rng.uniform(costs[0], costs[-1]))
    return LpInstance(rng.uniform(0, 1, (num_actions, num_columns)), costs, cap)


def test_bisection_matches_simplex(rng):
    for _ in range(100):
        instance = _random_instance(rng)
        bisection = solve_lp(instance)
        simplex = solve_lp_simplex(instance)
        assert bisection.value == pytest.approx(simplex.value, abs=1e-6)
        assert bisection.average_cost(instance.costs) <= instance.cap + 1e-9
        np.testing.assert_allclose(bisection.allocation.sum(axis=0), 1.0, atol=1e-12)
        assert np.all(bisection.allocation >= 0)


@pytest.mark.slow
def test_bisection_against_grid_enumeration(rng):
    for _ in range(10):
        instance = _random_instance(rng, max_actions=2, max_columns=2)
        oracle = _grid_oracle(instance, 1e-3)
        assert solve_lp(instance).value == pytest.approx(oracle, abs=1e-3)


def test_per_client_caps_use_the_tightest():
    instance = LpInstance(np.array([[1.0], [2.0]]), np.array([0.1, 0.2]), 0.2)
    solution = solve_lp_simplex(instance, caps=[0.2, 0.15])
    assert solution.value == pytest.approx(1.5, abs=1e-6)
