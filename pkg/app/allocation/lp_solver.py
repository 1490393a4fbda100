"""
Initial-stage linear program:

    max_o (1/T0) sum_t sum_a r(a,t) o[a,t]
    s.t.  (1/T0) sum_t sum_a C(a) o[a,t] <= cap,   each column of o in the simplex.

Only one constraint couples the columns, so the problem is solved by bisection on its
multiplier theta: every column picks argmax_a r(a,t) - theta C(a), and at the final theta
the two selections straddling the cap are mixed to meet it with equality.
``solve_lp_simplex`` solves the same program with scipy's HiGHS and serves as a fallback
and oracle.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from config import LP_BISECTION_ITERS
from app.errors import InfeasibleLPError, PreconditionError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LpInstance:
    rewards: np.ndarray   # A x T0
    costs: np.ndarray     # A
    cap: float

    def __post_init__(self):
        rewards = np.atleast_2d(np.asarray(self.rewards, dtype=float))
        costs = np.asarray(self.costs, dtype=float)
        if rewards.shape[0] != costs.shape[0]:
            raise PreconditionError(f"{rewards.shape[0]} reward rows for {costs.shape[0]} costs")
        if not np.all(np.isfinite(rewards)):
            raise PreconditionError("LP rewards must be finite")
        if np.any(np.diff(costs) <= 0):
            raise PreconditionError("LP costs must be strictly increasing")
        object.__setattr__(self, 'rewards', rewards)
        object.__setattr__(self, 'costs', costs)

    @property
    def num_actions(self) -> int:
        return self.rewards.shape[0]

    @property
    def num_columns(self) -> int:
        return self.rewards.shape[1]


@dataclass(frozen=True)
class LpSolution:
    value: float
    allocation: np.ndarray  # A x T0, columns in the simplex
    multiplier: float

    def average_cost(self, costs) -> float:
        return float(np.asarray(costs) @ self.allocation.sum(axis=1) / self.allocation.shape[1])


def _select(instance: LpInstance, theta: float) -> np.ndarray:
    # np.argmax keeps the first maximum, i.e. the cheapest action on ties
    return np.argmax(instance.rewards - theta * instance.costs[:, None], axis=0)


def _one_hot(choice: np.ndarray, num_actions: int) -> np.ndarray:
    onehot = np.zeros((num_actions, len(choice)))
    onehot[choice, np.arange(len(choice))] = 1.0
    return onehot


def _value(instance: LpInstance, allocation: np.ndarray) -> float:
    return float(np.sum(instance.rewards * allocation) / instance.num_columns)


def solve_lp(instance: LpInstance, iterations: int = LP_BISECTION_ITERS) -> LpSolution:
    costs, cap = instance.costs, instance.cap
    avg_cost = lambda choice: float(costs[choice].mean())

    unconstrained = _select(instance, 0.0)
    if avg_cost(unconstrained) <= cap + 1e-12:
        allocation = _one_hot(unconstrained, instance.num_actions)
        return LpSolution(_value(instance, allocation), allocation, 0.0)
    if cap < costs[0] - 1e-12:
        raise InfeasibleLPError(f"cap {cap:.6g} is below the cheapest action cost {costs[0]:.6g}")

    lo, hi = 0.0, 1.0
    while avg_cost(_select(instance, hi)) > cap:
        hi *= 2.0
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if avg_cost(_select(instance, mid)) > cap:
            lo = mid
        else:
            hi = mid

    above, below = _select(instance, lo), _select(instance, hi)
    cost_above, cost_below = avg_cost(above), avg_cost(below)
    weight = 0.0
    if cost_above > cost_below:
        weight = float(np.clip((cap - cost_below) / (cost_above - cost_below), 0.0, 1.0))
    allocation = ((1.0 - weight) * _one_hot(below, instance.num_actions)
                  + weight * _one_hot(above, instance.num_actions))
    return LpSolution(_value(instance, allocation), allocation, hi)


def solve_lp_simplex(instance: LpInstance, caps: Optional[Sequence[float]] = None) -> LpSolution:
    """Dense LP via HiGHS; ``caps`` adds one budget row per client (defaults to the single cap)."""
    num_actions, num_columns = instance.num_actions, instance.num_columns
    caps = [instance.cap] if caps is None else list(caps)
    # variables ordered column by column: o[0,0], o[1,0], ..., o[A-1,T0-1]
    objective = -instance.rewards.T.ravel() / num_columns
    cost_row = np.tile(instance.costs, num_columns) / num_columns
    a_ub = np.vstack([cost_row for _ in caps])
    a_eq = np.kron(np.eye(num_columns), np.ones(num_actions))
    result = linprog(objective, A_ub=a_ub, b_ub=np.asarray(caps, dtype=float),
                     A_eq=a_eq, b_eq=np.ones(num_columns), bounds=(0.0, 1.0), method='highs')
    if result.status == 2:
        raise InfeasibleLPError(f"LP infeasible for caps {caps}")
    if not result.success:
        raise PreconditionError(f"LP solver failed: {result.message}")
    allocation = result.x.reshape(num_columns, num_actions).T
    multiplier = 0.0
    if result.ineqlin is not None and len(result.ineqlin.marginals):
        multiplier = float(-np.sum(result.ineqlin.marginals))
    return LpSolution(_value(instance, allocation), allocation, multiplier)
