"""
Privacy budgets, the action-to-budget grid and the per-client ledger.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from config import LEDGER_TOLERANCE
from app.errors import BudgetExhaustedError, DomainError, PreconditionError

logger = logging.getLogger(__name__)


class NoiseMechanism(str, Enum):
    LAPLACE = 'laplace'
    GAUSSIAN = 'gaussian'
    NONE = 'none'


@dataclass(frozen=True)
class PrivacyBudget:
    """An (epsilon, delta) pair."""

    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise DomainError(f"epsilon must be non-negative, got {self.epsilon}")
        if not 0.0 <= self.delta <= 1.0:
            raise DomainError(f"delta must lie in [0, 1], got {self.delta}")

    def __add__(self, other: 'PrivacyBudget') -> 'PrivacyBudget':
        return PrivacyBudget(self.epsilon + other.epsilon, min(1.0, self.delta + other.delta))


ZERO_BUDGET = PrivacyBudget(0.0, 0.0)


@dataclass(frozen=True)
class ActionBudgetMap:
    """Maps action indices 1..A onto per-round epsilon values."""

    grid: tuple
    per_round_delta: float = 0.0

    def __post_init__(self):
        if len(self.grid) == 0:
            raise PreconditionError("budget grid must hold at least one action")
        if np.any(np.diff(self.grid) <= 0):
            raise PreconditionError("budget grid must be strictly increasing")
        if self.grid[0] <= 0:
            raise DomainError("budget grid values must be positive")

    @property
    def num_actions(self) -> int:
        return len(self.grid)

    @property
    def cheapest(self) -> float:
        return self.grid[0]

    @classmethod
    def from_horizon(cls, eps_total: float, horizon: int, t_min: int, num_actions: int,
                     mechanism: NoiseMechanism = NoiseMechanism.LAPLACE,
                     delta_total: float = 0.0) -> 'ActionBudgetMap':
        """Uniform grid over [eps_total/T, eps_total/T_min]."""
        if num_actions < 1:
            raise PreconditionError("num_actions must be >= 1")
        if num_actions > 1 and t_min >= horizon:
            raise PreconditionError("T_min must be below T when more than one action exists")
        grid = np.linspace(eps_total / horizon, eps_total / t_min, num_actions)
        per_round_delta = delta_total / horizon if NoiseMechanism(mechanism) == NoiseMechanism.GAUSSIAN else 0.0
        return cls(tuple(float(g) for g in grid), per_round_delta)

    @classmethod
    def from_costs(cls, costs: Sequence[float], per_round_delta: float = 0.0) -> 'ActionBudgetMap':
        return cls(tuple(float(c) for c in costs), per_round_delta)

    def costs(self) -> np.ndarray:
        return np.asarray(self.grid, dtype=float)


def action_to_budget(budget_map: ActionBudgetMap, action: int) -> PrivacyBudget:
    """Per-round budget of action ``action`` (1-based)."""
    if not 1 <= action <= budget_map.num_actions:
        raise PreconditionError(f"action {action} outside 1..{budget_map.num_actions}")
    return PrivacyBudget(budget_map.grid[action - 1], budget_map.per_round_delta)


class BudgetLedger:
    """
    Per-client total and consumed budgets.

    A client is active while its remaining epsilon still covers the cheapest action.
    Consumption is naive sequential composition.
    """

    def __init__(self, num_clients: int, total: PrivacyBudget, cheapest_cost: float):
        if num_clients < 1:
            raise PreconditionError("ledger needs at least one client")
        self.num_clients = num_clients
        self.total_eps = np.full(num_clients, float(total.epsilon))
        self.total_delta = np.full(num_clients, float(total.delta))
        self.consumed_eps = np.zeros(num_clients)
        self.consumed_delta = np.zeros(num_clients)
        self.cheapest_cost = float(cheapest_cost)
        self.active = np.ones(num_clients, dtype=bool)
        self._refresh_active()

    def _check_client(self, client: int):
        if not 0 <= client < self.num_clients:
            raise PreconditionError(f"client {client} outside 0..{self.num_clients - 1}")

    def _refresh_active(self):
        self.active = self.remaining_eps() >= self.cheapest_cost - LEDGER_TOLERANCE

    def remaining_eps(self) -> np.ndarray:
        return self.total_eps - self.consumed_eps

    def remaining(self, client: int) -> PrivacyBudget:
        self._check_client(client)
        return PrivacyBudget(max(0.0, self.total_eps[client] - self.consumed_eps[client]),
                             max(0.0, self.total_delta[client] - self.consumed_delta[client]))

    def consumed(self, client: int) -> PrivacyBudget:
        self._check_client(client)
        return PrivacyBudget(self.consumed_eps[client], min(1.0, self.consumed_delta[client]))

    def active_clients(self) -> np.ndarray:
        return np.flatnonzero(self.active)

    def any_active(self) -> bool:
        return bool(self.active.any())

    def min_remaining_active(self) -> float:
        """Smallest remaining epsilon over active clients (0 when none is active)."""
        if not self.any_active():
            return 0.0
        return float(self.remaining_eps()[self.active].min())

    def charge(self, client: int, cost: PrivacyBudget) -> 'BudgetLedger':
        """Add ``cost`` to a client's consumption."""
        reason = self.shortfall(client, cost)
        if reason is not None:
            raise BudgetExhaustedError(reason)
        if cost.epsilon == 0.0 and cost.delta == 0.0:
            return self
        self.consumed_eps[client] += cost.epsilon
        self.consumed_delta[client] += cost.delta
        self.active[client] = (self.total_eps[client] - self.consumed_eps[client]
                               >= self.cheapest_cost - LEDGER_TOLERANCE)
        if not self.active[client]:
            logger.debug("client %d exhausted its budget", client)
        return self

    def shortfall(self, client: int, cost: PrivacyBudget) -> Optional[str]:
        """Why ``client`` cannot pay ``cost``, or None when it can."""
        self._check_client(client)
        if cost.epsilon == 0.0 and cost.delta == 0.0:
            return None
        if not self.active[client]:
            return f"client {client} is inactive"
        remaining_eps = self.total_eps[client] - self.consumed_eps[client]
        if cost.epsilon > remaining_eps + LEDGER_TOLERANCE:
            return f"client {client}: charge {cost.epsilon:.6g} exceeds remaining {remaining_eps:.6g}"
        remaining_delta = self.total_delta[client] - self.consumed_delta[client]
        if cost.delta > remaining_delta + LEDGER_TOLERANCE:
            return f"client {client}: delta charge {cost.delta:.6g} exceeds remaining {remaining_delta:.6g}"
        return None

    def charge_all(self, clients, cost: PrivacyBudget) -> 'BudgetLedger':
        """Charge every client in ``clients`` or, if any of them cannot pay, none of them."""
        clients = [int(c) for c in clients]
        for client in clients:
            reason = self.shortfall(client, cost)
            if reason is not None:
                raise BudgetExhaustedError(reason)
        for client in clients:
            self.charge(client, cost)
        return self

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'client_id': np.arange(self.num_clients),
            'total_eps': self.total_eps,
            'consumed_eps': self.consumed_eps,
            'total_delta': self.total_delta,
            'consumed_delta': self.consumed_delta,
            'active': self.active,
        })


def charge(ledger: BudgetLedger, client: int, cost: PrivacyBudget) -> BudgetLedger:
    return ledger.charge(client, cost)
