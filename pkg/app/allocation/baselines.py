"""
Reference budget schedules the planner is compared against.

A schedule maps a round (plus the test-loss history and the ledger) to the epsilon
every active client spends in that round. ``None`` means the round runs without noise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from config import (ADPML_EPS_MAX, ADPML_EPS_MIN, ADPML_RATE, EPSILON_TOTAL, HORIZON,
                    LEDGER_TOLERANCE, LOSS_TREND_MULTIPLIER, LOSS_TREND_WINDOW)
from app.errors import BudgetExhaustedError, DomainError, PreconditionError
from app.privacy_accounting.budgets import BudgetLedger

logger = logging.getLogger(__name__)

RATE_MODES = ('gap', 'budget')


class ScheduleKind(str, Enum):
    NO_NOISE = 'fedsgd'
    UNIFORM = 'uniform'
    INCREASING_GEOMETRIC = 'adpml'
    LOSS_TREND = 'loss_trend'


@dataclass(frozen=True)
class SchedulePolicy:
    kind: ScheduleKind
    eps_total: float = EPSILON_TOTAL
    horizon: int = HORIZON
    eps_min: float = ADPML_EPS_MIN
    eps_max: float = ADPML_EPS_MAX
    rate: float = ADPML_RATE
    rate_mode: str = 'gap'
    rescale: bool = True
    window: int = LOSS_TREND_WINDOW
    multiplier: float = LOSS_TREND_MULTIPLIER

    def __post_init__(self):
        object.__setattr__(self, 'kind', ScheduleKind(self.kind))
        if self.eps_min > self.eps_max:
            raise DomainError(f"eps_min {self.eps_min} exceeds eps_max {self.eps_max}")
        if self.kind == ScheduleKind.INCREASING_GEOMETRIC and not 0.0 < self.rate < 1.0:
            raise DomainError(f"rate must lie in (0, 1), got {self.rate}")
        if self.rate_mode not in RATE_MODES:
            raise DomainError(f"unknown rate mode '{self.rate_mode}'")
        if self.horizon < 1 or self.eps_total <= 0:
            raise DomainError("horizon and total budget must be positive")
        if self.window < 1 or self.multiplier < 1.0:
            raise DomainError("loss window must be >= 1 and multiplier >= 1")

    @property
    def base_epsilon(self) -> float:
        return self.eps_total / self.horizon

    def geometric_schedule(self) -> np.ndarray:
        """Per-round epsilon of the increasing schedule over the whole horizon."""
        steps = np.arange(self.horizon)
        if self.rate_mode == 'gap':
            raw = self.eps_max - (self.eps_max - self.eps_min) * self.rate ** steps
        else:
            raw = np.minimum(self.eps_max, self.eps_min * self.rate ** (-steps.astype(float)))
        if self.rescale:
            raw = raw * (self.eps_total / raw.sum())
        return raw

    def cheapest_round(self) -> float:
        """Smallest epsilon the policy ever asks for; the ledger's activity threshold."""
        if self.kind == ScheduleKind.INCREASING_GEOMETRIC:
            return float(self.geometric_schedule().min())
        if self.kind == ScheduleKind.NO_NOISE:
            return 0.0
        return self.base_epsilon


def loss_trend_triggers(losses: Sequence[float], window: int) -> int:
    """Rounds at which the loss failed to improve on the value ``window`` rounds earlier.

    ``losses[0]`` is the loss before training, ``losses[s]`` the loss after round s.
    """
    losses = np.asarray(losses, dtype=float)
    if len(losses) <= window:
        return 0
    return int(np.sum(losses[window:] >= losses[:-window]))


def schedule_budget(policy: SchedulePolicy, round_: int, losses: Sequence[float],
                    ledger: Optional[BudgetLedger]) -> Optional[float]:
    if round_ < 1:
        raise PreconditionError("rounds are numbered from 1")
    if policy.kind == ScheduleKind.NO_NOISE:
        return None
    if ledger is not None and not ledger.any_active():
        raise BudgetExhaustedError("all clients exhausted their budgets")
    remaining = np.inf if ledger is None else ledger.min_remaining_active()

    if policy.kind == ScheduleKind.UNIFORM:
        epsilon = policy.base_epsilon
    elif policy.kind == ScheduleKind.INCREASING_GEOMETRIC:
        epsilon = float(policy.geometric_schedule()[min(round_, policy.horizon) - 1])
    else:
        base = policy.base_epsilon
        epsilon = base * policy.multiplier ** loss_trend_triggers(losses, policy.window)
        # keep one base round in reserve unless this is the last one
        if remaining - base >= base - LEDGER_TOLERANCE:
            epsilon = min(epsilon, remaining - base)
    epsilon = float(min(epsilon, remaining))
    if epsilon <= LEDGER_TOLERANCE:
        raise BudgetExhaustedError("no budget left for another round")
    return epsilon


class RandomActionPolicy:
    """Uniformly random action among the affordable ones."""

    def __init__(self, costs, seed: Optional[int] = None):
        self.costs = np.asarray(costs, dtype=float)
        self.rng = np.random.default_rng(seed)

    def choose(self, remaining: float = np.inf) -> int:
        feasible = np.flatnonzero(self.costs <= remaining + LEDGER_TOLERANCE)
        if feasible.size == 0:
            raise BudgetExhaustedError("no action fits the remaining budget")
        return int(self.rng.choice(feasible)) + 1
