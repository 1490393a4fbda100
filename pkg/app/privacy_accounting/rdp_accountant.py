"""
Renyi-DP accounting for repeated Gaussian releases.

Used for reporting only; per-round noise is always calibrated from the naive
(epsilon, delta) grid.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence, Tuple

import numpy as np

from config import RDP_ORDERS
from app.errors import DomainError, PreconditionError


def rdp_of_gaussian(noise_multiplier: float, order: float) -> float:
    """RDP of one Gaussian release at ``order``: order / (2 sigma^2)."""
    if order <= 1:
        raise DomainError(f"RDP order must exceed 1, got {order}")
    if noise_multiplier <= 0:
        raise DomainError("noise multiplier must be positive")
    return order / (2.0 * noise_multiplier ** 2)


def rdp_to_dp(accumulated_rdp: Iterable[Tuple[float, float]], delta: float) -> float:
    """Smallest epsilon over the order grid: value + ln(1/delta)/(order - 1)."""
    pairs = list(accumulated_rdp)
    if not pairs:
        raise PreconditionError("rdp_to_dp needs a non-empty order grid")
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    log_inv_delta = math.log(1.0 / delta)
    best = math.inf
    for order, value in pairs:
        if order <= 1:
            raise PreconditionError(f"RDP order must exceed 1, got {order}")
        best = min(best, value + log_inv_delta / (order - 1.0))
    return best


class RdpAccountant:
    """Accumulates Gaussian RDP additively across rounds."""

    def __init__(self, orders: Sequence[float] = RDP_ORDERS):
        self.orders = np.asarray(orders, dtype=float)
        if np.any(self.orders <= 1):
            raise DomainError("all RDP orders must exceed 1")
        self.rdp = np.zeros_like(self.orders)
        self.steps = 0

    def compose_gaussian(self, noise_multiplier: float, count: int = 1) -> 'RdpAccountant':
        per_step = np.array([rdp_of_gaussian(noise_multiplier, o) for o in self.orders])
        self.rdp += count * per_step
        self.steps += count
        return self

    def accumulated(self):
        return list(zip(self.orders.tolist(), self.rdp.tolist()))

    def epsilon(self, delta: float) -> float:
        if self.steps == 0:
            return 0.0
        return rdp_to_dp(self.accumulated(), delta)
