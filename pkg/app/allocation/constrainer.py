"""
Dual variables over the l1-ball of radius Lambda, updated by online mirror descent
with the negative-entropy generating function (multiplicative weights + radial projection).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from config import ETA_SCHEDULE, HORIZON, LAMBDA_INIT
from app.errors import DomainError, PreconditionError

ETA_SCHEDULES = ('constant', 'decaying')
LAMBDA_INITS = ('interior', 'random')


@dataclass(frozen=True)
class DualState:
    lam: np.ndarray
    radius: float
    eta_schedule: str = ETA_SCHEDULE
    horizon: int = HORIZON

    def __post_init__(self):
        if self.radius <= 0:
            raise DomainError("dual radius must be positive")
        if self.eta_schedule not in ETA_SCHEDULES:
            raise DomainError(f"unknown step schedule '{self.eta_schedule}'")

    @property
    def l1(self) -> float:
        return float(np.sum(self.lam))

    def step_size(self, round_: int) -> float:
        if self.eta_schedule == 'constant':
            return 1.0 / math.sqrt(self.horizon)
        return self.radius / math.sqrt(max(1, round_))

    def summary(self, round_: int) -> dict:
        return {'round': round_, 'lambda_l1': self.l1,
                'lambda_min': float(self.lam.min()), 'lambda_max': float(self.lam.max())}


def initialize_duals(num_clients: int, radius: float, horizon: int = HORIZON,
                     eta_schedule: str = ETA_SCHEDULE, mode: str = LAMBDA_INIT,
                     rng: Optional[np.random.Generator] = None) -> DualState:
    """Interior point Lambda/(2U) per client, or a seeded random point inside the ball."""
    if mode == 'interior':
        lam = np.full(num_clients, radius / (2.0 * num_clients))
    elif mode == 'random':
        rng = rng or np.random.default_rng()
        lam = np.maximum(rng.uniform(0.0, 1.0, num_clients), 1e-12)
        lam *= radius * rng.uniform(0.0, 1.0) / lam.sum()
        lam = np.maximum(lam, 1e-12)
    else:
        raise DomainError(f"unknown lambda init '{mode}'")
    return DualState(lam, float(radius), eta_schedule, horizon)


def dual_gradient(fair_share, spent) -> np.ndarray:
    """Subgradient of the per-round dual objective: spent - fair share."""
    fair_share = np.asarray(fair_share, dtype=float)
    spent = np.asarray(spent, dtype=float)
    if fair_share.shape != spent.shape:
        raise PreconditionError(f"length mismatch: {fair_share.shape} vs {spent.shape}")
    return spent - fair_share


def project_l1_ball(lam: np.ndarray, radius: float) -> np.ndarray:
    """Entropic projection onto {lam >= 0, |lam|_1 <= radius}: radial rescale when outside."""
    total = lam.sum()
    if total > radius:
        return lam * (radius / total)
    return lam


def omd_update(state: DualState, grad, round_: int, eta: Optional[float] = None) -> DualState:
    grad = np.asarray(grad, dtype=float)
    if grad.shape != state.lam.shape:
        raise PreconditionError(f"gradient has shape {grad.shape}, duals have {state.lam.shape}")
    step = state.step_size(round_) if eta is None else eta
    lam = state.lam * np.exp(-step * grad)
    return replace(state, lam=project_l1_ball(lam, state.radius))


def penalty(state: DualState, fair_share, cost) -> float:
    """<fair_share - cost, lambda>."""
    fair_share = np.asarray(fair_share, dtype=float)
    cost = np.asarray(cost, dtype=float)
    if fair_share.shape != state.lam.shape or cost.shape != state.lam.shape:
        raise PreconditionError("fair share, cost and duals must have equal lengths")
    return float(np.dot(fair_share - cost, state.lam))
