"""
Synthetic data generators: a low-rank ratings dataset for end-to-end runs and a
linear-reward contextual bandit environment for allocator benchmarks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from config import (SYNTHETIC_DENSITY, SYNTHETIC_ITEM_EFFECT, SYNTHETIC_ITEMS, SYNTHETIC_RANK,
                    SYNTHETIC_USERS)
from app.errors import PreconditionError
from app.data_integration.dataset_loader import RatingDataset, assign_clients
from app.predictive_engine.context_reduction import ContextVector


def generate_low_rank_ratings(num_users: int = SYNTHETIC_USERS, num_items: int = SYNTHETIC_ITEMS,
                              rank: int = SYNTHETIC_RANK, density: float = SYNTHETIC_DENSITY,
                              seed: int = 0, noise_std: float = 0.05,
                              num_clients: Optional[int] = None,
                              item_effect: float = SYNTHETIC_ITEM_EFFECT) -> RatingDataset:
    """
    Ratings in [0, 1] from a logistic low-rank model with per-item offsets (std
    ``item_effect`` on the logit scale), observed at ``density``.

    Every user rates at least two items so each one keeps a test rating after splitting.
    """
    if rank < 1 or num_users < 1 or num_items < 2:
        raise PreconditionError("need rank >= 1, at least one user and two items")
    if not 0.0 < density <= 1.0:
        raise PreconditionError(f"density must lie in (0, 1], got {density}")
    rng = np.random.default_rng(seed)
    user_factors = rng.normal(0.0, 1.0, (num_users, rank))
    item_factors = rng.normal(0.0, 1.0, (num_items, rank))
    item_offsets = rng.normal(0.0, item_effect, num_items) if item_effect > 0 else np.zeros(num_items)
    scores = user_factors @ item_factors.T / np.sqrt(rank) + item_offsets[None, :]
    ratings = 1.0 / (1.0 + np.exp(-scores)) + rng.normal(0.0, noise_std, scores.shape)
    ratings = np.clip(ratings, 0.0, 1.0)

    observed = rng.random((num_users, num_items)) < density
    for user in np.flatnonzero(observed.sum(axis=1) < 2):
        observed[user, rng.choice(num_items, size=2, replace=False)] = True

    users, items = np.nonzero(observed)
    records = pd.DataFrame({
        'user_id': users,
        'item_id': items,
        'rating': ratings[users, items],
        'timestamp': rng.permutation(len(users)),
    }).sort_values('timestamp', kind='mergesort').reset_index(drop=True)
    return RatingDataset(records, num_users, num_items, assign_clients(num_users, num_clients, seed))


@dataclass
class SyntheticBanditEnv:
    """E[r | a, x] = w_a . x plus Gaussian noise, contexts uniform on [0, 1]^d."""

    weights: np.ndarray  # A x d
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.weights = np.atleast_2d(np.asarray(self.weights, dtype=float))
        if self.noise_std < 0:
            raise PreconditionError("noise std must be non-negative")
        self.rng = np.random.default_rng(self.seed)

    @classmethod
    def increasing(cls, num_actions: int, context_dim: int, seed: int = 0,
                   noise_std: float = 0.01, scale: float = 1.0) -> 'SyntheticBanditEnv':
        """Rewards grow with the action index, so the largest budget level dominates."""
        rng = np.random.default_rng(seed)
        base = rng.uniform(0.5, 1.0, context_dim)
        levels = np.sqrt(np.arange(1, num_actions + 1) / num_actions)
        return cls(scale * levels[:, None] * base[None, :], noise_std, seed)

    @property
    def num_actions(self) -> int:
        return self.weights.shape[0]

    @property
    def context_dim(self) -> int:
        return self.weights.shape[1]

    def sample_context(self) -> ContextVector:
        return ContextVector(tuple(float(v) for v in self.rng.uniform(0.0, 1.0, self.context_dim)))

    def expected_reward(self, action: int, context: ContextVector) -> float:
        if not 1 <= action <= self.num_actions:
            raise PreconditionError(f"action {action} outside 1..{self.num_actions}")
        return float(self.weights[action - 1] @ context.as_array())

    def expected_rewards(self, context: ContextVector) -> np.ndarray:
        return self.weights @ context.as_array()

    def reward(self, action: int, context: ContextVector) -> float:
        noise = self.rng.normal(0.0, self.noise_std) if self.noise_std > 0 else 0.0
        return self.expected_reward(action, context) + noise
