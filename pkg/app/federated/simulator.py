"""
One federated recommender run: data arrival, per-round interaction matrices,
client updates with budget charging, aggregation, evaluation and the reward signal.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from config import (CLIP_L1, CLIP_L2, EMBEDDING_DIM, F1_THRESHOLD, INIT_SCALE, LEARNING_RATE,
                    PSEUDO_ITEM_COUNT, USER_REG)
from app.errors import PreconditionError
from app.data_integration.dataset_loader import RatingDataset
from app.federated.recommender import (ClientUpload, FedSimState, add_noise, aggregate, clip_for,
                                       evaluate, local_update)
from app.predictive_engine.context_reduction import InteractionMatrix
from app.privacy_accounting.budgets import (ZERO_BUDGET, ActionBudgetMap, BudgetLedger,
                                            NoiseMechanism, PrivacyBudget, action_to_budget)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RoundOutcome:
    round: int
    reward: float
    rmse: float
    f1: float
    costs: tuple                   # PrivacyBudget per client, ZERO_BUDGET when not charged
    interaction: InteractionMatrix
    uploads: int = 0

    @property
    def charged(self) -> np.ndarray:
        return np.array([c.epsilon > 0 or c.delta > 0 for c in self.costs])

    @property
    def eps_spent(self) -> float:
        """Epsilon spent by each charged client this round (0 for a noiseless round)."""
        spent = [c.epsilon for c in self.costs if c.epsilon > 0]
        return float(spent[0]) if spent else 0.0


def arrival_schedule(train: RatingDataset, horizon: int, seed: int = 0) -> List[np.ndarray]:
    """
    Record indices available in each round.

    A random half of the training split is there from round 1; the other half is cut into
    ``horizon`` random slices released one per round, so round T sees everything.
    """
    if horizon < 1:
        raise PreconditionError("horizon must be >= 1")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(train))
    half = len(order) // 2 + len(order) % 2
    base, rest = order[:half], order[half:]
    slices = np.array_split(rest, horizon)
    schedule, available = [], np.sort(base)
    for piece in slices:
        available = np.sort(np.concatenate([available, piece]))
        schedule.append(available)
    return schedule


class FederatedSimulator:
    """Server plus simulated clients for one seeded run."""

    def __init__(self, train: RatingDataset, test: RatingDataset, horizon: int, seed: int = 0,
                 k: int = EMBEDDING_DIM, learning_rate: float = LEARNING_RATE,
                 clip_l1: float = CLIP_L1, clip_l2: float = CLIP_L2, init_scale: float = INIT_SCALE,
                 threshold: float = F1_THRESHOLD, pseudo_item_count: int = PSEUDO_ITEM_COUNT,
                 user_reg: float = USER_REG):
        if len(test) == 0:
            raise PreconditionError("test split is empty")
        self.train = train
        self.test = test
        self.horizon = horizon
        self.seed = seed
        self.threshold = threshold
        self.pseudo_item_count = pseudo_item_count
        self.clip_l1, self.clip_l2 = clip_l1, clip_l2
        self.num_clients = train.num_clients
        self.num_items = train.num_items
        self.schedule = arrival_schedule(train, horizon, seed)
        self.state = FedSimState.initialize(train.num_users, train.num_items, k, learning_rate,
                                            clip_l1, clip_l2, init_scale, np.random.default_rng([seed, 0]),
                                            user_reg)
        train_records = train.records
        self._train = (train_records['user_id'].to_numpy(), train_records['item_id'].to_numpy(),
                       train_records['rating'].to_numpy())
        test_records = test.records
        self._test = (test_records['user_id'].to_numpy(), test_records['item_id'].to_numpy(),
                      test_records['rating'].to_numpy())
        self.initial_rmse, self.initial_f1 = self.evaluate()
        self.last_rmse = self.initial_rmse
        self._prepared: Dict[int, tuple] = {}
        self.clip_trace: List[float] = []

    def evaluate(self):
        return evaluate(self.state, *self._test, threshold=self.threshold)

    def _available(self, round_: int):
        if not 1 <= round_ <= self.horizon:
            raise PreconditionError(f"round {round_} outside 1..{self.horizon}")
        return self.train.records.loc[self.schedule[round_ - 1]]

    def begin_round(self, round_: int) -> InteractionMatrix:
        """Client-by-item interaction matrix for ``round_``, pseudo items included."""
        records = self._available(round_)
        clients = self.train.client_of(records['user_id'].to_numpy())
        items = records['item_id'].to_numpy()
        by_client: Dict[int, np.ndarray] = {}
        for client in np.unique(clients):
            by_client[int(client)] = records.index.to_numpy()[clients == client]

        pseudo: Dict[int, np.ndarray] = {}
        pairs = set(zip(clients.tolist(), items.tolist()))
        if self.pseudo_item_count > 0:
            for client in by_client:
                rng = np.random.default_rng([self.seed, round_, client, 1])
                seen = np.unique(items[clients == client])
                candidates = np.setdiff1d(np.arange(self.num_items), seen)
                count = min(self.pseudo_item_count, len(candidates))
                pseudo[client] = np.sort(rng.choice(candidates, size=count, replace=False))
                pairs.update((client, int(i)) for i in pseudo[client])

        matrix = InteractionMatrix.from_pairs(self.num_clients, self.num_items, pairs)
        self._prepared[round_] = (matrix, by_client, pseudo)
        return matrix

    def run_round(self, round_: int, ledger: Optional[BudgetLedger], mechanism: NoiseMechanism,
                  cost: Optional[PrivacyBudget] = None) -> RoundOutcome:
        """
        Charge active clients, run local updates with noise, aggregate and evaluate.

        ``mechanism == NONE`` trains every client without noise and leaves the ledger alone.
        """
        mechanism = NoiseMechanism(mechanism)
        if round_ not in self._prepared:
            self.begin_round(round_)
        interaction, by_client, pseudo = self._prepared.pop(round_)
        noisy = mechanism != NoiseMechanism.NONE

        if noisy:
            if ledger is None or cost is None:
                raise PreconditionError("a noised round needs a ledger and a cost")
            participants = ledger.active_clients()
            ledger.charge_all(participants, cost)
            costs = [ZERO_BUDGET] * self.num_clients
            for client in participants:
                costs[int(client)] = cost
        else:
            participants = np.arange(self.num_clients)
            costs = [ZERO_BUDGET] * self.num_clients

        clip = clip_for(mechanism, self.clip_l1, self.clip_l2)
        users, items, ratings = self._train
        uploads: List[ClientUpload] = []
        for client in participants:
            index = by_client.get(int(client))
            if index is None:
                continue
            upload = local_update(self.state, int(client), users[index], items[index], ratings[index],
                                  pseudo.get(int(client), ()), clip)
            if upload is None:
                continue
            if clip is not None:
                self.clip_trace.append(upload.norm(clip.norm) - clip.bound)
            if noisy:
                rng = np.random.default_rng([self.seed, round_, int(client)])
                upload = upload.with_vector(add_noise(upload.vector(), mechanism, cost, clip, rng))
            uploads.append(upload)

        if uploads:
            aggregate(self.state, uploads)
            rmse, f1 = self.evaluate()
            reward = self.last_rmse - rmse
        else:
            rmse, f1 = self.evaluate()
            reward = 0.0
        self.last_rmse = rmse
        logger.debug("round %d: %d uploads, rmse=%.5f reward=%.5f", round_, len(uploads), rmse, reward)
        return RoundOutcome(round_, float(reward), rmse, f1, tuple(costs), interaction, len(uploads))


def run_round(simulator: FederatedSimulator, round_: int, ledger: BudgetLedger, action: int,
              budget_map: ActionBudgetMap, mechanism: NoiseMechanism) -> RoundOutcome:
    cost = None if NoiseMechanism(mechanism) == NoiseMechanism.NONE else action_to_budget(budget_map, action)
    return simulator.run_round(round_, ledger, mechanism, cost)
