"""
Federated matrix factorization with per-item and global biases.

Prediction: clamp(nu_u . iota_i + b_i + omega, 0, 1). User embeddings nu stay on the
client; only item embedding, item bias and global bias gradients are uploaded, clipped
to the norm matching the noise mechanism and then noised.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from sklearn.metrics import f1_score, mean_squared_error

from config import (CLIP_L1, CLIP_L2, EMBEDDING_DIM, F1_THRESHOLD, INIT_SCALE, LEARNING_RATE,
                    USER_REG)
from app.errors import ConfigError, DomainError, PreconditionError
from app.privacy_accounting.budgets import NoiseMechanism, PrivacyBudget
from app.privacy_accounting.noise_calibration import (gaussian_sigma, laplace_scale, sample_gaussian,
                                                      sample_laplace)

logger = logging.getLogger(__name__)

CLIP_NORMS = {NoiseMechanism.LAPLACE: 'l1', NoiseMechanism.GAUSSIAN: 'l2'}


@dataclass(frozen=True)
class ClipBound:
    norm: str   # 'l1' or 'l2'
    bound: float

    def __post_init__(self):
        if self.norm not in ('l1', 'l2'):
            raise DomainError(f"unknown clip norm '{self.norm}'")
        if self.bound <= 0:
            raise DomainError("clip bound must be positive")


def clip_for(mechanism: NoiseMechanism, clip_l1: float = CLIP_L1, clip_l2: float = CLIP_L2) -> Optional[ClipBound]:
    """l1 clipping for Laplace, l2 for Gaussian, none for noiseless training."""
    mechanism = NoiseMechanism(mechanism)
    if mechanism == NoiseMechanism.LAPLACE:
        return ClipBound('l1', clip_l1)
    if mechanism == NoiseMechanism.GAUSSIAN:
        return ClipBound('l2', clip_l2)
    return None


@dataclass
class FedSimState:
    item_embeddings: np.ndarray  # I x k
    user_embeddings: np.ndarray  # U x k, client side only
    item_bias: np.ndarray        # I
    global_bias: float
    learning_rate: float = LEARNING_RATE
    clip_l1: float = CLIP_L1
    clip_l2: float = CLIP_L2
    user_reg: float = USER_REG

    @classmethod
    def initialize(cls, num_users: int, num_items: int, k: int = EMBEDDING_DIM,
                   learning_rate: float = LEARNING_RATE, clip_l1: float = CLIP_L1,
                   clip_l2: float = CLIP_L2, init_scale: float = INIT_SCALE,
                   rng: Optional[np.random.Generator] = None,
                   user_reg: float = USER_REG) -> 'FedSimState':
        if k < 1:
            raise DomainError("embedding dimension must be >= 1")
        if learning_rate <= 0:
            raise DomainError("learning rate must be positive")
        if user_reg < 0:
            raise DomainError("user regularization must be non-negative")
        rng = rng or np.random.default_rng()
        return cls(item_embeddings=rng.normal(0.0, init_scale, (num_items, k)),
                   user_embeddings=rng.normal(0.0, init_scale, (num_users, k)),
                   item_bias=np.zeros(num_items),
                   global_bias=0.5,
                   learning_rate=learning_rate, clip_l1=clip_l1, clip_l2=clip_l2,
                   user_reg=user_reg)

    @property
    def k(self) -> int:
        return self.item_embeddings.shape[1]

    def raw_scores(self, users, items) -> np.ndarray:
        users, items = np.asarray(users, dtype=int), np.asarray(items, dtype=int)
        return (np.einsum('ij,ij->i', self.user_embeddings[users], self.item_embeddings[items])
                + self.item_bias[items] + self.global_bias)

    def predict(self, users, items) -> np.ndarray:
        return np.clip(self.raw_scores(users, items), 0.0, 1.0)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.item_embeddings)) and np.all(np.isfinite(self.user_embeddings))
                    and np.all(np.isfinite(self.item_bias)) and np.isfinite(self.global_bias))


@dataclass(frozen=True)
class ClientUpload:
    """What a client sends to the server; it carries no user-embedding field."""
    client_id: int
    item_ids: np.ndarray          # real and pseudo items, sorted
    item_grads: np.ndarray        # len(item_ids) x k
    item_bias_grads: np.ndarray   # len(item_ids)
    global_bias_grad: float

    def vector(self) -> np.ndarray:
        return np.concatenate([self.item_grads.ravel(), self.item_bias_grads, [self.global_bias_grad]])

    def with_vector(self, vector: np.ndarray) -> 'ClientUpload':
        n, k = self.item_grads.shape
        return replace(self, item_grads=vector[:n * k].reshape(n, k),
                       item_bias_grads=vector[n * k:n * k + n], global_bias_grad=float(vector[-1]))

    def norm(self, kind: str) -> float:
        return float(np.linalg.norm(self.vector(), ord=1 if kind == 'l1' else 2))


def clip_vector(vector: np.ndarray, clip: ClipBound) -> np.ndarray:
    norm = np.linalg.norm(vector, ord=1 if clip.norm == 'l1' else 2)
    if norm > clip.bound:
        return vector * (clip.bound / norm)
    return vector


def local_update(state: FedSimState, client_id: int, users, items, ratings,
                 pseudo_items: Sequence[int] = (), clip: Optional[ClipBound] = None) -> Optional[ClientUpload]:
    """
    One gradient of the client's mean squared error.

    The user-embedding step, with the ``user_reg`` L2 penalty, is applied in place on
    ``state.user_embeddings``; item and bias gradients come back as an upload, clipped
    when ``clip`` is given. Returns None for a client without ratings.
    """
    users = np.asarray(users, dtype=int)
    items = np.asarray(items, dtype=int)
    ratings = np.asarray(ratings, dtype=float)
    if len(ratings) == 0:
        return None
    if not (len(users) == len(items) == len(ratings)):
        raise PreconditionError("users, items and ratings must have equal lengths")

    raw = state.raw_scores(users, items)
    inside = (raw >= 0.0) & (raw <= 1.0)
    coef = np.where(inside, 2.0 * (np.clip(raw, 0.0, 1.0) - ratings), 0.0) / len(ratings)

    item_ids = np.union1d(np.unique(items), np.asarray(pseudo_items, dtype=int))
    slot = np.searchsorted(item_ids, items)
    item_grads = np.zeros((len(item_ids), state.k))
    np.add.at(item_grads, slot, coef[:, None] * state.user_embeddings[users])
    item_bias_grads = np.zeros(len(item_ids))
    np.add.at(item_bias_grads, slot, coef)
    # pseudo items are labelled with the client's own prediction, so their gradient stays zero

    own_users = np.unique(users)
    decay = state.learning_rate * state.user_reg * state.user_embeddings[own_users]
    user_grads = coef[:, None] * state.item_embeddings[items]
    np.subtract.at(state.user_embeddings, users, state.learning_rate * user_grads)
    state.user_embeddings[own_users] -= decay

    upload = ClientUpload(int(client_id), item_ids, item_grads, item_bias_grads, float(coef.sum()))
    if clip is not None:
        upload = upload.with_vector(clip_vector(upload.vector(), clip))
    return upload


def add_noise(grad: np.ndarray, mechanism: NoiseMechanism, budget: Optional[PrivacyBudget],
              clip: Optional[ClipBound], rng: np.random.Generator) -> np.ndarray:
    """Per-coordinate Laplace or Gaussian noise calibrated to the clip bound and budget."""
    mechanism = NoiseMechanism(mechanism)
    grad = np.asarray(grad, dtype=float)
    if mechanism == NoiseMechanism.NONE:
        return grad
    expected = CLIP_NORMS[mechanism]
    if clip is None or clip.norm != expected:
        raise ConfigError(f"{mechanism.value} noise needs {expected} clipping, got "
                          f"{'none' if clip is None else clip.norm}")
    if budget is None or budget.epsilon <= 0:
        raise DomainError("noise needs a positive epsilon")
    if mechanism == NoiseMechanism.LAPLACE:
        return grad + sample_laplace(rng, laplace_scale(clip.bound, budget.epsilon), grad.shape)
    return grad + sample_gaussian(rng, gaussian_sigma(clip.bound, budget.epsilon, budget.delta), grad.shape)


def aggregate(state: FedSimState, uploads: List[ClientUpload]) -> FedSimState:
    """Average item gradients over the clients that uploaded each item; one descent step."""
    if not uploads:
        return state
    num_items = state.item_embeddings.shape[0]
    grad_sum = np.zeros_like(state.item_embeddings)
    bias_sum = np.zeros(num_items)
    counts = np.zeros(num_items)
    for upload in uploads:
        grad_sum[upload.item_ids] += upload.item_grads
        bias_sum[upload.item_ids] += upload.item_bias_grads
        counts[upload.item_ids] += 1
    touched = counts > 0
    lr = state.learning_rate
    state.item_embeddings[touched] -= lr * grad_sum[touched] / counts[touched, None]
    state.item_bias[touched] -= lr * bias_sum[touched] / counts[touched]
    state.global_bias -= lr * float(np.mean([u.global_bias_grad for u in uploads]))
    return state


def evaluate(state: FedSimState, users, items, ratings,
             threshold: float = F1_THRESHOLD) -> Tuple[float, float]:
    """RMSE of clamped predictions and F1 after binarizing both sides at ``threshold``."""
    ratings = np.asarray(ratings, dtype=float)
    if len(ratings) == 0:
        raise PreconditionError("test split is empty")
    predictions = state.predict(users, items)
    rmse = float(np.sqrt(mean_squared_error(ratings, predictions)))
    f1 = float(f1_score((ratings >= threshold).astype(int), (predictions >= threshold).astype(int),
                        zero_division=0))
    return rmse, f1
