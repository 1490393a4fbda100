"""
GPR reward predictor
====================

Gaussian process regression over inputs z = [a/A, x^t] stamped with the round t.
The covariance is the product of a distance kernel and an Ornstein-Uhlenbeck style
temporal decay:

    k(z_a, z_b) = (1 - alpha)^(|t_a - t_b| / 2) * exp(-D(z_a, z_b) / (2 s^2))

where D is the unsquared Euclidean distance (``form='as_printed'``) or its square
(``form='squared'``). The prior mean is zero, so k(z, z) = 1 is also the prior
variance of every input.

The posterior is computed from a lower Cholesky factor L of K + sigma_mu^2 I,
either rebuilt on every append or extended by one row.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.spatial.distance import cdist

from config import (CHOLESKY_JITTER, KERNEL_ALPHA, KERNEL_FORM, KERNEL_LENGTH_SCALE,
                    KERNEL_NOISE_STD)
from app.errors import DomainError, GprNumericalError, PreconditionError
from app.predictive_engine.context_reduction import ContextVector

logger = logging.getLogger(__name__)

KERNEL_FORMS = ('as_printed', 'squared')


@dataclass(frozen=True)
class KernelParams:
    alpha: float = KERNEL_ALPHA
    length_scale: float = KERNEL_LENGTH_SCALE
    noise_std: float = KERNEL_NOISE_STD
    form: str = KERNEL_FORM

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise DomainError(f"alpha must lie in [0, 1), got {self.alpha}")
        if self.length_scale <= 0:
            raise DomainError("length scale must be positive")
        if self.noise_std <= 0:
            raise DomainError("observation noise std must be positive")
        if self.form not in KERNEL_FORMS:
            raise DomainError(f"unknown kernel form '{self.form}'")


@dataclass(frozen=True)
class GprInput:
    action_feature: float
    context: tuple
    round: int
    action: Optional[int] = None  # 1-based index behind action_feature, when known

    @classmethod
    def for_action(cls, action: int, num_actions: int, context: ContextVector, round_: int) -> 'GprInput':
        return cls(scale_action(action, num_actions), tuple(context.values), int(round_), int(action))

    def vector(self) -> np.ndarray:
        return np.concatenate(([self.action_feature], np.asarray(self.context, dtype=float)))


@dataclass(frozen=True)
class GprPosterior:
    mean: float
    variance: float


def scale_action(action: int, num_actions: int) -> float:
    """Action a embedded as a/A in (0, 1]."""
    return action / num_actions


def kernel_matrix(params: KernelParams, z1: np.ndarray, t1: np.ndarray,
                  z2: np.ndarray, t2: np.ndarray) -> np.ndarray:
    """Composite kernel between the rows of z1 and z2."""
    z1, z2 = np.atleast_2d(z1), np.atleast_2d(z2)
    if z1.shape[1] != z2.shape[1]:
        raise PreconditionError(f"input dimensions differ: {z1.shape[1]} vs {z2.shape[1]}")
    dist = cdist(z1, z2)
    if params.form == 'squared':
        dist = dist ** 2
    lag = np.abs(np.subtract.outer(np.asarray(t1, dtype=float), np.asarray(t2, dtype=float)))
    decay = np.power(1.0 - params.alpha, lag / 2.0)
    return decay * np.exp(-dist / (2.0 * params.length_scale ** 2))


def kernel(params: KernelParams, a: GprInput, b: GprInput) -> float:
    if len(a.context) != len(b.context):
        raise PreconditionError(f"context dimensions differ: {len(a.context)} vs {len(b.context)}")
    return float(kernel_matrix(params, a.vector()[None, :], [a.round], b.vector()[None, :], [b.round])[0, 0])


class GprModel:
    """History of (input, reward) pairs with a cached Cholesky factor."""

    def __init__(self, params: KernelParams = None, context_dim: Optional[int] = None,
                 incremental: bool = False):
        self.params = params or KernelParams()
        self.context_dim = context_dim
        self.incremental = incremental
        self.history: List[tuple] = []
        self._z = np.empty((0, 0 if context_dim is None else context_dim + 1))
        self._t = np.empty(0)
        self._r = np.empty(0)
        self._chol: Optional[np.ndarray] = None
        self._alpha: Optional[np.ndarray] = None
        self._jitter = 0.0

    def __len__(self):
        return len(self.history)

    @property
    def noise_var(self) -> float:
        return self.params.noise_std ** 2

    def _check_input(self, query: GprInput):
        if self.context_dim is None:
            return
        if len(query.context) != self.context_dim:
            raise PreconditionError(
                f"context has {len(query.context)} values, model expects {self.context_dim}")

    # ------------------------------------------------------------------
    # factorization
    # ------------------------------------------------------------------

    def _rebuild(self):
        gram = kernel_matrix(self.params, self._z, self._t, self._z, self._t)
        gram = 0.5 * (gram + gram.T)
        eye = np.eye(len(self._r))
        try:
            self._jitter = 0.0
            self._chol = cholesky(gram + self.noise_var * eye, lower=True)
        except LinAlgError:
            logger.warning("Cholesky failed on %d points, retrying with jitter", len(self._r))
            self._jitter = CHOLESKY_JITTER
            try:
                self._chol = cholesky(gram + (self.noise_var + self._jitter) * eye, lower=True)
            except LinAlgError as exc:
                raise GprNumericalError(f"covariance of {len(self._r)} points is not factorizable") from exc

    def _extend(self, z_new: np.ndarray, t_new: int):
        if self._chol is None or self._chol.shape[0] == 0:
            self._rebuild()
            return
        k_vec = kernel_matrix(self.params, self._z[:-1], self._t[:-1], z_new[None, :], [t_new])[:, 0]
        diag = 1.0 + self.noise_var + self._jitter
        row = solve_triangular(self._chol, k_vec, lower=True)
        pivot = diag - row @ row
        if pivot <= 0:
            self._rebuild()
            return
        n = self._chol.shape[0]
        extended = np.zeros((n + 1, n + 1))
        extended[:n, :n] = self._chol
        extended[n, :n] = row
        extended[n, n] = np.sqrt(pivot)
        self._chol = extended

    # ------------------------------------------------------------------
    # public API
    # ------------------------------------------------------------------

    def append(self, query: GprInput, reward: float) -> 'GprModel':
        self._check_input(query)
        if self.context_dim is None:
            self.context_dim = len(query.context)
            self._z = np.empty((0, self.context_dim + 1))
        z_new = query.vector()
        self.history.append((query, float(reward)))
        self._z = np.vstack([self._z, z_new])
        self._t = np.append(self._t, query.round)
        self._r = np.append(self._r, float(reward))
        if self.incremental:
            self._extend(z_new, query.round)
        else:
            self._rebuild()
        self._alpha = cho_solve((self._chol, True), self._r)
        return self

    def _predict_batch(self, z_query: np.ndarray, t_query: np.ndarray,
                       with_variance: bool = True) -> List[GprPosterior]:
        prior = np.ones(len(z_query))
        if not self.history:
            return [GprPosterior(0.0, 1.0) for _ in prior]
        k_star = kernel_matrix(self.params, self._z, self._t, z_query, t_query)
        means = k_star.T @ self._alpha
        if with_variance:
            v = solve_triangular(self._chol, k_star, lower=True)
            variances = np.maximum(prior - np.einsum('ij,ij->j', v, v), 0.0)
        else:
            variances = np.full(len(z_query), np.nan)
        return [GprPosterior(float(m), float(s)) for m, s in zip(means, variances)]

    def predict(self, query: GprInput) -> GprPosterior:
        self._check_input(query)
        return self._predict_batch(query.vector()[None, :], np.array([query.round]))[0]

    def predict_all_actions(self, context: ContextVector, round_: int, num_actions: int,
                            with_variance: bool = True) -> List[GprPosterior]:
        if num_actions < 1:
            raise PreconditionError("num_actions must be >= 1")
        queries = [GprInput.for_action(a, num_actions, context, round_) for a in range(1, num_actions + 1)]
        self._check_input(queries[0])
        z_query = np.vstack([q.vector() for q in queries])
        return self._predict_batch(z_query, np.full(num_actions, round_), with_variance)

    def truncated(self, count: int) -> 'GprModel':
        """A fresh model conditioned on the first ``count`` records only."""
        model = GprModel(self.params, self.context_dim, self.incremental)
        for query, reward in self.history[:count]:
            model.append(query, reward)
        return model

    def history_frame(self) -> pd.DataFrame:
        rows = []
        for query, reward in self.history:
            row = {'round': query.round, 'action': query.action, 'action_feature': query.action_feature}
            row.update({f'ctx_{j}': v for j, v in enumerate(query.context)})
            row['reward'] = reward
            rows.append(row)
        return pd.DataFrame(rows)


def append(model: GprModel, query: GprInput, reward: float) -> GprModel:
    return model.append(query, reward)


def predict(model: GprModel, query: GprInput) -> GprPosterior:
    return model.predict(query)


def predict_all_actions(model: GprModel, context: ContextVector, round_: int,
                        num_actions: int) -> List[GprPosterior]:
    return model.predict_all_actions(context, round_, num_actions)

