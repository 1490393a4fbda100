"""
Budget allocator: a constrained contextual bandit over discrete per-round budget levels.

Rounds 1..A*T0 sweep every action T0 times, the next T0 rounds play uniformly random
actions; the GPR fitted on the sweep is then scored against those random rounds, an LP
over the GPR's predicted rewards estimates OPT, and the dual radius Lambda follows.
Afterwards each round scores actions by predicted reward and dual penalty, and samples
from an exploitation-weighted distribution.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from config import (KERNEL_FORM, LAMBDA_FLOOR, LAMBDA_INIT, ETA_SCHEDULE, LP_CONSTRAINT, LP_SOLVER,
                    MASK_INFEASIBLE_ACTIONS, SCORE_SIGN, GPR_INCREMENTAL, LEDGER_TOLERANCE)
from app.errors import BudgetExhaustedError, DomainError, PhaseError, PreconditionError
from app.privacy_accounting.budgets import ActionBudgetMap, BudgetLedger
from app.predictive_engine.context_reduction import ContextVector
from app.predictive_engine.gpr_predictor import GprInput, GprModel, KernelParams
from app.allocation.constrainer import (DualState, dual_gradient, initialize_duals, omd_update,
                                        penalty)
from app.allocation.lp_solver import LpInstance, LpSolution, solve_lp, solve_lp_simplex

logger = logging.getLogger(__name__)

SCORE_SIGNS = ('as_printed', 'lagrangian')


class Phase(str, Enum):
    INITIAL_ARM_SWEEP = 'initial_arm_sweep'
    INITIAL_RANDOM = 'initial_random'
    EXPLORE_EXPLOIT = 'explore_exploit'
    EXHAUSTED = 'exhausted'


def default_gamma(num_actions: int, horizon: int, num_clients: int) -> float:
    """gamma = 2 sqrt(A T / ((U + 2) ln T))."""
    if horizon < 2:
        raise DomainError("default gamma needs T >= 2")
    return 2.0 * math.sqrt(num_actions * horizon / ((num_clients + 2) * math.log(horizon)))


@dataclass
class AllocatorState:
    num_actions: int
    t0: int
    horizon: int
    gamma: float
    rng: np.random.Generator = field(default_factory=np.random.default_rng)
    phase: Phase = Phase.INITIAL_ARM_SWEEP
    lambda_estimate: Optional[float] = None

    def __post_init__(self):
        if self.gamma <= 0:
            raise DomainError("gamma must be positive")
        if self.num_actions < 1 or self.t0 < 1:
            raise PreconditionError("A and T0 must be positive")

    @property
    def sweep_end(self) -> int:
        return self.num_actions * self.t0

    @property
    def initial_end(self) -> int:
        return (self.num_actions + 1) * self.t0

    def phase_for_round(self, round_: int) -> Phase:
        if self.phase == Phase.EXHAUSTED:
            return Phase.EXHAUSTED
        if round_ <= self.sweep_end:
            return Phase.INITIAL_ARM_SWEEP
        if round_ <= self.initial_end:
            return Phase.INITIAL_RANDOM
        return Phase.EXPLORE_EXPLOIT


@dataclass(frozen=True)
class ActionDistribution:
    probabilities: np.ndarray
    argmax: int  # 1-based

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.choice(len(self.probabilities), p=self.probabilities)) + 1


@dataclass(frozen=True)
class StepDecision:
    round: int
    phase: Phase
    action: int
    beta: Optional[np.ndarray] = None
    probabilities: Optional[np.ndarray] = None
    lambda_estimate: Optional[float] = None
    lambda_l1: Optional[float] = None

    def as_row(self, num_actions: int) -> dict:
        row = {'round': self.round, 'phase': self.phase.value, 'action': self.action}
        for a in range(num_actions):
            row[f'beta_{a + 1}'] = np.nan if self.beta is None else float(self.beta[a])
        for a in range(num_actions):
            row[f'p_{a + 1}'] = np.nan if self.probabilities is None else float(self.probabilities[a])
        row['Lambda'] = np.nan if self.lambda_estimate is None else self.lambda_estimate
        row['lambda_l1'] = np.nan if self.lambda_l1 is None else self.lambda_l1
        return row


# ----------------------------------------------------------------------
# stateless operations
# ----------------------------------------------------------------------

def initial_action(state: AllocatorState, round_: int) -> int:
    if round_ < 1 or round_ > state.initial_end:
        raise PhaseError(f"round {round_} is outside the initial stage 1..{state.initial_end}")
    if round_ <= state.sweep_end:
        return math.ceil(round_ / state.t0)
    return int(state.rng.integers(1, state.num_actions + 1))


def error_term(model: GprModel, records: Sequence[Tuple[GprInput, float]], num_actions: int,
               horizon: int, num_clients: int) -> Tuple[float, float]:
    """E = mean squared residual of the GPR mean over ``records``; M = sqrt(A E + 4 ln(T U) / T0)."""
    if not records:
        raise PreconditionError("error_term needs the random-stage records")
    residuals = np.array([model.predict(query).mean - reward for query, reward in records])
    t0 = len(records)
    err = float(np.mean(residuals ** 2))
    bias = math.sqrt(num_actions * err + 4.0 * math.log(horizon * num_clients) / t0)
    return err, bias


def estimate_lambda(opt_hat: float, bias: float, horizon: int, eps_min_total: float) -> float:
    if eps_min_total <= 0:
        raise DomainError("the smallest total budget must be positive")
    return max(horizon / eps_min_total * (opt_hat + bias), LAMBDA_FLOOR)


def scores(means, penalty_per_action) -> np.ndarray:
    means = np.asarray(means, dtype=float)
    penalty_per_action = np.asarray(penalty_per_action, dtype=float)
    if means.shape != penalty_per_action.shape:
        raise PreconditionError(f"{means.shape} means vs {penalty_per_action.shape} penalties")
    return means - penalty_per_action


def action_distribution(beta, gamma: float) -> ActionDistribution:
    beta = np.asarray(beta, dtype=float)
    if gamma <= 0:
        raise DomainError("gamma must be positive")
    if not np.all(np.isfinite(beta)):
        raise PreconditionError("scores must be finite")
    num_actions = len(beta)
    best = int(np.argmax(beta))  # first maximum -> cheapest budget on ties
    probs = 1.0 / (num_actions + gamma * (beta[best] - beta))
    probs[best] = 0.0
    probs[best] = 1.0 - probs.sum()
    return ActionDistribution(probs, best + 1)


def mask_distribution(dist: ActionDistribution, beta, feasible) -> ActionDistribution:
    """Zero out infeasible actions and hand their mass to the best feasible action."""
    feasible = np.asarray(feasible, dtype=bool)
    if not feasible.any():
        raise BudgetExhaustedError("no action fits the remaining budget")
    if feasible.all():
        return dist
    beta = np.where(feasible, np.asarray(beta, dtype=float), -np.inf)
    best = int(np.argmax(beta))
    probs = np.where(feasible, dist.probabilities, 0.0)
    probs[best] += 1.0 - probs.sum()
    return ActionDistribution(probs, best + 1)


# ----------------------------------------------------------------------
# server loop
# ----------------------------------------------------------------------

class BudgetPlanner:
    """Bundles allocator state, the GPR predictor and the dual variables for one run."""

    def __init__(self, budget_map: ActionBudgetMap, num_clients: int, horizon: int, t0: int,
                 gamma: Optional[float] = None, kernel_params: Optional[KernelParams] = None,
                 context_dim: Optional[int] = None, seed: Optional[int] = None,
                 eta_schedule: str = ETA_SCHEDULE, lambda_init: str = LAMBDA_INIT,
                 score_sign: str = SCORE_SIGN, mask_infeasible: bool = MASK_INFEASIBLE_ACTIONS,
                 lp_solver: str = LP_SOLVER, lp_constraint: str = LP_CONSTRAINT,
                 gpr_incremental: bool = GPR_INCREMENTAL):
        if score_sign not in SCORE_SIGNS:
            raise DomainError(f"unknown score sign '{score_sign}'")
        num_actions = budget_map.num_actions
        self.budget_map = budget_map
        self.num_clients = num_clients
        self.costs = budget_map.costs()
        gamma = default_gamma(num_actions, horizon, num_clients) if gamma is None else gamma
        self.state = AllocatorState(num_actions, t0, horizon, gamma, np.random.default_rng(seed))
        self.gpr = GprModel(kernel_params or KernelParams(form=KERNEL_FORM), context_dim, gpr_incremental)
        self.duals: Optional[DualState] = None
        self.lp_solution: Optional[LpSolution] = None
        self.error_estimate: Optional[Tuple[float, float]] = None
        self.eta_schedule = eta_schedule
        self.lambda_init = lambda_init
        self.score_sign = score_sign
        self.mask_infeasible = mask_infeasible
        self.lp_solver = lp_solver
        self.lp_constraint = lp_constraint

    @property
    def num_actions(self) -> int:
        return self.state.num_actions

    # ------------------------------------------------------------------

    def _feasible(self, ledger: BudgetLedger) -> np.ndarray:
        if not self.mask_infeasible:
            return np.ones(self.num_actions, dtype=bool)
        return self.costs <= ledger.min_remaining_active() + LEDGER_TOLERANCE

    def fair_share(self, ledger: BudgetLedger) -> np.ndarray:
        return np.where(ledger.active, ledger.total_eps / self.state.horizon, 0.0)

    def spent_vector(self, ledger: BudgetLedger, action: int) -> np.ndarray:
        return np.where(ledger.active, self.costs[action - 1], 0.0)

    def penalties(self, ledger: BudgetLedger) -> np.ndarray:
        fair = self.fair_share(ledger)
        values = np.array([penalty(self.duals, fair, self.spent_vector(ledger, a))
                           for a in range(1, self.num_actions + 1)])
        return values if self.score_sign == 'as_printed' else -values

    def step(self, ledger: BudgetLedger, context: ContextVector, round_: int) -> StepDecision:
        if not ledger.any_active():
            self.state.phase = Phase.EXHAUSTED
            raise BudgetExhaustedError("all clients exhausted their budgets")
        phase = self.state.phase_for_round(round_)
        feasible = self._feasible(ledger)
        if not feasible.any():
            self.state.phase = Phase.EXHAUSTED
            raise BudgetExhaustedError("no action fits the remaining budget")

        if phase in (Phase.INITIAL_ARM_SWEEP, Phase.INITIAL_RANDOM):
            action = initial_action(self.state, round_)
            if not feasible[action - 1]:
                # costs increase, so the feasible actions form a prefix
                action = int(np.flatnonzero(feasible)[-1]) + 1
            return StepDecision(round_, phase, action)

        if self.duals is None:
            raise PhaseError("exploration-exploitation reached before the initial stage finished")
        means = np.array([p.mean for p in self.gpr.predict_all_actions(
            context, round_, self.num_actions, with_variance=False)])
        beta = scores(means, self.penalties(ledger))
        dist = mask_distribution(action_distribution(beta, self.state.gamma), beta, feasible)
        action = dist.sample(self.state.rng)
        logger.debug("round %d: beta=%s p=%s -> action %d", round_, np.round(beta, 5),
                     np.round(dist.probabilities, 4), action)
        return StepDecision(round_, phase, action, beta, dist.probabilities,
                            self.state.lambda_estimate, self.duals.l1)

    def observe(self, decision: StepDecision, context: ContextVector, reward: float,
                ledger: BudgetLedger, charged: Optional[np.ndarray] = None):
        """Record the round's reward; close the initial stage or move the duals.

        ``charged`` marks the clients that paid for this round; clients outside it get a
        zero dual gradient. Defaults to every client.
        """
        round_ = decision.round
        self.gpr.append(GprInput.for_action(decision.action, self.num_actions, context, round_), reward)
        if decision.phase == Phase.EXPLORE_EXPLOIT:
            charged = np.ones(self.num_clients, dtype=bool) if charged is None else np.asarray(charged, dtype=bool)
            spent = np.where(charged, self.costs[decision.action - 1], 0.0)
            fair = np.where(charged, ledger.total_eps / self.state.horizon, 0.0)
            grad = dual_gradient(fair, spent)
            if self.score_sign == 'lagrangian':
                grad = -grad
            self.duals = omd_update(self.duals, grad, round_)
        elif round_ == self.state.initial_end:
            self.finish_initial_stage(ledger.total_eps)

    def finish_initial_stage(self, totals: np.ndarray):
        """Estimate OPT, the LP bias and Lambda from the initial-stage history.

        ``totals`` holds every client's total epsilon budget.
        """
        state = self.state
        sweep_model = self.gpr.truncated(state.sweep_end)
        random_records = self.gpr.history[state.sweep_end:state.initial_end]
        err, bias = error_term(sweep_model, random_records, state.num_actions,
                               state.horizon, self.num_clients)
        self.error_estimate = (err, bias)

        rewards = np.column_stack([
            [p.mean for p in self.gpr.predict_all_actions(
                ContextVector(query.context), query.round, state.num_actions, with_variance=False)]
            for query, _ in random_records])
        totals = np.asarray(totals, dtype=float)
        eps_min_total = float(totals.min())
        cap = eps_min_total / state.horizon + 2.0 * bias
        instance = LpInstance(rewards, self.costs, cap)
        if self.lp_constraint == 'per_client':
            caps = totals / state.horizon + 2.0 * bias
            self.lp_solution = solve_lp_simplex(instance, caps)
        elif self.lp_solver == 'simplex':
            self.lp_solution = solve_lp_simplex(instance)
        else:
            self.lp_solution = solve_lp(instance)

        if eps_min_total <= max((state.num_actions + 2) * state.t0, state.horizon * bias):
            logger.warning("smallest total budget %.4g is below max{(A+2)T0, T*M} = %.4g; "
                           "regret guarantee does not apply", eps_min_total,
                           max((state.num_actions + 2) * state.t0, state.horizon * bias))

        state.lambda_estimate = estimate_lambda(self.lp_solution.value, bias, state.horizon, eps_min_total)
        self.duals = initialize_duals(self.num_clients, state.lambda_estimate, state.horizon,
                                      self.eta_schedule, self.lambda_init, state.rng)
        state.phase = Phase.EXPLORE_EXPLOIT
        logger.info("initial stage done: E=%.4g M=%.4g OPT_hat=%.4g Lambda=%.4g",
                    err, bias, self.lp_solution.value, state.lambda_estimate)


def step(planner: BudgetPlanner, ledger: BudgetLedger, context: ContextVector, round_: int) -> StepDecision:
    return planner.step(ledger, context, round_)
