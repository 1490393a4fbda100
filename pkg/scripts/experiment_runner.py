"""
Experiment Runner
=================

Runs one configured experiment end to end: dataset preparation, the federated
recommender, the budget policy (the planner or a baseline) and CSV reporting.

USAGE:
------
    python run_planner.py run configs/default.conf
"""

import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np
import pandas as pd

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.errors import BudgetExhaustedError, ConfigError
from app.run_config import RunConfig, validate_run_config
from app.allocation.allocator import BudgetPlanner
from app.allocation.baselines import (RandomActionPolicy, ScheduleKind, SchedulePolicy,
                                      schedule_budget)
from app.data_integration.dataset_loader import RatingDataset, load_dataset, split_dataset
from app.data_integration.synthetic_data import generate_low_rank_ratings
from app.federated.simulator import FederatedSimulator
from app.predictive_engine.context_reduction import reduce
from app.predictive_engine.gpr_predictor import KernelParams
from app.privacy_accounting.budgets import (ActionBudgetMap, BudgetLedger, NoiseMechanism,
                                            PrivacyBudget, action_to_budget)
from app.privacy_accounting.noise_calibration import gaussian_sigma
from app.privacy_accounting.rdp_accountant import RdpAccountant
from export.result_exporter import ResultExporter

logger = logging.getLogger(__name__)

ACTION_POLICIES = ('bgtplanner', 'random')


@dataclass
class RunResult:
    config: RunConfig
    frames: Dict[str, pd.DataFrame]
    summary: dict
    paths: Dict[str, str] = field(default_factory=dict)

    @property
    def metrics(self) -> pd.DataFrame:
        return self.frames['metrics']


# ============================================================================
# PREPARATION
# ============================================================================

def prepare_dataset(config: RunConfig) -> RatingDataset:
    if config.dataset_format == 'synthetic':
        return generate_low_rank_ratings(config.synthetic_users, config.synthetic_items,
                                         config.synthetic_rank, config.synthetic_density,
                                         seed=config.seed, num_clients=config.num_clients,
                                         item_effect=config.synthetic_item_effect)
    return load_dataset(config.dataset_path, config.dataset_format, config.num_clients, config.seed)


def effective_mechanism(config: RunConfig) -> NoiseMechanism:
    if config.policy == ScheduleKind.NO_NOISE.value:
        return NoiseMechanism.NONE
    return NoiseMechanism(config.mechanism)


def build_budget_map(config: RunConfig) -> ActionBudgetMap:
    return ActionBudgetMap.from_horizon(config.eps_total, config.horizon, config.t_min,
                                        config.num_actions, NoiseMechanism(config.mechanism),
                                        config.delta_total)


def build_schedule(config: RunConfig) -> SchedulePolicy:
    return SchedulePolicy(ScheduleKind(config.policy), config.eps_total, config.horizon,
                          config.eps_min, config.eps_max, config.rate, config.rate_mode,
                          config.rescale, config.loss_window, config.loss_multiplier)


def build_planner(config: RunConfig, budget_map: ActionBudgetMap, num_clients: int) -> BudgetPlanner:
    kernel_params = KernelParams(config.kernel_alpha, config.kernel_length_scale,
                                 config.kernel_noise_std, config.kernel_form)
    return BudgetPlanner(budget_map, num_clients, config.horizon, config.t0, config.gamma,
                         kernel_params, config.context_dim, config.seed,
                         eta_schedule=config.eta_schedule, lambda_init=config.lambda_init,
                         score_sign=config.score_sign, mask_infeasible=config.mask_infeasible,
                         lp_solver=config.lp_solver, lp_constraint=config.lp_constraint,
                         gpr_incremental=config.gpr_incremental)


# ============================================================================
# MAIN LOOP
# ============================================================================

def run_experiment(config: RunConfig, write: bool = True) -> RunResult:
    """Run one configuration for up to T rounds or until every client is exhausted."""
    is_valid, message = validate_run_config(config)
    if not is_valid:
        raise ConfigError(message)

    dataset = prepare_dataset(config)
    train, test = split_dataset(dataset, config.train_ratio, config.seed)
    simulator = FederatedSimulator(train, test, config.horizon, config.seed, config.embedding_dim,
                                   config.learning_rate, config.clip_l1, config.clip_l2,
                                   config.init_scale, config.threshold, config.pseudo_item_count,
                                   config.user_reg)
    mechanism = effective_mechanism(config)
    noisy = mechanism != NoiseMechanism.NONE
    num_clients = train.num_clients
    per_round_delta = config.delta_total / config.horizon if mechanism == NoiseMechanism.GAUSSIAN else 0.0
    total = PrivacyBudget(config.eps_total, config.delta_total if mechanism == NoiseMechanism.GAUSSIAN else 0.0)

    planner, schedule, random_policy, budget_map = None, None, None, None
    if config.policy in ACTION_POLICIES:
        budget_map = build_budget_map(config)
        cheapest = budget_map.cheapest
        if config.policy == 'bgtplanner':
            planner = build_planner(config, budget_map, num_clients)
        else:
            random_policy = RandomActionPolicy(budget_map.costs(), config.seed)
    else:
        schedule = build_schedule(config)
        cheapest = schedule.cheapest_round()
    ledger = BudgetLedger(num_clients, total, cheapest)
    accountant = RdpAccountant() if config.accounting == 'rdp' and mechanism == NoiseMechanism.GAUSSIAN else None

    logger.info("run: policy=%s mechanism=%s eps_total=%g T=%d clients=%d seed=%d",
                config.policy, mechanism.value, config.eps_total, config.horizon, num_clients, config.seed)

    metrics: List[dict] = []
    decisions: List[dict] = []
    duals: List[dict] = []
    losses = [simulator.initial_rmse]

    for round_ in range(1, config.horizon + 1):
        if noisy and not ledger.any_active():
            logger.info("all clients exhausted, exiting model training after round %d", round_ - 1)
            break
        interaction = simulator.begin_round(round_)
        context = reduce(interaction, config.context_dim, config.normalize_context)

        decision, action, cost = None, None, None
        try:
            if planner is not None:
                decision = planner.step(ledger, context, round_)
                action = decision.action
            elif random_policy is not None:
                action = random_policy.choose(ledger.min_remaining_active() if noisy else np.inf)
            elif noisy:
                epsilon = schedule_budget(schedule, round_, losses, ledger)
                cost = PrivacyBudget(epsilon, per_round_delta)
        except BudgetExhaustedError as exc:
            logger.info("exiting model training at round %d: %s", round_, exc)
            break
        if action is not None and noisy:
            cost = action_to_budget(budget_map, action)

        try:
            outcome = simulator.run_round(round_, ledger if noisy else None, mechanism, cost)
        except BudgetExhaustedError as exc:
            logger.info("exiting model training at round %d: %s", round_, exc)
            break
        losses.append(outcome.rmse)

        if planner is not None:
            planner.observe(decision, context, outcome.reward, ledger,
                            outcome.charged if noisy else None)
            decisions.append(decision.as_row(config.num_actions))
            if planner.duals is not None:
                duals.append(planner.duals.summary(round_))
        else:
            decisions.append({'round': round_, 'phase': config.policy,
                              'action': np.nan if action is None else action})

        if accountant is not None and cost is not None:
            sigma = gaussian_sigma(config.clip_l2, cost.epsilon, cost.delta)
            accountant.compose_gaussian(sigma / config.clip_l2)

        metrics.append({'round': round_, 'rmse': outcome.rmse, 'f1': outcome.f1,
                        'reward': outcome.reward, 'action': np.nan if action is None else action,
                        'eps_spent': outcome.eps_spent})
        logger.debug("round %d: action=%s rmse=%.5f reward=%.5f", round_, action, outcome.rmse, outcome.reward)

    exporter = ResultExporter(config.output_dir)
    metrics_df = pd.DataFrame(metrics, columns=['round', 'rmse', 'f1', 'reward', 'action', 'eps_spent'])
    ledger_df = ledger.to_frame()
    stats = exporter.create_summary_stats(metrics_df, ledger_df, simulator.initial_rmse)
    lambda_estimate = planner.state.lambda_estimate if planner is not None else None
    summary = {
        'policy': config.policy, 'mechanism': mechanism.value, 'eps_total': config.eps_total,
        'horizon': config.horizon, 't_min': config.t_min, 'seed': config.seed,
        'initial_rmse': simulator.initial_rmse, **stats,
        'eps_rdp': accountant.epsilon(config.delta_total) if accountant is not None else np.nan,
        'Lambda': np.nan if lambda_estimate is None else lambda_estimate,
    }
    frames = {
        'metrics': metrics_df,
        'decisions': exporter.prepare_decisions_export(pd.DataFrame(decisions)),
        'ledger': ledger_df,
        'duals': pd.DataFrame(duals, columns=['round', 'lambda_l1', 'lambda_min', 'lambda_max']),
        'gpr_history': planner.gpr.history_frame() if planner is not None else None,
        'summary': pd.DataFrame([summary]),
    }
    result = RunResult(config, frames, summary)
    if write:
        result.paths = exporter.write_bundle(frames, excel=config.excel_report)
    logger.info("run finished: %d rounds, final rmse %.5f, eps spent %.4g",
                stats['rounds_executed'], stats['final_rmse'], stats['total_eps_spent'])
    return result
