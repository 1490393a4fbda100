"""
Bandit Bench
============

Runs the budget planner against a synthetic linear-reward environment and compares
it with the uniform-random action policy and the offline static-policy optimum.

USAGE:
------
    python run_planner.py bench-bandit configs/bench.conf
"""

import logging
import os
import sys
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.run_config import RunConfig
from app.allocation.allocator import BudgetPlanner
from app.allocation.baselines import RandomActionPolicy
from app.allocation.lp_solver import LpInstance, solve_lp
from app.data_integration.synthetic_data import SyntheticBanditEnv
from app.predictive_engine.gpr_predictor import KernelParams
from app.privacy_accounting.budgets import ActionBudgetMap, BudgetLedger, PrivacyBudget, action_to_budget
from export.result_exporter import ResultExporter

logger = logging.getLogger(__name__)

# GPR settings for low-dimensional linear rewards
BENCH_KERNEL = KernelParams(alpha=0.001, length_scale=1.0, noise_std=0.05, form='squared')
ORACLE_CONTEXTS = 1000


@dataclass
class BenchReport:
    per_seed: pd.DataFrame
    trajectories: pd.DataFrame


def bench_costs(eps_total: float, horizon: int, num_actions: int,
                low: float = 0.5, high: float = 2.5) -> ActionBudgetMap:
    """Per-round costs spread over [low, high] times the fair share eps_total / T."""
    fair = eps_total / horizon
    return ActionBudgetMap.from_costs(np.linspace(low * fair, high * fair, num_actions))


def offline_optimum(env: SyntheticBanditEnv, budget_map: ActionBudgetMap, cap: float, seed: int,
                    samples: int = ORACLE_CONTEXTS) -> float:
    """Per-round value of the best static randomized policy on a context sample."""
    oracle_env = SyntheticBanditEnv(env.weights, 0.0, seed)
    contexts = [oracle_env.sample_context() for _ in range(samples)]
    rewards = np.column_stack([env.expected_rewards(c) for c in contexts])
    return solve_lp(LpInstance(rewards, budget_map.costs(), cap)).value


def _play(env: SyntheticBanditEnv, budget_map: ActionBudgetMap, eps_total: float, horizon: int,
          opt: float, choose, observe=None) -> pd.DataFrame:
    ledger = BudgetLedger(1, PrivacyBudget(eps_total), budget_map.cheapest)
    rows = []
    for round_ in range(1, horizon + 1):
        context = env.sample_context()
        if not ledger.any_active():
            env.reward(1, context)  # keep the random stream aligned across policies
            rows.append({'round': round_, 'action': 0, 'expected_reward': 0.0,
                         'regret': opt, 'eps_spent': 0.0})
            continue
        decision, action = choose(ledger, context, round_)
        expected = env.expected_reward(action, context)
        reward = env.reward(action, context)
        cost = action_to_budget(budget_map, action)
        ledger.charge(0, cost)
        if observe is not None:
            observe(decision, context, reward, ledger)
        rows.append({'round': round_, 'action': action, 'expected_reward': expected,
                     'regret': opt - expected, 'eps_spent': cost.epsilon})
    return pd.DataFrame(rows)


def _summarize(trace: pd.DataFrame, horizon: int, cap: float) -> dict:
    half = horizon // 2
    last_quarter = trace[trace['round'] > horizon - horizon // 4]
    played = last_quarter[last_quarter['action'] > 0]['action']
    return {
        'cumulative_reward': float(trace['expected_reward'].sum()),
        'cumulative_regret': float(trace['regret'].sum()),
        'first_half_regret': float(trace['regret'].iloc[:half].mean()),
        'second_half_regret': float(trace['regret'].iloc[half:].mean()),
        'final_quarter_spend_rate': float(last_quarter['eps_spent'].mean() / cap),
        'modal_late_action': int(played.mode().min()) if len(played) else 0,
    }


def bench_bandit(env: SyntheticBanditEnv, horizon: int, seeds: Sequence[int],
                 budget_map: ActionBudgetMap, eps_total: float, t0: int = 5,
                 kernel_params: KernelParams = BENCH_KERNEL, score_sign: str = 'lagrangian',
                 gamma: Optional[float] = None, eta_schedule: str = 'constant') -> BenchReport:
    """Planner vs uniform-random action choice on ``env`` for every seed."""
    cap = eps_total / horizon
    rows: List[dict] = []
    traces = []
    for seed in seeds:
        opt = offline_optimum(env, budget_map, cap, seed + 10_000)

        planner = BudgetPlanner(budget_map, 1, horizon, t0, gamma, kernel_params, env.context_dim,
                                seed, eta_schedule=eta_schedule, score_sign=score_sign,
                                gpr_incremental=True)

        def choose_planner(ledger, context, round_):
            decision = planner.step(ledger, context, round_)
            return decision, decision.action

        def observe_planner(decision, context, reward, ledger):
            planner.observe(decision, context, reward, ledger)

        trace = _play(SyntheticBanditEnv(env.weights, env.noise_std, seed), budget_map, eps_total,
                      horizon, opt, choose_planner, observe_planner)

        random_policy = RandomActionPolicy(budget_map.costs(), seed)
        random_trace = _play(SyntheticBanditEnv(env.weights, env.noise_std, seed), budget_map, eps_total,
                             horizon, opt,
                             lambda ledger, context, round_: (None, random_policy.choose(ledger.min_remaining_active())))

        summary = _summarize(trace, horizon, cap)
        rows.append({'seed': seed, 'opt_per_round': opt, **summary,
                     'random_cumulative_reward': float(random_trace['expected_reward'].sum()),
                     'lambda_estimate': planner.state.lambda_estimate})
        traces.append(trace.assign(seed=seed))
        logger.info("bench seed %d: reward %.4f vs random %.4f, regret halves %.5f / %.5f",
                    seed, summary['cumulative_reward'], rows[-1]['random_cumulative_reward'],
                    summary['first_half_regret'], summary['second_half_regret'])
    return BenchReport(pd.DataFrame(rows), pd.concat(traces, ignore_index=True))


def run_bench(config: RunConfig, write: bool = True) -> BenchReport:
    env = SyntheticBanditEnv.increasing(config.num_actions, config.context_dim, config.seed,
                                        config.bench_noise_std)
    budget_map = bench_costs(config.eps_total, config.horizon, config.num_actions)
    kernel_params = KernelParams(config.kernel_alpha, config.kernel_length_scale,
                                 config.kernel_noise_std, config.kernel_form)
    seeds = range(config.seed, config.seed + config.seeds)
    report = bench_bandit(env, config.horizon, seeds, budget_map, config.eps_total, config.t0,
                          kernel_params, config.score_sign, config.gamma, config.eta_schedule)
    if write:
        exporter = ResultExporter(config.output_dir)
        exporter.to_csv(report.per_seed, 'bench_summary.csv')
        exporter.to_csv(report.trajectories, 'bench_trajectories.csv')
    return report
