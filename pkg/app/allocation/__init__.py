# app/allocation/__init__.py
from .constrainer import DualState, dual_gradient, initialize_duals, omd_update, penalty, project_l1_ball
from .lp_solver import LpInstance, LpSolution, solve_lp, solve_lp_simplex
from .allocator import (ActionDistribution, AllocatorState, BudgetPlanner, Phase, StepDecision,
                        action_distribution, default_gamma, error_term, estimate_lambda,
                        initial_action, scores, step)
from .baselines import RandomActionPolicy, ScheduleKind, SchedulePolicy, schedule_budget

__all__ = [
    'DualState', 'dual_gradient', 'initialize_duals', 'omd_update', 'penalty', 'project_l1_ball',
    'LpInstance', 'LpSolution', 'solve_lp', 'solve_lp_simplex',
    'ActionDistribution', 'AllocatorState', 'BudgetPlanner', 'Phase', 'StepDecision',
    'action_distribution', 'default_gamma', 'error_term', 'estimate_lambda', 'initial_action',
    'scores', 'step',
    'RandomActionPolicy', 'ScheduleKind', 'SchedulePolicy', 'schedule_budget',
]
