import math

import numpy as np
import pytest
from scipy import stats

from app.errors import BudgetExhaustedError, DomainError, PhaseError, PreconditionError
from app.allocation.allocator import (ActionDistribution, AllocatorState, BudgetPlanner, Phase,
                                      action_distribution, default_gamma, error_term, estimate_lambda,
                                      initial_action, mask_distribution, scores)
from app.allocation.constrainer import DualState, penalty
from app.data_integration.synthetic_data import SyntheticBanditEnv
from app.predictive_engine.context_reduction import ContextVector
from app.predictive_engine.gpr_predictor import GprInput, GprPosterior
from app.privacy_accounting.budgets import ActionBudgetMap, BudgetLedger, PrivacyBudget


class FixedMeanModel:
    """Predicts the same mean everywhere."""

    def __init__(self, mean):
        self.mean = mean

    def predict(self, query):
        return GprPosterior(self.mean, 1.0)


def _records(rewards):
    return [(GprInput(0.2, (0.1, 0.1), t), r) for t, r in enumerate(rewards, start=26)]


# ----------------------------------------------------------------------
# initial stage
# ----------------------------------------------------------------------

def test_sweep_order():
    state = AllocatorState(5, 5, 100, 1.0, np.random.default_rng(0))
    assert initial_action(state, 1) == 1
    assert initial_action(state, 25) == 5
    assert [initial_action(state, t) for t in range(1, 26)] == [a for a in range(1, 6) for _ in range(5)]


def test_random_stage_is_uniform():
    state = AllocatorState(5, 5, 100, 1.0, np.random.default_rng(0))
    draws = [initial_action(state, 26 + (i % 5)) for i in range(100_000)]
    counts = np.bincount(draws, minlength=6)[1:]
    assert stats.chisquare(counts).pvalue > 1e-3


def test_initial_action_outside_initial_stage():
    state = AllocatorState(5, 5, 100, 1.0)
    with pytest.raises(PhaseError):
        initial_action(state, 31)


def test_phase_boundaries():
    state = AllocatorState(5, 5, 100, 1.0)
    assert state.phase_for_round(25) == Phase.INITIAL_ARM_SWEEP
    assert state.phase_for_round(26) == Phase.INITIAL_RANDOM
    assert state.phase_for_round(30) == Phase.INITIAL_RANDOM
    assert state.phase_for_round(31) == Phase.EXPLORE_EXPLOIT


def test_gamma_must_be_positive():
    with pytest.raises(DomainError):
        AllocatorState(5, 5, 100, 0.0)


# ----------------------------------------------------------------------
# error term and Lambda
# ----------------------------------------------------------------------

def test_error_term_with_perfect_predictions():
    err, bias = error_term(FixedMeanModel(0.3), _records([0.3] * 5), 5, 100, 10)
    assert err == 0.0
    assert bias == pytest.approx(2.3508, abs=1e-3)


def test_error_term_single_residual():
    err, _ = error_term(FixedMeanModel(0.4), _records([0.3]), 5, 100, 10)
    assert err == pytest.approx(0.01)


def test_error_term_needs_records():
    with pytest.raises(PreconditionError):
        error_term(FixedMeanModel(0.0), [], 5, 100, 10)


def test_estimate_lambda():
    assert estimate_lambda(0.05, 2.35, 100, 10.0) == pytest.approx(24.0, rel=1e-12)
    assert estimate_lambda(0.0, 0.0, 100, 10.0) == 1e-6
    assert estimate_lambda(0.05, 2.3508, 100, 10.0) == pytest.approx(24.008, abs=1e-3)
    with pytest.raises(DomainError):
        estimate_lambda(0.05, 2.35, 100, 0.0)


# ----------------------------------------------------------------------
# scores and sampling
# ----------------------------------------------------------------------

def test_scores_reference_value():
    state = DualState(np.array([0.5]), 10.0)
    beta = scores([0.05], [penalty(state, [0.1], [0.12])])
    assert beta[0] == pytest.approx(0.06)


def test_scores_without_duals_equal_means():
    np.testing.assert_array_equal(scores([0.1, 0.3], [0.0, 0.0]), [0.1, 0.3])


def test_scores_translation_and_permutation(rng):
    means, penalties = rng.normal(size=5), rng.normal(size=5)
    beta = scores(means, penalties)
    assert np.argmax(scores(means + 3.0, penalties)) == np.argmax(beta)
    order = rng.permutation(5)
    np.testing.assert_allclose(scores(means[order], penalties[order]), beta[order])


def test_scores_length_mismatch():
    with pytest.raises(PreconditionError):
        scores([0.1, 0.2], [0.1])


def test_distribution_reference_probabilities():
    dist = action_distribution([1.0, 0.0, 0.0, 0.0, 0.0], 1.0)
    np.testing.assert_allclose(dist.probabilities, [1 / 3, 1 / 6, 1 / 6, 1 / 6, 1 / 6])
    assert dist.argmax == 1


def test_distribution_ties_prefer_cheaper_action():
    assert action_distribution([0.2, 0.5, 0.5], 2.0).argmax == 2


def test_small_gamma_is_uniform():
    dist = action_distribution([0.9, 0.1, 0.4, -2.0], 1e-12)
    np.testing.assert_allclose(dist.probabilities, 0.25, atol=1e-9)


def test_default_gamma_with_equal_scores_is_uniform():
    gamma = default_gamma(5, 100, 10)
    assert gamma == pytest.approx(2 * math.sqrt(500 / (12 * math.log(100))))
    np.testing.assert_allclose(action_distribution(np.full(5, 0.7), gamma).probabilities, 0.2, atol=1e-12)


def test_distribution_invariants(rng):
    for _ in range(200):
        beta = rng.normal(size=int(rng.integers(1, 8)))
        dist = action_distribution(beta, float(rng.uniform(0.01, 50)))
        probs = dist.probabilities
        assert np.all(probs >= 0)
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert probs[dist.argmax - 1] >= 1 / len(beta) - 1e-12
        assert probs[dist.argmax - 1] == probs.max()


def test_sampling_fidelity():
    dist = action_distribution([0.3, 0.1, 0.25, -0.2, 0.0], 4.0)
    rng = np.random.default_rng(99)
    draws = 100_000
    counts = np.bincount([dist.sample(rng) for _ in range(draws)], minlength=6)[1:]
    expected = draws * dist.probabilities
    sigma = np.sqrt(draws * dist.probabilities * (1 - dist.probabilities))
    assert np.all(np.abs(counts - expected) <= 3 * sigma + 1)


def test_masking_moves_mass_to_best_feasible():
    beta = np.array([0.1, 0.5, 0.9])
    dist = action_distribution(beta, 1.0)
    masked = mask_distribution(dist, beta, [True, False, False])
    np.testing.assert_allclose(masked.probabilities, [1.0, 0.0, 0.0], atol=1e-12)
    assert masked.sample(np.random.default_rng(0)) == 1
    partial = mask_distribution(dist, beta, [True, True, False])
    assert partial.argmax == 2
    assert partial.probabilities.sum() == pytest.approx(1.0)
    assert partial.probabilities[2] == 0.0


def test_masking_with_nothing_feasible():
    dist = ActionDistribution(np.array([0.5, 0.5]), 1)
    with pytest.raises(BudgetExhaustedError):
        mask_distribution(dist, [0.0, 0.0], [False, False])


# ----------------------------------------------------------------------
# planner loop
# ----------------------------------------------------------------------

def _run_planner(horizon=40, seed=0, eps_total=40.0):
    env = SyntheticBanditEnv.increasing(3, 2, seed=seed, noise_std=0.01)
    budget_map = ActionBudgetMap.from_costs(np.array([0.5, 1.0, 1.5]) * eps_total / horizon)
    planner = BudgetPlanner(budget_map, 1, horizon, 3, context_dim=2, seed=seed)
    ledger = BudgetLedger(1, PrivacyBudget(eps_total), budget_map.cheapest)
    decisions = []
    for round_ in range(1, horizon + 1):
        context = env.sample_context()
        try:
            decision = planner.step(ledger, context, round_)
        except BudgetExhaustedError:
            break
        ledger.charge(0, PrivacyBudget(budget_map.grid[decision.action - 1]))
        planner.observe(decision, context, env.reward(decision.action, context), ledger)
        decisions.append(decision)
    return planner, ledger, decisions


def test_planner_phases_and_lambda():
    planner, ledger, decisions = _run_planner()
    assert [d.action for d in decisions[:9]] == [1, 1, 1, 2, 2, 2, 3, 3, 3]
    assert all(d.phase == Phase.INITIAL_RANDOM for d in decisions[9:12])
    assert all(d.phase == Phase.EXPLORE_EXPLOIT for d in decisions[12:])
    assert planner.state.lambda_estimate is not None and planner.state.lambda_estimate > 0
    assert planner.duals.l1 <= planner.state.lambda_estimate + 1e-9
    assert planner.error_estimate[1] > 0
    assert len(planner.gpr) == len(decisions)


def test_planner_never_overdraws():
    _, ledger, _ = _run_planner(horizon=40, eps_total=30.0)
    assert ledger.consumed_eps[0] <= ledger.total_eps[0] + 1e-12


def test_planner_is_reproducible():
    first = [d.action for d in _run_planner(seed=4)[2]]
    second = [d.action for d in _run_planner(seed=4)[2]]
    assert first == second


def test_decision_row_layout():
    _, _, decisions = _run_planner()
    row = decisions[-1].as_row(3)
    assert list(row) == ['round', 'phase', 'action', 'beta_1', 'beta_2', 'beta_3',
                         'p_1', 'p_2', 'p_3', 'Lambda', 'lambda_l1']
    assert sum(row[f'p_{a}'] for a in (1, 2, 3)) == pytest.approx(1.0)


def test_planner_clamps_sweep_to_affordable_action():
    budget_map = ActionBudgetMap.from_costs([0.1, 0.2, 0.3])
    planner = BudgetPlanner(budget_map, 1, 40, 3, context_dim=1, seed=0)
    ledger = BudgetLedger(1, PrivacyBudget(0.25), budget_map.cheapest)
    decision = planner.step(ledger, ContextVector((0.5,)), 7)
    assert decision.action == 2


def test_planner_exhaustion():
    budget_map = ActionBudgetMap.from_costs([0.1, 0.2])
    planner = BudgetPlanner(budget_map, 1, 40, 3, context_dim=1, seed=0)
    ledger = BudgetLedger(1, PrivacyBudget(0.15), budget_map.cheapest)
    ledger.charge(0, PrivacyBudget(0.1))
    with pytest.raises(BudgetExhaustedError):
        planner.step(ledger, ContextVector((0.5,)), 1)
    assert planner.state.phase == Phase.EXHAUSTED


def test_planner_rejects_unknown_score_sign():
    with pytest.raises(DomainError):
        BudgetPlanner(ActionBudgetMap.from_costs([0.1]), 1, 40, 3, score_sign='inverted')
