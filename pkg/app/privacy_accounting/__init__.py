# app/privacy_accounting/__init__.py
from .budgets import (ActionBudgetMap, BudgetLedger, NoiseMechanism, PrivacyBudget, ZERO_BUDGET,
                      action_to_budget, charge)
from .noise_calibration import gaussian_sigma, laplace_scale
from .rdp_accountant import RdpAccountant, rdp_of_gaussian, rdp_to_dp

__all__ = [
    'ActionBudgetMap', 'BudgetLedger', 'NoiseMechanism', 'PrivacyBudget', 'ZERO_BUDGET',
    'action_to_budget', 'charge', 'gaussian_sigma', 'laplace_scale',
    'RdpAccountant', 'rdp_of_gaussian', 'rdp_to_dp',
]
