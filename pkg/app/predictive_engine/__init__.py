# app/predictive_engine/__init__.py
from .context_reduction import ContextVector, InteractionMatrix, reduce
from .gpr_predictor import (GprInput, GprModel, GprPosterior, KernelParams, kernel, predict,
                            predict_all_actions, scale_action)

__all__ = [
    'ContextVector', 'InteractionMatrix', 'reduce',
    'GprInput', 'GprModel', 'GprPosterior', 'KernelParams', 'kernel', 'predict',
    'predict_all_actions', 'scale_action',
]
