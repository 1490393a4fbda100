from .experiment_runner import run_experiment
from .sweep_runner import sweep
from .bandit_bench import run_bench

__all__ = ['run_experiment', 'sweep', 'run_bench']
