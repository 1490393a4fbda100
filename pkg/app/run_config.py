"""
Run Configuration
Typed run settings, the key = value file format, grid expansion and validation.
"""

from __future__ import annotations

import itertools
import logging
import typing
from dataclasses import dataclass, fields, replace
from typing import Dict, List, Optional, Tuple

from config import (ADPML_EPS_MAX, ADPML_EPS_MIN, ADPML_RATE, CLIP_L1, CLIP_L2, CONTEXT_DIM,
                    DELTA_TOTAL, EMBEDDING_DIM, EPSILON_TOTAL, ETA_SCHEDULE, EXCEL_REPORT,
                    F1_THRESHOLD, GPR_INCREMENTAL, HORIZON, INIT_SCALE, KERNEL_ALPHA, KERNEL_FORM,
                    KERNEL_LENGTH_SCALE, KERNEL_NOISE_STD, LAMBDA_INIT, LEARNING_RATE,
                    LOSS_TREND_MULTIPLIER, LOSS_TREND_WINDOW, LP_CONSTRAINT, LP_SOLVER,
                    MASK_INFEASIBLE_ACTIONS, MECHANISM, NORMALIZE_CONTEXT, NUM_ACTIONS, OUTPUT_DIR,
                    PSEUDO_ITEM_COUNT, SCORE_SIGN, SWEEP_N_JOBS, SWEEP_SEEDS, SYNTHETIC_DENSITY,
                    SYNTHETIC_ITEM_EFFECT, SYNTHETIC_ITEMS, SYNTHETIC_RANK, SYNTHETIC_USERS, T0, T_MIN,
                    TRAIN_RATIO, USER_REG)
from app.errors import ConfigError

logger = logging.getLogger(__name__)

POLICIES = ('bgtplanner', 'fedsgd', 'uniform', 'adpml', 'loss_trend', 'random')
MECHANISMS = ('laplace', 'gaussian', 'none')
DATASET_FORMATS = ('synthetic', 'ml100k', 'ml1m', 'filmtrust', 'csv')
ACCOUNTING_MODES = ('naive', 'rdp')

_TRUE = {'true', 'yes', 'on', '1'}
_FALSE = {'false', 'no', 'off', '0'}
_NONE = {'none', 'null', ''}


@dataclass(frozen=True)
class RunConfig:
    # data
    dataset_format: str = 'synthetic'
    dataset_path: Optional[str] = None
    num_clients: Optional[int] = None
    synthetic_users: int = SYNTHETIC_USERS
    synthetic_items: int = SYNTHETIC_ITEMS
    synthetic_rank: int = SYNTHETIC_RANK
    synthetic_density: float = SYNTHETIC_DENSITY
    synthetic_item_effect: float = SYNTHETIC_ITEM_EFFECT
    train_ratio: float = TRAIN_RATIO
    # privacy
    mechanism: str = MECHANISM
    eps_total: float = EPSILON_TOTAL
    delta_total: float = DELTA_TOTAL
    accounting: str = 'naive'
    # horizon and bandit
    horizon: int = HORIZON
    t_min: int = T_MIN
    t0: int = T0
    num_actions: int = NUM_ACTIONS
    context_dim: int = CONTEXT_DIM
    normalize_context: bool = NORMALIZE_CONTEXT
    gamma: Optional[float] = None
    kernel_alpha: float = KERNEL_ALPHA
    kernel_length_scale: float = KERNEL_LENGTH_SCALE
    kernel_noise_std: float = KERNEL_NOISE_STD
    kernel_form: str = KERNEL_FORM
    gpr_incremental: bool = GPR_INCREMENTAL
    eta_schedule: str = ETA_SCHEDULE
    lambda_init: str = LAMBDA_INIT
    score_sign: str = SCORE_SIGN
    mask_infeasible: bool = MASK_INFEASIBLE_ACTIONS
    lp_solver: str = LP_SOLVER
    lp_constraint: str = LP_CONSTRAINT
    # policy and baselines
    policy: str = 'bgtplanner'
    eps_min: float = ADPML_EPS_MIN
    eps_max: float = ADPML_EPS_MAX
    rate: float = ADPML_RATE
    rate_mode: str = 'gap'
    rescale: bool = True
    loss_window: int = LOSS_TREND_WINDOW
    loss_multiplier: float = LOSS_TREND_MULTIPLIER
    # recommender
    embedding_dim: int = EMBEDDING_DIM
    learning_rate: float = LEARNING_RATE
    user_reg: float = USER_REG
    clip_l1: float = CLIP_L1
    clip_l2: float = CLIP_L2
    init_scale: float = INIT_SCALE
    threshold: float = F1_THRESHOLD
    pseudo_item_count: int = PSEUDO_ITEM_COUNT
    # bandit bench
    bench_noise_std: float = 0.01
    # execution
    seed: int = 0
    seeds: int = SWEEP_SEEDS
    n_jobs: int = SWEEP_N_JOBS
    output_dir: str = OUTPUT_DIR
    excel_report: bool = EXCEL_REPORT


# ============================================================================
# VALIDATION
# ============================================================================

def validate_run_config(config: RunConfig) -> tuple:
    """
    Check a run configuration before any work starts.

    Returns:
        tuple: (is_valid: bool, message: str)
    """
    choices = {
        'policy': POLICIES, 'mechanism': MECHANISMS, 'dataset_format': DATASET_FORMATS,
        'accounting': ACCOUNTING_MODES, 'kernel_form': ('as_printed', 'squared'),
        'eta_schedule': ('constant', 'decaying'), 'lambda_init': ('interior', 'random'),
        'score_sign': ('as_printed', 'lagrangian'), 'lp_solver': ('bisection', 'simplex'),
        'lp_constraint': ('min_client', 'per_client'), 'rate_mode': ('gap', 'budget'),
    }
    for name, allowed in choices.items():
        value = getattr(config, name)
        if value not in allowed:
            return False, f"Unknown {name} '{value}'. Use one of: {', '.join(allowed)}"

    if config.num_actions < 1:
        return False, "num_actions must be at least 1"
    if config.context_dim < 1:
        return False, "context_dim must be at least 1"
    if config.t0 < 1:
        return False, "t0 must be at least 1"
    if config.t_min > config.horizon or (config.num_actions > 1 and config.t_min >= config.horizon):
        return False, f"t_min ({config.t_min}) must be below the horizon ({config.horizon})"
    if config.t_min < 1:
        return False, "t_min must be at least 1"
    if (config.num_actions + 1) * config.t0 >= config.horizon:
        return False, (f"initial stage (A+1)*T0 = {(config.num_actions + 1) * config.t0} "
                       f"must be shorter than the horizon {config.horizon}")
    if config.eps_total <= 0:
        return False, "eps_total must be positive"
    if config.mechanism == 'gaussian' and not 0.0 < config.delta_total < 1.0:
        return False, "delta_total must lie in (0, 1) for the Gaussian mechanism"
    if config.accounting == 'rdp' and config.mechanism != 'gaussian':
        return False, "rdp accounting applies to the Gaussian mechanism only"
    if not 0.0 < config.train_ratio < 1.0:
        return False, "train_ratio must lie in (0, 1)"
    if config.seeds < 1:
        return False, "seeds must be at least 1"
    if config.gamma is not None and config.gamma <= 0:
        return False, "gamma must be positive"
    if config.dataset_format != 'synthetic' and not config.dataset_path:
        return False, f"dataset_path is required for format '{config.dataset_format}'"
    if config.num_clients is not None and config.num_clients < 1:
        return False, "num_clients must be at least 1"
    if config.eps_min > config.eps_max:
        return False, "eps_min must not exceed eps_max"
    if not 0.0 < config.rate < 1.0:
        return False, "rate must lie in (0, 1)"
    if config.learning_rate <= 0:
        return False, "learning_rate must be positive"
    if config.user_reg < 0:
        return False, "user_reg must be non-negative"
    if config.clip_l1 <= 0 or config.clip_l2 <= 0:
        return False, "clip bounds must be positive"
    if config.synthetic_item_effect < 0:
        return False, "synthetic_item_effect must be non-negative"
    if config.lp_constraint == 'per_client' and config.lp_solver != 'simplex':
        logger.info("per_client LP constraints are solved with the simplex solver")

    return True, "Configuration is valid."


# ============================================================================
# FILE FORMAT
# ============================================================================

def _coerce(name: str, raw: str, line_no: int):
    hint = typing.get_type_hints(RunConfig)[name]
    optional = typing.get_origin(hint) is typing.Union
    target = next(a for a in typing.get_args(hint) if a is not type(None)) if optional else hint
    text = raw.strip()
    if optional and text.lower() in _NONE:
        return None
    try:
        if target is bool:
            if text.lower() in _TRUE:
                return True
            if text.lower() in _FALSE:
                return False
            raise ValueError(text)
        if target is int:
            return int(text)
        if target is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"line {line_no}: '{text}' is not a valid {target.__name__} for {name}") from None


def parse_config_text(text: str) -> Tuple[Dict[str, object], Dict[str, list]]:
    """Split a config file into plain settings and ``grid.<field>`` value lists."""
    known = {f.name for f in fields(RunConfig)}
    settings: Dict[str, object] = {}
    grid: Dict[str, list] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value'")
        key, value = (part.strip() for part in line.split('=', 1))
        if key.startswith('grid.'):
            name = key[len('grid.'):]
            if name not in known:
                raise ConfigError(f"line {line_no}: unknown grid key '{name}'")
            values = [v for v in value.split(',') if v.strip()]
            if not values:
                raise ConfigError(f"line {line_no}: grid '{name}' has no values")
            grid[name] = [_coerce(name, v, line_no) for v in values]
        elif key in known:
            settings[key] = _coerce(key, value, line_no)
        else:
            raise ConfigError(f"line {line_no}: unknown key '{key}'")
    return settings, grid


def expand_grid(base: RunConfig, grid: Dict[str, list]) -> List[RunConfig]:
    if not grid:
        return [base]
    names = list(grid)
    return [replace(base, **dict(zip(names, combo))) for combo in itertools.product(*grid.values())]


def load_run_configs(path: str) -> List[RunConfig]:
    """Every configuration a file describes; invalid ones raise ConfigError."""
    try:
        with open(path, encoding='utf-8') as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config '{path}': {exc}") from exc
    settings, grid = parse_config_text(text)
    configs = expand_grid(RunConfig(**settings), grid)
    for config in configs:
        is_valid, message = validate_run_config(config)
        if not is_valid:
            raise ConfigError(f"{path}: {message}")
    return configs


def load_run_config(path: str) -> RunConfig:
    configs = load_run_configs(path)
    if len(configs) > 1:
        logger.warning("%s expands to %d configurations; using the first", path, len(configs))
    return configs[0]
