# config.py
# Configuration file for the privacy-budget planner

import logging
import math
import os

# ============================================================================
# OUTPUT STORAGE
# ============================================================================

# Default directory for run outputs (CSV bundles)
OUTPUT_DIR = os.getenv('PLANNER_OUTPUT_DIR', 'results')

# ============================================================================
# PRIVACY BUDGET DEFAULTS
# ============================================================================

EPSILON_TOTAL = 10.0
DELTA_TOTAL = math.exp(-5)

# Training horizon and the smallest horizon the top action could sustain
HORIZON = 100
T_MIN = 70

# Noise mechanism: 'laplace', 'gaussian' or 'none'
MECHANISM = 'laplace'

# Renyi orders used by the RDP reporting accountant
RDP_ORDERS = (1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 16.0, 32.0, 64.0)

# Floating tolerance for ledger comparisons
LEDGER_TOLERANCE = 1e-12

# ============================================================================
# BANDIT / GPR DEFAULTS
# ============================================================================

NUM_ACTIONS = 5
T0 = 5
CONTEXT_DIM = 4

# Composite kernel
KERNEL_ALPHA = 0.001
KERNEL_LENGTH_SCALE = 0.2
KERNEL_NOISE_STD = 0.05
KERNEL_FORM = 'as_printed'       # or 'squared'
CHOLESKY_JITTER = 1e-9

# Dual variables
ETA_SCHEDULE = 'constant'        # 1/sqrt(T); or 'decaying' for Lambda/sqrt(t)
LAMBDA_INIT = 'interior'         # Lambda/(2U); or 'random'
LAMBDA_FLOOR = 1e-6
SCORE_SIGN = 'as_printed'        # or 'lagrangian'

# LP used for the Lambda estimate
LP_SOLVER = 'bisection'          # or 'simplex'
LP_CONSTRAINT = 'min_client'     # or 'per_client'
LP_BISECTION_ITERS = 200

# ============================================================================
# FEDERATED RECOMMENDER DEFAULTS
# ============================================================================

EMBEDDING_DIM = 16
LEARNING_RATE = 0.5
# L2 penalty on the client-side user embeddings
USER_REG = 0.05
# Upload clip bounds: l1 feeds Laplace, l2 feeds Gaussian
CLIP_L1 = 0.01
CLIP_L2 = 0.003
INIT_SCALE = 0.1
F1_THRESHOLD = 0.5
TRAIN_RATIO = 0.8
PSEUDO_ITEM_COUNT = 0

# Rating scales used to normalize raw ratings into [0, 1]
RATING_SCALES = {
    'ml100k': (1.0, 5.0),
    'ml1m': (1.0, 5.0),
    'filmtrust': (0.5, 4.0),
    'csv': (1.0, 5.0),
}

# Synthetic low-rank dataset
SYNTHETIC_USERS = 200
SYNTHETIC_ITEMS = 100
SYNTHETIC_RANK = 4
SYNTHETIC_DENSITY = 0.15
# Std of the per-item logit offsets (item popularity)
SYNTHETIC_ITEM_EFFECT = 1.0

# ============================================================================
# BASELINE DEFAULTS
# ============================================================================

ADPML_EPS_MIN = 1.0
ADPML_EPS_MAX = 10.0
ADPML_RATE = 0.9
LOSS_TREND_WINDOW = 5
LOSS_TREND_MULTIPLIER = 1.1

# ============================================================================
# EXPERIMENT SETTINGS
# ============================================================================

SWEEP_SEEDS = 5
SWEEP_N_JOBS = 1

# ============================================================================
# FEATURE FLAGS
# ============================================================================

NORMALIZE_CONTEXT = True
MASK_INFEASIBLE_ACTIONS = True
GPR_INCREMENTAL = False
EXCEL_REPORT = False

# ============================================================================
# LOGGING CONFIGURATION
# ============================================================================

LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def configure_logging(level: str = None):
    """Apply LOG_LEVEL / LOG_FORMAT to the root logger."""
    logging.basicConfig(level=(level or LOG_LEVEL).upper(), format=LOG_FORMAT)
