import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.data_integration.synthetic_data import generate_low_rank_ratings
from app.data_integration.dataset_loader import split_dataset
from app.run_config import RunConfig


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_dataset():
    return generate_low_rank_ratings(num_users=30, num_items=20, rank=2, density=0.3, seed=7)


@pytest.fixture
def small_split(small_dataset):
    return split_dataset(small_dataset, 0.8, seed=7)


@pytest.fixture
def small_config(tmp_path):
    """A short synthetic run that finishes in a few seconds."""
    return RunConfig(synthetic_users=30, synthetic_items=20, synthetic_rank=2, synthetic_density=0.3,
                     horizon=20, t_min=14, t0=2, num_actions=3, context_dim=3, embedding_dim=4,
                     seeds=2, output_dir=str(tmp_path / 'run'))
