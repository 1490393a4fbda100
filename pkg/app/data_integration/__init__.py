# app/data_integration/__init__.py
from .dataset_loader import (RatingDataset, build_dataset, load_dataset, parse_ratings_file,
                             split_dataset, validate_ratings_frame)
from .synthetic_data import SyntheticBanditEnv, generate_low_rank_ratings

__all__ = [
    'RatingDataset', 'build_dataset', 'load_dataset', 'parse_ratings_file', 'split_dataset',
    'validate_ratings_frame', 'SyntheticBanditEnv', 'generate_low_rank_ratings',
]
