"""
Ratings Loader
Reads MovieLens / Filmtrust / CSV rating files, validates them, normalizes ratings into
[0, 1] and groups users into federated clients.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from config import RATING_SCALES, TRAIN_RATIO
from app.errors import DatasetParseError, PreconditionError

logger = logging.getLogger(__name__)

RECORD_COLUMNS = ['user_id', 'item_id', 'rating', 'timestamp']

# ============================================================================
# FILE FORMATS
# ============================================================================

# format -> (field separator regex, minimum fields, has header)
FILE_FORMATS = {
    'ml100k': (r'\t', 4, False),
    'ml1m': (r'::', 4, False),
    'filmtrust': (r'\s+', 3, False),
    'csv': (r',', 3, True),
}

MAX_REPORTED_LINES = 10


@dataclass(frozen=True)
class RatingDataset:
    """
    Ratings with 0-based user/item indices.

    ``records`` has the columns user_id, item_id, rating (in [0, 1]) and timestamp.
    ``user_clients[u]`` is the federated client that owns user u.
    """
    records: pd.DataFrame
    num_users: int
    num_items: int
    user_clients: np.ndarray

    def __post_init__(self):
        records = self.records
        if len(records):
            if records['rating'].min() < 0.0 or records['rating'].max() > 1.0:
                raise PreconditionError("ratings must be normalized to [0, 1]")
            if records['user_id'].min() < 0 or records['user_id'].max() >= self.num_users:
                raise PreconditionError("user index out of range")
            if records['item_id'].min() < 0 or records['item_id'].max() >= self.num_items:
                raise PreconditionError("item index out of range")
        if len(self.user_clients) != self.num_users:
            raise PreconditionError("every user needs a client")

    @property
    def num_clients(self) -> int:
        return int(self.user_clients.max()) + 1 if len(self.user_clients) else 0

    def __len__(self):
        return len(self.records)

    def subset(self, index) -> 'RatingDataset':
        return RatingDataset(self.records.loc[index].reset_index(drop=True),
                             self.num_users, self.num_items, self.user_clients)

    def client_of(self, users) -> np.ndarray:
        return self.user_clients[np.asarray(users, dtype=int)]


# ============================================================================
# PARSING AND VALIDATION
# ============================================================================

def parse_ratings_file(path: str, file_format: str) -> pd.DataFrame:
    """Raw (user, item, rating, timestamp) rows; malformed lines raise with their numbers."""
    if file_format not in FILE_FORMATS:
        raise PreconditionError(f"unknown dataset format '{file_format}'")
    separator, min_fields, has_header = FILE_FORMATS[file_format]
    splitter = re.compile(separator)

    rows, bad_lines = [], []
    with open(path, encoding='utf-8', errors='replace') as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or (has_header and line_no == 1):
                continue
            fields = [f.strip() for f in splitter.split(line)]
            if len(fields) < min_fields:
                bad_lines.append(line_no)
                continue
            try:
                user, item, rating = fields[0], fields[1], float(fields[2])
                timestamp = int(float(fields[3])) if len(fields) > 3 and fields[3] else line_no
            except ValueError:
                bad_lines.append(line_no)
                continue
            rows.append((user, item, rating, timestamp))

    if bad_lines:
        shown = ', '.join(map(str, bad_lines[:MAX_REPORTED_LINES]))
        more = f" (+{len(bad_lines) - MAX_REPORTED_LINES} more)" if len(bad_lines) > MAX_REPORTED_LINES else ''
        raise DatasetParseError(f"{path}: malformed lines {shown}{more}", bad_lines)
    return pd.DataFrame(rows, columns=RECORD_COLUMNS)


def validate_ratings_frame(df: pd.DataFrame, scale: Tuple[float, float]) -> tuple:
    """
    Validate raw rating rows against a rating scale.

    Returns:
        tuple: (is_valid: bool, message: str, validated_df: pd.DataFrame or None)
    """
    missing_cols = [col for col in RECORD_COLUMNS if col not in df.columns]
    if missing_cols:
        return False, f"Missing required columns: {', '.join(missing_cols)}", None
    if df.empty:
        return False, "No ratings found", None

    validated_df = df.copy()
    validated_df['rating'] = pd.to_numeric(validated_df['rating'], errors='coerce')
    if validated_df['rating'].isna().any():
        return False, "Non-numeric values found in column 'rating'", None

    low, high = scale
    outside = validated_df[(validated_df['rating'] < low) | (validated_df['rating'] > high)]
    if len(outside) > 0:
        return False, f"{len(outside)} ratings outside the scale [{low}, {high}]", None

    duplicates = validated_df.duplicated(subset=['user_id', 'item_id'], keep='last')
    if duplicates.any():
        logger.info("dropping %d repeated (user, item) ratings, keeping the latest", int(duplicates.sum()))
        validated_df = validated_df[~duplicates]

    return True, f"Validation successful! {len(validated_df)} ratings ready.", validated_df


def normalize_ratings(ratings, scale: Tuple[float, float]) -> np.ndarray:
    low, high = scale
    if high <= low:
        raise PreconditionError(f"invalid rating scale {scale}")
    return np.clip((np.asarray(ratings, dtype=float) - low) / (high - low), 0.0, 1.0)


def assign_clients(num_users: int, num_clients: Optional[int], seed: int) -> np.ndarray:
    """One client per user, or users spread uniformly at random over ``num_clients`` clients."""
    if num_clients is None or num_clients >= num_users:
        return np.arange(num_users)
    if num_clients < 1:
        raise PreconditionError("num_clients must be >= 1")
    rng = np.random.default_rng(seed)
    # every client gets at least one user
    return np.resize(np.arange(num_clients), num_users)[rng.permutation(num_users)]


def build_dataset(raw: pd.DataFrame, scale: Tuple[float, float], num_clients: Optional[int] = None,
                  seed: int = 0) -> RatingDataset:
    is_valid, message, validated = validate_ratings_frame(raw, scale)
    if not is_valid:
        raise DatasetParseError(message)

    user_codes, user_labels = pd.factorize(validated['user_id'], sort=True)
    item_codes, item_labels = pd.factorize(validated['item_id'], sort=True)
    records = pd.DataFrame({
        'user_id': user_codes,
        'item_id': item_codes,
        'rating': normalize_ratings(validated['rating'], scale),
        'timestamp': validated['timestamp'].astype(np.int64).to_numpy(),
    })
    records = records.sort_values(['timestamp', 'user_id', 'item_id'], kind='mergesort').reset_index(drop=True)
    num_users = len(user_labels)
    dataset = RatingDataset(records, num_users, len(item_labels),
                            assign_clients(num_users, num_clients, seed))
    logger.info("loaded %d ratings: %d users, %d items, %d clients",
                len(records), num_users, dataset.num_items, dataset.num_clients)
    return dataset


def load_dataset(path: str, file_format: str, num_clients: Optional[int] = None,
                 seed: int = 0) -> RatingDataset:
    raw = parse_ratings_file(path, file_format)
    return build_dataset(raw, RATING_SCALES[file_format], num_clients, seed)


# ============================================================================
# TRAIN / TEST SPLIT
# ============================================================================

def split_dataset(dataset: RatingDataset, ratio: float = TRAIN_RATIO,
                  seed: int = 0) -> Tuple[RatingDataset, RatingDataset]:
    """Seeded per-user split; a user with a single rating keeps it for training."""
    if not 0.0 < ratio < 1.0:
        raise PreconditionError(f"train ratio must lie in (0, 1), got {ratio}")
    rng = np.random.default_rng(seed)
    train_index, test_index = [], []
    for _, group in dataset.records.groupby('user_id', sort=True):
        index = group.index.to_numpy()[rng.permutation(len(group))]
        n_train = max(1, int(round(ratio * len(index))))
        train_index.extend(index[:n_train])
        test_index.extend(index[n_train:])
    return dataset.subset(sorted(train_index)), dataset.subset(sorted(test_index))
