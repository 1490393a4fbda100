"""
Context reduction: binary client-item interaction matrix -> top-d singular values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np
from scipy import sparse
from scipy.linalg import svdvals

from app.errors import PreconditionError


@dataclass(frozen=True)
class InteractionMatrix:
    """X^t as a set of (row, item) pairs with value 1."""

    num_rows: int
    num_cols: int
    entries: frozenset

    def __post_init__(self):
        for row, col in self.entries:
            if not (0 <= row < self.num_rows and 0 <= col < self.num_cols):
                raise PreconditionError(f"entry ({row}, {col}) outside {self.num_rows}x{self.num_cols}")

    @classmethod
    def from_pairs(cls, num_rows: int, num_cols: int, pairs: Iterable[Tuple[int, int]]) -> 'InteractionMatrix':
        return cls(num_rows, num_cols, frozenset((int(r), int(c)) for r, c in pairs))

    @property
    def nnz(self) -> int:
        return len(self.entries)

    def to_sparse(self) -> sparse.csr_matrix:
        if not self.entries:
            return sparse.csr_matrix((self.num_rows, self.num_cols))
        rows, cols = zip(*self.entries)
        data = np.ones(len(rows))
        return sparse.coo_matrix((data, (rows, cols)), shape=(self.num_rows, self.num_cols)).tocsr()

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()


@dataclass(frozen=True)
class ContextVector:
    """Descending, non-negative, fixed-length context."""

    values: tuple

    @property
    def d(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


def reduce(matrix: InteractionMatrix, d: int, normalize: bool = True) -> ContextVector:
    """Top-d singular values of X^t, optionally divided by sqrt(max(1, nnz))."""
    if d < 1:
        raise PreconditionError("context dimension d must be >= 1")
    values = np.zeros(d)
    if matrix.nnz > 0 and matrix.num_rows > 0 and matrix.num_cols > 0:
        spectrum = svdvals(matrix.to_dense())  # descending
        top = spectrum[:d]
        values[:len(top)] = top
        if normalize:
            values /= math.sqrt(max(1, matrix.nnz))
    values = np.clip(values, 0.0, None)
    return ContextVector(tuple(float(v) for v in values))
