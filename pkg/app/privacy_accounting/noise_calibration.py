"""
Noise calibration for the Laplace and Gaussian mechanisms, plus samplers.
"""

import math

import numpy as np

from app.errors import DomainError


def laplace_scale(sensitivity_l1: float, epsilon: float) -> float:
    """Per-coordinate Laplace scale b = sensitivity / epsilon."""
    if sensitivity_l1 <= 0 or epsilon <= 0:
        raise DomainError("Laplace calibration needs positive sensitivity and epsilon")
    return sensitivity_l1 / epsilon


def gaussian_sigma(sensitivity_l2: float, epsilon: float, delta: float) -> float:
    """Classic Gaussian mechanism: sigma = sensitivity * sqrt(2 ln(1.25/delta)) / epsilon."""
    if sensitivity_l2 <= 0 or epsilon <= 0:
        raise DomainError("Gaussian calibration needs positive sensitivity and epsilon")
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    return sensitivity_l2 * math.sqrt(2.0 * math.log(1.25 / delta)) / epsilon


def sample_laplace(rng: np.random.Generator, scale: float, size) -> np.ndarray:
    return rng.laplace(0.0, scale, size=size)


def sample_gaussian(rng: np.random.Generator, sigma: float, size) -> np.ndarray:
    return rng.normal(0.0, sigma, size=size)
