"""
Synthetic noisy observations b = A x* + tau rho.

tau is noise_level times the spread max(b) - min(b) of the clean data and
rho is a standard normal vector from a seeded PCG64 generator.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from sinksource.errors import ExperimentError
from sinksource.inverse.sources import SourceConfig

logger = logging.getLogger(__name__)


def make_rng(seed: int) -> np.random.Generator:
    """Platform-stable 64-bit generator."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class NoisySpec:
    """
    Noise bookkeeping for one observation.

    Attributes:
        noise_level: Requested ratio tau / (max b - min b)
        tau: Noise scale
        seed: Generator seed
        delta: Realized ||b_delta - b||_2
        spread: max b - min b of the clean data
    """
    noise_level: float
    tau: float
    seed: int
    delta: float
    spread: float

    def realized_level(self) -> float:
        return self.tau / self.spread if self.spread > 0 else 0.0


def make_noisy_observation(A: np.ndarray, source: SourceConfig, noise_level: float, seed: int,
                           clean_data: Optional[np.ndarray] = None) -> Tuple[np.ndarray, NoisySpec]:
    """
    Add scaled Gaussian noise to clean boundary data.

    Args:
        A: Forward matrix (used when ``clean_data`` is not given)
        source: True configuration
        noise_level: Ratio of tau to the data spread (>= 0)
        seed: Generator seed
        clean_data: Precomputed clean data, e.g. from a refined mesh

    Returns:
        (b_delta, NoisySpec)

    Raises:
        ExperimentError: Negative level, or constant data with a positive level
    """
    if noise_level < 0:
        raise ExperimentError(f"noise_level must be >= 0, got {noise_level}")
    b = np.asarray(A @ source.dense() if clean_data is None else clean_data, dtype=float)
    spread = float(b.max() - b.min())
    if noise_level == 0:
        return b.copy(), NoisySpec(noise_level=0.0, tau=0.0, seed=seed, delta=0.0, spread=spread)
    if spread == 0.0:
        raise ExperimentError("clean data is constant; the noise scale is undefined")

    tau = noise_level * spread
    rho = make_rng(seed).standard_normal(len(b))
    noise = tau * rho
    spec = NoisySpec(noise_level=noise_level, tau=tau, seed=seed,
                     delta=float(np.linalg.norm(noise)), spread=spread)
    logger.info(f"Noise level {noise_level:g}: tau={tau:.4e}, delta={spec.delta:.4e} (seed {seed})")
    return b + noise, spec


def scaled_noise(length: int, delta: float, rng: np.random.Generator,
                 direction: Optional[np.ndarray] = None) -> np.ndarray:
    """Noise vector of exact norm ``delta`` along ``direction`` or a fresh random one."""
    rho = rng.standard_normal(length) if direction is None else np.asarray(direction, dtype=float)
    norm = float(np.linalg.norm(rho))
    return np.zeros(length) if norm == 0.0 else (delta / norm) * rho
