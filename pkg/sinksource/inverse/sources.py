"""
Sparse sink/source configurations x* = sum_{j in J} x*_j e_j.
"""
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from sinksource.errors import ConfigError


@dataclass(frozen=True)
class SourceConfig:
    """
    True sparse configuration.

    Attributes:
        n: Frame size
        support: 0-based indices J (unique)
        values: Nonzero magnitudes x*_j, aligned with ``support``
    """
    n: int
    support: Tuple[int, ...]
    values: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, 'support', tuple(int(j) for j in self.support))
        object.__setattr__(self, 'values', tuple(float(v) for v in self.values))
        if len(self.support) != len(self.values):
            raise ConfigError("support and values must have the same length")
        if len(set(self.support)) != len(self.support):
            raise ConfigError(f"support indices must be unique, got {self.support}")
        for j, v in zip(self.support, self.values):
            if not 0 <= j < self.n:
                raise ConfigError(f"support index {j} outside [0, {self.n})")
            if v == 0.0 or not np.isfinite(v):
                raise ConfigError(f"value at index {j} must be finite and nonzero, got {v}")

    @classmethod
    def from_pairs(cls, n: int, pairs: Iterable[Tuple[int, float]]) -> 'SourceConfig':
        pairs = list(pairs)
        return cls(n, tuple(j for j, _ in pairs), tuple(v for _, v in pairs))

    @classmethod
    def from_dense(cls, x: np.ndarray, tau: float = 0.0) -> 'SourceConfig':
        """Configuration made of the entries of x with |x_j| > tau."""
        x = np.asarray(x, dtype=float)
        idx = np.nonzero(np.abs(x) > tau)[0]
        return cls(len(x), tuple(int(i) for i in idx), tuple(float(x[i]) for i in idx))

    @property
    def s(self) -> int:
        return len(self.support)

    @property
    def J(self) -> np.ndarray:
        return np.array(self.support, dtype=np.int64)

    def complement(self) -> np.ndarray:
        """J^c in increasing order."""
        mask = np.ones(self.n, dtype=bool)
        mask[self.J] = False
        return np.nonzero(mask)[0]

    def signs(self) -> np.ndarray:
        return np.sign(np.array(self.values))

    def dense(self) -> np.ndarray:
        x = np.zeros(self.n)
        x[self.J] = self.values
        return x

    def scaled(self, factors: Sequence[float]) -> 'SourceConfig':
        """Configuration with x*_j replaced by factors_j * x*_j."""
        return SourceConfig(self.n, self.support, tuple(f * v for f, v in zip(factors, self.values)))

    def to_dict(self) -> Dict[str, List]:
        return {'n': self.n, 'support': list(self.support), 'values': list(self.values)}
