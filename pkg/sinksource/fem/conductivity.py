"""
Conductivity fields sigma(x, y).
"""
import enum
import logging
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from sinksource.errors import AssemblyError, ConfigError

logger = logging.getLogger(__name__)


class ConductivityKind(enum.Enum):
    CONSTANT = "constant"
    SCALAR_FUNCTION = "scalar_function"
    TENSOR_FUNCTION = "tensor_function"


@dataclass(frozen=True)
class ConductivityField:
    """
    Scalar or 2x2 tensor conductivity.

    Attributes:
        kind: Constant, scalar function or tensor function
        evaluator: Maps (P, 2) points to (P,) scalars or (P, 2, 2) tensors.
            A constant field takes a float or a 2x2 array instead.
        spd_floor: Smallest admissible eigenvalue
        name: Label used in logs and reports
    """
    kind: ConductivityKind
    evaluator: Union[float, np.ndarray, Callable[[np.ndarray], np.ndarray]]
    spd_floor: float = 1e-12
    name: str = "sigma"

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """
        Sample the field as 2x2 tensors.

        Args:
            points: (P, 2) coordinates

        Returns:
            (P, 2, 2) symmetric positive-definite tensors

        Raises:
            AssemblyError: Naming the first point where the sample is not SPD
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        count = points.shape[0]
        if self.kind == ConductivityKind.CONSTANT:
            value = np.asarray(self.evaluator, dtype=float)
            if value.ndim == 0:
                tensors = np.broadcast_to(value * np.eye(2), (count, 2, 2)).copy()
            else:
                tensors = np.broadcast_to(value, (count, 2, 2)).copy()
        elif self.kind == ConductivityKind.SCALAR_FUNCTION:
            values = np.asarray(self.evaluator(points), dtype=float).reshape(count)
            tensors = values[:, None, None] * np.eye(2)
        else:
            tensors = np.asarray(self.evaluator(points), dtype=float).reshape(count, 2, 2)

        self._check_spd(points, tensors)
        return tensors

    def _check_spd(self, points: np.ndarray, tensors: np.ndarray) -> None:
        asym = np.abs(tensors[:, 0, 1] - tensors[:, 1, 0])
        scale = np.maximum(np.abs(tensors).max(axis=(1, 2)), 1.0)
        bad = np.nonzero(~np.isfinite(tensors).all(axis=(1, 2)) | (asym > 1e-12 * scale))[0]
        if bad.size == 0:
            eig_min = np.linalg.eigvalsh(tensors)[:, 0]
            bad = np.nonzero(eig_min < self.spd_floor)[0]
        if bad.size:
            p = points[bad[0]]
            raise AssemblyError(
                f"conductivity '{self.name}' is not symmetric positive-definite at "
                f"quadrature point ({p[0]:.6g}, {p[1]:.6g})", point=p)


def constant(value: float = 1.0) -> ConductivityField:
    return ConductivityField(ConductivityKind.CONSTANT, float(value), name=f"constant({value:g})")


def tensor_constant(matrix) -> ConductivityField:
    return ConductivityField(ConductivityKind.CONSTANT, np.asarray(matrix, dtype=float), name="tensor_constant")


def smooth_sine() -> ConductivityField:
    """sigma(x, y) = 2 + sin(x) cos(y)."""
    return ConductivityField(ConductivityKind.SCALAR_FUNCTION,
                             lambda p: 2.0 + np.sin(p[:, 0]) * np.cos(p[:, 1]),
                             name="smooth_sine")


def tensor_diag(a: float = 2.0, b: float = 1.0) -> ConductivityField:
    """Anisotropic constant-diagonal tensor field diag(a, b), as a tensor function."""
    def evaluator(p: np.ndarray) -> np.ndarray:
        out = np.zeros((p.shape[0], 2, 2))
        out[:, 0, 0] = a
        out[:, 1, 1] = b
        return out
    return ConductivityField(ConductivityKind.TENSOR_FUNCTION, evaluator, name=f"diag({a:g},{b:g})")


def from_spec(spec: Union[str, float, int]) -> ConductivityField:
    """
    Build a conductivity from a configuration value.

    Args:
        spec: 'constant', 'smooth' / 'smooth_sine', 'tensor_diag', or a number

    Returns:
        The conductivity field

    Raises:
        ConfigError: On an unknown name
    """
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return constant(float(spec))
    key = str(spec).strip().lower()
    if key == 'constant':
        return constant(1.0)
    if key in ('smooth', 'smooth_sine'):
        return smooth_sine()
    if key == 'tensor_diag':
        return tensor_diag()
    try:
        return constant(float(key))
    except ValueError:
        raise ConfigError(f"unknown conductivity '{spec}'") from None
