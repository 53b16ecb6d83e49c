"""
Configuration model classes for the sinksource toolkit.
"""
from dataclasses import dataclass, field
from typing import Dict, Any, Optional, Union

from sinksource.errors import ConfigError


def _typed(config_dict: Dict[str, Any], key: str, default: Any, kind: type) -> Any:
    """Fetch a key and coerce it to ``kind``, raising ConfigError on bad values."""
    value = config_dict.get(key, default)
    if value is None:
        return None
    if kind is bool:
        if isinstance(value, bool):
            return value
        raise ConfigError(f"'{key}' must be a boolean, got {value!r}")
    try:
        return kind(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"'{key}' must be of type {kind.__name__}, got {value!r}") from e


@dataclass
class LoggingConfig:
    """Configuration for logging."""
    level: str = "INFO"
    file: Optional[str] = None
    max_size: int = 10485760  # 10 MB
    backup_count: int = 3

    @classmethod
    def from_dict(cls, config_dict: Dict[str, Any]) -> 'LoggingConfig':
        """Create a LoggingConfig instance from a dictionary."""
        if not config_dict:
            return cls()

        return cls(
            level=str(config_dict.get('level', cls.level)),
            file=config_dict.get('file'),
            max_size=_typed(config_dict, 'max_size', cls.max_size, int),
            backup_count=_typed(config_dict, 'backup_count', cls.backup_count, int)
        )


@dataclass
class MeshConfig:
    """Configuration for domain meshing."""
    domain: str = "unit_square"
    divisions: int = 16
    grading_seed: Optional[int] = None
    arm_width: float = 2.0 / 3.0
    hub_width: Optional[float] = None
    extent: float = 1.0
    quality_floor: float = 0.02

    @classmethod
    def from_dict(cls, config_dict: Dict[str, Any]) -> 'MeshConfig':
        """Create a MeshConfig instance from a dictionary."""
        if not config_dict:
            return cls()

        return cls(
            domain=str(config_dict.get('domain', cls.domain)),
            divisions=_typed(config_dict, 'divisions', cls.divisions, int),
            grading_seed=_typed(config_dict, 'grading_seed', None, int),
            arm_width=_typed(config_dict, 'arm_width', cls.arm_width, float),
            hub_width=_typed(config_dict, 'hub_width', None, float),
            extent=_typed(config_dict, 'extent', cls.extent, float),
            quality_floor=_typed(config_dict, 'quality_floor', cls.quality_floor, float)
        )


@dataclass
class ForwardConfig:
    """Configuration for assembly and the forward matrix."""
    quadrature_order: int = 2
    workers: int = 1
    conductivity: Union[str, float] = "constant"
    spd_floor: float = 1e-12

    @classmethod
    def from_dict(cls, config_dict: Dict[str, Any]) -> 'ForwardConfig':
        """Create a ForwardConfig instance from a dictionary."""
        if not config_dict:
            return cls()

        return cls(
            quadrature_order=_typed(config_dict, 'quadrature_order', cls.quadrature_order, int),
            workers=_typed(config_dict, 'workers', cls.workers, int),
            conductivity=config_dict.get('conductivity', cls.conductivity),
            spd_floor=_typed(config_dict, 'spd_floor', cls.spd_floor, float)
        )


@dataclass
class SpectralConfig:
    """Configuration for the SVD, truncation and weights."""
    rank_tol: float = 1e-10
    floor_tol: float = 1e-8
    k: Optional[int] = None

    @classmethod
    def from_dict(cls, config_dict: Dict[str, Any]) -> 'SpectralConfig':
        """Create a SpectralConfig instance from a dictionary."""
        if not config_dict:
            return cls()

        return cls(
            rank_tol=_typed(config_dict, 'rank_tol', cls.rank_tol, float),
            floor_tol=_typed(config_dict, 'floor_tol', cls.floor_tol, float),
            k=_typed(config_dict, 'k', None, int)
        )


@dataclass
class SolverConfig:
    """Configuration for the weighted l1 solvers."""
    primal_tol: float = 1e-10
    dual_tol: float = 1e-8
    max_iter: int = 200000
    tol_feas: float = 1e-9
    rho: float = 1.0
    support_rel_tol: float = 1e-6
    trace: bool = False

    @classmethod
    def from_dict(cls, config_dict: Dict[str, Any]) -> 'SolverConfig':
        """Create a SolverConfig instance from a dictionary."""
        if not config_dict:
            return cls()

        return cls(
            primal_tol=_typed(config_dict, 'primal_tol', cls.primal_tol, float),
            dual_tol=_typed(config_dict, 'dual_tol', cls.dual_tol, float),
            max_iter=_typed(config_dict, 'max_iter', cls.max_iter, int),
            tol_feas=_typed(config_dict, 'tol_feas', cls.tol_feas, float),
            rho=_typed(config_dict, 'rho', cls.rho, float),
            support_rel_tol=_typed(config_dict, 'support_rel_tol', cls.support_rel_tol, float),
            trace=_typed(config_dict, 'trace', cls.trace, bool)
        )


@dataclass
class CertifyConfig:
    """Thresholds for the certificate battery."""
    angle_tol: float = 1e-9
    supp_tol: float = 1e-3
    ortho_tol: float = 0.05
    inj_rel_tol: float = 1e-8
    residual_tol: float = 1e-8

    @classmethod
    def from_dict(cls, config_dict: Dict[str, Any]) -> 'CertifyConfig':
        """Create a CertifyConfig instance from a dictionary."""
        if not config_dict:
            return cls()

        return cls(
            angle_tol=_typed(config_dict, 'angle_tol', cls.angle_tol, float),
            supp_tol=_typed(config_dict, 'supp_tol', cls.supp_tol, float),
            ortho_tol=_typed(config_dict, 'ortho_tol', cls.ortho_tol, float),
            inj_rel_tol=_typed(config_dict, 'inj_rel_tol', cls.inj_rel_tol, float),
            residual_tol=_typed(config_dict, 'residual_tol', cls.residual_tol, float)
        )


@dataclass
class HarnessConfig:
    """Configuration for experiment runs and artifact export."""
    seed: int = 0
    out_dir: str = "results"
    morozov_eta: float = 1.1
    points_per_decade: int = 25
    workers: int = 1
    examples: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, config_dict: Dict[str, Any]) -> 'HarnessConfig':
        """Create a HarnessConfig instance from a dictionary."""
        if not config_dict:
            return cls()

        return cls(
            seed=_typed(config_dict, 'seed', cls.seed, int),
            out_dir=str(config_dict.get('out_dir', cls.out_dir)),
            morozov_eta=_typed(config_dict, 'morozov_eta', cls.morozov_eta, float),
            points_per_decade=_typed(config_dict, 'points_per_decade', cls.points_per_decade, int),
            workers=_typed(config_dict, 'workers', cls.workers, int),
            examples=config_dict.get('examples', {}) or {}
        )
