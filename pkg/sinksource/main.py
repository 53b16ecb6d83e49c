"""
sinksource toolkit - main application
"""
import logging
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple

from sinksource.config.config_manager import ConfigManager
from sinksource.errors import ConfigError
from sinksource.experiments.export import export_artifacts
from sinksource.experiments.scenarios import ScenarioRunner
from sinksource.fem import conductivity
from sinksource.fem.forward import export_forward_model, forward_from_mesh, import_forward_model
from sinksource.fem.mesh import DomainSpec, build_domain, refine
from sinksource.fem.mesh_io import read_mesh, write_mesh
from sinksource.inverse.certify import certify_configuration
from sinksource.inverse.solvers import (
    SolveStatus,
    Tolerances,
    build_request,
    solve_weighted_bp,
    solve_weighted_lasso,
)
from sinksource.inverse.sources import SourceConfig
from sinksource.inverse.spectral import WeightMatrix, decompose, projection, weight_matrix
from sinksource.utils.io_utils import ensure_dir, read_vector, write_csv, write_json
from sinksource.utils.logging_utils import configure_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2


def parse_source_pairs(items: Sequence[str]) -> List[Tuple[int, float]]:
    """Parse IDX:VALUE tokens (0-based indices)."""
    pairs = []
    for item in items:
        try:
            idx, value = item.split(':', 1)
            pairs.append((int(idx), float(value)))
        except ValueError:
            raise ConfigError(f"source '{item}' is not of the form IDX:VALUE") from None
    return pairs


class SinkSourceToolkit:
    """
    Application object behind the command line: one method per verb.

    Every verb returns an exit code: 0 on success, 2 when the outcome is a
    certified infeasibility (infeasible basis pursuit, failed certificate).
    Errors propagate to the caller.
    """

    def __init__(self, config_path: Optional[str] = None, seed: Optional[int] = None,
                 out_dir: Optional[str] = None, log_level: Optional[str] = None):
        """
        Initialize the toolkit.

        Args:
            config_path: Path to the service configuration file
            seed: Overrides harness.seed
            out_dir: Overrides harness.out_dir
            log_level: Overrides logging.level
        """
        self.config_manager = ConfigManager(config_path)

        log_config = self.config_manager.get_logging_config()
        if log_level:
            log_config.level = log_level
        configure_logging(log_config)

        self.harness_config = self.config_manager.get_harness_config()
        if seed is not None:
            self.harness_config.seed = int(seed)
        if out_dir:
            self.harness_config.out_dir = out_dir
        self.mesh_config = self.config_manager.get_mesh_config()
        self.forward_config = self.config_manager.get_forward_config()
        self.spectral_config = self.config_manager.get_spectral_config()
        self.solver_config = self.config_manager.get_solver_config()
        self.certify_config = self.config_manager.get_certify_config()

        logger.info("sinksource toolkit initialized")

    def _output(self, path: Optional[str], default_name: str) -> str:
        if path:
            parent = os.path.dirname(path)
            if parent:
                ensure_dir(parent)
            return path
        return os.path.join(ensure_dir(self.harness_config.out_dir), default_name)

    def build_mesh(self, domain: Optional[str] = None, divisions: Optional[int] = None,
                   grading_seed: Optional[int] = None, output: Optional[str] = None) -> int:
        spec = DomainSpec.from_config(self.mesh_config)
        if domain:
            spec.domain = domain
        if divisions is not None:
            spec.divisions = divisions
        if grading_seed is not None:
            spec.grading_seed = grading_seed
        mesh = build_domain(spec)
        path = self._output(output, f"{spec.domain}_{spec.divisions}.mesh")
        write_mesh(mesh, path)
        logger.info(f"Mesh written to {path}")
        return EXIT_OK

    def refine_mesh(self, mesh_file: str, output: Optional[str] = None) -> int:
        fine = refine(read_mesh(mesh_file))
        root = os.path.splitext(os.path.basename(mesh_file))[0]
        path = self._output(output, f"{root}_refined.mesh")
        write_mesh(fine, path)
        logger.info(f"Refined mesh written to {path}")
        return EXIT_OK

    def assemble_forward(self, mesh_file: str, sigma: Optional[Any] = None, output: Optional[str] = None) -> int:
        mesh = read_mesh(mesh_file)
        field = conductivity.from_spec(sigma if sigma is not None else self.forward_config.conductivity)
        _, model = forward_from_mesh(mesh, field, self.forward_config.quadrature_order,
                                     self.forward_config.workers)
        root = os.path.splitext(os.path.basename(mesh_file))[0]
        export_forward_model(model, self._output(output, f"{root}_forward.mtx"))
        return EXIT_OK

    def spectral_svd(self, matrix_file: str, output: Optional[str] = None) -> int:
        spectral = decompose(import_forward_model(matrix_file).A, rank_tol=self.spectral_config.rank_tol)
        path = self._output(output, "singular_values.csv")
        write_csv(path, ('index', 'value'), ((i, float(s)) for i, s in enumerate(spectral.singular_values)))
        logger.info(f"Numerical rank {spectral.rank}; singular values written to {path}")
        return EXIT_OK

    def _weights(self, spectral, k: Optional[int], unweighted: bool) -> WeightMatrix:
        if unweighted:
            return WeightMatrix.identity(spectral.n)
        return weight_matrix(projection(spectral, spectral.k if k is None else k), self.spectral_config.floor_tol)

    def solve(self, method: str, matrix_file: str, data_file: str, alpha: Optional[float] = None,
              k: Optional[int] = None, unweighted: bool = False, formulation: str = 'formA',
              output: Optional[str] = None) -> int:
        """
        Solve weighted basis pursuit (``bp``) or the weighted lasso (``lasso``).

        Returns:
            EXIT_INFEASIBLE when basis pursuit reports an infeasible system
        """
        A = import_forward_model(matrix_file).A
        b = read_vector(data_file)
        spectral = decompose(A, rank_tol=self.spectral_config.rank_tol, k=k or self.spectral_config.k)
        weights = self._weights(spectral, k, unweighted)
        tolerances = Tolerances.from_config(self.solver_config)

        if method == 'bp':
            result = solve_weighted_bp(A, weights, b, tolerances, rho=self.solver_config.rho, label="cli")
        elif method == 'lasso':
            if alpha is None or alpha <= 0:
                raise ConfigError("lasso needs --alpha > 0")
            result = solve_weighted_lasso(build_request(spectral, formulation, b, alpha, k=k, weights=weights,
                                                        tolerances=tolerances, label="cli"))
        else:
            raise ConfigError(f"unknown solve method '{method}'")

        path = self._output(output, f"solution_{method}.json")
        write_json(path, result.to_dict())
        if self.solver_config.trace:
            result.write_trace(os.path.splitext(path)[0] + "_trace.csv")
        logger.info(f"{method}: {result.status.value} after {result.iterations} iteration(s); "
                    f"support {list(result.support())}; "
                    f"written to {path}")
        return EXIT_INFEASIBLE if result.status == SolveStatus.INFEASIBLE else EXIT_OK

    def certify(self, matrix_file: str, sources: Sequence[str], k: Optional[int] = None,
                output: Optional[str] = None) -> int:
        """
        Certify a configuration given as IDX:VALUE tokens.

        Returns:
            EXIT_INFEASIBLE when the configuration is not certified
        """
        A = import_forward_model(matrix_file).A
        spectral = decompose(A, rank_tol=self.spectral_config.rank_tol, k=k or self.spectral_config.k)
        P = projection(spectral, spectral.k)
        weights = weight_matrix(P, self.spectral_config.floor_tol)
        source = SourceConfig.from_pairs(A.shape[1], parse_source_pairs(sources))
        report = certify_configuration(A, P, weights, source, self.certify_config)

        path = self._output(output, "certificate.json")
        write_json(path, report.to_dict())
        logger.info("\n" + report.render_table())
        return EXIT_OK if report.certified else EXIT_INFEASIBLE

    def _runner(self) -> ScenarioRunner:
        return ScenarioRunner(harness=self.harness_config, solver=self.solver_config,
                              certify=self.certify_config, spectral=self.spectral_config,
                              forward=self.forward_config)

    def run_example(self, example_id: int, divisions: Optional[int] = None) -> int:
        overrides: Dict[str, Any] = {}
        if divisions is not None:
            overrides['divisions'] = divisions
        bundle = self._runner().run_example(example_id, overrides)
        export_artifacts(bundle, os.path.join(self.harness_config.out_dir, f"example{example_id}"))
        return EXIT_OK

    def convergence(self, formulation: Optional[str] = None, constant: Optional[float] = None,
                    divisions: Optional[int] = None) -> int:
        study: Dict[str, Any] = {}
        if formulation:
            study['formulations'] = [formulation]
        if constant is not None:
            study['constant'] = constant
        overrides: Dict[str, Any] = {'convergence': study} if study else {}
        if divisions is not None:
            overrides['divisions'] = divisions
        bundle = self._runner().run_example(3, overrides)
        out_dir = ensure_dir(os.path.join(self.harness_config.out_dir, "convergence"))
        export_artifacts(bundle, out_dir)
        for result in bundle.convergence:
            logger.info(f"{result.formulation}: slope {result.slope:.3f}, R^2 {result.r_squared:.3f}")
        return EXIT_OK
