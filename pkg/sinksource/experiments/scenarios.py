"""
Scenario runner for the numerical examples.

Scenario definitions live in examples.yaml next to this module. Every
scenario builds its inverse mesh, a forward model and (unless exact data is
requested) observation data computed on the uniform refinement of that mesh,
then solves each configured run and collects the outcome in an ExampleBundle.
"""
import copy
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import yaml

from sinksource.config.config_models import (
    CertifyConfig,
    ForwardConfig,
    HarnessConfig,
    MeshConfig,
    SolverConfig,
    SpectralConfig,
)
from sinksource.errors import ExperimentError, SinkSourceError
from sinksource.experiments.convergence import ConvergenceStudy, convergence_study
from sinksource.experiments.morozov import MorozovResult, log_grid, morozov_select_alpha
from sinksource.experiments.noise import NoisySpec, make_noisy_observation
from sinksource.fem import conductivity
from sinksource.fem.assembly import AssembledSystem, assemble
from sinksource.fem.forward import ForwardModel, build_forward_matrix, observe_refined
from sinksource.fem.mesh import DomainSpec, Mesh, build_domain, refine
from sinksource.inverse.certify import (
    CertificateReport,
    certify_configuration,
    check_sign_consistency,
    orthocomplement_members,
)
from sinksource.inverse.solvers import SolveResult, Tolerances, build_request, solve_weighted_lasso
from sinksource.inverse.sources import SourceConfig
from sinksource.inverse.spectral import SpectralModel, WeightMatrix, decompose, projection, weight_matrix

logger = logging.getLogger(__name__)

EXAMPLES_PATH = os.path.join(os.path.dirname(__file__), 'examples.yaml')

DEFAULT_SUPPORT_FRACTION = 0.1


@dataclass
class ScenarioModel:
    """Everything a scenario's runs share."""
    name: str
    mesh: Mesh
    system: AssembledSystem
    forward: ForwardModel
    spectral: SpectralModel
    projection: np.ndarray
    weights: WeightMatrix
    source: SourceConfig
    clean_data: np.ndarray
    expected_degraded: bool = False
    certificate: Optional[CertificateReport] = None


@dataclass
class RunRecord:
    """
    One solve of a scenario.

    Attributes:
        label: Run name, unique within the bundle
        scenario: Owning scenario
        formulation: projected, formA or formAd
        weighted: False for the W = I baseline
        alpha: Regularization weight actually used
        result: Solver outcome
        true_support: 0-based indices of the configured sources
        recovered_support: Indices with |x_i| above support_fraction * max |x|
        sign_consistent: No source recovered as a sink or vice versa
        expected_degraded: The scenario is known to recover magnitudes poorly
        noise: Noise bookkeeping (None for noiseless runs)
        morozov: Discrepancy-principle scan when alpha was selected
        reference_steps: Signed distance of a selected alpha from the run's
            reference_alpha, in steps of the Morozov grid
    """
    label: str
    scenario: str
    formulation: str
    weighted: bool
    alpha: float
    result: SolveResult
    true_support: List[int]
    recovered_support: List[int]
    sign_consistent: bool
    expected_degraded: bool = False
    noise: Optional[NoisySpec] = None
    morozov: Optional[MorozovResult] = None
    reference_steps: Optional[float] = None

    @property
    def support_match(self) -> bool:
        return sorted(self.true_support) == sorted(self.recovered_support)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'label': self.label,
            'scenario': self.scenario,
            'formulation': self.formulation,
            'weighted': self.weighted,
            'alpha': self.alpha,
            'true_support': self.true_support,
            'recovered_support': self.recovered_support,
            'support_match': self.support_match,
            'sign_consistent': self.sign_consistent,
            'expected_degraded': self.expected_degraded,
            'converged': self.result.converged,
            'iterations': self.result.iterations,
            'residual_norm': self.result.residual_norm,
            'noise_level': None if self.noise is None else self.noise.noise_level,
            'delta': None if self.noise is None else self.noise.delta,
            'morozov_fallback': None if self.morozov is None else self.morozov.fallback,
            'reference_steps': self.reference_steps,
        }


@dataclass
class ExampleBundle:
    """Collected output of run_example."""
    example_id: int
    name: str
    scenarios: Dict[str, ScenarioModel] = field(default_factory=dict)
    runs: List[RunRecord] = field(default_factory=list)
    convergence: List[ConvergenceStudy] = field(default_factory=list)

    @property
    def certificates(self) -> Dict[str, CertificateReport]:
        return {name: s.certificate for name, s in self.scenarios.items() if s.certificate is not None}

    def run(self, label: str) -> RunRecord:
        for record in self.runs:
            if record.label == label:
                return record
        raise KeyError(label)

    def summary(self) -> str:
        lines = [f"Example {self.example_id} ({self.name})"]
        for name, cert in self.certificates.items():
            lines.append(f"  {name}: {'certified' if cert.certified else 'not certified'}")
        for r in self.runs:
            verdict = "match" if r.support_match else ("degraded" if r.expected_degraded else "mismatch")
            lines.append(f"  {r.label:<16} alpha={r.alpha:<10.4g} support {verdict}, "
                         f"signs {'ok' if r.sign_consistent else 'flipped'}")
            if r.reference_steps is not None:
                lines[-1] += f", {r.reference_steps:+.1f} grid steps from the reference alpha"
        for study in self.convergence:
            lines.append(f"  {study.formulation} slope {study.slope:.3f} (R^2 {study.r_squared:.3f})")
        return "\n".join(lines)


def load_examples(path: Optional[str] = None) -> Dict[str, Any]:
    """Read the scenario file; example ids are normalised to int."""
    path = path or EXAMPLES_PATH
    try:
        with open(path, 'r') as f:
            raw = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ExperimentError(f"cannot read scenario file {path}: {e}") from e
    raw['examples'] = {int(k): v for k, v in (raw.get('examples') or {}).items()}
    return raw


def _deep_update(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], value)
        else:
            base[key] = value
    return base


class ScenarioRunner:
    """
    Builds scenarios and executes their runs with the toolkit's configuration.

    Args:
        harness: Seed, worker count and Morozov parameters
        solver: Solver tolerances
        certify: Certificate thresholds
        spectral: Rank and weight thresholds
        forward: Quadrature order and assembly workers
        examples_path: Alternative scenario file
    """

    def __init__(self, harness: Optional[HarnessConfig] = None, solver: Optional[SolverConfig] = None,
                 certify: Optional[CertifyConfig] = None, spectral: Optional[SpectralConfig] = None,
                 forward: Optional[ForwardConfig] = None, examples_path: Optional[str] = None):
        self.harness = harness or HarnessConfig()
        self.solver = solver or SolverConfig()
        self.certify = certify or CertifyConfig()
        self.spectral = spectral or SpectralConfig()
        self.forward = forward or ForwardConfig()
        self.definitions = load_examples(examples_path)
        self.tolerances = Tolerances.from_config(self.solver)
        self.support_fraction = float(self.definitions.get('support_fraction', DEFAULT_SUPPORT_FRACTION))

    def definition(self, example_id: int, overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        """
        Scenario definition of one example with overrides applied.

        Overrides come from the harness.examples section of the service config
        first and the caller second. The keys ``divisions``, ``k`` and ``seed``
        apply to every scenario; any other key is merged into each scenario.
        """
        examples = self.definitions['examples']
        if example_id not in examples:
            raise ExperimentError(f"unknown example id {example_id}; available: {sorted(examples)}",
                                  scenario=str(example_id))
        definition = copy.deepcopy(examples[example_id])
        merged: Dict[str, Any] = {}
        merged.update(self.harness.examples.get(str(example_id), {}) or {})
        merged.update(self.harness.examples.get(example_id, {}) or {})
        merged.update(overrides or {})

        divisions = merged.pop('divisions', None)
        k = merged.pop('k', None)
        merged.pop('seed', None)
        for scenario in definition.get('scenarios', []):
            if divisions is not None:
                scenario.setdefault('mesh', {})['divisions'] = int(divisions)
            if k is not None:
                scenario['k'] = int(k)
            _deep_update(scenario, copy.deepcopy(merged))
        return definition

    def run_example(self, example_id: int, overrides: Optional[Dict[str, Any]] = None) -> ExampleBundle:
        """
        Build and solve every scenario of one example.

        Args:
            example_id: 0, 1, 2 or 3
            overrides: Scenario overrides (see ``definition``)

        Returns:
            The bundle

        Raises:
            ExperimentError: Unknown id, or any component failure with the
                scenario (and alpha, where known) attached
        """
        overrides = dict(overrides or {})
        seed = int(overrides.get('seed', self.harness.seed))
        definition = self.definition(example_id, overrides)
        bundle = ExampleBundle(example_id=example_id, name=definition.get('name', f"example{example_id}"))
        logger.info(f"Running example {example_id} ({bundle.name}) with seed {seed}")

        for scenario_def in definition.get('scenarios', []):
            name = scenario_def.get('name', 'scenario')
            try:
                model = self.build_scenario(scenario_def)
                bundle.scenarios[name] = model
                bundle.runs.extend(self._execute_runs(model, scenario_def.get('runs') or [], seed))
                if scenario_def.get('convergence'):
                    bundle.convergence.extend(self._convergence(model, scenario_def['convergence'], seed))
            except ExperimentError as e:
                if e.scenario is None:
                    raise ExperimentError(e.detail, scenario=name, alpha=e.alpha) from e
                raise
            except SinkSourceError as e:
                raise ExperimentError(f"{type(e).__name__}: {e}", scenario=name) from e

        logger.info(bundle.summary())
        return bundle

    def build_scenario(self, scenario_def: Dict[str, Any]) -> ScenarioModel:
        """Mesh, forward model, decomposition, weights, true configuration and clean data."""
        name = scenario_def.get('name', 'scenario')
        mesh_cfg = MeshConfig.from_dict(scenario_def.get('mesh') or {})
        mesh = build_domain(DomainSpec.from_config(mesh_cfg))
        sigma = conductivity.from_spec(scenario_def.get('conductivity', self.forward.conductivity))
        system = assemble(mesh, sigma, self.forward.quadrature_order)
        forward = build_forward_matrix(system, workers=self.forward.workers)

        spectral = decompose(forward.A, rank_tol=self.spectral.rank_tol)
        k = int(scenario_def.get('k') or self.spectral.k or spectral.rank)
        if k > spectral.rank:
            logger.warning(f"{name}: truncation level {k} exceeds the numerical rank {spectral.rank}; "
                           f"using k={spectral.rank}")
            k = spectral.rank
        spectral = spectral.with_truncation(k)
        P = projection(spectral, k)
        weights = weight_matrix(P, self.spectral.floor_tol)

        source = self._source(scenario_def, mesh, P)
        if scenario_def.get('data', 'refined') == 'refined':
            fine_system = assemble(refine(mesh), sigma, self.forward.quadrature_order)
            clean = observe_refined(system, fine_system, source.dense())
        else:
            clean = forward.A @ source.dense()
        if scenario_def.get('normalize_data'):
            scale = float(np.linalg.norm(clean))
            if scale == 0.0:
                raise ExperimentError("clean data vanishes; cannot normalise", scenario=name)
            source = source.scaled([1.0 / scale] * source.s)
            clean = clean / scale

        model = ScenarioModel(name=name, mesh=mesh, system=system, forward=forward, spectral=spectral,
                              projection=P, weights=weights, source=source, clean_data=clean,
                              expected_degraded=bool(scenario_def.get('expected_degraded', False)))
        model.certificate = certify_configuration(forward.A, P, weights, source, self.certify)
        logger.info(f"Scenario {name}: {mesh!r}, k={k}, support {list(source.support)}")
        return model

    def _source(self, scenario_def: Dict[str, Any], mesh: Mesh, P: np.ndarray) -> SourceConfig:
        select = scenario_def.get('select')
        if select:
            if select.get('method') != 'orthocomplement':
                raise ExperimentError(f"unknown source selection '{select.get('method')}'")
            return self._orthocomplement_source(select, mesh, P)

        interior = mesh.interior_nodes()
        pairs: Dict[int, float] = {}
        for entry in scenario_def.get('sources') or []:
            j = mesh.nearest_vertex(entry['point'], interior if len(interior) else None)
            if j in pairs:
                raise ExperimentError(f"sources at {entry['point']} snap to an already used vertex {j}")
            pairs[j] = float(entry['value'])
        if not pairs:
            raise ExperimentError("scenario defines no sources")

        if scenario_def.get('composite'):
            spread: Dict[int, float] = {}
            for j, value in pairs.items():
                spread[j] = spread.get(j, 0.0) + value
                for nb in mesh.neighbours(j):
                    spread[int(nb)] = spread.get(int(nb), 0.0) + 0.5 * value
            pairs = {j: v for j, v in spread.items() if v != 0.0}
        return SourceConfig.from_pairs(mesh.n_vertices, sorted(pairs.items()))

    def _orthocomplement_source(self, select: Dict[str, Any], mesh: Mesh, P: np.ndarray) -> SourceConfig:
        """Boundary indices with ||P e_j|| >= 1 - ortho_tol, alternating signs, plus one interior source."""
        ortho_tol = float(select.get('ortho_tol', self.certify.ortho_tol))
        members, norms = orthocomplement_members(P, ortho_tol, mesh.boundary_nodes)
        wanted = int(select.get('boundary_count', 6))
        if len(members) < wanted:
            best = float(norms[mesh.boundary_nodes].max()) if len(mesh.boundary_nodes) else 0.0
            raise ExperimentError(f"only {len(members)} boundary index(es) reach ||P e_j|| >= {1 - ortho_tol:g} "
                                  f"(largest {best:.3f}); wanted {wanted}")
        # Spread the picks along the boundary walk
        positions = {int(j): i for i, j in enumerate(mesh.boundary_nodes)}
        members = sorted(members, key=lambda j: positions[int(j)])
        if len(members) > wanted:
            members = [members[int(i)] for i in np.linspace(0, len(members) - 1, wanted).round().astype(int)]

        interior = mesh.nearest_vertex(select.get('interior_point', mesh.vertices.mean(axis=0)),
                                       mesh.interior_nodes())
        if norms[interior] >= 1.0 - ortho_tol:
            logger.warning(f"interior index {interior} has ||P e_j|| = {norms[interior]:.3f}, "
                           f"which is not below {1 - ortho_tol:g}")
        pairs = [(int(j), 1.0 if i % 2 == 0 else -1.0) for i, j in enumerate(members)]
        pairs.append((interior, float(select.get('interior_value', 1.0))))
        return SourceConfig.from_pairs(mesh.n_vertices, sorted(pairs))

    def _execute_runs(self, model: ScenarioModel, runs: List[Dict[str, Any]], seed: int) -> List[RunRecord]:
        """Solve the runs concurrently; results come back in definition order."""
        workers = max(1, int(self.harness.workers))
        if workers > 1 and len(runs) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                return list(pool.map(lambda r: self._run(model, r, seed), runs))
        return [self._run(model, r, seed) for r in runs]

    def _run(self, model: ScenarioModel, run: Dict[str, Any], seed: int) -> RunRecord:
        label = run.get('label', 'run')
        formulation = run.get('formulation', 'formAd')
        weighted = bool(run.get('weighted', True))
        weights = model.weights if weighted else WeightMatrix.identity(model.source.n)
        level = float(run.get('noise', 0.0))
        k = model.spectral.k

        if formulation == 'projected':
            if level > 0:
                raise ExperimentError(f"run {label}: projected uses the true configuration and takes no noise",
                                      scenario=model.name)
            data, noise = model.source.dense(), None
        else:
            data, noise = make_noisy_observation(model.forward.A, model.source, level, seed,
                                                 clean_data=model.clean_data)
            if level == 0:
                noise = None

        def solve_at(alpha: float, x0: Optional[np.ndarray] = None) -> SolveResult:
            req = build_request(model.spectral, formulation, data, alpha, k=k, weights=weights,
                                tolerances=self.tolerances, x0=x0, label=f"{model.name}/{label}")
            return solve_weighted_lasso(req)

        morozov = None
        try:
            if run.get('morozov'):
                if noise is None:
                    raise ExperimentError(f"run {label}: Morozov selection needs noisy data",
                                          scenario=model.name)
                grid_def = run['morozov']
                grid = log_grid(float(grid_def.get('alpha_min', 1e-5)), float(grid_def.get('alpha_max', 1e-1)),
                                self.harness.points_per_decade)
                delta = self._discrepancy_delta(model, formulation, data)
                morozov = morozov_select_alpha(solve_at, data, delta, grid, self.harness.morozov_eta)
                alpha, result = morozov.alpha, morozov.result
            else:
                alpha = float(run['alpha'])
                result = solve_at(alpha)
        except ExperimentError as e:
            if e.scenario is None:
                raise ExperimentError(e.detail, scenario=model.name, alpha=e.alpha) from e
            raise
        except SinkSourceError as e:
            raise ExperimentError(f"run {label}: {e}", scenario=model.name,
                                  alpha=run.get('alpha')) from e

        if not result.converged:
            logger.warning(f"{model.name}/{label}: solver stopped with status {result.status.value}")
        scale = float(np.abs(result.x).max()) if result.x.size else 0.0
        tau = self.support_fraction * scale
        recovered = [int(i) for i in np.nonzero(np.abs(result.x) > tau)[0]] if scale > 0 else []
        consistent = check_sign_consistency(result.x, model.source, tau) if scale > 0 else True
        reference_steps = None
        if morozov is not None and run.get('reference_alpha'):
            reference_steps = float(np.log10(alpha / float(run['reference_alpha'])) * self.harness.points_per_decade)
        record = RunRecord(label=label, scenario=model.name, formulation=formulation, weighted=weighted,
                           alpha=alpha, result=result, true_support=list(model.source.support),
                           recovered_support=recovered, sign_consistent=consistent,
                           expected_degraded=model.expected_degraded, noise=noise, morozov=morozov,
                           reference_steps=reference_steps)
        if not record.support_match:
            log = logger.info if (model.expected_degraded or not weighted) else logger.warning
            log(f"{model.name}/{label}: recovered support {recovered} differs from {record.true_support}")
        return record

    @staticmethod
    def _discrepancy_delta(model: ScenarioModel, formulation: str, data: np.ndarray) -> float:
        """
        Norm of the whole data perturbation in the space of the formulation's residual.

        The perturbation is taken against the inverse model's prediction A x*,
        so refined-mesh modelling error counts along with the added noise.
        """
        perturbation = data - model.forward.A @ model.source.dense()
        if formulation == 'formAd':
            return float(np.linalg.norm(model.spectral.projected_data(perturbation)))
        return float(np.linalg.norm(perturbation))

    def _convergence(self, model: ScenarioModel, study_def: Dict[str, Any], seed: int) -> List[ConvergenceStudy]:
        deltas = [float(d) for d in study_def.get('deltas')]
        studies = []
        for formulation in study_def.get('formulations', ['formA', 'formAd']):
            constant = study_def.get('constant')
            if constant is None:
                constant = self.default_constant(model, formulation, deltas,
                                                 float(study_def.get('c_fraction', 0.05)))
            studies.append(convergence_study(model.spectral, model.source, float(constant), deltas,
                                             formulation=formulation, weights=model.weights,
                                             clean_data=model.clean_data, seed=seed,
                                             fixed_direction=bool(study_def.get('fixed_direction', False)),
                                             tolerances=self.tolerances))
        return studies

    @staticmethod
    def default_constant(model: ScenarioModel, formulation: str, deltas: List[float], c_fraction: float) -> float:
        """
        C such that alpha = C * max(delta) is c_fraction of the smallest alpha with a zero solution.

        That threshold is ||W^-1 G^T d||_inf for the formulation's operator G and data d.
        """
        req = build_request(model.spectral, formulation, model.clean_data, 1.0, weights=model.weights)
        threshold = float(np.abs(model.weights.inverse_apply(req.operator.T @ req.data)).max())
        if threshold == 0.0:
            raise ExperimentError("clean data is invisible to the formulation; cannot choose C",
                                  scenario=model.name)
        return c_fraction * threshold / max(deltas)


def run_example(example_id: int, overrides: Optional[Dict[str, Any]] = None,
                runner: Optional[ScenarioRunner] = None) -> ExampleBundle:
    """Run one example with default configuration (or the given runner)."""
    return (runner or ScenarioRunner()).run_example(example_id, overrides)
