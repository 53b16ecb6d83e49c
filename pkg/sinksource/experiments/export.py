"""
Artifact export for example bundles.

Files written into the output directory:

    results.csv           per-run rows for indices in the true or recovered support
    certificates.json     certificate reports, run summaries and convergence studies
    singular_values.csv   spectrum of every scenario's forward matrix
    heatmap_<label>.svg   recovered field of every run
    convergence.csv       (delta, alpha, error) rows when the bundle holds studies
"""
import logging
import os
import re
from typing import Dict, List

import numpy as np

from sinksource.errors import ExperimentError
from sinksource.experiments.heatmap import render_heatmap
from sinksource.experiments.scenarios import ExampleBundle
from sinksource.utils.io_utils import ensure_dir, write_csv, write_json

logger = logging.getLogger(__name__)

RESULTS_HEADER = ('run', 'index', 'x', 'y', 'true', 'recovered')


def _safe_label(label: str) -> str:
    return re.sub(r'[^A-Za-z0-9_.-]+', '_', label)


def export_artifacts(bundle: ExampleBundle, out_dir: str) -> Dict[str, List[str]]:
    """
    Write every artifact of a bundle.

    Args:
        bundle: Output of run_example (may hold no runs)
        out_dir: Target directory, created when missing

    Returns:
        Written paths keyed by artifact kind

    Raises:
        ExperimentError: On any I/O failure, naming the path
    """
    written: Dict[str, List[str]] = {'results': [], 'certificates': [], 'singular_values': [],
                                     'heatmaps': [], 'convergence': []}
    path = out_dir
    try:
        ensure_dir(out_dir)

        rows = []
        for run in bundle.runs:
            model = bundle.scenarios[run.scenario]
            truth = model.source.dense()
            indices = sorted(set(run.true_support) | set(run.recovered_support))
            for i in indices:
                x, y = model.mesh.vertices[i]
                rows.append((run.label, int(i), float(x), float(y), float(truth[i]), float(run.result.x[i])))
        path = os.path.join(out_dir, 'results.csv')
        written['results'].append(write_csv(path, RESULTS_HEADER, rows))

        path = os.path.join(out_dir, 'certificates.json')
        written['certificates'].append(write_json(path, {
            'example': bundle.example_id,
            'name': bundle.name,
            'certificates': {name: cert.to_dict() for name, cert in bundle.certificates.items()},
            'runs': [run.to_dict() for run in bundle.runs],
            'convergence': [study.to_dict() for study in bundle.convergence],
        }))

        spectrum = [(name, i, float(s)) for name, model in bundle.scenarios.items()
                    for i, s in enumerate(model.spectral.singular_values)]
        path = os.path.join(out_dir, 'singular_values.csv')
        written['singular_values'].append(write_csv(path, ('scenario', 'index', 'value'), spectrum))

        for run in bundle.runs:
            model = bundle.scenarios[run.scenario]
            path = os.path.join(out_dir, f"heatmap_{_safe_label(run.label)}.svg")
            written['heatmaps'].append(render_heatmap(model.mesh, run.result.x, path,
                                                      title=f"{run.label} (alpha={run.alpha:.3g})"))

        if bundle.convergence:
            conv_rows = [(s.formulation, r.delta, r.alpha, r.error_w, r.converged)
                         for s in bundle.convergence for r in s.records]
            path = os.path.join(out_dir, 'convergence.csv')
            written['convergence'].append(write_csv(path, ('formulation', 'delta', 'alpha', 'error_w',
                                                           'converged'), conv_rows))
    except OSError as e:
        raise ExperimentError(f"cannot write artifact {path}: {e}") from e

    total = sum(len(v) for v in written.values())
    logger.info(f"Exported {total} artifact(s) for example {bundle.example_id} to {out_dir}")
    return written


def support_table(bundle: ExampleBundle, label: str) -> List[tuple]:
    """(index, true, recovered) for the nonzero entries of the true configuration of one run."""
    run = bundle.run(label)
    truth = bundle.scenarios[run.scenario].source.dense()
    return [(int(i), float(truth[i]), float(run.result.x[i])) for i in np.nonzero(truth)[0]]
