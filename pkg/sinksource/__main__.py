"""
Main entry point for the sinksource package.

This file allows running the package with python -m sinksource
"""

import sys
import logging
import argparse
from typing import List, Optional

from dotenv import load_dotenv

from sinksource.main import EXIT_ERROR, SinkSourceToolkit

logger = logging.getLogger("sinksource.__main__")


def _conductivity(value: str):
    try:
        return float(value)
    except ValueError:
        return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='sinksource',
                                     description='Sparse sink/source recovery from boundary potentials')
    parser.add_argument('--config', dest='config_file', default=None,
                        help='Path to configuration file (default: $SINKSOURCE_CONFIG_PATH or toolkit_config.yaml)')
    parser.add_argument('--seed', type=int, default=None, help='Random seed for noise synthesis')
    parser.add_argument('--out', dest='out_dir', default=None, help='Output directory')
    parser.add_argument('--log-level', dest='log_level', default=None,
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], help='Logging level')
    commands = parser.add_subparsers(dest='command', required=True)

    mesh = commands.add_parser('mesh', help='Build or refine meshes').add_subparsers(dest='action', required=True)
    build = mesh.add_parser('build', help='Build a domain mesh')
    build.add_argument('--domain', choices=['unit_square', 'box', 'cross'], default=None)
    build.add_argument('--divisions', type=int, default=None)
    build.add_argument('--grading-seed', dest='grading_seed', type=int, default=None)
    build.add_argument('--output', default=None)
    refine = mesh.add_parser('refine', help='Uniformly refine a mesh file')
    refine.add_argument('mesh_file')
    refine.add_argument('--output', default=None)

    forward = commands.add_parser('forward', help='Forward operator').add_subparsers(dest='action', required=True)
    assemble = forward.add_parser('assemble', help='Assemble the forward matrix of a mesh')
    assemble.add_argument('--mesh', dest='mesh_file', required=True)
    assemble.add_argument('--conductivity', type=_conductivity, default=None)
    assemble.add_argument('--output', default=None)

    spectral = commands.add_parser('spectral', help='Spectral tools').add_subparsers(dest='action', required=True)
    svd = spectral.add_parser('svd', help='Singular values of a forward matrix')
    svd.add_argument('--matrix', dest='matrix_file', required=True)
    svd.add_argument('--output', default=None)

    solve = commands.add_parser('solve', help='Weighted l1 recovery')
    solve.add_argument('method', choices=['bp', 'lasso'])
    solve.add_argument('--matrix', dest='matrix_file', required=True)
    solve.add_argument('--data', dest='data_file', required=True)
    solve.add_argument('--alpha', type=float, default=None)
    solve.add_argument('--k', type=int, default=None)
    solve.add_argument('--formulation', choices=['projected', 'formA', 'formAd'], default='formA')
    solve.add_argument('--unweighted', action='store_true')
    solve.add_argument('--output', default=None)

    certify = commands.add_parser('certify', help='Certify a sink/source configuration')
    certify.add_argument('--matrix', dest='matrix_file', required=True)
    certify.add_argument('--source', dest='sources', action='append', required=True, metavar='IDX:VALUE')
    certify.add_argument('--k', type=int, default=None)
    certify.add_argument('--output', default=None)

    example = commands.add_parser('example', help='Numerical examples').add_subparsers(dest='action', required=True)
    run = example.add_parser('run', help='Run one example and export its artifacts')
    run.add_argument('example_id', type=int, choices=[0, 1, 2, 3])
    run.add_argument('--divisions', type=int, default=None)

    convergence = commands.add_parser('convergence', help='Convergence-rate study')
    convergence.add_argument('--formulation', choices=['formA', 'formAd'], default=None)
    convergence.add_argument('--constant', type=float, default=None)
    convergence.add_argument('--divisions', type=int, default=None)
    return parser


def dispatch(app: SinkSourceToolkit, args: argparse.Namespace) -> int:
    if args.command == 'mesh' and args.action == 'build':
        return app.build_mesh(args.domain, args.divisions, args.grading_seed, args.output)
    if args.command == 'mesh':
        return app.refine_mesh(args.mesh_file, args.output)
    if args.command == 'forward':
        return app.assemble_forward(args.mesh_file, args.conductivity, args.output)
    if args.command == 'spectral':
        return app.spectral_svd(args.matrix_file, args.output)
    if args.command == 'solve':
        return app.solve(args.method, args.matrix_file, args.data_file, args.alpha, args.k,
                         args.unweighted, args.formulation, args.output)
    if args.command == 'certify':
        return app.certify(args.matrix_file, args.sources, args.k, args.output)
    if args.command == 'example':
        return app.run_example(args.example_id, args.divisions)
    return app.convergence(args.formulation, args.constant, args.divisions)


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the sinksource package when run as a module."""
    load_dotenv()
    args = build_parser().parse_args(argv)

    try:
        app = SinkSourceToolkit(args.config_file, seed=args.seed, out_dir=args.out_dir, log_level=args.log_level)
        return dispatch(app, args)
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return EXIT_ERROR
    except Exception as e:
        logger.error(f"Application error: {e}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
