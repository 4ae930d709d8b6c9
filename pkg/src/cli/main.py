"""Command line entry point of the surface phase-field study runner."""
import argparse
import sys
import time

# IMPORTANT - runs code in __init__.py such that the API becomes importable.
import __init__

import config
import output
import selftest
from analysis import (
    StudyConfig, run_convergence_study, solve_level, validate_study_config)
from console import ConsoleLogger, configure_logging, format_seconds
from isosurface import extract_zero_isosurface


PROGRAM = "surface-phasefield"
DESCRIPTION = (
    "Phase-field finite elements for elliptic PDEs on implicit surfaces: "
    "convergence studies and surface solutions.")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=PROGRAM, description=DESCRIPTION)
    parser.add_argument(
        "--verbose", action="store_true",
        help="Print library progress messages to stderr.")
    commands = parser.add_subparsers(dest="command", required=True)
    run = commands.add_parser(
        "run", help="Run a study from a configuration file.")
    run.add_argument(
        "--config", required=True,
        help="Path of a configuration file or name of a bundled one.")
    run.add_argument("--csv", help="Write the convergence table here.")
    run.add_argument("--vtk", help="Write the extracted surface here.")
    commands.add_parser("selftest", help="Run the built-in checks.")
    commands.add_parser(
        "list-examples", help="List the bundled configurations.")
    return parser


def run_study(study: StudyConfig, logger: ConsoleLogger) -> None:
    """Runs a convergence study, or a single surface solve for pretzel."""
    start = time.perf_counter()
    if study.example == "pretzel":
        run_surface_solution(study, logger)
    else:
        table = run_convergence_study(study)
        if study.csv_path is None:
            output.write_csv(table, sys.stdout)
        else:
            output.write_csv(table, study.csv_path)
            logger.log_good(f"Wrote {len(table.rows)} rows to {study.csv_path}")
        if study.vtk_path is not None:
            logger.log_neutral(
                "VTK surfaces are only written for the pretzel example.")
    logger.log_neutral(
        f"Finished in {format_seconds(time.perf_counter() - start)}")


def run_surface_solution(study: StudyConfig, logger: ConsoleLogger) -> None:
    """Solves the finest level and reports u_h on the zero surface."""
    result = solve_level(study, study.levels - 1)
    surface = extract_zero_isosurface(
        result.mesh, result.mesh.geometry, result.coefficients)
    minimum, maximum = surface.value_range
    logger.log_neutral(
        f"h={result.h:.4g} eps={result.epsilon:.4g} "
        f"dofs={result.mesh.n_dofs} iterations={result.report.iterations}")
    logger.log_neutral(f"u_h on the surface: min {minimum:.2f}, "
                       f"max {maximum:.2f}")
    if study.vtk_path is not None:
        output.write_vtk(surface, study.vtk_path)
        logger.log_good(
            f"Wrote {len(surface.triangles)} triangles to {study.vtk_path}")


def main(argv: list[str] | None = None) -> int:
    """Runs the command line interface; returns the exit status."""
    arguments = build_parser().parse_args(argv)
    configure_logging(arguments.verbose)
    logger = ConsoleLogger()
    match arguments.command:
        case "list-examples":
            for name, description in config.bundled_configs().items():
                logger.log_neutral(f"{name:<14}{description}")
            return 0
        case "selftest":
            try:
                passed = selftest.run_selftest(logger)
            except Exception as error:
                logger.log_bad(f"Self-test crashed: {error}")
                return 1
            return 0 if passed else 1
    try:
        study = config.load_config(arguments.config)
        if arguments.csv is not None:
            study.csv_path = arguments.csv
        if arguments.vtk is not None:
            study.vtk_path = arguments.vtk
        validate_study_config(study)
        run_study(study, logger)
    except Exception as error:
        logger.log_bad(f"Error: {error}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
