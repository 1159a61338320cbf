"""CLI entrypoint for the prescribed Ricci curvature solver."""

import argparse
import logging
from pathlib import Path

from .config import RunConfig
from .errors import RicciProblemError
from .pipeline import Command, run_command

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    """Parse command line arguments."""
    parser = argparse.ArgumentParser(
        description="Solve, certify and verify prescribed Ricci curvature on a tube",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  prescribedricci constants --config configs/sphere-su2.json    # beta, gamma and spreads
  prescribedricci check --config configs/torus.json             # sufficiency certificate
  prescribedricci solve-global --config configs/torus.json      # fixed-point solve + verify
  prescribedricci solve-local --config configs/torus.json       # shoot from one orbit
  prescribedricci verify --config configs/sphere-su2.json \\
      --solution configs/sphere-su2-analytic.csv                # check a metric on disk
        """,
    )
    parser.add_argument(
        "command",
        choices=[command.value for command in Command],
        help="Command to run",
    )
    parser.add_argument(
        "--config", "-c", type=Path, required=True, help="Run config (YAML or JSON)"
    )
    parser.add_argument(
        "--out", "-o", type=Path, help="Output directory (overrides the config)"
    )
    parser.add_argument("--grid", type=int, help="Odd number of grid nodes (overrides the config)")
    parser.add_argument("--seed", type=int, help="Sampling seed for the Lipschitz estimates")
    parser.add_argument("--tol", type=float, help="Fixed-point stopping tolerance")
    parser.add_argument("--max-iter", type=int, help="Fixed-point iteration cap per damping")
    parser.add_argument(
        "--solution", type=Path, help="Solution CSV to check (verify only)"
    )
    parser.add_argument("--progress", action="store_true", help="Show progress bars")
    parser.add_argument(
        "--clear-logs", action="store_true", help="Empty info.log and error.log before running"
    )
    parser.add_argument(
        "--log-level",
        choices=LOG_LEVELS,
        default="WARNING",
        help="Console log level (files always log INFO and above)",
    )
    return parser.parse_args(argv)


def main():
    """Main CLI entry point."""
    args = parse_args()
    try:
        config = RunConfig.from_file(args.config).with_overrides(
            grid=args.grid,
            seed=args.seed,
            tol=args.tol,
            max_iter=args.max_iter,
            output_dir=args.out,
        )
    except RicciProblemError as exc:
        print(f"Error: {exc}")
        raise SystemExit(exc.exit_code)

    exit_code = run_command(
        Command(args.command),
        config,
        solution_path=args.solution,
        progress=args.progress,
        clear_logs=args.clear_logs,
        console_level=getattr(logging, args.log_level),
    )
    raise SystemExit(exit_code)


if __name__ == "__main__":
    main()
