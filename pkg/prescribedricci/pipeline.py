"""Command orchestration: build the problem, run one command, emit the report."""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any

from . import __version__
from .certificates import check_global
from .config import RunConfig
from .errors import EXIT_HYPOTHESIS, EXIT_OK, EXIT_RESIDUAL, Breakdown, RicciProblemError
from .models import CertificateReport, MetricSolution, ResidualReport
from .problem import ProblemData, tightest_envelope
from .shooting import local_shoot, theorem_recipe
from .solution_io import (
    REPORT_FILENAME,
    SOLUTION_FILENAME,
    read_solution_csv,
    write_report,
    write_solution_csv,
)
from .solver import Grid, fixed_point_solve
from .utils import setup_logging
from .verification import MIN_NODES, verify

logger = logging.getLogger(__name__)


class Command(str, Enum):
    CONSTANTS = "constants"
    CHECK = "check"
    SOLVE_GLOBAL = "solve-global"
    SOLVE_LOCAL = "solve-local"
    VERIFY = "verify"


@dataclass
class CommandResult:
    """Report payload plus the exit code it implies."""

    payload: dict[str, Any]
    exit_code: int = EXIT_OK
    solution: MetricSolution | None = None


def _residual_exit(residuals: ResidualReport) -> int:
    return EXIT_OK if residuals.targets_met else EXIT_RESIDUAL


def _build_problem(config: RunConfig) -> ProblemData:
    structure, _ = config.build_structure()
    return config.build_problem(structure)


def _certificate(config: RunConfig, p: ProblemData) -> CertificateReport:
    envelope = tightest_envelope(p, config.envelope.rho_bar, config.envelope.grid_points)
    return check_global(
        p,
        envelope,
        grid_points=config.envelope.grid_points,
        seed=config.seed,
        samples=config.samples,
        diagnostics=config.theta3,
        rho_tilde=config.envelope.rho_tilde,
        sigma_tilde=config.envelope.sigma_tilde,
    )


def _verify(
    config: RunConfig, sol: MetricSolution, p: ProblemData, refined: MetricSolution | None = None
) -> ResidualReport:
    return verify(
        sol,
        p,
        refined=refined,
        sigma_bar_target=config.sigma_bar_target,
        residual_target=config.residual_target,
    )


def cmd_constants(config: RunConfig, *, progress: bool = False) -> CommandResult:
    structure, diagnostics = config.build_structure()
    return CommandResult(
        payload={
            "structure": structure.to_serialized(),
            "diagnostics": None if diagnostics is None else diagnostics.to_serialized(),
        }
    )


def cmd_check(config: RunConfig, *, progress: bool = False) -> CommandResult:
    p = _build_problem(config)
    cert = _certificate(config, p)
    return CommandResult(
        payload={"sigma": p.sigma, "certificate": cert.to_serialized()},
        exit_code=EXIT_OK if cert.passed else EXIT_HYPOTHESIS,
    )


def cmd_solve_global(config: RunConfig, *, progress: bool = False) -> CommandResult:
    p = _build_problem(config)
    cert = _certificate(config, p)
    grid = Grid.for_problem(p, config.grid)

    def solve(g: Grid) -> MetricSolution:
        return fixed_point_solve(
            p,
            cert,
            g,
            tol=config.tol,
            max_iter=config.max_iter,
            damping=config.damping,
            progress=progress,
        )

    sol = solve(grid)
    refined = solve(grid.refined()) if config.refine else None
    residuals = _verify(config, sol, p, refined)
    return CommandResult(
        payload={
            "sigma": p.sigma,
            "certificate": cert.to_serialized(),
            "solution": sol.to_serialized(),
            "residuals": residuals.to_serialized(),
        },
        exit_code=_residual_exit(residuals),
        solution=sol,
    )


def cmd_solve_local(config: RunConfig, *, progress: bool = False) -> CommandResult:
    p = _build_problem(config)
    grid = Grid.for_problem(p, config.grid)
    local = config.local
    try:
        if local.beta_param is not None:
            sol = theorem_recipe(local.tau, local.beta_param, p, grid, local.max_span)
        else:
            sol = local_shoot(config.build_orbit(p), p, grid, local.max_span)
    except Breakdown as exc:
        partial = exc.partial
        payload: dict[str, Any] = {**exc.details(), "solution": None}
        if partial.nodes:
            payload["solution"] = partial.to_serialized()
        return CommandResult(
            payload=payload,
            exit_code=exc.exit_code,
            solution=partial if partial.nodes else None,
        )

    payload = {"sigma": p.sigma, "solution": sol.to_serialized(), "residuals": None}
    exit_code = EXIT_OK
    if sol.nodes >= MIN_NODES:
        residuals = _verify(config, sol, p)
        payload["residuals"] = residuals.to_serialized()
        exit_code = _residual_exit(residuals)
    else:
        logger.warning("Only %d grid nodes in the local window; skipping verification", sol.nodes)
    return CommandResult(payload=payload, exit_code=exit_code, solution=sol)


def cmd_verify(
    config: RunConfig,
    *,
    solution_path: Path | None = None,
    progress: bool = False,
) -> CommandResult:
    p = _build_problem(config)
    path = solution_path or config.output_dir / SOLUTION_FILENAME
    sol = read_solution_csv(path, p.n)
    residuals = _verify(config, sol, p)
    return CommandResult(
        payload={
            "sigma": p.sigma,
            "solution": sol.to_serialized(),
            "residuals": residuals.to_serialized(),
        },
        exit_code=_residual_exit(residuals),
    )


COMMANDS: dict[Command, Callable[..., CommandResult]] = {
    Command.CONSTANTS: cmd_constants,
    Command.CHECK: cmd_check,
    Command.SOLVE_GLOBAL: cmd_solve_global,
    Command.SOLVE_LOCAL: cmd_solve_local,
    Command.VERIFY: cmd_verify,
}


def print_run_summary(command: Command, output_dir: Path, result: CommandResult) -> None:
    """Print concise end-of-run results for the terminal."""
    print(f"{command.value}: exit {result.exit_code}")
    print(f"Report: {output_dir / REPORT_FILENAME}")
    if result.solution is not None:
        print(f"Solution: {output_dir / SOLUTION_FILENAME}")
    error = result.payload.get("error")
    if error:
        print(f"Error: {error}: {result.payload.get('message')}")


def run_command(
    command: Command,
    config: RunConfig,
    *,
    solution_path: Path | None = None,
    progress: bool = False,
    clear_logs: bool = False,
    console_level: int = logging.WARNING,
) -> int:
    """Run one command and write its report; the return value is the report's exit code."""
    output_dir = config.output_dir
    setup_logging(output_dir / "logs", clear_logs=clear_logs, console_level=console_level)
    logger.info("=" * 60)
    logger.info("prescribedricci %s: %s", __version__, command.value)
    logger.info("=" * 60)
    logger.info("Config: %s", config.source_path)
    logger.info("Output: %s", output_dir)
    logger.info("Grid: %d, tol: %g, max_iter: %d", config.grid, config.tol, config.max_iter)

    handler = COMMANDS[command]
    try:
        if command == Command.VERIFY:
            result = cmd_verify(config, solution_path=solution_path, progress=progress)
        else:
            result = handler(config, progress=progress)
    except RicciProblemError as exc:
        logger.error("%s failed: %s", command.value, exc)
        result = CommandResult(payload=exc.details(), exit_code=exc.exit_code)

    if result.solution is not None:
        write_solution_csv(output_dir / SOLUTION_FILENAME, result.solution)
    report = {
        "command": command.value,
        "config": config.name,
        "version": __version__,
        **result.payload,
        "exit_code": result.exit_code,
    }
    write_report(output_dir / REPORT_FILENAME, report)
    print_run_summary(command, output_dir, result)
    return result.exit_code
