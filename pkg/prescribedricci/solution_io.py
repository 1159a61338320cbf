"""Solution CSV and report JSON emission and loading."""

from __future__ import annotations

import io
import logging
from pathlib import Path
from typing import Any

import numpy as np

from .errors import MalformedSolution
from .models import MetricSolution
from .utils import atomic_write_text, dump_json

logger = logging.getLogger(__name__)

SOLUTION_FILENAME = "solution.csv"
REPORT_FILENAME = "report.json"
FLOAT_FORMAT = "%.17g"


def solution_header(n: int) -> list[str]:
    return ["r", "h", "hp"] + [f"f{i}" for i in range(1, n + 1)] + [
        f"fp{i}" for i in range(1, n + 1)
    ]


def write_solution_csv(path: Path, sol: MetricSolution) -> Path:
    table = np.column_stack([sol.r, sol.h, sol.hp, sol.f, sol.fp])
    buffer = io.StringIO()
    np.savetxt(
        buffer,
        table,
        fmt=FLOAT_FORMAT,
        delimiter=",",
        header=",".join(solution_header(sol.n)),
        comments="",
    )
    atomic_write_text(path, buffer.getvalue())
    logger.info("Wrote %d solution rows to %s", table.shape[0], path)
    return path


def read_solution_csv(path: Path, n: int | None = None) -> MetricSolution:
    """Load a solution CSV; any structural defect raises MalformedSolution."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedSolution(f"cannot read solution file {path}: {exc}") from exc

    lines = text.splitlines()
    if not lines:
        raise MalformedSolution(f"solution file {path} is empty")
    header = [column.strip() for column in lines[0].split(",")]
    columns = len(header)
    if columns < 5 or (columns - 3) % 2:
        raise MalformedSolution(f"unexpected solution header: {lines[0]!r}")
    modules = (columns - 3) // 2
    if header != solution_header(modules):
        raise MalformedSolution(f"unexpected solution header: {lines[0]!r}")
    if n is not None and modules != n:
        raise MalformedSolution(f"solution has {modules} modules, problem has {n}")

    try:
        table = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise MalformedSolution(f"malformed solution rows in {path}: {exc}") from exc
    if table.shape[1] != columns or table.shape[0] == 0:
        raise MalformedSolution(f"solution rows do not match the {columns}-column header")
    if not np.all(np.isfinite(table)):
        raise MalformedSolution("solution contains non-finite values")

    return MetricSolution(
        r=table[:, 0],
        h=table[:, 1],
        hp=table[:, 2],
        f=table[:, 3 : 3 + modules],
        fp=table[:, 3 + modules :],
        provenance="loaded",
        diagnostics={"source": str(path)},
    )


def write_report(path: Path, payload: dict[str, Any]) -> Path:
    atomic_write_text(path, dump_json(payload))
    return path
