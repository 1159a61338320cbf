"""Exception hierarchy shared by the solver, the certificates and the CLI."""

from __future__ import annotations

from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from .models import MetricSolution

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_HYPOTHESIS = 3
EXIT_NO_CONVERGENCE = 4
EXIT_RESIDUAL = 5
EXIT_BREAKDOWN = 6


class RicciProblemError(Exception):
    """Base class for every failure the CLI maps to an exit code."""

    exit_code = EXIT_INVALID

    def details(self) -> dict[str, Any]:
        return {"error": type(self).__name__, "message": str(self)}


class InvalidConfig(RicciProblemError):
    pass


class InvalidStructure(RicciProblemError):
    pass


class NotIsotypic(InvalidStructure):
    """Constants disagree across basis vectors of one module."""

    def __init__(self, message: str, spread: float):
        super().__init__(message)
        self.spread = spread

    def details(self) -> dict[str, Any]:
        return {**super().details(), "spread": self.spread}


class InvalidProblem(RicciProblemError):
    pass


class MalformedSolution(RicciProblemError):
    pass


class DomainError(RicciProblemError, ValueError):
    """An evaluator was called outside the set where it is defined."""


class HUndefined(RicciProblemError):
    exit_code = EXIT_HYPOTHESIS

    def __init__(self, h1: float, h2: float):
        super().__init__(f"H is undefined: H1={h1:.6g}, H2={h2:.6g}")
        self.h1 = float(h1)
        self.h2 = float(h2)

    def details(self) -> dict[str, Any]:
        return {**super().details(), "h1": self.h1, "h2": self.h2}


class EmptyBox(RicciProblemError):
    exit_code = EXIT_HYPOTHESIS


class DegenerateCertificate(RicciProblemError):
    exit_code = EXIT_HYPOTHESIS


class LocalHypothesisFailed(RicciProblemError):
    exit_code = EXIT_HYPOTHESIS

    def __init__(self, lhs: float):
        super().__init__(f"local existence hypothesis fails: lhs={lhs:.6g} is not negative")
        self.lhs = float(lhs)

    def details(self) -> dict[str, Any]:
        return {**super().details(), "lhs": self.lhs}


class RecipeFailed(RicciProblemError):
    exit_code = EXIT_HYPOTHESIS

    def __init__(self, trace: list[tuple[float, float]]):
        super().__init__(f"no admissible second fundamental form after {len(trace)} attempts")
        self.trace = trace

    def details(self) -> dict[str, Any]:
        return {
            **super().details(),
            "trace": [{"beta": beta, "lhs": lhs} for beta, lhs in self.trace],
        }


class NoConvergence(RicciProblemError):
    exit_code = EXIT_NO_CONVERGENCE

    def __init__(self, iterations: int, delta: float):
        super().__init__(
            f"fixed-point iteration did not converge after {iterations} iterations "
            f"(last update norm {delta:.3e})"
        )
        self.iterations = iterations
        self.delta = float(delta)

    def details(self) -> dict[str, Any]:
        return {**super().details(), "iterations": self.iterations, "delta": self.delta}


class BoundViolation(RicciProblemError):
    exit_code = EXIT_NO_CONVERGENCE


class NonPositive(RicciProblemError):
    exit_code = EXIT_NO_CONVERGENCE


class Breakdown(RicciProblemError):
    exit_code = EXIT_BREAKDOWN

    def __init__(self, kappa: float, partial: MetricSolution):
        super().__init__(f"positivity lost before the requested span: kappa={kappa:.6g}")
        self.kappa = float(kappa)
        self.partial = partial

    def details(self) -> dict[str, Any]:
        return {**super().details(), "kappa": self.kappa}
