"""Prescribed data: the tensor T, the boundary tensors and the hypothesis envelope."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Literal, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.interpolate import CubicSpline

from .errors import DomainError, InvalidProblem
from .structure import HomogeneousStructure, validate_structure

logger = logging.getLogger(__name__)

ProfileKind = Literal["constant", "polynomial", "spline"]

DEFAULT_GRID_POINTS = 2001
DEFAULT_RHO_BAR = 1.0
SCALE_FLOOR = 1e-30
# Roundoff allowance at the ends of [0, 1] and [0, sigma].
DOMAIN_SLACK = 64 * np.finfo(float).eps

Evaluator = Callable[[np.ndarray | float], np.ndarray]


@dataclass(frozen=True, eq=False)
class SmoothProfile:
    """A smooth scalar function on [0, 1] with exact first derivative."""

    kind: ProfileKind
    coefficients: np.ndarray
    end_slopes: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        coefficients = np.atleast_1d(np.array(self.coefficients, dtype=float))
        coefficients.setflags(write=False)
        object.__setattr__(self, "coefficients", coefficients)
        if not np.all(np.isfinite(coefficients)):
            raise InvalidProblem(f"{self.kind} profile has non-finite coefficients")
        if self.kind == "constant":
            if coefficients.size != 1:
                raise InvalidProblem("a constant profile takes exactly one value")
            return
        if self.kind == "polynomial":
            object.__setattr__(self, "_poly", Polynomial(coefficients))
            object.__setattr__(self, "_dpoly", Polynomial(coefficients).deriv())
            return
        if self.kind != "spline":
            raise InvalidProblem(f"unknown profile kind {self.kind!r}")
        if coefficients.size < 2:
            raise InvalidProblem("a spline profile needs at least two samples")
        knots = np.linspace(0.0, 1.0, coefficients.size)
        if self.end_slopes is None:
            spline = CubicSpline(knots, coefficients, bc_type="natural")
        else:
            start, end = (float(s) for s in self.end_slopes)
            spline = CubicSpline(knots, coefficients, bc_type=((1, start), (1, end)))
        object.__setattr__(self, "_spline", spline)

    @classmethod
    def constant(cls, value: float) -> SmoothProfile:
        return cls("constant", np.array([value]))

    @classmethod
    def polynomial(cls, coefficients: Sequence[float]) -> SmoothProfile:
        """Polynomial with ascending coefficients in t."""
        return cls("polynomial", np.asarray(coefficients, dtype=float))

    @classmethod
    def spline(
        cls,
        samples: Sequence[float],
        end_slopes: tuple[float, float] | None = None,
    ) -> SmoothProfile:
        """Cubic spline through samples on a uniform grid of [0, 1]; natural unless clamped."""
        return cls("spline", np.asarray(samples, dtype=float), end_slopes)

    def _checked(self, t: np.ndarray | float) -> np.ndarray:
        points = np.asarray(t, dtype=float)
        if np.any(points < -DOMAIN_SLACK) or np.any(points > 1.0 + DOMAIN_SLACK):
            raise DomainError("profile evaluated outside [0, 1]")
        return np.clip(points, 0.0, 1.0)

    def value(self, t: np.ndarray | float) -> np.ndarray:
        points = self._checked(t)
        if self.kind == "constant":
            return np.full(points.shape, self.coefficients[0])
        if self.kind == "polynomial":
            return np.asarray(self._poly(points))  # type: ignore[attr-defined]
        return np.asarray(self._spline(points))  # type: ignore[attr-defined]

    def derivative(self, t: np.ndarray | float) -> np.ndarray:
        points = self._checked(t)
        if self.kind == "constant":
            return np.zeros(points.shape)
        if self.kind == "polynomial":
            return np.asarray(self._dpoly(points))  # type: ignore[attr-defined]
        return np.asarray(self._spline(points, 1))  # type: ignore[attr-defined]

    def to_serialized(self) -> dict[str, object]:
        if self.kind == "constant":
            return {"constant": float(self.coefficients[0])}
        if self.kind == "polynomial":
            return {"polynomial": self.coefficients.tolist()}
        payload: dict[str, object] = {"spline": self.coefficients.tolist()}
        if self.end_slopes is not None:
            payload["end_slopes"] = list(self.end_slopes)
        return payload


@dataclass(frozen=True, eq=False)
class ProblemData:
    structure: HomogeneousStructure
    sigma: float
    phi: tuple[SmoothProfile, ...]
    a: np.ndarray
    b: np.ndarray
    sign_indefinite: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "phi", tuple(self.phi))
        for name in ("a", "b"):
            values = np.array(getattr(self, name), dtype=float)
            values.setflags(write=False)
            object.__setattr__(self, name, values)

    @property
    def n(self) -> int:
        return self.structure.n

    def phi_hat(self, t: np.ndarray | float) -> np.ndarray:
        """Profile values with the module index last."""
        return np.stack([profile.value(t) for profile in self.phi], axis=-1)

    def phi_hat_derivative(self, t: np.ndarray | float) -> np.ndarray:
        return np.stack([profile.derivative(t) for profile in self.phi], axis=-1)


def validate_problem(p: ProblemData, grid_points: int = DEFAULT_GRID_POINTS) -> ProblemData:
    validate_structure(p.structure)
    n = p.n
    if len(p.phi) != n or p.a.shape != (n,) or p.b.shape != (n,):
        raise InvalidProblem(
            f"phi, a and b must each have n={n} entries "
            f"(got {len(p.phi)}, {p.a.shape}, {p.b.shape})"
        )
    if not np.isfinite(p.sigma) or p.sigma <= 0.0:
        raise InvalidProblem(f"sigma must be positive, got {p.sigma}")
    if not (np.all(np.isfinite(p.a)) and np.all(np.isfinite(p.b))):
        raise InvalidProblem("boundary coefficients must be finite")
    if np.any(p.a <= 0.0) or np.any(p.b <= 0.0):
        raise InvalidProblem("boundary coefficients a and b must be positive")
    if not p.sign_indefinite:
        grid = np.linspace(0.0, 1.0, grid_points)
        minimum = float(np.min(p.phi_hat(grid)))
        if minimum <= 0.0:
            raise InvalidProblem(
                f"phi profiles must be strictly positive (minimum {minimum:.6g}); "
                "use indefinite mode for sign-changing data"
            )
    return p


@dataclass(frozen=True, eq=False)
class OrbitData:
    """Boundary metric and second fundamental form prescribed on one orbit."""

    tau: float
    a_tau: np.ndarray
    delta_tau: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "tau", float(self.tau))
        a_tau = np.array(self.a_tau, dtype=float)
        delta_tau = np.array(self.delta_tau, dtype=float)
        if not 0.0 <= self.tau <= 1.0:
            raise InvalidProblem(f"tau must lie in [0, 1], got {self.tau}")
        if a_tau.ndim != 1 or a_tau.shape != delta_tau.shape:
            raise InvalidProblem("a_tau and delta_tau must be vectors of equal length")
        if np.any(a_tau <= 0.0) or not np.all(np.isfinite(a_tau)):
            raise InvalidProblem("a_tau must be positive")
        if not np.all(np.isfinite(delta_tau)):
            raise InvalidProblem("delta_tau must be finite")
        a_tau.setflags(write=False)
        delta_tau.setflags(write=False)
        object.__setattr__(self, "a_tau", a_tau)
        object.__setattr__(self, "delta_tau", delta_tau)


def validate_orbit(od: OrbitData, p: ProblemData) -> OrbitData:
    if od.a_tau.shape != (p.n,):
        raise InvalidProblem(f"orbit data must have n={p.n} entries, got {od.a_tau.shape[0]}")
    return od


@dataclass(frozen=True)
class BoundsEnvelope:
    alpha: float
    omega1: float
    omega2: float
    c1: float
    c2: float
    rho_bar: float = DEFAULT_RHO_BAR

    def __post_init__(self) -> None:
        values = (self.alpha, self.omega1, self.omega2, self.c1, self.c2, self.rho_bar)
        if not all(np.isfinite(v) and v > 0.0 for v in values):
            raise InvalidProblem(f"envelope constants must be positive and finite: {values}")
        if self.omega1 > self.omega2:
            raise InvalidProblem(f"omega1={self.omega1} exceeds omega2={self.omega2}")

    def to_serialized(self) -> dict[str, float]:
        return {
            "alpha": self.alpha,
            "omega1": self.omega1,
            "omega2": self.omega2,
            "c1": self.c1,
            "c2": self.c2,
            "rho_bar": self.rho_bar,
        }


def tightest_envelope(
    p: ProblemData,
    rho_bar: float = DEFAULT_RHO_BAR,
    grid_points: int = DEFAULT_GRID_POINTS,
) -> BoundsEnvelope:
    validate_problem(p, grid_points)
    grid = np.linspace(0.0, 1.0, grid_points)
    values = p.phi_hat(grid)
    slopes = p.phi_hat_derivative(grid)
    sigma_sq = p.sigma**2

    alpha = float(np.max(values))
    if alpha <= 0.0:
        logger.warning("phi profiles never exceed 0; clamping alpha to %.0e", SCALE_FLOOR)
        alpha = SCALE_FLOOR
    c1 = float(np.max(np.abs(p.a - p.b))) / sigma_sq
    c2 = float(np.max(np.abs(slopes))) / sigma_sq
    return BoundsEnvelope(
        alpha=alpha,
        omega1=float(min(p.a.min(), p.b.min())),
        omega2=float(max(p.a.max(), p.b.max())),
        c1=max(c1, SCALE_FLOOR),
        c2=max(c2, SCALE_FLOOR),
        rho_bar=float(rho_bar),
    )


def profiles_on_r(p: ProblemData) -> tuple[Evaluator, Evaluator]:
    """Return phi(r) = phi_hat(r / sigma) and phi'(r) on [0, sigma]."""
    sigma = p.sigma

    def to_t(r: np.ndarray | float) -> np.ndarray:
        points = np.asarray(r, dtype=float)
        slack = DOMAIN_SLACK * sigma
        if np.any(points < -slack) or np.any(points > sigma + slack):
            raise DomainError(f"r must lie in [0, {sigma}]")
        return np.clip(points / sigma, 0.0, 1.0)

    def phi(r: np.ndarray | float) -> np.ndarray:
        return p.phi_hat(to_t(r))

    def phi_p(r: np.ndarray | float) -> np.ndarray:
        return p.phi_hat_derivative(to_t(r)) / sigma

    return phi, phi_p


def interpolated_orbit(p: ProblemData, tau: float) -> np.ndarray:
    """Orbit coefficients whose squares interpolate a and b linearly in tau."""
    return np.sqrt((1.0 - tau) * p.a + tau * p.b)
