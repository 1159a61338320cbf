"""Global solver: background pair, the fixed-point map C and the damped Picard driver."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson
from tqdm import tqdm  # type: ignore[import-untyped]

from .errors import (
    BoundViolation,
    DomainError,
    InvalidProblem,
    NoConvergence,
    NonPositive,
)
from .geometry import bianchi_coefficients, eval_F_tilde, eval_H, eval_K
from .models import CertificateReport, MetricSolution
from .problem import ProblemData, profiles_on_r

logger = logging.getLogger(__name__)

DEFAULT_GRID_SIZE = 2001
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200
DAMPING_LADDER = (0.5, 0.25)
RK4_SUBSTEPS = 4
HARTMAN_SLACK = 1.05


@dataclass(frozen=True)
class Grid:
    """Uniform nodes r_j = j * sigma / (size - 1)."""

    sigma: float
    size: int = DEFAULT_GRID_SIZE

    def __post_init__(self) -> None:
        if self.size < 3 or self.size % 2 == 0:
            raise InvalidProblem(f"grid size must be odd and >= 3, got {self.size}")
        if not self.sigma > 0.0:
            raise InvalidProblem(f"grid length must be positive, got {self.sigma}")

    @classmethod
    def for_problem(cls, p: ProblemData, size: int = DEFAULT_GRID_SIZE) -> Grid:
        return cls(sigma=p.sigma, size=size)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.sigma, self.size)

    @property
    def spacing(self) -> float:
        return self.sigma / (self.size - 1)

    def refined(self) -> Grid:
        return Grid(sigma=self.sigma, size=2 * self.size - 1)


@dataclass(frozen=True)
class PathPair:
    """Discretized pair (mu, nu) with the derivative channel mu_p."""

    mu: np.ndarray
    mu_p: np.ndarray
    nu: np.ndarray

    @classmethod
    def zeros(cls, g: Grid, n: int) -> PathPair:
        return cls(mu=np.zeros((g.size, n)), mu_p=np.zeros((g.size, n)), nu=np.zeros(g.size))

    def blend(self, other: PathPair, weight: float) -> PathPair:
        keep = 1.0 - weight
        return PathPair(
            mu=keep * self.mu + weight * other.mu,
            mu_p=keep * self.mu_p + weight * other.mu_p,
            nu=keep * self.nu + weight * other.nu,
        )

    def difference(self, other: PathPair) -> PathPair:
        return PathPair(mu=self.mu - other.mu, mu_p=self.mu_p - other.mu_p, nu=self.nu - other.nu)


def b_norm(pp: PathPair, sigma: float) -> float:
    """sup|mu| + sigma * sup|mu'| + sup|nu| with Euclidean norms over modules."""
    return float(
        np.max(np.linalg.norm(pp.mu, axis=-1))
        + sigma * np.max(np.linalg.norm(pp.mu_p, axis=-1))
        + np.max(np.abs(pp.nu))
    )


@dataclass(frozen=True)
class Background:
    r: np.ndarray
    f: np.ndarray
    fp: np.ndarray
    h: np.ndarray
    hp: np.ndarray
    phi: np.ndarray
    phi_p: np.ndarray


def background(p: ProblemData, g: Grid) -> Background:
    """Linear f-bar between a and b, and h-bar from the Bianchi ODE by classical RK4."""
    s = p.structure
    sigma = p.sigma
    phi_of, phi_p_of = profiles_on_r(p)

    r = g.nodes
    f_bar = np.outer(sigma - r, p.a) / sigma + np.outer(r, p.b) / sigma
    fp_bar = np.broadcast_to((p.b - p.a) / sigma, f_bar.shape).copy()

    # Half-substep resolution: each RK4 substep reads its start, midpoint and end.
    fine = np.linspace(0.0, sigma, 2 * RK4_SUBSTEPS * (g.size - 1) + 1)
    f_fine = np.outer(sigma - fine, p.a) / sigma + np.outer(fine, p.b) / sigma
    fp_fine = np.broadcast_to((p.b - p.a) / sigma, f_fine.shape)
    linear, cubic = bianchi_coefficients(f_fine, fp_fine, phi_p_of(fine), s)

    h0 = float(eval_H(f_bar[0], fp_bar[0], phi_of(0.0), s))
    step = g.spacing / RK4_SUBSTEPS
    h = np.empty(g.size)
    h[0] = h0
    value = h0

    def rhs(height: float, k: int) -> float:
        return height * linear[k] - height**3 * cubic[k]

    for j in range(g.size - 1):
        for sub in range(RK4_SUBSTEPS):
            k = 2 * (RK4_SUBSTEPS * j + sub)
            k1 = rhs(value, k)
            k2 = rhs(value + 0.5 * step * k1, k + 1)
            k3 = rhs(value + 0.5 * step * k2, k + 1)
            k4 = rhs(value + step * k3, k + 2)
            value = value + step * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        if not np.isfinite(value) or value <= 0.0:
            raise NonPositive(f"background h-bar lost positivity near r={r[j + 1]:.6g}")
        h[j + 1] = value

    nodes = slice(None, None, 2 * RK4_SUBSTEPS)
    hp = h * linear[nodes] - h**3 * cubic[nodes]
    return Background(
        r=r,
        f=f_bar,
        fp=fp_bar,
        h=h,
        hp=hp,
        phi=phi_of(r),
        phi_p=phi_p_of(r),
    )


def hartman_ok(xi: np.ndarray, xi_p: np.ndarray, sigma: float, theta: float) -> bool:
    """|xi| <= sigma^2 Theta / 8 and |xi'| <= sigma Theta / 2 up to 5%."""
    xi_sup = float(np.max(np.linalg.norm(xi, axis=-1)))
    xi_p_sup = float(np.max(np.linalg.norm(xi_p, axis=-1)))
    return (
        xi_sup <= HARTMAN_SLACK * sigma**2 * theta / 8.0
        and xi_p_sup <= HARTMAN_SLACK * sigma * theta / 2.0
    )


def apply_C(
    pp: PathPair,
    bg: Background,
    p: ProblemData,
    g: Grid,
    *,
    theta: float | None = None,
    strict: bool = False,
) -> PathPair:
    """One application of the fixed-point map: (mu, nu) -> (xi, zeta)."""
    s = p.structure
    sigma = p.sigma
    r = bg.r

    h = bg.h + pp.nu
    g_vec = eval_F_tilde(h, bg.f + pp.mu, bg.fp + pp.mu_p, bg.phi, bg.phi_p, s)

    first = cumulative_simpson(g_vec, x=r, axis=0, initial=0.0)
    moment = cumulative_simpson(r[:, None] * g_vec, x=r, axis=0, initial=0.0)
    closing = sigma * first[-1] - moment[-1]
    xi = r[:, None] * first - moment - np.outer(r / sigma, closing)
    xi[0] = 0.0
    xi[-1] = 0.0
    xi_p = first - closing / sigma

    if theta is not None and not hartman_ok(xi, xi_p, sigma, theta):
        message = "Hartman bounds violated; Theta is too small or sigma too large"
        if strict:
            raise BoundViolation(message)
        logger.debug(message)

    f = bg.f + xi
    fp = bg.fp + xi_p
    head = float(eval_H(f[0], fp[0], bg.phi[0], s)) - bg.h[0]
    drift = eval_K(h, f, fp, bg.phi_p, s) - bg.hp
    zeta = head + cumulative_simpson(drift, x=r, initial=0.0)
    return PathPair(mu=xi, mu_p=xi_p, nu=zeta)


def _iterate(
    p: ProblemData,
    bg: Background,
    g: Grid,
    *,
    damping: float,
    tol: float,
    max_iter: int,
    theta: float | None,
    ball_radius: float | None,
    progress: bool,
) -> tuple[PathPair, int, float, bool, bool]:
    sigma = p.sigma
    current = PathPair.zeros(g, p.n)
    hartman = True
    ball = True
    delta = float("inf")
    bar = tqdm(
        range(1, max_iter + 1),
        desc=f"Fixed point (damping {damping:g})",
        unit="iter",
        disable=not progress,
    )
    for iteration in bar:
        image = apply_C(current, bg, p, g, theta=theta, strict=ball_radius is not None)
        if theta is not None:
            hartman = hartman and hartman_ok(image.mu, image.mu_p, sigma, theta)
        if ball_radius is not None and b_norm(image, sigma) > ball_radius:
            raise BoundViolation(
                f"iterate left the ball: B-norm {b_norm(image, sigma):.3e} > L={ball_radius:.3e}"
            )
        candidate = current.blend(image, damping)
        delta = b_norm(candidate.difference(current), sigma)
        current = candidate
        bar.set_postfix(delta=f"{delta:.2e}")
        logger.debug("iteration %d: update norm %.3e", iteration, delta)
        if not np.isfinite(delta):
            break
        if delta <= tol:
            if ball_radius is not None:
                ball = b_norm(current, sigma) <= ball_radius
            return current, iteration, delta, hartman, ball
    raise NoConvergence(max_iter, delta)


def fixed_point_solve(
    p: ProblemData,
    cert: CertificateReport | None,
    g: Grid,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    damping: float = 1.0,
    progress: bool = False,
) -> MetricSolution:
    """Iterate C from zero, retrying with smaller damping before giving up."""
    bg = background(p, g)
    certified = cert is not None and cert.certified
    theta = cert.theta if cert is not None else None
    ball_radius = cert.ball_radius if certified and cert is not None else None
    if not certified:
        logger.warning(
            "sigma=%.6g is not certified; iterating without ball and Hartman enforcement",
            p.sigma,
        )

    ladder = [damping] + [weight for weight in DAMPING_LADDER if weight < damping]
    failure: NoConvergence | None = None
    for weight in ladder:
        try:
            pair, iterations, delta, hartman, ball = _iterate(
                p,
                bg,
                g,
                damping=weight,
                tol=tol,
                max_iter=max_iter,
                theta=theta,
                ball_radius=ball_radius,
                progress=progress,
            )
        except NoConvergence as exc:
            failure = exc
            logger.warning("No convergence with damping %g: %s", weight, exc)
            continue
        except DomainError as exc:
            raise NonPositive(f"iterate left the positive cone: {exc}") from exc
        break
    else:
        assert failure is not None
        raise failure

    f = bg.f + pair.mu
    fp = bg.fp + pair.mu_p
    h = bg.h + pair.nu
    if np.any(f <= 0.0) or np.any(h <= 0.0):
        raise NonPositive("fixed point is not positive")
    hp = eval_K(h, f, fp, bg.phi_p, p.structure)
    ball_norm = b_norm(pair, p.sigma)
    logger.info(
        "Fixed point reached after %d iterations (damping %g, last update %.3e)",
        iterations,
        weight,
        delta,
    )
    return MetricSolution(
        r=bg.r,
        f=f,
        fp=fp,
        h=h,
        hp=hp,
        provenance="global-fixed-point",
        diagnostics={
            "iterations": iterations,
            "damping": weight,
            "final_delta": delta,
            "hartman_ok": hartman if theta is not None else None,
            "ball_ok": ball if ball_radius is not None else None,
            "ball_norm": ball_norm,
            "ball_radius": ball_radius,
            "certified": certified,
        },
    )
