"""Explicit constants of the existence theory and the hypothesis checks."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .errors import DegenerateCertificate, EmptyBox
from .geometry import eval_F_tilde, eval_H1, eval_H2
from .models import CertificateCheck, CertificateMode, CertificateReport
from .problem import (
    DEFAULT_GRID_POINTS,
    BoundsEnvelope,
    OrbitData,
    ProblemData,
    validate_orbit,
)
from .structure import HomogeneousStructure

logger = logging.getLogger(__name__)

SAFETY_FACTOR = 1.5
TENSOR_POINTS = 9
DEFAULT_SAMPLES = 100_000
MAX_CORNER_DIMS = 12
JACOBIAN_STEP = 1e-6


@dataclass(frozen=True)
class LipschitzEstimate:
    theta1: float
    theta2: float
    theta3: float | None
    samples: int
    skipped: int


def certificate_mode(p: ProblemData) -> CertificateMode:
    if p.sign_indefinite:
        return "indefinite"
    if p.structure.abelian:
        return "abelian"
    return "standard"


def compute_rho0(w1: float, w2: float, s: HomogeneousStructure, env: BoundsEnvelope) -> float:
    if s.abelian:
        return float(env.rho_bar)
    gamma_sum = s.gamma.sum(axis=(1, 2))
    per_module = s.beta * w2**2 / (2.0 * w1**2) + gamma_sum * w2**6 / (4.0 * w1**6)
    return float(2.0 * np.dot(s.dims, per_module))


def compute_rho1_sigma1(
    alpha: float,
    w1: float,
    w2: float,
    rho0: float,
    s: HomogeneousStructure,
) -> tuple[float, float]:
    if rho0 <= 0.0:
        raise DegenerateCertificate(
            f"rho0={rho0:.6g} is not positive; all-zero constants need abelian mode"
        )
    gamma_sum = s.gamma.sum(axis=(1, 2))
    inner = np.dot(s.dims, alpha / w1**2 + gamma_sum * w2**4 / (2.0 * w1**6))
    rho1 = max(4.0 * float(np.sqrt(inner)), 2.25 * (rho0 / (2.0 * w2**2)) ** -0.5)
    d = s.d
    sigma1 = min(
        1.0,
        w1 / (4.0 * d),
        2.0 * w1**2 / ((2.0 * rho1**2 * w1 + rho1**4) * (d - 1)),
    )
    return rho1, sigma1


def compute_theta(
    alpha: float,
    w1: float,
    w2: float,
    rho1: float,
    s: HomogeneousStructure,
) -> tuple[np.ndarray, float]:
    gamma_sum = s.gamma.sum(axis=(1, 2))
    rho1_sq = rho1**2
    theta_vec = (
        4.0 * s.beta * rho1_sq / w1
        + 1536.0 * rho1_sq * gamma_sum * w2**4 / w1**5
        + 2.0 * w1
        + (2.0 * w1 + 2.0 * w1**2 + 8.0 * rho1_sq) * (s.d - 1)
        + 8.0 * alpha * rho1_sq / w1
    )
    return theta_vec, float(np.linalg.norm(theta_vec))


def compute_eps0(w1: float, d: int) -> float:
    return w1 / (2.0 * d)


def compute_sigma0(
    theta: float,
    *,
    omega1: float,
    d: int,
    n: int,
    sigma1: float,
    rho1: float,
    theta1: float,
    theta2: float,
) -> tuple[float, float, float]:
    """Return (eps0, big_sigma, sigma0)."""
    eps0 = compute_eps0(omega1, d)
    big_sigma = theta + theta1 * n**2 * (theta + theta**2) + theta2 * (omega1 + theta)
    sigma0 = min(
        sigma1,
        float(np.sqrt(omega1 / theta)),
        eps0 / theta,
        omega1 / (2.0 * big_sigma),
        1.0 / (2.0 * rho1 * big_sigma),
    )
    return eps0, big_sigma, sigma0


def contraction_factor(sigma: float, theta1: float, theta2: float, theta3: float) -> float:
    """Lipschitz factor of the fixed-point map implied by theta1..theta3."""
    return theta1 * theta3 / 2.0 + sigma * theta2 + sigma * theta3 + sigma * theta2 * theta3


def _box_samples(lower: np.ndarray, upper: np.ndarray, seed: int, samples: int) -> np.ndarray:
    """Tensor grid when small enough, otherwise scrambled Halton points plus corners."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    free = np.flatnonzero(upper > lower)
    base = np.broadcast_to(lower, (1, lower.size)).copy()
    if free.size == 0:
        return base

    if TENSOR_POINTS**free.size <= samples:
        axes = [np.linspace(0.0, 1.0, TENSOR_POINTS)] * free.size
        unit = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, free.size)
    else:
        unit = qmc.Halton(d=free.size, scramble=True, seed=seed).random(samples)
        if free.size <= MAX_CORNER_DIMS:
            corners = np.array(list(itertools.product((0.0, 1.0), repeat=free.size)))
            unit = np.vstack([unit, corners])

    points = np.repeat(base, unit.shape[0], axis=0)
    points[:, free] = lower[free] + unit * (upper[free] - lower[free])
    return points


def _theta1_supremum(
    s: HomogeneousStructure,
    env: BoundsEnvelope,
    rho0: float,
    eps0: float,
    seed: int,
    samples: int,
) -> tuple[float, int, int]:
    n = s.n
    lower = np.concatenate([np.full(n, env.omega1), np.full(n, -eps0), np.zeros(n)])
    upper = np.concatenate([np.full(n, env.omega2), np.full(n, eps0), np.full(n, env.alpha)])
    points = _box_samples(lower, upper, seed, samples)
    x, y, z = points[:, :n], points[:, n : 2 * n], points[:, 2 * n :]
    feasible = z @ s.dims >= rho0
    x, y, z = x[feasible], y[feasible], z[feasible]

    h1 = eval_H1(x, y, s)
    h2 = eval_H2(x, z, s)
    valid = (h1 > 0.0) & (h2 > 0.0)
    skipped = int(feasible.sum() - valid.sum())
    if not np.any(valid):
        raise EmptyBox("no admissible point in the theta1 box")
    x, y, h1, h2 = x[valid], y[valid], h1[valid], h2[valid]

    # H1 = 1 - y^T C y with C[k, l] = d_k d_l / (x_k x_l) - delta_kl d_k / x_k^2.
    u = s.dims / x
    cy = u * np.sum(u * y, axis=-1, keepdims=True) - s.dims * y / x**2
    root = np.sqrt(h1 * h2)
    gradient = np.linalg.norm(cy, axis=-1) / root
    cross = np.abs(u[:, :, None] * u[:, None, :] - np.einsum("ij,...j->...ij", np.eye(n), u / x))
    coefficient = np.max(cross.reshape(cross.shape[0], -1), axis=-1)
    product = coefficient / (2.0 * root)
    return float(max(gradient.max(), product.max())), int(valid.sum()), skipped


def _theta2_supremum(
    s: HomogeneousStructure,
    env: BoundsEnvelope,
    rho1: float,
    eps0: float,
    seed: int,
    samples: int,
) -> float:
    n = s.n
    lower = np.concatenate(
        [[1.0 / (2.0 * rho1)], np.full(n, env.omega1 / 2.0), np.full(n, -eps0), np.full(n, -1.0)]
    )
    upper = np.concatenate(
        [[2.0 * rho1], np.full(n, 2.0 * env.omega2), np.full(n, eps0), np.full(n, 1.0)]
    )
    points = _box_samples(lower, upper, seed, samples)
    p = points[:, :1]
    x, y, w = points[:, 1 : n + 1], points[:, n + 1 : 2 * n + 1], points[:, 2 * n + 1 :]
    dims = s.dims

    linear = np.sum(dims * y / x, axis=-1)
    cubic = np.sum(dims * w / (2.0 * x**2), axis=-1)
    d_p = np.abs(linear - 3.0 * p[:, 0] ** 2 * cubic)
    d_x = np.linalg.norm(-p * dims * y / x**2 + p**3 * dims * w / x**3, axis=-1)
    d_y = np.linalg.norm(p * dims / x, axis=-1)
    return float(np.max(np.maximum(d_p, np.maximum(d_x, d_y))))


def _theta3_supremum(
    s: HomogeneousStructure,
    env: BoundsEnvelope,
    rho1: float,
    seed: int,
    samples: int,
) -> float:
    n = s.n
    half = env.omega1 / 2.0
    lower = np.concatenate(
        [
            [1.0 / (2.0 * rho1)],
            np.full(n, env.omega1 / 2.0),
            np.full(n, -half),
            np.zeros(n),
            np.full(n, -1.0),
        ]
    )
    upper = np.concatenate(
        [
            [2.0 * rho1],
            np.full(n, 2.0 * env.omega2),
            np.full(n, half),
            np.full(n, env.alpha),
            np.full(n, 1.0),
        ]
    )
    points = _box_samples(lower, upper, seed, samples)
    # Columns: p | x | y (the variables theta3 controls), then z | w held fixed.
    variables = points[:, : 2 * n + 1]
    z, w = points[:, 2 * n + 1 : 3 * n + 1], points[:, 3 * n + 1 :]

    def f_tilde(v: np.ndarray) -> np.ndarray:
        return eval_F_tilde(v[:, 0], v[:, 1 : n + 1], v[:, n + 1 :], z, w, s)

    columns = []
    for j in range(2 * n + 1):
        step = JACOBIAN_STEP * np.maximum(1.0, np.abs(variables[:, j]))
        forward = variables.copy()
        backward = variables.copy()
        forward[:, j] += step
        backward[:, j] -= step
        columns.append((f_tilde(forward) - f_tilde(backward)) / (2.0 * step[:, None]))
    jacobian = np.stack(columns, axis=-1)
    norms = [
        np.linalg.norm(jacobian[:, :, 0], axis=-1),
        np.linalg.svd(jacobian[:, :, 1 : n + 1], compute_uv=False)[:, 0],
        np.linalg.svd(jacobian[:, :, n + 1 :], compute_uv=False)[:, 0],
    ]
    return float(np.max(np.max(np.stack(norms), axis=0)))


def estimate_lipschitz(
    s: HomogeneousStructure,
    env: BoundsEnvelope,
    rho0: float,
    eps0: float,
    *,
    rho1: float,
    seed: int = 0,
    samples: int = DEFAULT_SAMPLES,
    diagnostics: bool = False,
) -> LipschitzEstimate:
    """Sample the boxes for theta1, theta2 (and theta3) and apply the safety factor."""
    if env.alpha * float(s.dims.sum()) < rho0:
        raise EmptyBox(
            f"sum_k d_k z_k >= rho0={rho0:.6g} is infeasible with z in [0, {env.alpha:.6g}]^n"
        )
    theta1, used, skipped = _theta1_supremum(s, env, rho0, eps0, seed, samples)
    if skipped:
        logger.warning("Skipped %d theta1 samples where H is undefined", skipped)
    theta2 = _theta2_supremum(s, env, rho1, eps0, seed, samples)
    theta3 = _theta3_supremum(s, env, rho1, seed, samples) if diagnostics else None
    logger.info(
        "Lipschitz estimates: theta1=%.6g theta2=%.6g theta3=%s (%d samples)",
        SAFETY_FACTOR * theta1,
        SAFETY_FACTOR * theta2,
        None if theta3 is None else f"{SAFETY_FACTOR * theta3:.6g}",
        used,
    )
    return LipschitzEstimate(
        theta1=SAFETY_FACTOR * theta1,
        theta2=SAFETY_FACTOR * theta2,
        theta3=None if theta3 is None else SAFETY_FACTOR * theta3,
        samples=used,
        skipped=skipped,
    )


def _compare(
    name: str,
    value: float,
    threshold: float | None,
    *,
    strict: bool,
    above: bool,
    fallback: str = "conditional",
) -> CertificateCheck:
    """Check value > threshold (above) or value < threshold; a missing threshold yields fallback."""
    if threshold is None:
        return CertificateCheck(name=name, status=fallback, value=value)
    margin = value - threshold if above else threshold - value
    ok = margin > 0.0 if strict else margin >= 0.0
    return CertificateCheck(
        name=name,
        status="pass" if ok else "fail",
        value=value,
        threshold=threshold,
        margin=margin,
    )


def check_global(
    p: ProblemData,
    env: BoundsEnvelope,
    *,
    grid_points: int = DEFAULT_GRID_POINTS,
    seed: int = 0,
    samples: int = DEFAULT_SAMPLES,
    diagnostics: bool = False,
    rho_tilde: float | None = None,
    sigma_tilde: float | None = None,
) -> CertificateReport:
    """Run the constant pipeline and evaluate every hypothesis; failures are verdicts."""
    s = p.structure
    mode = certificate_mode(p)
    w1, w2 = env.omega1, env.omega2

    rho0 = compute_rho0(w1, w2, s, env)
    rho1, sigma1 = compute_rho1_sigma1(env.alpha, w1, w2, rho0, s)
    theta_vec, theta = compute_theta(env.alpha, w1, w2, rho1, s)
    eps0 = compute_eps0(w1, s.d)

    theta1: float | None = None
    theta2: float | None = None
    theta3: float | None = None
    big_sigma: float | None = None
    sigma0: float | None = None
    lipschitz_samples = 0
    try:
        estimate = estimate_lipschitz(
            s,
            env,
            rho0,
            eps0,
            rho1=rho1,
            seed=seed,
            samples=samples,
            diagnostics=diagnostics,
        )
    except EmptyBox as exc:
        logger.warning("Lipschitz boxes are empty: %s", exc)
    else:
        theta1, theta2, theta3 = estimate.theta1, estimate.theta2, estimate.theta3
        lipschitz_samples = estimate.samples
        _, big_sigma, sigma0 = compute_sigma0(
            theta,
            omega1=w1,
            d=s.d,
            n=s.n,
            sigma1=sigma1,
            rho1=rho1,
            theta1=theta1,
            theta2=theta2,
        )

    t = np.linspace(0.0, 1.0, grid_points)
    values = p.phi_hat(t)
    slopes = p.phi_hat_derivative(t)
    sigma = p.sigma
    sigma_sq = sigma**2

    checks: list[CertificateCheck] = []
    if mode == "indefinite":
        weighted = np.maximum(values, 0.0) / w2**2 + np.minimum(values, 0.0) / w1**2
        lhs = float(np.min(weighted @ s.dims))
        checks.append(_compare("indefinite_lhs", lhs, rho_tilde, strict=True, above=True))
        checks.append(_compare("sigma_check", sigma, sigma_tilde, strict=True, above=False))
    else:
        phi_sum = float(np.min(values @ s.dims))
        checks.append(_compare("phi_sum_check", phi_sum, rho0, strict=True, above=True))
        checks.append(
            _compare("sigma_check", sigma, sigma0, strict=True, above=False, fallback="fail")
        )
    checks.append(
        _compare(
            "boundary_gap_check",
            float(np.max(np.abs(p.a - p.b))),
            sigma_sq,
            strict=False,
            above=False,
        )
    )
    checks.append(
        _compare(
            "phi_derivative_check",
            float(np.max(np.abs(slopes))),
            sigma_sq,
            strict=False,
            above=False,
        )
    )
    for name, value in (("c1", env.c1), ("c2", env.c2)):
        check = _compare(name, value, 1.0, strict=False, above=False)
        if check.status == "fail":
            check = CertificateCheck(name, "conditional", value, 1.0, check.margin)
        checks.append(check)

    report = CertificateReport(
        mode=mode,
        rho0=rho0,
        rho1=rho1,
        sigma1=sigma1,
        eps0=eps0,
        theta_vec=theta_vec,
        theta=theta,
        theta1=theta1,
        theta2=theta2,
        theta3=theta3,
        big_sigma=big_sigma,
        sigma0=sigma0,
        ball_radius=None if big_sigma is None else sigma_sq * big_sigma,
        c1=env.c1,
        c2=env.c2,
        contraction_factor=(
            None
            if theta1 is None or theta2 is None or theta3 is None
            else contraction_factor(sigma, theta1, theta2, theta3)
        ),
        checks=checks,
        lipschitz_samples=lipschitz_samples,
    )
    failing = [check.name for check in checks if not check.passed]
    logger.info(
        "Certificate (%s): sigma0=%s, passed=%s%s",
        mode,
        "n/a" if sigma0 is None else f"{sigma0:.6g}",
        report.passed,
        f", not passing: {', '.join(failing)}" if failing else "",
    )
    return report


def check_local(od: OrbitData, p: ProblemData) -> tuple[bool, float]:
    """Necessary and sufficient condition for a local solution around orbit tau."""
    validate_orbit(od, p)
    s = p.structure
    phi_tau = p.phi_hat(od.tau)
    h2 = float(eval_H2(od.a_tau, phi_tau, s))
    h1 = float(eval_H1(od.a_tau, od.delta_tau / od.a_tau, s))
    lhs = -(h2 + 1.0 - h1)
    return lhs < 0.0, lhs
