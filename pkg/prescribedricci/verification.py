"""Independent residual check of a metric by finite differences."""

from __future__ import annotations

import logging

import numpy as np

from .errors import MalformedSolution
from .geometry import (
    MetricJet,
    bianchi_residual,
    eval_H1,
    eval_H2,
    ricci_components,
)
from .models import MetricSolution, ResidualIssue, ResidualReport
from .problem import ProblemData, profiles_on_r

logger = logging.getLogger(__name__)

DEFAULT_RESIDUAL_TARGET = 1e-6
BOUNDARY_TOLERANCE = 1e-10
PROPAGATION_FACTOR = 10.0
QUADRATURE_FLOOR = 1e-9
MIN_NODES = 5


def fd4(values: np.ndarray, spacing: float) -> np.ndarray:
    """Fourth-order first derivative along axis 0, one-sided at both ends."""
    y = np.asarray(values, dtype=float)
    if y.shape[0] < MIN_NODES:
        raise MalformedSolution(f"need at least {MIN_NODES} nodes, got {y.shape[0]}")
    out = np.empty_like(y)
    scale = 12.0 * spacing
    out[2:-2] = (-y[4:] + 8.0 * y[3:-1] - 8.0 * y[1:-3] + y[:-4]) / scale
    out[0] = (-25.0 * y[0] + 48.0 * y[1] - 36.0 * y[2] + 16.0 * y[3] - 3.0 * y[4]) / scale
    out[1] = (-3.0 * y[0] - 10.0 * y[1] + 18.0 * y[2] - 6.0 * y[3] + y[4]) / scale
    out[-1] = (25.0 * y[-1] - 48.0 * y[-2] + 36.0 * y[-3] - 16.0 * y[-4] + 3.0 * y[-5]) / scale
    out[-2] = (3.0 * y[-1] + 10.0 * y[-2] - 18.0 * y[-3] + 6.0 * y[-4] - y[-5]) / scale
    return out


def _uniform_spacing(r: np.ndarray) -> float:
    if r.ndim != 1 or r.size < MIN_NODES:
        raise MalformedSolution(f"need at least {MIN_NODES} nodes on a 1-d grid")
    steps = np.diff(r)
    spacing = float(steps.mean())
    if spacing <= 0.0 or not np.allclose(steps, spacing, rtol=1e-6, atol=0.0):
        raise MalformedSolution("solution nodes must be increasing and uniformly spaced")
    return spacing


def verify(
    sol: MetricSolution,
    p: ProblemData,
    *,
    refined: MetricSolution | None = None,
    sigma_bar_target: float = 1.0,
    residual_target: float = DEFAULT_RESIDUAL_TARGET,
    use_solution_derivatives: bool = False,
) -> ResidualReport:
    """Recompute the Ricci components of ``sol`` from its values and compare with T."""
    s = p.structure
    r = np.asarray(sol.r, dtype=float)
    spacing = _uniform_spacing(r)
    f, fp, h = sol.f, sol.fp, sol.h

    if use_solution_derivatives and sol.fpp is not None:
        fpp = sol.fpp
        hp = sol.hp
    else:
        fpp = fd4(fp, spacing)
        hp = fd4(h, spacing)

    phi_of, phi_p_of = profiles_on_r(p)
    phi = phi_of(r)
    phi_p = phi_p_of(r)
    jet = MetricJet(h=h, hp=hp, f=f, fp=fp, fpp=fpp)
    components = ricci_components(jet, s)
    sigma_bar = components.sigma_bar
    sigma_bar_p = fd4(sigma_bar, spacing)

    sigma_bar_defect = float(np.max(np.abs(sigma_bar - sigma_bar_target)))
    orbit_defects = [float(v) for v in np.max(np.abs(components.orbit - phi), axis=0)]
    bianchi = bianchi_residual(jet, sigma_bar, sigma_bar_p, phi, phi_p, s)
    # Measured per unit t = r / sigma.
    bianchi_defect = p.sigma * float(np.max(np.abs(bianchi)))

    slack = 1e-12 * p.sigma
    boundary: dict[str, float | None] = {"start": None, "end": None, "bc_on_h": None}
    if abs(r[0]) <= slack:
        boundary["start"] = float(np.max(np.abs(f[0] - p.a)))
        # H1 = h^2 H2 + 1 - sigma_bar at r = 0.
        h1 = float(eval_H1(f[0], fp[0], s))
        h2 = float(eval_H2(f[0], phi[0], s))
        boundary["bc_on_h"] = abs(h1 - h[0] ** 2 * h2 - (1.0 - sigma_bar_target))
    if abs(r[-1] - p.sigma) <= slack:
        boundary["end"] = float(np.max(np.abs(f[-1] - p.b)))

    orbit_defect = max(orbit_defects, default=0.0)
    propagation_ok = sigma_bar_defect <= PROPAGATION_FACTOR * (
        orbit_defect + bianchi_defect + QUADRATURE_FLOOR
    )

    issues: list[ResidualIssue] = []
    if sigma_bar_defect > residual_target:
        issues.append(
            ResidualIssue(
                kind="sigma_bar",
                severity="blocking",
                scope="transverse",
                value=sigma_bar_defect,
                threshold=residual_target,
                reason=f"transverse Ricci component misses {sigma_bar_target:g}",
            )
        )
    for index, defect in enumerate(orbit_defects, start=1):
        if defect > residual_target:
            issues.append(
                ResidualIssue(
                    kind="orbit",
                    severity="blocking",
                    scope=f"module {index}",
                    value=defect,
                    threshold=residual_target,
                    reason="orbit Ricci component differs from phi",
                )
            )
    bc_on_h = boundary["bc_on_h"]
    if bc_on_h is not None and bc_on_h > BOUNDARY_TOLERANCE:
        issues.append(
            ResidualIssue(
                kind="boundary",
                severity="warning",
                scope="h(0)",
                value=bc_on_h,
                threshold=BOUNDARY_TOLERANCE,
                reason="boundary condition on h at r = 0 is not met",
            )
        )
    if not propagation_ok:
        issues.append(
            ResidualIssue(
                kind="propagation",
                severity="warning",
                scope="transverse",
                value=sigma_bar_defect,
                threshold=PROPAGATION_FACTOR * (orbit_defect + bianchi_defect + QUADRATURE_FLOOR),
                reason="transverse defect is not explained by orbit and Bianchi defects",
            )
        )

    report = ResidualReport(
        sigma_bar_target=sigma_bar_target,
        sigma_bar_defect=sigma_bar_defect,
        orbit_defects=orbit_defects,
        bianchi_defect=bianchi_defect,
        boundary_errors=boundary,
        hartman_ok=sol.diagnostics.get("hartman_ok"),
        ball_ok=sol.diagnostics.get("ball_ok"),
        sigma_bar_propagation_ok=propagation_ok,
        issues=issues,
    )

    if refined is not None:
        fine = verify(
            refined,
            p,
            sigma_bar_target=sigma_bar_target,
            residual_target=residual_target,
            use_solution_derivatives=use_solution_derivatives,
        )
        fine_level = fine.residual_level
        report.refined_residual_level = fine_level
        report.convergence_ratio = (
            report.residual_level / fine_level if fine_level > 0.0 else None
        )
        if report.floor_limited:
            logger.info(
                "Refinement ratio is floor-limited (levels %.3e and %.3e)",
                report.residual_level,
                fine_level,
            )

    logger.info(
        "Residuals: sigma_bar %.3e, orbit %.3e, Bianchi %.3e, ratio %s",
        sigma_bar_defect,
        orbit_defect,
        bianchi_defect,
        report.convergence_ratio,
    )
    return report
