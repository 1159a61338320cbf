"""Shared runtime result records and their serialized report shapes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from typing_extensions import NotRequired, TypedDict

CertificateMode = str
CheckStatus = str
Provenance = str

# Residual levels below this are dominated by floating-point roundoff.
ROUNDOFF_FLOOR = 1e-10


class SerializedCheck(TypedDict):
    name: str
    status: CheckStatus
    value: float | None
    threshold: float | None
    margin: float | None


class SerializedCertificate(TypedDict):
    mode: CertificateMode
    rho0: float
    rho1: float
    sigma1: float
    eps0: float
    theta_vec: list[float]
    theta: float
    theta1: float | None
    theta2: float | None
    theta3: float | None
    big_sigma: float | None
    sigma0: float | None
    ball_radius: float | None
    c1: float
    c2: float
    contraction_factor: float | None
    checks: list[SerializedCheck]
    conditional: bool
    passed: bool
    certified: bool
    lipschitz_samples: NotRequired[int]


class SerializedIssue(TypedDict):
    kind: str
    severity: str
    scope: str
    value: float
    threshold: float
    reason: str


class SerializedResiduals(TypedDict):
    sigma_bar_target: float
    sigma_bar_defect: float
    orbit_defects: list[float]
    bianchi_defect: float
    boundary_errors: dict[str, float | None]
    hartman_ok: bool | None
    ball_ok: bool | None
    convergence_ratio: float | None
    residual_level: float
    refined_residual_level: float | None
    floor_limited: bool
    sigma_bar_propagation_ok: bool
    targets_met: bool
    issues: list[SerializedIssue]


class SerializedSolution(TypedDict):
    provenance: Provenance
    nodes: int
    r_start: float
    r_end: float
    h_start: float
    tau: float | None
    kappa: float | None
    diagnostics: dict[str, Any]


@dataclass(frozen=True)
class CertificateCheck:
    name: str
    status: CheckStatus
    value: float | None
    threshold: float | None = None
    margin: float | None = None

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_serialized(self) -> SerializedCheck:
        return {
            "name": self.name,
            "status": self.status,
            "value": self.value,
            "threshold": self.threshold,
            "margin": self.margin,
        }


@dataclass(slots=True)
class CertificateReport:
    """Every explicit constant of the existence theory plus the hypothesis verdicts."""

    mode: CertificateMode
    rho0: float
    rho1: float
    sigma1: float
    eps0: float
    theta_vec: np.ndarray
    theta: float
    theta1: float | None
    theta2: float | None
    big_sigma: float | None
    sigma0: float | None
    ball_radius: float | None
    c1: float
    c2: float
    theta3: float | None = None
    contraction_factor: float | None = None
    checks: list[CertificateCheck] = field(default_factory=list)
    lipschitz_samples: int = 0

    @property
    def conditional(self) -> bool:
        return self.mode == "indefinite" or any(c.status == "conditional" for c in self.checks)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def certified(self) -> bool:
        return self.passed and not self.conditional

    def check(self, name: str) -> CertificateCheck | None:
        return next((check for check in self.checks if check.name == name), None)

    def to_serialized(self) -> SerializedCertificate:
        return {
            "mode": self.mode,
            "rho0": self.rho0,
            "rho1": self.rho1,
            "sigma1": self.sigma1,
            "eps0": self.eps0,
            "theta_vec": [float(v) for v in self.theta_vec],
            "theta": self.theta,
            "theta1": self.theta1,
            "theta2": self.theta2,
            "theta3": self.theta3,
            "big_sigma": self.big_sigma,
            "sigma0": self.sigma0,
            "ball_radius": self.ball_radius,
            "c1": self.c1,
            "c2": self.c2,
            "contraction_factor": self.contraction_factor,
            "checks": [check.to_serialized() for check in self.checks],
            "conditional": self.conditional,
            "passed": self.passed,
            "certified": self.certified,
            "lipschitz_samples": self.lipschitz_samples,
        }


@dataclass(slots=True)
class MetricSolution:
    """Metric functions sampled on a uniform r-grid; f and fp carry the module index last."""

    r: np.ndarray
    f: np.ndarray
    fp: np.ndarray
    h: np.ndarray
    hp: np.ndarray
    provenance: Provenance
    tau: float | None = None
    kappa: float | None = None
    fpp: np.ndarray | None = None
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def nodes(self) -> int:
        return int(self.r.shape[0])

    @property
    def n(self) -> int:
        return int(self.f.shape[1])

    def to_serialized(self) -> SerializedSolution:
        return {
            "provenance": self.provenance,
            "nodes": self.nodes,
            "r_start": float(self.r[0]),
            "r_end": float(self.r[-1]),
            "h_start": float(self.h[0]),
            "tau": self.tau,
            "kappa": self.kappa,
            "diagnostics": dict(self.diagnostics),
        }


@dataclass(frozen=True)
class ResidualIssue:
    kind: str
    severity: str
    scope: str
    value: float
    threshold: float
    reason: str

    def to_serialized(self) -> SerializedIssue:
        return {
            "kind": self.kind,
            "severity": self.severity,
            "scope": self.scope,
            "value": self.value,
            "threshold": self.threshold,
            "reason": self.reason,
        }


def first_blocking_issue(issues: list[ResidualIssue]) -> ResidualIssue | None:
    return next((issue for issue in issues if issue.severity == "blocking"), None)


@dataclass(slots=True)
class ResidualReport:
    sigma_bar_target: float
    sigma_bar_defect: float
    orbit_defects: list[float]
    bianchi_defect: float
    boundary_errors: dict[str, float | None]
    hartman_ok: bool | None = None
    ball_ok: bool | None = None
    convergence_ratio: float | None = None
    refined_residual_level: float | None = None
    sigma_bar_propagation_ok: bool = True
    issues: list[ResidualIssue] = field(default_factory=list)

    @property
    def orbit_defect(self) -> float:
        return max(self.orbit_defects, default=0.0)

    @property
    def residual_level(self) -> float:
        return self.sigma_bar_defect + self.orbit_defect

    @property
    def floor_limited(self) -> bool:
        """Both refinement levels sit at the roundoff floor, so the ratio is noise."""
        if self.refined_residual_level is None:
            return False
        return max(self.residual_level, self.refined_residual_level) <= ROUNDOFF_FLOOR

    @property
    def targets_met(self) -> bool:
        return first_blocking_issue(self.issues) is None

    def to_serialized(self) -> SerializedResiduals:
        return {
            "sigma_bar_target": self.sigma_bar_target,
            "sigma_bar_defect": self.sigma_bar_defect,
            "orbit_defects": list(self.orbit_defects),
            "bianchi_defect": self.bianchi_defect,
            "boundary_errors": dict(self.boundary_errors),
            "hartman_ok": self.hartman_ok,
            "ball_ok": self.ball_ok,
            "convergence_ratio": self.convergence_ratio,
            "residual_level": self.residual_level,
            "refined_residual_level": self.refined_residual_level,
            "floor_limited": self.floor_limited,
            "sigma_bar_propagation_ok": self.sigma_bar_propagation_ok,
            "targets_met": self.targets_met,
            "issues": [issue.to_serialized() for issue in self.issues],
        }
