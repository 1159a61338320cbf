"""Invariant prescribed Ricci curvature on cohomogeneity-one tubes."""

__version__ = "0.1.0"

from .certificates import check_global, check_local
from .config import RunConfig
from .geometry import eval_F, eval_F_tilde, eval_H, eval_H1, eval_H2, eval_K, ricci_form
from .models import CertificateReport, MetricSolution, ResidualReport
from .problem import BoundsEnvelope, OrbitData, ProblemData, SmoothProfile, tightest_envelope
from .shooting import local_shoot, theorem_recipe
from .solver import Grid, background, fixed_point_solve
from .structure import (
    BracketTable,
    HomogeneousStructure,
    compute_constants,
    validate_structure,
)
from .utils import setup_logging
from .verification import verify

__all__ = [
    "__version__",
    "RunConfig",
    "BracketTable",
    "HomogeneousStructure",
    "compute_constants",
    "validate_structure",
    "SmoothProfile",
    "ProblemData",
    "OrbitData",
    "BoundsEnvelope",
    "tightest_envelope",
    "ricci_form",
    "eval_H1",
    "eval_H2",
    "eval_H",
    "eval_F",
    "eval_K",
    "eval_F_tilde",
    "check_global",
    "check_local",
    "CertificateReport",
    "MetricSolution",
    "ResidualReport",
    "Grid",
    "background",
    "fixed_point_solve",
    "local_shoot",
    "theorem_recipe",
    "verify",
    "setup_logging",
]
