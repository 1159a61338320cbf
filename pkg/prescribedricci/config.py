"""Run configuration: file loading, shared .env defaults and problem construction."""

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, TypeVar

import numpy as np
import yaml  # type: ignore[import-untyped]
from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import InvalidConfig
from .problem import (
    DEFAULT_GRID_POINTS,
    DEFAULT_RHO_BAR,
    OrbitData,
    ProblemData,
    SmoothProfile,
    validate_problem,
)
from .solver import DEFAULT_GRID_SIZE, DEFAULT_MAX_ITER, DEFAULT_TOL
from .structure import (
    BracketTable,
    ConstantsDiagnostics,
    HomogeneousStructure,
    compute_constants_with_diagnostics,
    validate_structure,
)
from .verification import DEFAULT_RESIDUAL_TARGET

logger = logging.getLogger(__name__)
T = TypeVar("T")

APP_NAME = "prescribedricci"
CONFIG_EXTENSIONS = (".yaml", ".yml", ".json")
ENV_FILENAME = ".env"
ENV_PREFIX = "PRESCRIBEDRICCI_"
DEFAULT_OUTPUT_ROOT = Path("runs")
DEFAULT_SEED = 0
DEFAULT_SAMPLES = 100_000
DEFAULT_DAMPING = 1.0

Mode = Literal["standard", "abelian", "indefinite"]


class BracketTableSpec(BaseModel):
    """Bracket table in a Q-orthonormal basis, indices counted from 1."""

    model_config = ConfigDict(extra="forbid")

    dim_g: int = Field(gt=0, description="Dimension of the Lie algebra g.")
    entries: list[tuple[int, int, int, float]] = Field(
        default_factory=list,
        description=(
            "Nonzero structure constants [i, j, s, value] meaning [e_i, e_j] has e_s-component "
            "value; the antisymmetric partner is filled in unless listed."
        ),
    )
    k_indices: list[int] = Field(
        default_factory=list, description="Basis vectors spanning the isotropy algebra k."
    )
    modules: list[list[int]] = Field(
        description="Basis vectors of p_1, ..., p_n, one list per module."
    )

    @model_validator(mode="after")
    def _check_indices(self) -> "BracketTableSpec":
        used = [i for entry in self.entries for i in entry[:3]]
        used += self.k_indices + [i for module in self.modules for i in module]
        bad = sorted({i for i in used if not 1 <= i <= self.dim_g})
        if bad:
            raise ValueError(f"basis indices out of range 1..{self.dim_g}: {bad}")
        if not self.modules or any(not module for module in self.modules):
            raise ValueError("modules must be non-empty lists of basis indices")
        return self

    def to_table(self) -> BracketTable:
        brackets = np.zeros((self.dim_g, self.dim_g, self.dim_g))
        explicit = {(i, j, s) for i, j, s, _ in self.entries}
        for i, j, s, value in self.entries:
            brackets[i - 1, j - 1, s - 1] = value
            if (j, i, s) not in explicit:
                brackets[j - 1, i - 1, s - 1] = -value
        assignment = {
            index - 1: label
            for label, module in enumerate(self.modules, start=1)
            for index in module
        }
        return BracketTable(
            brackets=brackets,
            k_indices=tuple(i - 1 for i in self.k_indices),
            module_assignment=assignment,
        )


class StructureSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dims: list[int] | None = Field(default=None, description="Module dimensions d_k.")
    beta: list[float] | None = Field(default=None, description="Killing coefficients beta_k.")
    gamma: list[list[list[float]]] | None = Field(
        default=None, description="Bracket projection constants gamma[k][l][m]."
    )
    abelian: bool | None = Field(default=None, description="Orbit is an abelian group.")
    brackets: BracketTableSpec | None = Field(
        default=None, description="Compute constants from a bracket table instead."
    )

    @model_validator(mode="after")
    def _one_source(self) -> "StructureSpec":
        if (self.brackets is None) == (self.dims is None):
            raise ValueError("give either dims (with beta/gamma) or brackets, not both")
        return self

    def build(self, mode: Mode) -> tuple[HomogeneousStructure, ConstantsDiagnostics | None]:
        abelian = self.abelian if self.abelian is not None else (mode == "abelian" or None)
        if self.brackets is not None:
            return compute_constants_with_diagnostics(self.brackets.to_table(), abelian=abelian)
        assert self.dims is not None
        n = len(self.dims)
        structure = HomogeneousStructure(
            dims=self.dims,
            beta=self.beta if self.beta is not None else np.zeros(n),
            gamma=self.gamma if self.gamma is not None else np.zeros((n, n, n)),
            abelian=bool(abelian),
        )
        return validate_structure(structure), None


class ProfileSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    constant: float | None = None
    polynomial: list[float] | None = Field(default=None, description="Ascending coefficients in t.")
    spline: list[float] | None = Field(default=None, description="Samples on a uniform t-grid.")
    end_slopes: tuple[float, float] | None = Field(
        default=None, description="Clamp the spline derivative at t = 0 and t = 1."
    )

    @model_validator(mode="after")
    def _one_kind(self) -> "ProfileSpec":
        kinds = [k for k in (self.constant, self.polynomial, self.spline) if k is not None]
        if len(kinds) != 1:
            raise ValueError("a profile is exactly one of constant, polynomial or spline")
        if self.end_slopes is not None and self.spline is None:
            raise ValueError("end_slopes only applies to spline profiles")
        return self

    def build(self) -> SmoothProfile:
        if self.constant is not None:
            return SmoothProfile.constant(self.constant)
        if self.polynomial is not None:
            return SmoothProfile.polynomial(self.polynomial)
        assert self.spline is not None
        return SmoothProfile.spline(self.spline, self.end_slopes)


class ProblemSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    sigma: float = Field(gt=0, description="Transverse length of the tube.")
    a: list[float] = Field(description="Boundary coefficients at r = 0.")
    b: list[float] = Field(description="Boundary coefficients at r = sigma.")
    phi: list[ProfileSpec] = Field(description="Orbit profiles phi_hat_i on [0, 1].")
    sign_indefinite: bool | None = None


class EnvelopeSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    rho_bar: float = Field(default=DEFAULT_RHO_BAR, gt=0)
    rho_tilde: float | None = Field(
        default=None, description="Threshold for the sign-indefinite lower bound."
    )
    sigma_tilde: float | None = Field(
        default=None, gt=0, description="Largest certified sigma in sign-indefinite mode."
    )
    grid_points: int = Field(default=DEFAULT_GRID_POINTS, ge=3)


class LocalSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tau: float = Field(default=0.0, ge=0.0, le=1.0)
    a_tau: list[float] | None = None
    delta: list[float] | None = None
    beta_param: float | None = Field(default=None, gt=0)
    max_span: float = Field(default=1.0, gt=0)


def load_shared_env(config_dir: Path) -> dict[str, str]:
    """Load shared numeric defaults from the .env next to the run config."""
    env_path = config_dir / ENV_FILENAME
    if not env_path.exists():
        return {}
    return {key: value for key, value in dotenv_values(env_path).items() if value is not None}


def _load_config_data(config_path: Path) -> dict[str, object]:
    """Load YAML or JSON run configuration from disk."""
    if not config_path.exists():
        raise InvalidConfig(f"Config not found: {config_path}")

    content = config_path.read_text(encoding="utf-8")
    try:
        if config_path.suffix in (".yaml", ".yml"):
            data = yaml.safe_load(content)
        else:
            data = json.loads(content)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise InvalidConfig(f"Config is not valid YAML/JSON: {config_path}: {exc}") from exc

    if not isinstance(data, dict):
        raise InvalidConfig(f"Config must contain a mapping: {config_path}")
    return dict(data)


def _first_value(*values: T | None) -> T | None:
    """Return the first non-empty value."""
    for value in values:
        if value is not None:
            return value
    return None


def _mapping_section(data: dict[str, object], key: str) -> dict[str, object]:
    value = data.get(key)
    return dict(value) if isinstance(value, dict) else {}


def _optional_str(value: object) -> str | None:
    return value if isinstance(value, str) else None


def _parse_positive_int(value: object, default: int, field_name: str) -> int:
    """Parse a positive integer from config data."""
    if value is None:
        return default
    try:
        parsed = int(str(value))
    except (TypeError, ValueError):
        logger.warning("%s=%r is not valid. Using %s.", field_name, value, default)
        return default
    if parsed < 1:
        logger.warning("%s=%r is not valid. Using %s.", field_name, value, default)
        return default
    return parsed


def _parse_nonnegative_int(value: object, default: int, field_name: str) -> int:
    if value is None:
        return default
    try:
        parsed = int(str(value))
    except (TypeError, ValueError):
        parsed = -1
    if parsed < 0:
        logger.warning("%s=%r is not valid. Using %s.", field_name, value, default)
        return default
    return parsed


def _parse_positive_float(value: object, default: float, field_name: str) -> float:
    if value is None:
        return default
    try:
        parsed = float(str(value))
    except (TypeError, ValueError):
        parsed = float("nan")
    if not parsed > 0.0 or parsed == float("inf"):
        logger.warning("%s=%r is not valid. Using %s.", field_name, value, default)
        return default
    return parsed


def _parse_bool(value: object, default: bool) -> bool:
    return value if isinstance(value, bool) else default


def _parse_grid(value: object, default: int) -> int:
    grid = _parse_positive_int(value, default, "grid")
    if grid < 3 or grid % 2 == 0:
        logger.warning("grid=%r must be odd and >= 3. Using %s.", value, default)
        return default
    return grid


def _resolve_config_path(config_path: Path, raw_path: str | None) -> Path | None:
    """Resolve a path declared inside a config file."""
    if not raw_path:
        return None
    path = Path(raw_path).expanduser()
    if path.is_absolute():
        return path
    return config_path.parent / path


def _validated(model: type[BaseModel], data: object, section: str) -> BaseModel:
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise InvalidConfig(f"invalid '{section}' section: {exc}") from exc


@dataclass
class RunConfig:
    """One run: problem sections plus solver settings, file values over shared .env defaults."""

    name: str
    source_path: Path
    structure: StructureSpec
    problem: ProblemSpec
    mode: Mode = "standard"
    envelope: EnvelopeSpec = field(default_factory=EnvelopeSpec)
    local: LocalSpec = field(default_factory=LocalSpec)

    grid: int = DEFAULT_GRID_SIZE
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    damping: float = DEFAULT_DAMPING
    refine: bool = True
    sigma_bar_target: float = 1.0
    residual_target: float = DEFAULT_RESIDUAL_TARGET

    seed: int = DEFAULT_SEED
    samples: int = DEFAULT_SAMPLES
    theta3: bool = False

    output_dir: Path = DEFAULT_OUTPUT_ROOT

    @classmethod
    def from_file(cls, config_path: Path) -> "RunConfig":
        """Load a run config from YAML or JSON, filling gaps from the shared .env."""
        data = _load_config_data(config_path)
        shared_env = load_shared_env(config_path.parent)
        name = _optional_str(data.get("name")) or config_path.stem

        mode = data.get("mode", "standard")
        if mode not in ("standard", "abelian", "indefinite"):
            raise InvalidConfig(f"mode must be standard, abelian or indefinite, got {mode!r}")
        if "structure" not in data or "problem" not in data:
            raise InvalidConfig(f"Config needs 'structure' and 'problem' sections: {config_path}")

        structure = _validated(StructureSpec, data["structure"], "structure")
        problem = _validated(ProblemSpec, data["problem"], "problem")
        envelope = _validated(EnvelopeSpec, _mapping_section(data, "envelope"), "envelope")
        local = _validated(LocalSpec, _mapping_section(data, "local"), "local")

        solver = _mapping_section(data, "solver")
        sampling = _mapping_section(data, "sampling")
        output = _mapping_section(data, "output")

        output_dir = _resolve_config_path(config_path, _optional_str(output.get("dir")))
        if output_dir is None:
            env_root = shared_env.get(f"{ENV_PREFIX}OUTPUT_DIR")
            output_dir = (Path(env_root).expanduser() if env_root else DEFAULT_OUTPUT_ROOT) / name

        return cls(
            name=name,
            source_path=config_path,
            structure=structure,  # type: ignore[arg-type]
            problem=problem,  # type: ignore[arg-type]
            mode=mode,  # type: ignore[arg-type]
            envelope=envelope,  # type: ignore[arg-type]
            local=local,  # type: ignore[arg-type]
            grid=_parse_grid(
                _first_value(solver.get("grid"), shared_env.get(f"{ENV_PREFIX}GRID")),
                DEFAULT_GRID_SIZE,
            ),
            tol=_parse_positive_float(solver.get("tol"), DEFAULT_TOL, "tol"),
            max_iter=_parse_positive_int(solver.get("max_iter"), DEFAULT_MAX_ITER, "max_iter"),
            damping=min(
                _parse_positive_float(solver.get("damping"), DEFAULT_DAMPING, "damping"), 1.0
            ),
            refine=_parse_bool(solver.get("refine"), True),
            sigma_bar_target=_parse_positive_float(
                solver.get("sigma_bar_target"), 1.0, "sigma_bar_target"
            ),
            residual_target=_parse_positive_float(
                solver.get("residual_target"), DEFAULT_RESIDUAL_TARGET, "residual_target"
            ),
            seed=_parse_nonnegative_int(
                _first_value(sampling.get("seed"), shared_env.get(f"{ENV_PREFIX}SEED")),
                DEFAULT_SEED,
                "seed",
            ),
            samples=_parse_positive_int(sampling.get("samples"), DEFAULT_SAMPLES, "samples"),
            theta3=_parse_bool(sampling.get("theta3"), False),
            output_dir=output_dir,
        )

    def with_overrides(
        self,
        *,
        grid: int | None = None,
        seed: int | None = None,
        tol: float | None = None,
        max_iter: int | None = None,
        output_dir: Path | None = None,
    ) -> "RunConfig":
        """Apply command-line values, which take precedence over the file."""
        if grid is not None and (grid < 3 or grid % 2 == 0):
            raise InvalidConfig(f"--grid must be odd and >= 3, got {grid}")
        if max_iter is not None and max_iter < 1:
            raise InvalidConfig(f"--max-iter must be positive, got {max_iter}")
        if tol is not None and not tol > 0.0:
            raise InvalidConfig(f"--tol must be positive, got {tol}")
        if seed is not None and seed < 0:
            raise InvalidConfig(f"--seed must be nonnegative, got {seed}")
        return dataclasses.replace(
            self,
            grid=self.grid if grid is None else grid,
            seed=self.seed if seed is None else seed,
            tol=self.tol if tol is None else tol,
            max_iter=self.max_iter if max_iter is None else max_iter,
            output_dir=self.output_dir if output_dir is None else output_dir,
        )

    def build_structure(self) -> tuple[HomogeneousStructure, ConstantsDiagnostics | None]:
        return self.structure.build(self.mode)

    def build_problem(self, structure: HomogeneousStructure | None = None) -> ProblemData:
        if structure is None:
            structure, _ = self.build_structure()
        sign_indefinite = _first_value(self.problem.sign_indefinite, self.mode == "indefinite")
        problem = ProblemData(
            structure=structure,
            sigma=self.problem.sigma,
            phi=tuple(profile.build() for profile in self.problem.phi),
            a=self.problem.a,
            b=self.problem.b,
            sign_indefinite=bool(sign_indefinite),
        )
        return validate_problem(problem, self.envelope.grid_points)

    def build_orbit(self, problem: ProblemData) -> OrbitData:
        """Orbit data for a direct shoot; a_tau defaults to (1 - tau) a + tau b, delta to 0."""
        tau = self.local.tau
        a_tau = (
            np.asarray(self.local.a_tau, dtype=float)
            if self.local.a_tau is not None
            else (1.0 - tau) * problem.a + tau * problem.b
        )
        delta = (
            np.asarray(self.local.delta, dtype=float)
            if self.local.delta is not None
            else np.zeros(problem.n)
        )
        return OrbitData(tau=tau, a_tau=a_tau, delta_tau=delta)
