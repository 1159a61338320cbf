"""Homogeneous structure of the principal orbit and its brute-force constants."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import InvalidStructure, NotIsotypic

logger = logging.getLogger(__name__)

ALGEBRA_TOLERANCE = 1e-12
CONSTANT_TOLERANCE = 1e-10
NEGATIVE_TOLERANCE = 1e-14


def _frozen(values: object, dtype: type) -> np.ndarray:
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class HomogeneousStructure:
    """Module dimensions d_k and the constant arrays beta_k, gamma[k, l, m]."""

    dims: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    abelian: bool = False

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "dims", _frozen(self.dims, int))
            object.__setattr__(self, "beta", _frozen(self.beta, float))
            object.__setattr__(self, "gamma", _frozen(self.gamma, float))
        except (TypeError, ValueError) as exc:
            raise InvalidStructure(f"structure arrays are not numeric: {exc}") from exc
        object.__setattr__(self, "abelian", bool(self.abelian))

    @property
    def n(self) -> int:
        return int(self.dims.shape[0]) if self.dims.ndim == 1 else 0

    @property
    def d(self) -> int:
        """Dimension of the tube: one transverse direction plus the orbit."""
        return 1 + int(self.dims.sum())

    def to_serialized(self) -> dict[str, object]:
        return {
            "n": self.n,
            "d": self.d,
            "dims": self.dims.tolist(),
            "beta": self.beta.tolist(),
            "gamma": self.gamma.tolist(),
            "abelian": self.abelian,
        }


@dataclass(frozen=True, eq=False)
class BracketTable:
    """Structure constants c[i, j, s] of g in a Q-orthonormal adapted basis.

    ``module_assignment`` maps each basis index outside ``k_indices`` to its
    module label, counted from 1.
    """

    brackets: np.ndarray
    k_indices: tuple[int, ...] = ()
    module_assignment: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "brackets", _frozen(self.brackets, float))
        object.__setattr__(self, "k_indices", tuple(int(i) for i in self.k_indices))
        object.__setattr__(
            self,
            "module_assignment",
            {int(index): int(label) for index, label in dict(self.module_assignment).items()},
        )

    @property
    def dim_g(self) -> int:
        return int(self.brackets.shape[0])

    @property
    def n_modules(self) -> int:
        return max(self.module_assignment.values(), default=0)

    def module_indices(self, label: int) -> np.ndarray:
        return np.array(
            sorted(index for index, owner in self.module_assignment.items() if owner == label),
            dtype=int,
        )


@dataclass(frozen=True)
class ConstantsDiagnostics:
    beta_spread: float
    gamma_spread: float

    @property
    def spread(self) -> float:
        return max(self.beta_spread, self.gamma_spread)

    def to_serialized(self) -> dict[str, float]:
        return {"beta_spread": self.beta_spread, "gamma_spread": self.gamma_spread}


def validate_structure(s: HomogeneousStructure) -> HomogeneousStructure:
    """Return ``s`` unchanged, or raise InvalidStructure naming the broken invariant."""
    if s.dims.ndim != 1 or s.n < 1:
        raise InvalidStructure("dims must be a non-empty list of module dimensions")
    n = s.n
    if s.beta.shape != (n,):
        raise InvalidStructure(f"beta must have length n={n}, got shape {s.beta.shape}")
    if s.gamma.shape != (n, n, n):
        raise InvalidStructure(f"gamma must have shape {(n, n, n)}, got {s.gamma.shape}")
    if not (np.all(np.isfinite(s.beta)) and np.all(np.isfinite(s.gamma))):
        raise InvalidStructure("beta and gamma must be finite")
    if np.any(s.dims < 1):
        raise InvalidStructure(f"every module dimension must be >= 1, got {s.dims.tolist()}")
    if s.d < 3:
        raise InvalidStructure(f"tube dimension d = 1 + sum(dims) must be >= 3, got {s.d}")
    if np.any(s.beta < -NEGATIVE_TOLERANCE):
        raise InvalidStructure(f"beta must be nonnegative, got {s.beta.tolist()}")
    if np.any(s.gamma < -NEGATIVE_TOLERANCE):
        raise InvalidStructure("gamma must be nonnegative")
    weighted = s.dims[:, None, None] * s.gamma
    asymmetry = max(
        float(np.max(np.abs(weighted - weighted.transpose(axes))))
        for axes in itertools.permutations(range(3))
    )
    if asymmetry > CONSTANT_TOLERANCE * max(1.0, float(np.max(np.abs(weighted)))):
        raise InvalidStructure(
            f"d_k gamma[k][l][m] must be symmetric in k, l, m (defect {asymmetry:.3e})"
        )
    if s.abelian:
        if np.any(s.beta != 0.0) or np.any(s.gamma != 0.0):
            raise InvalidStructure("abelian structures must have beta = 0 and gamma = 0")
    elif not np.any(s.beta > 0.0):
        raise InvalidStructure(
            "non-abelian structures need at least one strictly positive beta_k "
            "(set abelian for a torus-type orbit)"
        )
    return s


def validate_bracket_table(b: BracketTable) -> BracketTable:
    c = b.brackets
    dim = b.dim_g
    if c.ndim != 3 or c.shape != (dim, dim, dim) or dim < 1:
        raise InvalidStructure(f"brackets must be a cube dim_g x dim_g x dim_g, got {c.shape}")
    if not np.all(np.isfinite(c)):
        raise InvalidStructure("brackets must be finite")

    k = set(b.k_indices)
    if any(index < 0 or index >= dim for index in k):
        raise InvalidStructure(f"k_indices out of range for dim_g={dim}")
    assigned = set(b.module_assignment)
    expected = set(range(dim)) - k
    if assigned != expected:
        missing = sorted(expected - assigned)
        extra = sorted(assigned - expected)
        raise InvalidStructure(
            f"module assignment must cover exactly the non-k indices (missing {missing}, "
            f"unexpected {extra})"
        )
    labels = set(b.module_assignment.values())
    if labels != set(range(1, len(labels) + 1)):
        raise InvalidStructure(f"module labels must be 1..n without gaps, got {sorted(labels)}")

    antisymmetry = float(np.max(np.abs(c + c.transpose(1, 0, 2))))
    if antisymmetry > ALGEBRA_TOLERANCE:
        raise InvalidStructure(f"bracket is not antisymmetric (defect {antisymmetry:.3e})")

    # Q([x, y], z) + Q(y, [x, z]) = 0 in an orthonormal basis.
    invariance = float(np.max(np.abs(c + c.transpose(0, 2, 1))))
    if invariance > ALGEBRA_TOLERANCE:
        raise InvalidStructure(f"bracket is not Q-invariant (defect {invariance:.3e})")

    jacobi = (
        np.einsum("ijs,skt->ijkt", c, c)
        + np.einsum("jks,sit->ijkt", c, c)
        + np.einsum("kis,sjt->ijkt", c, c)
    )
    jacobi_defect = float(np.max(np.abs(jacobi))) if jacobi.size else 0.0
    if jacobi_defect > ALGEBRA_TOLERANCE:
        raise InvalidStructure(f"Jacobi identity fails (defect {jacobi_defect:.3e})")

    if k:
        k_idx = np.array(sorted(k), dtype=int)
        outside = np.array(sorted(expected), dtype=int)
        if outside.size:
            leak = float(np.max(np.abs(c[np.ix_(k_idx, k_idx, outside)])))
            if leak > ALGEBRA_TOLERANCE:
                raise InvalidStructure(f"k is not closed under the bracket (defect {leak:.3e})")
    return b


def killing_form(c: np.ndarray) -> np.ndarray:
    """Kil[a, b] = trace(ad_a @ ad_b) for structure constants c[i, j, s]."""
    return np.einsum("asi,bis->ab", c, c)


def compute_constants_with_diagnostics(
    b: BracketTable,
    abelian: bool | None = None,
) -> tuple[HomogeneousStructure, ConstantsDiagnostics]:
    validate_bracket_table(b)
    c = b.brackets
    n = b.n_modules
    modules = [b.module_indices(label) for label in range(1, n + 1)]
    killing = killing_form(c)

    dims = np.array([indices.size for indices in modules], dtype=int)
    beta = np.zeros(n)
    gamma = np.zeros((n, n, n))
    beta_spread = 0.0
    gamma_spread = 0.0

    for k, p_k in enumerate(modules):
        block = -killing[np.ix_(p_k, p_k)]
        diagonal = np.diag(block)
        beta[k] = float(diagonal.mean())
        off_diagonal = block - np.diag(diagonal)
        beta_spread = max(
            beta_spread,
            float(np.max(np.abs(diagonal - beta[k]))),
            float(np.max(np.abs(off_diagonal))),
        )
        for l, p_l in enumerate(modules):
            for m, p_m in enumerate(modules):
                projected = c[np.ix_(p_k, p_l, p_m)]
                # gram[a, b] = sum_{i in p_l, s in p_m} c[a, i, s] c[b, i, s]
                gram = np.einsum("ais,bis->ab", projected, projected)
                values = np.diag(gram)
                gamma[k, l, m] = float(values.mean())
                gamma_spread = max(
                    gamma_spread,
                    float(np.max(np.abs(values - gamma[k, l, m]))),
                    float(np.max(np.abs(gram - np.diag(values)))),
                )

    diagnostics = ConstantsDiagnostics(beta_spread=beta_spread, gamma_spread=gamma_spread)
    logger.info(
        "Computed constants for %d modules (beta spread %.3e, gamma spread %.3e)",
        n,
        beta_spread,
        gamma_spread,
    )
    if diagnostics.spread > CONSTANT_TOLERANCE:
        raise NotIsotypic(
            "module assignment does not define basis-independent constants "
            f"(spread {diagnostics.spread:.3e})",
            spread=diagnostics.spread,
        )

    beta[np.abs(beta) <= NEGATIVE_TOLERANCE] = 0.0
    gamma[np.abs(gamma) <= NEGATIVE_TOLERANCE] = 0.0
    if abelian is None:
        abelian = bool(np.all(np.abs(c) <= ALGEBRA_TOLERANCE))
    if abelian:
        beta = np.zeros(n)
        gamma = np.zeros((n, n, n))
    structure = HomogeneousStructure(dims=dims, beta=beta, gamma=gamma, abelian=abelian)
    return validate_structure(structure), diagnostics


def compute_constants(b: BracketTable, abelian: bool | None = None) -> HomogeneousStructure:
    """Brute-force beta_k and gamma[k, l, m] from a bracket table."""
    structure, _ = compute_constants_with_diagnostics(b, abelian=abelian)
    return structure


def change_basis(b: BracketTable, rotation: np.ndarray) -> BracketTable:
    """Rewrite the table in the basis e'_i = sum_a rotation[i, a] e_a.

    ``rotation`` must be orthogonal and map each module and k into itself.
    """
    p = np.asarray(rotation, dtype=float)
    rotated = np.einsum("ia,jb,sc,abc->ijs", p, p, p, b.brackets)
    return BracketTable(
        brackets=rotated,
        k_indices=b.k_indices,
        module_assignment=b.module_assignment,
    )
