import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from prescribedricci.problem import ProblemData, SmoothProfile  # noqa: E402
from prescribedricci.structure import BracketTable, HomogeneousStructure  # noqa: E402

REPO_ROOT = Path(__file__).resolve().parents[1]
CONFIGS_DIR = REPO_ROOT / "configs"


def totally_antisymmetric(dim, entries):
    """Bracket cube with c[i, j, s] antisymmetric in every pair of slots (0-based entries)."""
    c = np.zeros((dim, dim, dim))
    for (i, j, s), value in entries.items():
        for (a, b, t), sign in (
            ((i, j, s), 1.0),
            ((j, s, i), 1.0),
            ((s, i, j), 1.0),
            ((j, i, s), -1.0),
            ((i, s, j), -1.0),
            ((s, j, i), -1.0),
        ):
            c[a, b, t] = sign * value
    return c


def su2_brackets():
    return totally_antisymmetric(3, {(0, 1, 2): 1.0})


@pytest.fixture
def torus_structure():
    return HomogeneousStructure(
        dims=[1, 1], beta=[0.0, 0.0], gamma=np.zeros((2, 2, 2)), abelian=True
    )


@pytest.fixture
def sphere_structure():
    return HomogeneousStructure(dims=[2], beta=[2.0], gamma=np.zeros((1, 1, 1)))


@pytest.fixture
def berger_table():
    return BracketTable(brackets=su2_brackets(), module_assignment={0: 1, 1: 2, 2: 3})


@pytest.fixture
def sphere_table():
    return BracketTable(brackets=su2_brackets(), k_indices=(2,), module_assignment={0: 1, 1: 1})


@pytest.fixture
def make_torus_problem(torus_structure):
    def build(sigma=0.05, a=(1.0, 1.0), b=(1.0, 1.0), phi=(1.0, 1.0), sign_indefinite=False):
        return ProblemData(
            structure=torus_structure,
            sigma=sigma,
            phi=tuple(SmoothProfile.constant(value) for value in phi),
            a=a,
            b=b,
            sign_indefinite=sign_indefinite,
        )

    return build


@pytest.fixture
def make_sphere_problem(sphere_structure):
    def build(sigma=0.1, a=(1.0,), b=(1.0,), phi=None):
        profile = phi if phi is not None else SmoothProfile.constant(2.0)
        return ProblemData(structure=sphere_structure, sigma=sigma, phi=(profile,), a=a, b=b)

    return build
