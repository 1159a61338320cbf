import numpy as np
import pytest
from conftest import su2_brackets
from numpy.testing import assert_allclose

from prescribedricci.errors import DomainError, HUndefined
from prescribedricci.geometry import (
    MetricJet,
    bianchi_coefficients,
    bianchi_residual,
    eval_F,
    eval_F_tilde,
    eval_H,
    eval_H1,
    eval_H2,
    eval_K,
    ricci_components,
    second_fundamental_form,
)
from prescribedricci.structure import BracketTable, HomogeneousStructure, compute_constants


def line_structure(dims):
    n = len(dims)
    return HomogeneousStructure(dims=dims, beta=np.zeros(n), gamma=np.zeros((n, n, n)))


def sample_structures():
    torus = HomogeneousStructure(
        dims=[1, 1], beta=[0, 0], gamma=np.zeros((2, 2, 2)), abelian=True
    )
    sphere = HomogeneousStructure(dims=[2], beta=[2.0], gamma=np.zeros((1, 1, 1)))
    berger = compute_constants(
        BracketTable(brackets=su2_brackets(), module_assignment={0: 1, 1: 2, 2: 3})
    )
    return [torus, sphere, berger]


def random_tuples(s, rng, count=1000):
    n = s.n
    return {
        "p": rng.uniform(0.5, 2.0, count),
        "x": rng.uniform(0.5, 2.0, (count, n)),
        "y": rng.uniform(-1.0, 1.0, (count, n)),
        "z": rng.uniform(-1.0, 1.0, (count, n)),
        "w": rng.uniform(-1.0, 1.0, (count, n)),
    }


def test_eval_H1_examples(torus_structure):
    assert eval_H1([1.0, 2.0], [0.0, 0.0], torus_structure) == pytest.approx(1.0)
    assert eval_H1([1.0, 1.0], [1.0, 1.0], torus_structure) == pytest.approx(-1.0)
    assert eval_H1([2.0], [3.0], line_structure([1])) == pytest.approx(1.0)


def test_eval_H2_examples(torus_structure, sphere_structure):
    assert eval_H2([1.0, 2.0], [4.0, 4.0], torus_structure) == pytest.approx(5.0)
    assert eval_H2([1.0], [2.0], sphere_structure) == pytest.approx(2.0)


def test_eval_H_examples(torus_structure):
    value = eval_H([1.0, 1.0], [0.0, 0.0], [1.0, 1.0], torus_structure)

    assert value == pytest.approx(1.0 / np.sqrt(2.0))
    with pytest.raises(HUndefined) as excinfo:
        eval_H([1.0, 1.0], [0.0, 0.0], [0.0, 0.0], torus_structure)
    assert excinfo.value.exit_code == 3


def test_eval_F_examples(torus_structure, sphere_structure):
    torus = eval_F(1.0, 0.0, [1.0, 1.0], [0.0, 0.0], [1.0, 2.0], torus_structure)
    sphere = eval_F(1.0, 0.0, [1.0], [0.0], [0.0], sphere_structure)

    assert_allclose(torus, [-1.0, -2.0])
    assert_allclose(sphere, [1.0])


def test_eval_K_examples():
    assert eval_K(1.0, [2.0], [3.0], [0.0], line_structure([1])) == pytest.approx(1.5)
    assert eval_K(1.0, [1.0], [0.0], [2.0], line_structure([2])) == pytest.approx(-2.0)


def test_eval_F_tilde_sphere_example(sphere_structure):
    value = eval_F_tilde(1.0, [1.0], [1.0], [0.0], [0.0], sphere_structure)

    assert_allclose(value, [2.0])


def test_kernels_reject_non_positive_arguments(torus_structure):
    with pytest.raises(DomainError):
        eval_H1([1.0, 0.0], [0.0, 0.0], torus_structure)
    with pytest.raises(DomainError):
        eval_K(-1.0, [1.0, 1.0], [0.0, 0.0], [0.0, 0.0], torus_structure)


def test_flat_torus_has_zero_ricci(torus_structure):
    ones = np.ones((5, 2))
    jet = MetricJet(h=np.ones(5), hp=np.zeros(5), f=ones, fp=0 * ones, fpp=0 * ones)

    components = ricci_components(jet, torus_structure)

    assert np.max(np.abs(components.sigma_bar)) <= 1e-12
    assert np.max(np.abs(components.orbit)) <= 1e-12
    assert components.sigma_bar.shape == (5,)


def test_round_three_sphere_components(sphere_structure):
    r = np.linspace(0.2, 2.9, 50)
    f = np.sin(r)[:, None]
    jet = MetricJet(h=np.ones(50), hp=np.zeros(50), f=f, fp=np.cos(r)[:, None], fpp=-f)

    components = ricci_components(jet, sphere_structure)

    assert_allclose(components.sigma_bar, 2.0, atol=1e-12)
    assert_allclose(components.orbit[:, 0], 2.0 * np.sin(r) ** 2, atol=1e-12)


def test_inversion_identity_on_random_jets():
    rng = np.random.default_rng(11)
    for s in sample_structures():
        v = random_tuples(s, rng)
        hp = eval_K(v["p"], v["x"], v["y"], v["w"], s)
        fpp = eval_F(v["p"], hp, v["x"], v["y"], v["z"], s)
        jet = MetricJet(h=v["p"], hp=hp, f=v["x"], fp=v["y"], fpp=fpp)

        components = ricci_components(jet, s)

        assert_allclose(components.orbit, v["z"], rtol=1e-12, atol=1e-10)
        expected = v["p"] ** 2 * eval_H2(v["x"], v["z"], s) + 1.0 - eval_H1(v["x"], v["y"], s)
        assert_allclose(components.sigma_bar, expected, rtol=1e-12, atol=1e-10)


def test_bianchi_residual_vanishes_along_K():
    rng = np.random.default_rng(12)
    for s in sample_structures():
        v = random_tuples(s, rng)
        hp = eval_K(v["p"], v["x"], v["y"], v["w"], s)
        jet = MetricJet(h=v["p"], hp=hp, f=v["x"], fp=v["y"], fpp=np.zeros_like(v["x"]))

        residual = bianchi_residual(jet, 1.0, 0.0, v["z"], v["w"], s)

        assert np.max(np.abs(residual)) <= 1e-12 * max(1.0, np.max(np.abs(hp)))


def test_bianchi_residual_example():
    s = line_structure([1])
    jet = MetricJet(h=1.0, hp=0.0, f=[1.0], fp=[1.0], fpp=[0.0])

    assert bianchi_residual(jet, 1.0, 0.0, [0.0], [0.0], s) == pytest.approx(1.0)


def test_H_squared_times_H2_recovers_H1():
    rng = np.random.default_rng(13)
    for s in sample_structures():
        v = random_tuples(s, rng)
        z = np.abs(v["z"]) + 3.0
        h1 = eval_H1(v["x"], v["y"], s)
        h2 = eval_H2(v["x"], z, s)
        usable = (h1 / h2) > 0.0
        x, y, z = v["x"][usable], v["y"][usable], z[usable]

        h = eval_H(x, y, z, s)

        assert_allclose(h**2 * eval_H2(x, z, s), eval_H1(x, y, s), rtol=1e-12, atol=1e-12)


def test_bianchi_coefficients_reassemble_K(torus_structure):
    x, y, w = np.array([1.0, 2.0]), np.array([0.3, -0.1]), np.array([0.5, 0.2])
    linear, cubic = bianchi_coefficients(x, y, w, torus_structure)

    assert 1.3 * linear - 1.3**3 * cubic == pytest.approx(eval_K(1.3, x, y, w, torus_structure))


def test_second_fundamental_form():
    assert_allclose(second_fundamental_form(2.0, [1.0, 3.0], [0.5, -1.0]), [-0.25, 1.5])
