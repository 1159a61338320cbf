import numpy as np
import pytest
from numpy.testing import assert_allclose

from prescribedricci.certificates import check_global, compute_rho0, compute_rho1_sigma1
from prescribedricci.errors import InvalidProblem, NoConvergence
from prescribedricci.problem import SmoothProfile, tightest_envelope
from prescribedricci.solver import (
    Grid,
    PathPair,
    apply_C,
    b_norm,
    background,
    fixed_point_solve,
    hartman_ok,
)
from prescribedricci.verification import verify


def test_grid_must_be_odd_and_refines_to_double_minus_one():
    g = Grid(sigma=2.0, size=5)

    assert_allclose(g.nodes, [0.0, 0.5, 1.0, 1.5, 2.0])
    assert g.spacing == 0.5
    assert g.refined().size == 9
    with pytest.raises(InvalidProblem):
        Grid(sigma=1.0, size=4)
    with pytest.raises(InvalidProblem):
        Grid(sigma=1.0, size=1)


def test_b_norm_weights_derivative_by_sigma():
    g = Grid(sigma=0.5, size=3)
    pp = PathPair.zeros(g, 2)
    pp = PathPair(mu=pp.mu + [3.0, 4.0], mu_p=pp.mu_p + [0.0, 2.0], nu=pp.nu - 1.0)

    assert b_norm(pp, 0.5) == pytest.approx(5.0 + 0.5 * 2.0 + 1.0)


def test_torus_background_is_constant(make_torus_problem):
    p = make_torus_problem(sigma=0.05)
    bg = background(p, Grid.for_problem(p, 101))

    assert_allclose(bg.f, 1.0)
    assert_allclose(bg.fp, 0.0)
    assert_allclose(bg.h, 1.0 / np.sqrt(2.0), rtol=1e-14)
    assert_allclose(bg.hp, 0.0, atol=1e-14)


def test_background_stays_inside_bounds_under_sigma_halvings(make_sphere_problem):
    profile = SmoothProfile.polynomial([2.0, 0.5])
    for halvings in range(11):
        sigma = 0.5 / 2**halvings
        p = make_sphere_problem(sigma=sigma, phi=profile)
        env = tightest_envelope(p)
        rho0 = compute_rho0(env.omega1, env.omega2, p.structure, env)
        rho1, _ = compute_rho1_sigma1(env.alpha, env.omega1, env.omega2, rho0, p.structure)

        bg = background(p, Grid.for_problem(p, 201))

        assert np.all(bg.h > 1.0 / rho1)
        assert np.all(bg.h < rho1)


def test_sphere_background_matches_closed_form(make_sphere_problem):
    # h' = -h^3 with h(0) = 1/sqrt(2) gives 1/h^2 = 2 + 2r.
    p = make_sphere_problem(sigma=0.5, phi=SmoothProfile.polynomial([2.0, 0.5]))
    bg = background(p, Grid.for_problem(p, 201))

    assert_allclose(bg.h, 1.0 / np.sqrt(2.0 + 2.0 * bg.r), rtol=1e-10)


def test_apply_C_on_torus_from_zero(make_torus_problem):
    sigma = 0.05
    p = make_torus_problem(sigma=sigma)
    g = Grid.for_problem(p, 201)
    bg = background(p, g)

    image = apply_C(PathPair.zeros(g, 2), bg, p, g)

    r = g.nodes
    expected = -r * (r - sigma) / 4.0
    assert_allclose(image.mu, np.column_stack([expected, expected]), atol=1e-15)
    assert_allclose(image.mu_p[:, 0], -(2.0 * r - sigma) / 4.0, atol=1e-13)
    slope = sigma / 4.0
    assert image.nu[0] == pytest.approx((np.sqrt(1.0 - 2.0 * slope**2) - 1.0) / np.sqrt(2.0))


def test_hartman_bounds():
    xi = np.full((5, 1), 0.1)

    assert hartman_ok(xi, np.zeros((5, 1)), sigma=1.0, theta=1.0)
    assert not hartman_ok(xi, np.full((5, 1), 0.6), sigma=1.0, theta=1.0)


def test_certified_torus_solve_keeps_ball_and_hartman_bounds(make_torus_problem):
    short_tube = make_torus_problem(sigma=1e-9)
    sigma = 0.9 * check_global(short_tube, tightest_envelope(short_tube), samples=20_000).sigma0
    p = make_torus_problem(sigma=sigma)
    cert = check_global(p, tightest_envelope(p), samples=20_000)
    g = Grid.for_problem(p)

    sol = fixed_point_solve(p, cert, g)
    refined = fixed_point_solve(p, cert, g.refined())
    report = verify(sol, p, refined=refined)

    assert cert.certified
    assert sol.provenance == "global-fixed-point"
    assert sol.diagnostics["iterations"] <= 50
    assert sol.diagnostics["hartman_ok"] is True
    assert sol.diagnostics["ball_ok"] is True
    assert sol.diagnostics["ball_norm"] <= cert.ball_radius
    assert report.sigma_bar_defect <= 1e-6
    assert report.orbit_defect <= 1e-6
    assert report.targets_met
    assert_allclose(sol.f[0], p.a, atol=1e-15)
    assert_allclose(sol.f[-1], p.b, atol=1e-15)


def test_uncertified_solve_still_converges_and_verifies(make_torus_problem):
    p = make_torus_problem(sigma=0.05)
    cert = check_global(p, tightest_envelope(p), samples=5_000)
    sol = fixed_point_solve(p, cert, Grid.for_problem(p, 401))

    report = verify(sol, p)

    assert not cert.certified
    assert sol.diagnostics["ball_ok"] is None
    assert sol.diagnostics["certified"] is False
    assert report.targets_met
    assert np.all(sol.f >= 1.0)


def test_fixed_point_raises_no_convergence_when_capped(make_torus_problem):
    p = make_torus_problem(sigma=0.05)

    with pytest.raises(NoConvergence) as excinfo:
        fixed_point_solve(p, None, Grid.for_problem(p, 201), max_iter=1)

    assert excinfo.value.iterations == 1
    assert excinfo.value.exit_code == 4


def test_fixed_point_is_deterministic(make_torus_problem):
    p = make_torus_problem(sigma=0.05, b=(1.0005, 1.0))
    g = Grid.for_problem(p, 201)

    first = fixed_point_solve(p, None, g)
    second = fixed_point_solve(p, None, g)

    assert np.array_equal(first.f, second.f)
    assert np.array_equal(first.h, second.h)
