"""Local shooting from one orbit and the interpolated-boundary recipe."""

from __future__ import annotations

import logging

import numpy as np
from scipy.integrate import solve_ivp

from .certificates import check_local
from .errors import Breakdown, InvalidProblem, LocalHypothesisFailed, RecipeFailed
from .geometry import eval_F_tilde, eval_H1, eval_H2, eval_K, second_fundamental_form
from .models import MetricSolution
from .problem import OrbitData, ProblemData, interpolated_orbit, profiles_on_r
from .solver import Grid

logger = logging.getLogger(__name__)

POSITIVITY_THRESHOLD = 1e-6
RTOL = 1e-10
ATOL = 1e-12
MAX_STEP_INTERVALS = 4
RECIPE_DOUBLINGS = 20
_STATE_FLOOR = 1e-12


def _initial_state(od: OrbitData, p: ProblemData) -> tuple[np.ndarray, float]:
    s = p.structure
    h2 = float(eval_H2(od.a_tau, p.phi_hat(od.tau), s))
    h1 = float(eval_H1(od.a_tau, od.delta_tau / od.a_tau, s))
    h0 = (h2 + 1.0 - h1) ** -0.5
    fp0 = -h0 * od.delta_tau / od.a_tau
    return np.concatenate([od.a_tau, fp0, [h0]]), h0


def local_shoot(
    od: OrbitData,
    p: ProblemData,
    g: Grid,
    max_span: float = 1.0,
) -> MetricSolution:
    """Integrate the reduced system both ways from r = sigma * tau.

    ``max_span`` and the reached half-width ``kappa`` are measured in t = r / sigma.
    """
    verdict, lhs = check_local(od, p)
    if not verdict:
        raise LocalHypothesisFailed(lhs)
    if max_span <= 0.0:
        raise InvalidProblem(f"max_span must be positive, got {max_span}")

    s = p.structure
    n = p.n
    sigma = p.sigma
    phi_of, phi_p_of = profiles_on_r(p)
    nodes = g.nodes
    r0 = sigma * od.tau
    y0, h0 = _initial_state(od, p)

    def rhs(r: float, state: np.ndarray) -> np.ndarray:
        f = np.maximum(state[:n], _STATE_FLOOR)
        fp = state[n : 2 * n]
        h = max(state[2 * n], _STATE_FLOOR)
        phi = phi_of(r)
        phi_p = phi_p_of(r)
        fpp = eval_F_tilde(h, f, fp, phi, phi_p, s)
        hp = eval_K(h, f, fp, phi_p, s)
        return np.concatenate([fp, fpp, [hp]])

    def orbit_collapse(r: float, state: np.ndarray) -> float:
        return float(np.min(state[:n])) - POSITIVITY_THRESHOLD

    def transverse_collapse(r: float, state: np.ndarray) -> float:
        return float(state[2 * n]) - POSITIVITY_THRESHOLD

    for event in (orbit_collapse, transverse_collapse):
        event.terminal = True  # type: ignore[attr-defined]
        event.direction = -1  # type: ignore[attr-defined]

    reached: list[float] = []
    rows_r: list[np.ndarray] = []
    rows_y: list[np.ndarray] = []
    for sign in (1.0, -1.0):
        end = r0 + sign * max_span * sigma
        end = min(end, sigma) if sign > 0 else max(end, 0.0)
        if end == r0:
            reached.append(max_span)
            continue
        if sign > 0:
            t_eval = nodes[(nodes >= r0) & (nodes <= end)]
        else:
            t_eval = nodes[(nodes <= r0) & (nodes >= end)][::-1]
        result = solve_ivp(
            rhs,
            (r0, end),
            y0,
            method="RK45",
            t_eval=t_eval,
            rtol=RTOL,
            atol=ATOL,
            max_step=MAX_STEP_INTERVALS * g.spacing,
            events=[orbit_collapse, transverse_collapse],
        )
        if result.status == 0:
            reached.append(max_span)
        else:
            stops = [float(times[0]) for times in result.t_events or [] if len(times)]
            stop = stops[0] if stops else float(result.t[-1]) if result.t.size else r0
            reached.append(abs(stop - r0) / sigma)
            logger.warning(
                "Shooting %s from r=%.6g stopped at r=%.6g (%s)",
                "forward" if sign > 0 else "backward",
                r0,
                stop,
                result.message,
            )
        rows_r.append(result.t)
        rows_y.append(result.y.T)

    kappa = float(min(reached))
    r = np.concatenate(rows_r) if rows_r else np.empty(0)
    states = np.vstack(rows_y) if rows_y else np.empty((0, 2 * n + 1))
    order = np.argsort(r, kind="stable")
    r, states = r[order], states[order]
    r, unique = np.unique(r, return_index=True)
    states = states[unique]
    window = (r >= r0 - kappa * sigma - 1e-12 * sigma) & (r <= r0 + kappa * sigma + 1e-12 * sigma)
    r, states = r[window], states[window]

    f = states[:, :n]
    fp = states[:, n : 2 * n]
    h = states[:, 2 * n]
    hp = eval_K(h, f, fp, phi_p_of(r), s) if r.size else np.empty(0)
    delta = second_fundamental_form(h0, od.a_tau, y0[n : 2 * n])
    solution = MetricSolution(
        r=r,
        f=f,
        fp=fp,
        h=h,
        hp=hp,
        provenance="local-shoot",
        tau=od.tau,
        kappa=kappa,
        diagnostics={
            "lhs": lhs,
            "h_tau": h0,
            "identity_gap": abs(-1.0 / h0**2 - lhs),
            "r_tau": r0,
            "max_span": max_span,
            "second_fundamental_form": [float(v) for v in delta],
        },
    )
    if kappa < max_span:
        raise Breakdown(kappa, solution)
    logger.info("Local solution around tau=%.6g reached kappa=%.6g", od.tau, kappa)
    return solution


def theorem_recipe(
    tau: float,
    beta_param: float,
    p: ProblemData,
    g: Grid,
    max_span: float = 1.0,
) -> MetricSolution:
    """Shoot from the orbit with metric interpolating a, b and umbilic second fundamental form.

    beta_param is doubled until the local condition holds.
    """
    if beta_param <= 0.0:
        raise InvalidProblem(f"beta_param must be positive, got {beta_param}")
    a_tau = interpolated_orbit(p, tau)
    trace: list[tuple[float, float]] = []
    beta = float(beta_param)
    for _ in range(RECIPE_DOUBLINGS + 1):
        od = OrbitData(tau=tau, a_tau=a_tau, delta_tau=np.full(p.n, beta))
        verdict, lhs = check_local(od, p)
        trace.append((beta, lhs))
        if verdict:
            break
        beta *= 2.0
    else:
        raise RecipeFailed(trace)

    logger.info("Recipe accepted beta=%.6g after %d attempt(s)", beta, len(trace))
    solution = local_shoot(od, p, g, max_span=max_span)
    solution.diagnostics["beta"] = beta
    solution.diagnostics["recipe_trace"] = [{"beta": b, "lhs": v} for b, v in trace]
    return solution
