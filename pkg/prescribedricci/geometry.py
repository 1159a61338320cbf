"""Closed-form curvature kernels of an invariant metric on the tube.

Every kernel broadcasts over leading batch axes; the module index is the last
axis of ``x``, ``y``, ``z`` and ``w``. Transverse quantities (``p``, ``q``,
``h``) carry only the batch axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, HUndefined
from .structure import HomogeneousStructure


def _require_positive(name: str, values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)) or np.any(values <= 0.0):
        raise DomainError(f"{name} must be positive and finite")


def _orbit(values: np.ndarray | list[float]) -> np.ndarray:
    return np.asarray(values, dtype=float)


def ricci_form(x: np.ndarray, s: HomogeneousStructure) -> np.ndarray:
    """G_i(x) = sum_{k,l} gamma[i,k,l] (x_i^4 - 2 x_k^4) / (4 x_k^2 x_l^2)."""
    x = _orbit(x)
    _require_positive("x", x)
    x_sq = x**2
    inv_sq = 1.0 / x_sq
    over = np.einsum("ikl,...k,...l->...i", s.gamma, inv_sq, inv_sq)
    mixed = np.einsum("ikl,...k,...l->...i", s.gamma, x_sq, inv_sq)
    return 0.25 * x_sq**2 * over - 0.5 * mixed


def eval_H1(x: np.ndarray, y: np.ndarray, s: HomogeneousStructure) -> np.ndarray:
    x, y = _orbit(x), _orbit(y)
    _require_positive("x", x)
    ratio = y / x
    trace = np.einsum("k,...k->...", s.dims, ratio)
    square = np.einsum("k,...k->...", s.dims, ratio**2)
    return 1.0 - trace**2 + square


def eval_H2(x: np.ndarray, z: np.ndarray, s: HomogeneousStructure) -> np.ndarray:
    x, z = _orbit(x), _orbit(z)
    _require_positive("x", x)
    terms = (z - 0.5 * s.beta - ricci_form(x, s)) / x**2
    return np.einsum("k,...k->...", s.dims, terms)


def eval_H(x: np.ndarray, y: np.ndarray, z: np.ndarray, s: HomogeneousStructure) -> np.ndarray:
    """H = sqrt(H1 / H2); HUndefined when H2 vanishes or the ratio is negative."""
    h1 = np.asarray(eval_H1(x, y, s))
    h2 = np.asarray(eval_H2(x, z, s))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = h1 / h2
    bad = (h2 == 0.0) | ~np.isfinite(ratio) | (ratio < 0.0)
    if np.any(bad):
        index = np.unravel_index(int(np.argmax(bad)), bad.shape) if bad.ndim else ()
        raise HUndefined(float(h1[index]), float(h2[index]))
    return np.sqrt(ratio)


def eval_F(
    p: np.ndarray | float,
    q: np.ndarray | float,
    x: np.ndarray,
    y: np.ndarray,
    z: np.ndarray,
    s: HomogeneousStructure,
) -> np.ndarray:
    """Right-hand side for f'' that makes the orbit Ricci components equal z."""
    p_arr = np.asarray(p, dtype=float)
    q_arr = np.asarray(q, dtype=float)
    x, y, z = _orbit(x), _orbit(y), _orbit(z)
    _require_positive("p", p_arr)
    _require_positive("x", x)
    p_col = p_arr[..., None]
    p_sq = p_col**2
    trace = np.einsum("k,...k->...", s.dims, y / x)[..., None]
    return (
        s.beta * p_sq / (2.0 * x)
        + p_sq * ricci_form(x, s) / x
        - y * trace
        + y**2 / x
        + q_arr[..., None] * y / p_col
        - p_sq * z / x
    )


def bianchi_coefficients(
    x: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    s: HomogeneousStructure,
) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients (A, B) with K(p, x, y, w) = p A - p^3 B."""
    x, y, w = _orbit(x), _orbit(y), _orbit(w)
    _require_positive("x", x)
    linear = np.einsum("k,...k->...", s.dims, y / x)
    cubic = np.einsum("k,...k->...", s.dims, w / (2.0 * x**2))
    return linear, cubic


def eval_K(
    p: np.ndarray | float,
    x: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    s: HomogeneousStructure,
) -> np.ndarray:
    p_arr = np.asarray(p, dtype=float)
    _require_positive("p", p_arr)
    linear, cubic = bianchi_coefficients(x, y, w, s)
    return p_arr * linear - p_arr**3 * cubic


def eval_F_tilde(
    p: np.ndarray | float,
    x: np.ndarray,
    y: np.ndarray,
    z: np.ndarray,
    w: np.ndarray,
    s: HomogeneousStructure,
) -> np.ndarray:
    return eval_F(p, eval_K(p, x, y, w, s), x, y, z, s)


@dataclass(frozen=True)
class MetricJet:
    """Second-order jet (h, h', f, f', f'') of the metric functions."""

    h: np.ndarray
    hp: np.ndarray
    f: np.ndarray
    fp: np.ndarray
    fpp: np.ndarray


@dataclass(frozen=True)
class RicciComponents:
    sigma_bar: np.ndarray
    orbit: np.ndarray


def ricci_components(jet: MetricJet, s: HomogeneousStructure) -> RicciComponents:
    h = np.asarray(jet.h, dtype=float)
    hp = np.asarray(jet.hp, dtype=float)
    f, fp, fpp = _orbit(jet.f), _orbit(jet.fp), _orbit(jet.fpp)
    _require_positive("h", h)
    _require_positive("f", f)

    h_col = h[..., None]
    hp_col = hp[..., None]
    sigma_bar = -np.einsum("k,...k->...", s.dims, fpp / f - hp_col * fp / (h_col * f))
    trace = np.einsum("k,...k->...", s.dims, fp / f)[..., None]
    h_sq = h_col**2
    orbit = (
        0.5 * s.beta
        + ricci_form(f, s)
        - f * fp * trace / h_sq
        + fp**2 / h_sq
        - f * fpp / h_sq
        + f * hp_col * fp / h_col**3
    )
    return RicciComponents(sigma_bar=sigma_bar, orbit=orbit)


def bianchi_residual(
    jet: MetricJet,
    sigma_bar: np.ndarray | float,
    sigma_bar_p: np.ndarray | float,
    phi: np.ndarray,
    phi_p: np.ndarray,
    s: HomogeneousStructure,
) -> np.ndarray:
    """Defect of the contracted Bianchi identity; zero when it holds."""
    h = np.asarray(jet.h, dtype=float)
    hp = np.asarray(jet.hp, dtype=float)
    f, fp = _orbit(jet.f), _orbit(jet.fp)
    phi, phi_p = _orbit(phi), _orbit(phi_p)
    _require_positive("h", h)
    _require_positive("f", f)
    sb = np.asarray(sigma_bar, dtype=float)
    sbp = np.asarray(sigma_bar_p, dtype=float)

    h_sq = h**2
    orbit_sum = np.einsum(
        "k,...k->...",
        s.dims,
        phi_p / (2.0 * f**2) - sb[..., None] * fp / (h_sq[..., None] * f),
    )
    return sbp / (2.0 * h_sq) - sb * hp / h**3 - orbit_sum


def second_fundamental_form(
    h: np.ndarray | float,
    f: np.ndarray,
    fp: np.ndarray,
) -> np.ndarray:
    """Coefficients delta_k of the orbit's second fundamental form on each module."""
    h_arr = np.asarray(h, dtype=float)
    _require_positive("h", h_arr)
    return -_orbit(f) * _orbit(fp) / h_arr[..., None]
