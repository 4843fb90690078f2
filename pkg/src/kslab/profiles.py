"""Self-similar profiles (G_eps, V_eps) by outward marching and mass targeting.

The profile solves the stationary rescaled system

    G = b exp(V - V(0) - r^2/4),      V'' + (1/r + eps r/2) V' + G = 0.

The V equation is discretised with the same conservative Laplacian and the
same skew form of (eps/2) x.grad used by the time stepper, and G is sampled
from the exponential closed form. Marching the three-term recursion outward
from the axis is an explicit initial value problem, so the computed pair is an
exact fixed point of the discrete rescaled dynamics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, SolverError
from .radial_core import (
    Field,
    RadialGrid,
    TWO_PI,
    gradient_l2_sq,
    gradient_values,
    hessian_l2_sq,
    japanese,
    laplacian_values,
    weighted_l2_sq,
)

EPS_STAR = 0.25
EIGHT_PI = 8.0 * math.pi


def transport_values(grid: RadialGrid, v: np.ndarray, outer) -> np.ndarray:
    """Discrete (1/2) x.grad v in the skew form (1/2) div(x v) - v.

    With face averages this operator satisfies <D v, v> = -1/2 ||v||^2 exactly in
    the control-volume inner product when the ghost value vanishes.
    """
    rf2 = grid.face_radii ** 2 / 4.0
    ghost = 0.0 if outer is None else outer
    vext = np.append(v, ghost)
    up = rf2 * (vext[1:] - v)
    if outer is None:
        up[-1] = 0.0
    down = np.concatenate(([0.0], rf2[:-1] * (v[1:] - v[:-1])))
    return (up + down) / grid.volumes


@dataclass(frozen=True)
class ProfilePair:
    G: Field
    V: Field
    dV: Field
    epsilon: float
    b: float
    M: float
    residual: float = 0.0
    certificates: dict = field(default_factory=dict)

    @property
    def grid(self) -> RadialGrid:
        return self.G.grid

    @property
    def far_field_slope(self) -> float:
        return float(abs(self.dV.values[-1]))


def _first_cell(grid: RadialGrid, epsilon: float, b: float) -> float:
    # choose G_0 so that the even extrapolation of G to r = 0 equals b
    r0, r1 = grid.nodes[0] ** 2, grid.nodes[1] ** 2
    c0 = grid.face_radii[0] / grid.spacing[0]
    a0 = grid.face_radii[0] ** 2 / 4.0
    w0 = grid.volumes[0]
    g0 = b
    for _ in range(100):
        delta = -w0 * g0 / (c0 + epsilon * a0)
        e = math.exp(delta - (r1 - r0) / 4.0)
        new = b * (r1 - r0) / (r1 - e * r0)
        if abs(new - g0) <= 1e-16 * b:
            g0 = new
            break
        g0 = new
    return g0


def _march(grid: RadialGrid, epsilon: float, b: float):
    r = grid.nodes
    rf = grid.face_radii
    c = rf / grid.spacing
    a = rf ** 2 / 4.0
    w = grid.volumes
    n = grid.n
    g0 = _first_cell(grid, epsilon, b)
    shift = r ** 2 / 4.0 - r[0] ** 2 / 4.0
    V = np.zeros(n + 1)
    G = np.zeros(n)
    prev = 0.0  # (c_{i-1} - eps a_{i-1}) (V_i - V_{i-1}), zero at the axis
    for i in range(n):
        gi = g0 * math.exp(V[i] - shift[i])
        G[i] = gi
        d = (prev - w[i] * gi) / (c[i] + epsilon * a[i])
        V[i + 1] = V[i] + d
        if i + 1 < n:
            prev = (c[i] - epsilon * a[i]) * d
    return G, V


def stationary_residual(grid: RadialGrid, epsilon: float, G: np.ndarray, V: np.ndarray, outer) -> np.ndarray:
    return laplacian_values(grid, V, outer) + epsilon * transport_values(grid, V, outer) + G


def shoot_profile(epsilon: float, b: float, grid: RadialGrid) -> ProfilePair:
    """Compute the profile with G(0) = b on ``grid``.

    V is returned in the gauge where its value at the ghost node is zero for
    eps > 0 and the Newtonian far-field value -(M/2pi) log r for eps = 0.
    """
    if not 0 <= epsilon < 0.5:
        raise DomainError(f"epsilon must lie in [0, 1/2), got {epsilon}")
    if not b > 0:
        raise DomainError(f"b must be positive, got {b}")
    G, Vext = _march(grid, epsilon, b)
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(Vext))):
        raise SolverError(f"profile march overflowed for eps={epsilon}, b={b}")
    M = TWO_PI * float(np.dot(grid.volumes, G))
    ghost = -M / TWO_PI * math.log(grid.ghost) if epsilon == 0 else 0.0
    Vext = Vext - Vext[-1] + ghost
    V = Vext[:-1]
    res = stationary_residual(grid, epsilon, G, V, ghost)
    rel = float(np.max(np.abs(res)) / max(b, 1e-300))
    Gf = Field(grid, G, "density")
    Vf = Field(grid, V, "potential", float(ghost))
    dV = Field(grid, gradient_values(grid, V, ghost))
    return ProfilePair(Gf, Vf, dV, float(epsilon), float(b), M, rel)


def profile_mass(epsilon: float, b: float, grid: RadialGrid) -> float:
    G, _ = _march(grid, epsilon, b)
    return TWO_PI * float(np.dot(grid.volumes, G))


def profile_for_mass(epsilon: float, M: float, grid: RadialGrid, eps_star: float = EPS_STAR,
                     rtol: float = 1e-10) -> ProfilePair:
    """Profile of prescribed mass by bracketing and Brent iteration on log b."""
    if not 0 < M < EIGHT_PI:
        raise DomainError(f"profile mass must lie in (0, 8 pi), got {M}")
    if not 0 <= epsilon < eps_star:
        raise DomainError(f"epsilon must lie in [0, {eps_star}), got {epsilon}")

    def gap(logb):
        return profile_mass(epsilon, math.exp(logb), grid) / M - 1.0

    # M(b) <= 4 pi b, so b = M/(4 pi) sits at or below the target
    lo = math.log(M / (4 * math.pi))
    glo = gap(lo)
    if glo > 0:
        raise SolverError("mass map exceeds 4 pi b at the lower bracket", glo)
    hi, ghi = lo, glo
    for _ in range(200):
        hi_new = hi + 0.5
        g_new = gap(hi_new)
        if g_new <= ghi:
            raise SolverError(f"mass map not increasing in b near b={math.exp(hi_new):.4g}", g_new)
        hi, ghi = hi_new, g_new
        if ghi > 0:
            break
        lo, glo = hi, ghi
    else:
        raise SolverError("could not bracket the target mass", ghi)
    logb = brentq(gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    p = shoot_profile(epsilon, math.exp(logb), grid)
    if abs(p.M / M - 1) > rtol:
        raise SolverError("mass targeting missed the tolerance", abs(p.M / M - 1))
    return p


@dataclass(frozen=True)
class BoundsReport:
    gaussian_envelope: float
    gradient_bound: float
    laplacian_bound: float
    laplacian_bound_ode: float
    far_field_slope: float

    def as_dict(self) -> dict:
        return {
            "sup_G_exp_r2_over_4": self.gaussian_envelope,
            "sup_weighted_dV": self.gradient_bound,
            "sup_abs_laplacian_V": self.laplacian_bound,
            "sup_abs_laplacian_V_from_ode": self.laplacian_bound_ode,
            "abs_dV_at_r_max": self.far_field_slope,
        }


def profile_bounds_report(p: ProfilePair) -> BoundsReport:
    """The three suprema bounding the profile: G e^{r^2/4}, (1/r + <r>)|V'| and |Delta V|."""
    g = p.grid
    r = g.nodes
    env = float(np.max(p.G.values * np.exp(r ** 2 / 4)))
    grad = float(np.max((1 / r + japanese(r)) * np.abs(p.dV.values)))
    lap = float(np.max(np.abs(laplacian_values(g, p.V.values, p.V.outer))))
    ode = float(np.max(np.abs(p.G.values + p.epsilon * transport_values(g, p.V.values, p.V.outer))))
    return BoundsReport(env, grad, lap, ode, p.far_field_slope)


@dataclass(frozen=True)
class ConvergenceTable:
    eps: list
    l2k_error: list
    w22_error: list
    gradient_error: list

    def ratios(self) -> list:
        """Consecutive error ratios of the L^2_k column (reported, not asserted)."""
        e = self.l2k_error
        return [e[i] / e[i + 1] if e[i + 1] > 0 else float("inf") for i in range(len(e) - 1)]

    def rows(self):
        return list(zip(self.eps, self.l2k_error, self.w22_error, self.gradient_error))


def profile_limit_compare(eps_list, M: float, grid: RadialGrid, k: float = 8.0) -> ConvergenceTable:
    """Distances of the eps-profiles of mass M to the eps = 0 profile."""
    eps_list = [float(e) for e in eps_list]
    if 0.0 not in eps_list:
        raise DomainError("eps_list must contain 0")
    if any(a < b for a, b in zip(eps_list, eps_list[1:])):
        raise DomainError("eps_list must be sorted in decreasing order")
    ref = profile_for_mass(0.0, M, grid)
    rows = ([], [], [])
    for eps in eps_list:
        p = ref if eps == 0 else profile_for_mass(eps, M, grid)
        e = p.G.values - ref.G.values
        rows[0].append(math.sqrt(weighted_l2_sq(grid, e, k)))
        rows[1].append(math.sqrt(weighted_l2_sq(grid, e) + gradient_l2_sq(grid, e, None)
                                 + hessian_l2_sq(grid, e, None)))
        rows[2].append(float(np.max(japanese(grid.nodes) * np.abs(p.dV.values - ref.dV.values))))
    return ConvergenceTable(eps_list, *rows)
