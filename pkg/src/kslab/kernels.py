"""Laplace and Bessel kernels, radial potential solves and the moment split."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import ContractError, DomainError, SolverError
from .radial_core import (
    Field,
    RadialGrid,
    TWO_PI,
    gradient_values,
    japanese,
    laplacian_values,
    gradient_l2_sq,
    integrate_moment,
    weighted_l2_sq,
)


def adaptive_simpson(fn, a: float, b: float, tol: float = 1e-10, max_depth: int = 60) -> float:
    """Adaptive Simpson quadrature with an absolute tolerance, iterative to avoid recursion limits."""
    fa, fm, fb = fn(a), fn(0.5 * (a + b)), fn(b)
    whole = (b - a) * (fa + 4 * fm + fb) / 6.0
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    total = 0.0
    while stack:
        a, b, fa, fm, fb, whole, eps, depth = stack.pop()
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = fn(lm), fn(rm)
        left = (m - a) * (fa + 4 * flm + fm) / 6.0
        right = (b - m) * (fm + 4 * frm + fb) / 6.0
        delta = left + right - whole
        if depth >= max_depth or abs(delta) <= 15 * eps:
            total += left + right + delta / 15.0
        else:
            stack.append((a, m, fa, flm, fm, left, eps / 2, depth + 1))
            stack.append((m, b, fm, frm, fb, right, eps / 2, depth + 1))
    return total


def kernel_eval(alpha: float, s: float, tol: float = 1e-10) -> float:
    """kappa_alpha(s) = (1/4pi) int_0^inf t^{-1} exp(-s^2/(4t) - alpha t) dt; for alpha = 0 the
    logarithmic kernel -(1/2pi) log s."""
    if not s > 0:
        raise DomainError(f"kernel distance must be positive, got {s}")
    if alpha < 0:
        raise DomainError(f"alpha must be non-negative, got {alpha}")
    if alpha == 0:
        return -math.log(s) / TWO_PI

    # with t = e^tau the integrand loses its t^{-1} and decays double exponentially at both ends
    def integrand(tau):
        return math.exp(-0.25 * s * s * math.exp(-tau) - alpha * math.exp(tau))

    lo = math.log(s * s / 180.0)
    hi = math.log(45.0 / alpha)
    if hi <= lo:
        return 0.0
    # split at the maximiser so the adaptive scheme sees the peak
    peak = 0.5 * math.log(s * s / (4.0 * alpha))
    pieces = [lo, min(max(peak, lo), hi), hi]
    total = sum(adaptive_simpson(integrand, pieces[i], pieces[i + 1], tol * 2 * math.pi)
                for i in range(2) if pieces[i + 1] > pieces[i])
    return total / (4.0 * math.pi)


def line_mass(f: Field) -> float:
    """int f r dr in the control-volume measure."""
    return float(np.dot(f.grid.volumes, f.values))


def _node_cumulative(grid: RadialGrid, values: np.ndarray) -> np.ndarray:
    # int_0^{r_i} s f ds: full cells below node i plus the inner half of cell i
    faces = grid.faces
    below = np.concatenate(([0.0], np.cumsum(grid.volumes * values)[:-1]))
    return below + values * 0.5 * (grid.nodes ** 2 - faces[:-1] ** 2)


def poisson_solve_radial(f: Field) -> tuple[Field, Field]:
    """Newtonian potential u = kappa_0 * f and its radial derivative.

    The face fluxes satisfy the discrete Gauss law r u' = -int_0^r s f ds exactly,
    so ``-laplacian(u) = f`` holds to rounding in the control-volume sense.
    The ghost value is the exterior log law -(M/2pi) log r.
    """
    g = f.grid
    v = f.values
    cumulative = np.cumsum(g.volumes * v)
    ghost = -cumulative[-1] * math.log(g.ghost)
    steps = g.spacing * cumulative / g.face_radii
    # u_i = u_{i+1} + dr_{i+1/2} C_{i+1/2} / r_{i+1/2}, marching inward from the ghost node
    u = ghost + np.cumsum(steps[::-1])[::-1]
    du = -_node_cumulative(g, v) / g.nodes
    return Field(g, u, "potential", float(ghost)), Field(g, du, "generic")


def _tridiagonal_laplacian(grid: RadialGrid):
    """Bands (lower, diag, upper) of the conservative Laplacian with a homogeneous
    Dirichlet value at the ghost node."""
    c = grid.face_radii / grid.spacing
    w = grid.volumes
    upper = c / w
    lower = np.concatenate(([0.0], c[:-1])) / w
    diag = -(upper + lower)
    return lower, diag, upper


def bessel_solve(alpha: float, f: Field) -> Field:
    """Solve -u'' - u'/r + alpha u = f with a decaying (zero) ghost value beyond r_max."""
    if not alpha > 0:
        raise DomainError(f"bessel_solve needs alpha > 0, got {alpha}")
    g = f.grid
    lower, diag, upper = _tridiagonal_laplacian(g)
    ab = np.zeros((3, g.n))
    ab[0, 1:] = -upper[:-1]
    ab[1] = -diag + alpha
    ab[2, :-1] = -lower[1:]
    try:
        u = solve_banded((1, 1), ab, f.values)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"singular Helmholtz system: {exc}") from exc
    return Field(g, u, "potential", 0.0)


def helmholtz_residual(alpha: float, u: Field, f: Field) -> np.ndarray:
    return -laplacian_values(u.grid, u.values, u.outer) + alpha * u.values - f.values


# -- moment split -----------------------------------------------------------


def F1(r):
    r2 = r * r
    return (-r2 * r2 / 8 + 5 * r2 / 4 - 1.5) * np.exp(-r2 / 2)


def F2(r):
    r2 = r * r
    return (r2 * r2 / 64 - r2 / 8 + 1 / 8) * np.exp(-r2 / 2)


@dataclass(frozen=True)
class MomentSplit:
    f0: Field
    lambda1: float
    lambda2: float


def moment_split(f: Field, tol: float = 1e-8) -> MomentSplit:
    """Split a mass-free f into f0 + lambda1 F1 + lambda2 F2 with f0 free of the
    moments of order 0, 2 and 4 (line moments, no 2 pi)."""
    g = f.grid
    scale = float(np.dot(g.weights, np.abs(f.values) * (1 + g.nodes ** 4))) or 1.0
    m0 = integrate_moment(f, 0, False)
    if abs(m0) > tol * scale:
        raise ContractError(f"moment_split needs a mass-free input, got line mass {m0:.3e}")
    basis = [Field.from_function(g, F1), Field.from_function(g, F2)]
    # solving with the discrete moments of F1, F2 makes the moments of f0 vanish to rounding
    a = np.array([[integrate_moment(b, j, False) for b in basis] for j in (2, 4)])
    rhs = np.array([integrate_moment(f, 2, False), integrate_moment(f, 4, False)])
    lam = np.linalg.solve(a, rhs)
    f0 = f.values - lam[0] * basis[0].values - lam[1] * basis[1].values
    return MomentSplit(Field(g, f0, f.kind), float(lam[0]), float(lam[1]))


def potential_ratios(f: Field, k: float = 8.0, j: int = 0) -> tuple[float, float]:
    """Empirical constants ||kappa_f||_{L^2_{j-1}} / ||f||_{L^2_k} and
    ||grad kappa_f||_{L^2_j} / ||f||_{L^2_k} for moment-free inputs."""
    u, _ = poisson_solve_radial(f)
    denom = math.sqrt(weighted_l2_sq(f.grid, f.values, k))
    r = f.grid.nodes
    num0 = math.sqrt(TWO_PI * float(np.dot(f.grid.weights, u.values ** 2 * japanese(r) ** (2 * (j - 1)))))
    num1 = math.sqrt(gradient_l2_sq(f.grid, u.values, u.outer, j))
    return num0 / denom, num1 / denom


__all__ = [
    "adaptive_simpson", "kernel_eval", "poisson_solve_radial", "bessel_solve", "moment_split",
    "MomentSplit", "F1", "F2", "potential_ratios", "helmholtz_residual", "line_mass",
]
