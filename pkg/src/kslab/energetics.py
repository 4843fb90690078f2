"""Free energy, dissipation, entropies, Fisher information and related functionals.

Nodal integrals use control volumes and gradient terms use face differences,
so that the functionals are exactly the ones dissipated by the finite volume
schemes of :mod:`kslab.evolve`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import ContractError, DomainError
from .kernels import bessel_solve, poisson_solve_radial
from .radial_core import (
    Field,
    RadialGrid,
    TWO_PI,
    face_differences,
    gradient_values,
    laplacian_values,
)

FLOOR = 1e-300


def bernoulli(x: np.ndarray) -> np.ndarray:
    """B(x) = x / (e^x - 1), evaluated stably."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-5
    xs = x[small]
    out[small] = 1 - xs / 2 + xs * xs / 12
    xl = x[~small]
    out[~small] = xl / np.expm1(xl)
    return out


def _vint(grid: RadialGrid, values) -> float:
    return TWO_PI * float(np.dot(grid.volumes, values))


def xlogx(f: np.ndarray) -> np.ndarray:
    safe = np.maximum(f, FLOOR)
    return np.where(f > FLOOR, f * np.log(safe), 0.0)


def gradient_energy(u: Field) -> float:
    """(1/2) int |grad u|^2, including the face to the ghost node when one is set."""
    g = u.grid
    d = face_differences(g, u.values, u.outer)
    return math.pi * float(np.sum(g.face_radii * g.spacing * d * d))


def gradient_pairing(u: Field, v: Field) -> float:
    g = u.grid
    du = face_differences(g, u.values, u.outer)
    dv = face_differences(g, v.values, v.outer)
    return TWO_PI * float(np.sum(g.face_radii * g.spacing * du * dv))


def fisher_information(f: Field) -> float:
    """Discrete I(f) = int grad f . grad log f from face differences."""
    g = f.grid
    v = np.maximum(f.values, FLOOR)
    df = np.diff(v)
    dl = np.diff(np.log(v))
    c = g.face_radii[:-1] / g.spacing[:-1]
    return TWO_PI * float(np.sum(c * df * dl))


def entropy_dissipation(f: Field, u: Field) -> float:
    """int f |grad(log f - u)|^2 in the exponentially fitted face form."""
    g = f.grid
    v = np.maximum(f.values, FLOOR)
    mu = np.log(v) - u.values
    delta = np.diff(u.values)
    c = g.face_radii[:-1] / g.spacing[:-1]
    weight = bernoulli(delta) * v[1:] - bernoulli(-delta) * v[:-1]
    return TWO_PI * float(np.sum(c * weight * np.diff(mu)))


def log_H(r: np.ndarray) -> np.ndarray:
    """log of H(x) = (1/pi) <x>^{-4}."""
    return -math.log(math.pi) - 2.0 * np.log1p(r * r)


@dataclass(frozen=True)
class EnergyReport:
    mass: float
    free_energy: float
    dissipation: float
    entropy: float
    positive_entropy: float
    fisher: float
    modified_free_energy: float
    log_moment: float
    chem_energy: float
    squared_log_entropy: float

    def as_dict(self) -> dict:
        return asdict(self)


def chemical_energy(f: Field, u: Field, alpha: float) -> float:
    """F_alpha(f, u) = (1/2) int |grad u|^2 + (alpha/2) int u^2 - int f u."""
    g = f.grid
    return gradient_energy(u) + 0.5 * alpha * _vint(g, u.values ** 2) - _vint(g, f.values * u.values)


def energy_report(f: Field, u: Field, alpha: float = 0.0, epsilon: float = 1.0,
                  dudt: Optional[Field] = None) -> EnergyReport:
    if f.grid != u.grid:
        raise ContractError("density and potential live on different grids")
    if np.min(f.values) < -1e-12:
        raise ContractError(f"density has negative values down to {np.min(f.values):.3e}")
    if not epsilon > 0:
        raise DomainError("the dissipation needs epsilon > 0")
    g = f.grid
    fv = np.maximum(f.values, 0.0)
    fp = Field(g, fv, "density")
    logf = np.log(np.maximum(fv, FLOOR))
    H = _vint(g, xlogx(fv))
    Hplus = _vint(g, np.where(logf > 0, fv * logf, 0.0))
    H2 = _vint(g, np.where(logf > 0, fv * logf ** 2, 0.0))
    chem = chemical_energy(fp, u, alpha)
    F = H + chem
    if dudt is not None:
        parabolic = epsilon * _vint(g, dudt.values ** 2)
    else:
        res = laplacian_values(g, u.values, u.outer) + fv - alpha * u.values
        parabolic = _vint(g, res ** 2) / epsilon
    D = entropy_dissipation(fp, u) + parabolic
    r = g.nodes
    FH = F - _vint(g, fv * log_H(r))
    return EnergyReport(
        mass=_vint(g, fv),
        free_energy=F,
        dissipation=D,
        entropy=H,
        positive_entropy=Hplus,
        fisher=fisher_information(fp),
        modified_free_energy=FH,
        log_moment=_vint(g, fv * np.log1p(r * r)),
        chem_energy=chem,
        squared_log_entropy=H2,
    )


def relative_entropy_H(f: Field) -> float:
    """H_H(f) = int f log(f / H)."""
    g = f.grid
    fv = np.maximum(f.values, 0.0)
    return _vint(g, xlogx(fv) - fv * log_H(g.nodes))


def mean_potential(f: Field, alpha: float) -> Field:
    """u_alpha = kappa_alpha * f: Bessel solve for alpha > 0, Newtonian potential for alpha = 0."""
    if alpha > 0:
        return bessel_solve(alpha, f)
    return poisson_solve_radial(f)[0]


def interaction_energy(f: Field, alpha: float) -> float:
    """Double integral of f(x) f(y) kappa_alpha(x - y), reduced to int f u_alpha."""
    u = mean_potential(f, alpha)
    return _vint(f.grid, f.values * u.values)


def log_hls_residual(f: Field, alpha: float = 0.0) -> float:
    """int f log f - (4 pi / M) int int f f kappa_alpha - int f log H."""
    g = f.grid
    M = _vint(g, f.values)
    fv = np.maximum(f.values, 0.0)
    return (_vint(g, xlogx(fv)) - 4 * math.pi / M * interaction_energy(f, alpha)
            - _vint(g, fv * log_H(g.nodes)))


# -- functional inequalities ------------------------------------------------


def lp_norm(f: Field, p: float) -> float:
    g = f.grid
    if math.isinf(p):
        return float(np.max(np.abs(f.values)))
    return (TWO_PI * float(np.dot(g.weights, np.abs(f.values) ** p))) ** (1.0 / p)


@dataclass(frozen=True)
class InequalityReport:
    lp_fisher: dict
    gradient_fisher: dict
    gagliardo_nirenberg: dict
    positive_entropy_gap: float

    def all_ratios(self) -> list:
        return list(self.lp_fisher.values()) + list(self.gradient_fisher.values()) + list(
            self.gagliardo_nirenberg.values())

    def as_dict(self) -> dict:
        return {
            "lp_fisher": {str(k): v for k, v in self.lp_fisher.items()},
            "gradient_fisher": {str(k): v for k, v in self.gradient_fisher.items()},
            "gagliardo_nirenberg": {str(k): v for k, v in self.gagliardo_nirenberg.items()},
            "positive_entropy_gap": self.positive_entropy_gap,
        }


def inequality_suite(f: Field) -> InequalityReport:
    """Ratios of the left-hand sides of the Fisher-information inequalities to their
    scale-invariant right-hand sides without constants."""
    g = f.grid
    if np.min(f.values) < -1e-12:
        raise ContractError("inequality_suite needs a non-negative density")
    M = _vint(g, f.values)
    I = fisher_information(f)
    lp = {p: lp_norm(f, p) / (M ** (1 / p) * I ** (1 - 1 / p)) for p in (2, 3, 4)}
    df = Field(g, gradient_values(g, f.values, None))
    grad = {q: lp_norm(df, q) / (M ** (1 / q - 0.5) * I ** (1.5 - 1 / q)) for q in (4 / 3, 3 / 2)}
    gn = {}
    for p in (2, 3, 4):
        fp2 = np.maximum(f.values, 0.0) ** (p / 2)
        d = face_differences(g, fp2, None)
        grad_l2 = math.sqrt(TWO_PI * float(np.sum(g.face_radii * g.spacing * d * d)))
        gn[p] = lp_norm(f, p + 1) / (M ** (1 / (p + 1)) * grad_l2 ** (2 / (p + 1)))
    rep = energy_report(f, Field.zeros(g, "potential"))
    gap = rep.positive_entropy - relative_entropy_H(f) + 0.25 * rep.log_moment
    return InequalityReport(lp, grad, gn, gap)


# -- renormalised entropies -------------------------------------------------


def beta_lp(xi: np.ndarray, K: float, p: float) -> np.ndarray:
    """xi^p / p below K, continued by the matching x log x branch above K."""
    xi = np.asarray(xi, dtype=float)
    lk = math.log(K)
    pp = p / (p - 1)
    low = xi ** p / p
    x = np.maximum(xi, FLOOR)
    high = K ** (p - 1) / lk * (x * np.log(x) - x) - K ** p / pp + K ** p / lk
    return np.where(xi <= K, low, high)


def beta_loglog(xi: np.ndarray, K: float) -> np.ndarray:
    """xi^2/e on [0, e], xi (log xi)^2 on [e, K], then (2 + log K) xi log xi - 2 K log K."""
    xi = np.asarray(xi, dtype=float)
    x = np.maximum(xi, FLOOR)
    lx = np.log(x)
    lk = math.log(K)
    return np.where(xi <= math.e, xi * xi / math.e,
                    np.where(xi <= K, x * lx * lx, (2 + lk) * x * lx - 2 * K * lk))


def renormalized_entropy(f: Field, K: float, shape: str = "lp", p: float = 2.0) -> float:
    """int beta_K(f) dx for ``shape`` in {"lp", "loglog"}."""
    if not K >= math.e ** 2:
        raise DomainError(f"renormalised entropies need K >= e^2, got {K}")
    fv = np.maximum(f.values, 0.0)
    if shape == "lp":
        if p < 2:
            raise DomainError("the L^p renormalisation needs p >= 2")
        vals = beta_lp(fv, K, p)
    elif shape == "loglog":
        vals = beta_loglog(fv, K)
    else:
        raise ContractError(f"unknown renormalisation shape {shape!r}")
    return TWO_PI * float(np.dot(f.grid.weights, vals))


# -- Orlicz pair ------------------------------------------------------------


def orlicz_phi(s: float) -> float:
    """Phi(s) = s^2 (log~ s)^2 with log~ s = 1 for s <= e and log s beyond."""
    if s < 0:
        raise DomainError("Phi is defined for s >= 0")
    ls = 1.0 if s <= math.e else math.log(s)
    return s * s * ls * ls


def golden_section_max(fn, a: float, b: float, tol: float = 1e-10) -> tuple[float, float]:
    """Maximise a unimodal function on [a, b]; returns (argmax, max)."""
    invphi = (math.sqrt(5) - 1) / 2
    width = b - a
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol * max(width, 1e-300):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    x = 0.5 * (a + b)
    best = max((fn(x), x), (fc, c), (fd, d), (fn(a), a), (fn(b), b))
    return best[1], best[0]


def orlicz_phi_star(t: float) -> float:
    """Legendre conjugate sup_s (t s - Phi(s)); the maximiser lies in [0, t/2]."""
    if t < 0:
        raise DomainError("Phi* is evaluated for t >= 0")
    if t == 0:
        return 0.0
    _, val = golden_section_max(lambda s: t * s - orlicz_phi(s), 0.0, t)
    return max(val, 0.0)


# -- test families ----------------------------------------------------------


def gaussian(grid: RadialGrid, mass: float = 1.0, variance: float = 1.0) -> Field:
    """Planar Gaussian of the given mass and per-coordinate variance."""
    return Field.from_function(
        grid, lambda r: mass / (TWO_PI * variance) * np.exp(-r * r / (2 * variance)), "density")


def inequality_family(name: str, grid: RadialGrid) -> list:
    """Named ten-member families of densities used by ``check-inequalities``."""
    if name == "gaussians":
        return [gaussian(grid, 1.0, v) for v in np.geomspace(0.05, 2.0, 10)]
    if name == "mixtures":
        out = []
        for j, v in enumerate(np.geomspace(0.05, 1.0, 10)):
            r = grid.nodes
            vals = np.exp(-r * r / (2 * v)) + 0.5 * np.exp(-(r - 1.0 - 0.2 * j) ** 2 / 0.1)
            out.append(Field(grid, vals / _vint(grid, vals), "density"))
        return out
    if name == "algebraic":
        return [Field.from_function(grid, lambda r, a=a: a / math.pi * (1 + a * r * r) ** -2, "density")
                for a in np.geomspace(0.5, 8.0, 10)]
    raise ContractError(f"unknown inequality family {name!r}")
