"""Radial grids, quadrature, weighted norms and radial difference operators.

All functions of x in R^2 are radially symmetric and represented by their
values at cell centres of a staggered grid on [0, r_max]. Two quadratures are
attached to every grid:

* ``volumes`` are the exact control-volume areas ``int_cell r dr``. The finite
  volume schemes conserve mass in this measure and the discrete energy
  identities are exact in it.
* ``weights`` are a fourth-order midpoint rule with Euler-Maclaurin end
  corrections, exact for ``phi = 1`` and ``phi = r^2``. Moments and weighted
  norms use them.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigurationError, ContractError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class RadialGrid:
    """Cell-centred grid with ``n`` cells whose outer face sits at ``r_max``."""

    r_max: float
    n: int
    grading: str = "uniform"
    ratio: float = 1.0
    faces: np.ndarray = field(repr=False, default=None)
    nodes: np.ndarray = field(repr=False, default=None)
    ghost: float = field(repr=False, default=0.0)
    volumes: np.ndarray = field(repr=False, default=None)
    weights: np.ndarray = field(repr=False, default=None)

    @property
    def spacing(self) -> np.ndarray:
        """Distances between consecutive nodes, the last one reaching the ghost node."""
        return np.diff(np.append(self.nodes, self.ghost))

    @property
    def face_radii(self) -> np.ndarray:
        """Radii of the n faces r_{i+1/2}, i = 0..n-1 (the last one is r_max)."""
        return self.faces[1:]

    def descriptor(self) -> str:
        if self.grading == "uniform":
            return f"grid=uniform n={self.n} r_max={self.r_max:g}"
        return f"grid=geometric n={self.n} r_max={self.r_max:g} ratio={self.ratio:g}"

    def to_dict(self) -> dict:
        return {"r_max": self.r_max, "n": self.n, "grading": self.grading, "ratio": self.ratio}

    def __eq__(self, other) -> bool:
        if not isinstance(other, RadialGrid):
            return NotImplemented
        return (self.n, self.r_max, self.grading, self.ratio) == (
            other.n, other.r_max, other.grading, other.ratio)

    def __hash__(self) -> int:
        return hash((self.n, self.r_max, self.grading, self.ratio))


def _face_map(r_max: float, n: int, grading: str, ratio: float):
    if grading == "uniform":
        h = r_max / n
        return (lambda s: h * s), (lambda s: h + 0.0 * s)
    q = ratio
    h0 = r_max * (q - 1.0) / (q ** n - 1.0)
    lq = np.log(q)
    return (lambda s: h0 * (q ** s - 1.0) / (q - 1.0)), (lambda s: h0 * lq * q ** s / (q - 1.0))


def _corrected_weights(nodes: np.ndarray, rho, drho, n: int) -> np.ndarray:
    # int_0^n g(s) ds with g = phi(rho) rho rho', midpoint rule in s plus the
    # h^2/24 (g'(n) - g'(0)) Euler-Maclaurin correction written as weights on phi.
    s_nodes = np.arange(n) + 0.5
    jac = rho(s_nodes) * drho(s_nodes)
    w = jac.copy()
    # g'(0) = phi(0) rho'(0)^2 with phi(0) from the even fit a + b r^2 on the first two nodes
    r0, r1 = nodes[0] ** 2, nodes[1] ** 2
    c0 = drho(0.0) ** 2 / 24.0
    w[0] -= c0 * r1 / (r1 - r0)
    w[1] += c0 * r0 / (r1 - r0)
    # g'(n) from the cubic through the last four node values of g
    x = s_nodes[-4:]
    d = np.zeros(4)
    for j in range(4):
        others = [x[m] for m in range(4) if m != j]
        denom = np.prod([x[j] - o for o in others])
        # derivative at s = n of the Lagrange basis polynomial
        t = n
        deriv = sum(np.prod([t - others[a] for a in range(3) if a != b]) for b in range(3))
        d[j] = deriv / denom
    w[-4:] += d * jac[-4:] / 24.0
    # the s-space correction is exact only for cubic g; a tiny adjustment of the last two
    # weights restores exactness for phi = 1 and phi = r^2 on graded grids
    r_max = float(rho(float(n)))
    r2 = nodes[-2:] ** 2
    target = np.array([r_max ** 2 / 2 - np.sum(w[:-2]), r_max ** 4 / 4 - np.dot(w[:-2], nodes[:-2] ** 2)])
    w[-2:] = np.linalg.solve(np.array([[1.0, 1.0], r2]), target)
    return w


def build_grid(r_max: float, n: int, grading: str = "uniform", ratio: float = 1.0) -> RadialGrid:
    """Build a staggered radial grid.

    ``grading`` is ``"uniform"`` or ``"geometric"``; a geometric grid has cell
    widths growing by ``ratio`` from the axis outward.
    """
    if not np.isfinite(r_max) or r_max <= 0:
        raise ConfigurationError(f"r_max must be positive, got {r_max}")
    if int(n) != n or n < 16:
        raise ConfigurationError(f"n must be an integer >= 16, got {n}")
    n = int(n)
    if grading not in ("uniform", "geometric"):
        raise ConfigurationError(f"unknown grading {grading!r}")
    if grading == "geometric":
        if not ratio > 1.0:
            raise ConfigurationError("geometric grading needs ratio > 1")
    else:
        ratio = 1.0
    rho, drho = _face_map(r_max, n, grading, ratio)
    faces = rho(np.arange(n + 1, dtype=float))
    faces[-1] = r_max
    nodes = rho(np.arange(n) + 0.5)
    ghost = float(rho(n + 0.5))
    volumes = 0.5 * (faces[1:] ** 2 - faces[:-1] ** 2)
    weights = _corrected_weights(nodes, rho, drho, n)
    if np.any(weights <= 0):
        raise ConfigurationError("quadrature weights lost positivity; refine the grid")
    for arr in (faces, nodes, volumes, weights):
        arr.setflags(write=False)
    return RadialGrid(float(r_max), n, grading, float(ratio), faces, nodes, ghost, volumes, weights)


@dataclass(frozen=True)
class Field:
    """A radial function sampled on the nodes of ``grid``.

    ``outer`` is the Dirichlet value at the ghost node beyond r_max used for
    potentials; ``None`` means a no-flux (reflecting) outer boundary.
    """

    grid: RadialGrid
    values: np.ndarray
    kind: str = "generic"
    outer: Optional[float] = None

    def __post_init__(self):
        v = np.array(self.values)
        v = v.astype(complex if np.iscomplexobj(v) else float)
        if v.shape != (self.grid.n,):
            raise ContractError(f"field has {v.shape} values on a grid of {self.grid.n} nodes")
        if not np.all(np.isfinite(v)):
            raise ContractError("field values must be finite")
        if self.kind not in ("density", "potential", "generic"):
            raise ContractError(f"unknown field kind {self.kind!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: RadialGrid, fn, kind: str = "generic", outer=None) -> "Field":
        return cls(grid, fn(grid.nodes), kind, outer)

    @classmethod
    def zeros(cls, grid: RadialGrid, kind: str = "generic") -> "Field":
        return cls(grid, np.zeros(grid.n), kind, 0.0 if kind == "potential" else None)

    def with_values(self, values) -> "Field":
        return Field(self.grid, values, self.kind, self.outer)

    def to_csv(self, header: Sequence[str] = ()) -> str:
        buf = io.StringIO()
        for line in header:
            buf.write(f"# {line}\n")
        buf.write(f"# {self.grid.descriptor()} kind={self.kind}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["r", "value"])
        for r, v in zip(self.grid.nodes, self.values):
            writer.writerow([repr(float(r)), repr(float(v))])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "grid": self.grid.to_dict(),
            "kind": self.kind,
            "outer": self.outer,
            "r": self.grid.nodes.tolist(),
            "value": self.values.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "Field":
        d = json.loads(text)
        g = d["grid"]
        grid = build_grid(g["r_max"], g["n"], g["grading"], g["ratio"])
        return cls(grid, np.asarray(d["value"]), d["kind"], d["outer"])


class Space(str, Enum):
    L2 = "L2"
    L2k = "L2k"
    H1k = "H1k"
    H2 = "H2"
    X = "X"
    Xstar = "Xstar"
    Y = "Y"
    Ystar = "Ystar"
    Z = "Z"
    Zstar = "Zstar"


DEFAULT_ETA = 40.0 ** -3


@dataclass(frozen=True)
class NormSpace:
    tag: Space = Space.X
    k: float = 8.0
    ell: float = 4.0
    eta: float = DEFAULT_ETA
    eta1: float = DEFAULT_ETA
    eta2: float = DEFAULT_ETA

    def __post_init__(self):
        object.__setattr__(self, "tag", Space(self.tag))
        if not self.k > 7:
            raise ConfigurationError(f"weight exponent k must exceed 7, got {self.k}")
        if not 3 < self.ell < self.k:
            raise ConfigurationError(f"ell must lie in (3, k), got {self.ell}")
        if min(self.eta, self.eta1, self.eta2) <= 0:
            raise ConfigurationError("norm weights eta, eta1, eta2 must be positive")

    @property
    def starred(self) -> bool:
        return self.tag in (Space.Xstar, Space.Ystar, Space.Zstar)


def japanese(r: np.ndarray) -> np.ndarray:
    """<r> = sqrt(1 + r^2)."""
    return np.sqrt(1.0 + r * r)


# -- moments and quadrature -------------------------------------------------


def integrate(grid: RadialGrid, values: np.ndarray, with_2pi: bool = True) -> float:
    s = float(np.dot(grid.weights, values))
    return TWO_PI * s if with_2pi else s


def integrate_moment(f: Field, j: int, with_2pi: bool = True) -> float:
    """int_0^{r_max} f r^j r dr, times 2 pi when ``with_2pi``."""
    if int(j) != j or j < 0 or j > 8:
        raise ContractError(f"moment order must be an integer in [0, 8], got {j}")
    return integrate(f.grid, f.values * f.grid.nodes ** int(j), with_2pi)


def mass(f: Field) -> float:
    return integrate_moment(f, 0, True)


def discrete_mass(grid: RadialGrid, values: np.ndarray) -> float:
    """Mass in the control-volume measure conserved by the finite volume schemes."""
    return TWO_PI * float(np.dot(grid.volumes, values))


# -- difference operators ---------------------------------------------------


def face_differences(grid: RadialGrid, values: np.ndarray, outer: Optional[float]) -> np.ndarray:
    """(f_{i+1} - f_i)/(r_{i+1} - r_i) on the n faces; the outer face uses the ghost value
    when ``outer`` is given and is zero otherwise."""
    v = np.asarray(values)
    d = np.zeros(grid.n, dtype=v.dtype)
    dr = grid.spacing
    d[:-1] = np.diff(v) / dr[:-1]
    if outer is not None:
        d[-1] = (outer - v[-1]) / dr[-1]
    return d


def laplacian_values(grid: RadialGrid, values: np.ndarray, outer: Optional[float]) -> np.ndarray:
    flux = grid.face_radii * face_differences(grid, values, outer)
    return (flux - np.concatenate(([0.0], flux[:-1]))) / grid.volumes


def gradient_values(grid: RadialGrid, values: np.ndarray, outer: Optional[float]) -> np.ndarray:
    r = grid.nodes
    v = np.asarray(values, dtype=float)
    rext = np.concatenate(([-r[0]], r, [grid.ghost]))
    if outer is None:
        # quadratic extrapolation keeps the one-sided end stencil second order
        x0, x1, x2, xg = r[-3], r[-2], r[-1], grid.ghost
        l0 = (xg - x1) * (xg - x2) / ((x0 - x1) * (x0 - x2))
        l1 = (xg - x0) * (xg - x2) / ((x1 - x0) * (x1 - x2))
        l2 = (xg - x0) * (xg - x1) / ((x2 - x0) * (x2 - x1))
        vg = l0 * v[-3] + l1 * v[-2] + l2 * v[-1]
    else:
        vg = outer
    vext = np.concatenate(([v[0]], v, [vg]))
    h1 = rext[1:-1] - rext[:-2]
    h2 = rext[2:] - rext[1:-1]
    return (-h2 / (h1 * (h1 + h2)) * vext[:-2] + (h2 - h1) / (h1 * h2) * vext[1:-1]
            + h1 / (h2 * (h1 + h2)) * vext[2:])


def diff_op(f: Field, which: str) -> Field:
    """Second-order radial derivatives: ``gradient`` (f'), ``laplacian``
    ((1/r)(r f')' in conservative form) or ``div_flux`` ((1/r)(r f)')."""
    g = f.grid
    if which == "gradient":
        out = gradient_values(g, f.values, f.outer)
    elif which == "laplacian":
        out = laplacian_values(g, f.values, f.outer)
    elif which == "div_flux":
        v = f.values
        fv = np.empty(g.n)
        fv[:-1] = 0.5 * (v[:-1] + v[1:])
        fv[-1] = 0.0 if f.outer is None else 0.5 * (v[-1] + f.outer)
        flux = g.face_radii * fv
        out = (flux - np.concatenate(([0.0], flux[:-1]))) / g.volumes
    else:
        raise ContractError(f"unknown differential operator {which!r}")
    return Field(g, out, "generic")


# -- norms ------------------------------------------------------------------


def weighted_l2_sq(grid: RadialGrid, values: np.ndarray, k: float = 0.0) -> float:
    w = japanese(grid.nodes) ** (2 * k) if k else 1.0
    return integrate(grid, np.abs(values) ** 2 * w)


def gradient_l2_sq(grid: RadialGrid, values: np.ndarray, outer: Optional[float], k: float = 0.0) -> float:
    """int |f'|^2 <r>^{2k} dx from face differences."""
    d = face_differences(grid, values, outer)
    rf = grid.face_radii
    w = japanese(rf) ** (2 * k) if k else 1.0
    return TWO_PI * float(np.sum(rf * grid.spacing * np.abs(d) ** 2 * w))


def hessian_l2_sq(grid: RadialGrid, values: np.ndarray, outer: Optional[float]) -> float:
    """int (v''^2 + (v'/r)^2) dx, the radial form of |nabla^2 v|^2."""
    dv = gradient_values(grid, values, outer)
    d2 = laplacian_values(grid, values, outer) - dv / grid.nodes
    return integrate(grid, d2 ** 2 + (dv / grid.nodes) ** 2)


def _as_pair(pair) -> tuple:
    if isinstance(pair, Field):
        return pair, None
    f, u = pair
    return f, u


def norm(pair: Union[Field, tuple], space: NormSpace, kappa_f: Optional[Field] = None) -> float:
    """Evaluate the norm named by ``space`` on a field or a (density, potential) pair."""
    f, u = _as_pair(pair)
    g = f.grid
    k = space.k
    tag = space.tag
    if tag == Space.L2:
        return float(np.sqrt(weighted_l2_sq(g, f.values)))
    if tag == Space.L2k:
        return float(np.sqrt(weighted_l2_sq(g, f.values, k)))
    if tag == Space.H1k:
        return float(np.sqrt(weighted_l2_sq(g, f.values, k) + gradient_l2_sq(g, f.values, f.outer, k)))
    if tag == Space.H2:
        v = f.values
        return float(np.sqrt(weighted_l2_sq(g, v) + gradient_l2_sq(g, v, f.outer)
                             + hessian_l2_sq(g, v, f.outer)))
    if u is None:
        raise ContractError(f"space {tag.value} needs a (density, potential) pair")
    if u.grid != g:
        raise ContractError("density and potential live on different grids")
    w = u.values
    outer = u.outer
    scale0, scale1, scale2 = 1.0, 1.0, 1.0
    if space.starred:
        if kappa_f is None:
            raise ContractError(f"space {tag.value} needs the Newtonian potential kappa_f")
        w = w - kappa_f.values
        outer = None if outer is None else outer - (kappa_f.outer or 0.0)
        scale0, scale1, scale2 = space.eta, space.eta1, space.eta2
    total = weighted_l2_sq(g, f.values, k) + scale0 * weighted_l2_sq(g, w)
    if tag in (Space.Y, Space.Ystar, Space.Z, Space.Zstar):
        total += scale1 * (gradient_l2_sq(g, f.values, f.outer, k) + gradient_l2_sq(g, w, outer))
    if tag in (Space.Z, Space.Zstar):
        total += scale2 * hessian_l2_sq(g, w, outer)
    return float(np.sqrt(total))
