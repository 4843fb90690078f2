"""Time integration of the radial Keller-Segel system with diagnostics and probes.

Densities are advanced by a conservative finite volume scheme whose face flux
is the exponentially fitted (Scharfetter-Gummel) flux

    J_{i+1/2} = (r_{i+1/2}/dr) [B(-d) f_i - B(d) f_{i+1}],   d = psi_{i+1} - psi_i,

with psi = u in original variables and psi = v - r^2/4 in self-similar
variables. Diffusion, the confining drift and the attraction are treated in one
implicit M-matrix solve with the potential frozen (extrapolated for imex2),
so positivity and mass are preserved, and f ~ exp(psi) is an exact discrete
equilibrium. The potential equation is solved implicitly with the ghost value
beyond r_max held fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded
from scipy.sparse.linalg import spsolve

from .config import RunConfig
from .energetics import (
    bernoulli,
    energy_report,
    entropy_dissipation,
    gaussian,
    lp_norm,
)
from .errors import ConfigurationError, ContractError, SolverError
from .kernels import bessel_solve, poisson_solve_radial
from .profiles import ProfilePair, profile_for_mass, transport_values
from .radial_core import (
    Field,
    NormSpace,
    RadialGrid,
    Space,
    TWO_PI,
    build_grid,
    discrete_mass,
    laplacian_values,
    norm,
)

LP_EXPONENTS = (4 / 3, 3 / 2, 2.0, 3.0, 4.0, math.inf)


def bernoulli_prime(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-4
    xs = x[small]
    out[small] = -0.5 + xs / 6 - xs ** 3 / 180
    xl = x[~small]
    b = xl / np.expm1(xl)
    out[~small] = b / xl * (1 - b - xl)
    return out


# -- discrete operators -----------------------------------------------------


@dataclass(frozen=True)
class Operators:
    """Bands of the conservative Laplacian and the skew transport (1/2) x.grad with a
    homogeneous ghost value, plus their ghost-value contributions on the last row."""

    grid: RadialGrid
    lap: np.ndarray      # (3, n) banded, scipy solve_banded layout
    trans: np.ndarray
    lap_ghost: float     # coefficient multiplying the ghost value in the last row
    trans_ghost: float

    @classmethod
    def build(cls, grid: RadialGrid) -> "Operators":
        w = grid.volumes
        c = grid.face_radii / grid.spacing
        a = grid.face_radii ** 2 / 4.0
        n = grid.n
        lap = np.zeros((3, n))
        lap[0, 1:] = c[:-1] / w[:-1]
        lap[1] = -(c + np.concatenate(([0.0], c[:-1]))) / w
        lap[2, :-1] = c[:-1] / w[1:]
        trans = np.zeros((3, n))
        trans[0, 1:] = a[:-1] / w[:-1]
        trans[1] = -0.5
        trans[2, :-1] = -a[:-1] / w[1:]
        return cls(grid, lap, trans, float(c[-1] / w[-1]), float(a[-1] / w[-1]))

    def matrix(self, band: np.ndarray) -> sp.csr_matrix:
        n = self.grid.n
        return sp.diags([band[2, :-1], band[1], band[0, 1:]], [-1, 0, 1], shape=(n, n), format="csr")


def flux_bands(grid: RadialGrid, psi: np.ndarray) -> np.ndarray:
    """Bands of W L(psi), where (W L f)_i = J_{i-1/2} - J_{i+1/2} (no flux at both ends)."""
    n = grid.n
    c = grid.face_radii[:-1] / grid.spacing[:-1]
    d = np.diff(psi)
    bp, bm = bernoulli(d), bernoulli(-d)
    band = np.zeros((3, n))
    band[0, 1:] = c * bp            # coefficient of f_{i+1} in row i
    band[2, :-1] = c * bm           # coefficient of f_i in row i+1
    diag = np.zeros(n)
    diag[:-1] -= c * bm
    diag[1:] -= c * bp
    band[1] = diag
    return band


def flux_matrix(grid: RadialGrid, psi: np.ndarray) -> sp.csr_matrix:
    band = flux_bands(grid, psi)
    n = grid.n
    return sp.diags([band[2, :-1], band[1], band[0, 1:]], [-1, 0, 1], shape=(n, n), format="csr")


def flux_potential_matrix(grid: RadialGrid, psi: np.ndarray, f: np.ndarray) -> sp.csr_matrix:
    """Derivative of W L(psi) f with respect to psi."""
    n = grid.n
    c = grid.face_radii[:-1] / grid.spacing[:-1]
    d = np.diff(psi)
    q = c * (-bernoulli_prime(-d) * f[:-1] - bernoulli_prime(d) * f[1:])  # dJ_{i+1/2}/d delta_i
    diag = np.zeros(n)
    diag[:-1] += q
    diag[1:] += q
    return sp.diags([-q, diag, -q], [-1, 0, 1], shape=(n, n), format="csr")


def apply_bands(band: np.ndarray, x: np.ndarray) -> np.ndarray:
    y = band[1] * x
    y[:-1] += band[0, 1:] * x[1:]
    y[1:] += band[2, :-1] * x[:-1]
    return y


# -- state and stepping -----------------------------------------------------


@dataclass(frozen=True)
class State:
    f: Field
    u: Field
    t: float
    frame: str
    epsilon: float
    alpha: float = 0.0
    chemotaxis: float = 1.0
    ghost_drift: float = 0.0
    history: Optional[tuple] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.frame not in ("original", "self_similar"):
            raise ContractError(f"unknown frame {self.frame!r}")
        if not self.epsilon > 0:
            raise ContractError("time integration needs epsilon > 0")
        if self.u.outer is None:
            raise ContractError("the potential needs a ghost value beyond r_max")
        if self.frame == "self_similar" and self.alpha != 0:
            raise ContractError("the self-similar frame is defined for alpha = 0 only")

    @property
    def grid(self) -> RadialGrid:
        return self.f.grid


_OPS_CACHE: dict = {}


def operators(grid: RadialGrid) -> Operators:
    ops = _OPS_CACHE.get(grid)
    if ops is None:
        ops = Operators.build(grid)
        _OPS_CACHE[grid] = ops
    return ops


def drift_potential(s: State, u: np.ndarray) -> np.ndarray:
    psi = s.chemotaxis * u
    if s.frame == "self_similar":
        psi = psi - s.grid.nodes ** 2 / 4.0
    return psi


def _potential_system(s: State, beta: float, dt: float, rhs: np.ndarray) -> np.ndarray:
    """Solve (beta eps/dt) u - Lap u + alpha u [- eps D u] = rhs with the ghost value fixed."""
    ops = operators(s.grid)
    ghost = s.u.outer + s.ghost_drift * dt
    ab = -ops.lap.copy()
    ab[1] += beta * s.epsilon / dt + s.alpha
    rhs = rhs.copy()
    rhs[-1] += ops.lap_ghost * ghost
    if s.frame == "self_similar":
        ab -= s.epsilon * ops.trans
        rhs[-1] += s.epsilon * ops.trans_ghost * ghost
    return solve_banded((1, 1), ab, rhs)


def _density_system(s: State, psi: np.ndarray, beta: float, dt: float, rhs_w: np.ndarray) -> np.ndarray:
    ab = -flux_bands(s.grid, psi)
    ab[1] += beta * s.grid.volumes / dt
    return solve_banded((1, 1), ab, rhs_w)


def potential_rate(s: State, f: np.ndarray, u: np.ndarray) -> np.ndarray:
    """The right-hand side of the potential equation divided by eps."""
    g = s.grid
    rate = laplacian_values(g, u, s.u.outer) + f - s.alpha * u
    if s.frame == "self_similar":
        rate = rate / s.epsilon + transport_values(g, u, s.u.outer)
        return rate
    return rate / s.epsilon


def density_rate(s: State, f: np.ndarray, u: np.ndarray) -> np.ndarray:
    return apply_bands(flux_bands(s.grid, drift_potential(s, u)), f) / s.grid.volumes


def _imex1(s: State, dt: float):
    w = s.grid.volumes
    psi = drift_potential(s, s.u.values)
    f1 = _density_system(s, psi, 1.0, dt, w * s.f.values / dt)
    u1 = _potential_system(s, 1.0, dt, s.epsilon * s.u.values / dt + f1)
    return f1, u1


def _imex2(s: State, dt: float):
    if s.history is None:
        return _imex1(s, dt)
    f0, u0, dt0 = s.history
    w = s.grid.volumes
    om = dt / dt0
    beta = (1 + 2 * om) / (1 + om)
    c1, c0 = (1 + om), om * om / (1 + om)
    u_star = (1 + om) * s.u.values - om * u0
    psi = drift_potential(s, u_star)
    f1 = _density_system(s, psi, beta, dt, w * (c1 * s.f.values - c0 * f0) / dt)
    u1 = _potential_system(s, beta, dt, s.epsilon * (c1 * s.u.values - c0 * u0) / dt + f1)
    return f1, u1


def _be_newton(s: State, dt: float, tol: float = 1e-12, max_iter: int = 30):
    g = s.grid
    n = g.n
    ops = operators(g)
    w = g.volumes
    lap = ops.matrix(ops.lap)
    trans = ops.matrix(ops.trans)
    ghost_new = s.u.outer + s.ghost_drift * dt
    ghost_vec = np.zeros(n)
    ghost_vec[-1] = ops.lap_ghost * ghost_new
    tghost = np.zeros(n)
    tghost[-1] = ops.trans_ghost * ghost_new
    ss = s.frame == "self_similar"
    W = sp.diags(w)
    f_old, u_old = s.f.values, s.u.values

    def residual(f, u):
        psi = drift_potential(s, u)
        rf = w * (f - f_old) / dt - apply_bands(flux_bands(g, psi), f)
        ru = s.epsilon * (u - u_old) / dt - (lap @ u + ghost_vec) - f + s.alpha * u
        if ss:
            ru -= s.epsilon * (trans @ u + tghost)
        return np.concatenate((rf, ru))

    f, u = _imex1(s, dt)
    res = residual(f, u)
    scale = max(np.max(np.abs(w * f_old)) / dt, 1e-300)
    for _ in range(max_iter):
        psi = drift_potential(s, u)
        jff = W / dt - flux_matrix(g, psi)
        jfu = -s.chemotaxis * flux_potential_matrix(g, psi, f)
        juf = -sp.identity(n)
        juu = s.epsilon / dt * sp.identity(n) - lap + s.alpha * sp.identity(n)
        if ss:
            juu = juu - s.epsilon * trans
        jac = sp.bmat([[jff, jfu], [juf, juu]], format="csc")
        step = spsolve(jac, -res)
        lam = 1.0
        base = np.linalg.norm(res)
        while lam > 1e-4:
            fn, un = f + lam * step[:n], u + lam * step[n:]
            rn = residual(fn, un)
            if np.linalg.norm(rn) < (1 - 0.5 * lam) * base or np.linalg.norm(rn) <= tol * scale:
                break
            lam *= 0.5
        else:
            raise SolverError("damped Newton stalled", float(base))
        f, u, res = fn, un, rn
        if np.max(np.abs(res)) <= tol * scale:
            return f, u
    raise SolverError("Newton iteration did not converge", float(np.max(np.abs(res))))


_SCHEMES = {"imex1": _imex1, "imex2": _imex2, "be_newton": _be_newton}


def step(s: State, dt: float, scheme: str = "imex2") -> State:
    """Advance one step; imex2 uses the previous step stored in ``s.history``."""
    if not dt > 0:
        raise ContractError("dt must be positive")
    if scheme not in _SCHEMES:
        raise ContractError(f"unknown scheme {scheme!r}")
    if scheme == "be_newton":
        h = dt
        while True:
            try:
                s1 = s
                remaining = dt
                while remaining > 1e-15 * dt:
                    sub = min(h, remaining)
                    f1, u1 = _be_newton(s1, sub)
                    s1 = _advance(s1, f1, u1, sub)
                    remaining -= sub
                return s1
            except SolverError:
                h *= 0.5
                if h < dt * 2 ** -10:
                    raise
    f1, u1 = _SCHEMES[scheme](s, dt)
    return _advance(s, f1, u1, dt)


def _advance(s: State, f1, u1, dt) -> State:
    if not (np.all(np.isfinite(f1)) and np.all(np.isfinite(u1))):
        raise SolverError("non-finite values produced; integration aborted")
    g = s.grid
    outer = s.u.outer + s.ghost_drift * dt
    return replace(s, f=Field(g, f1, "density"), u=Field(g, u1, "potential", outer), t=s.t + dt,
                   history=(s.f.values, s.u.values, dt))


# -- initial data -----------------------------------------------------------


def newtonian_initial_potential(f: Field, alpha: float) -> Field:
    if alpha > 0:
        return bessel_solve(alpha, f)
    return poisson_solve_radial(f)[0]


def self_similar_potential(f: Field, epsilon: float, ghost: float = 0.0) -> Field:
    """Solve Lap v + eps (1/2) x.grad v + f = 0 with the given ghost value."""
    ops = operators(f.grid)
    ab = -(ops.lap + epsilon * ops.trans)
    rhs = f.values.copy()
    rhs[-1] += (ops.lap_ghost + epsilon * ops.trans_ghost) * ghost
    return Field(f.grid, solve_banded((1, 1), ab, rhs), "potential", ghost)


def profile_perturbation(p: ProfilePair, delta: float, space: NormSpace) -> tuple[Field, Field]:
    """A smooth mass-free perturbation (g0, v0) of the profile with |||(g0,v0) - (G,V)||| = delta."""
    g = p.grid
    r = g.nodes
    dg = (r * r / 2 - 1) * np.exp(-r * r / 2)
    dg -= g.volumes @ dg / (g.volumes @ np.exp(-r * r / 2)) * np.exp(-r * r / 2)
    dv = np.exp(-r * r / 2)
    fg = Field(g, dg, "density")
    fv = Field(g, dv, "potential", 0.0)
    h1 = norm(fg, replace(space, tag=Space.H1k))
    h2 = norm(fv, replace(space, tag=Space.H2))
    # split the budget evenly between the two components
    a, b = 0.5 * delta / h1, 0.5 * delta / h2
    g0 = p.G.values + a * dg
    if np.min(g0) < 0:
        raise ContractError("perturbation too large: density turned negative")
    return Field(g, g0, "density"), Field(g, p.V.values + b * dv, "potential", p.V.outer)


def stability_distance(s: State, p: ProfilePair, space: NormSpace) -> float:
    """|||(g,v) - (G,V)||| = ||g - G||_{H^1_k} + ||v - V||_{H^2}."""
    g = s.grid
    dg = Field(g, s.f.values - p.G.values, "density")
    dv = Field(g, s.u.values - p.V.values, "potential", s.u.outer - p.V.outer)
    return (norm(dg, replace(space, tag=Space.H1k)) + norm(dv, replace(space, tag=Space.H2)))


def initial_state(cfg: RunConfig, grid: Optional[RadialGrid] = None):
    """Initial state and, for profile-based data, the reference profile."""
    if not cfg.eps > 0:
        raise ConfigurationError("time integration needs eps > 0")
    grid = grid or build_grid(cfg.r_max, cfg.n, cfg.grading, cfg.ratio)
    profile = None
    space = NormSpace(Space.H1k, cfg.k, cfg.ell)
    if cfg.init == "gaussian":
        f = gaussian(grid, cfg.mass, cfg.width ** 2)
        if cfg.frame == "original":
            u = newtonian_initial_potential(f, cfg.alpha)
        else:
            u = self_similar_potential(f, cfg.eps)
    else:
        if cfg.frame != "self_similar":
            raise ConfigurationError("profile initial data live in the self-similar frame")
        profile = profile_for_mass(cfg.eps, cfg.mass, grid)
        if cfg.init == "profile":
            f, u = profile.G, profile.V
        else:
            f, u = profile_perturbation(profile, cfg.delta, space)
    s = State(f, u, 0.0, cfg.frame, cfg.eps, cfg.alpha, cfg.chemotaxis)
    return s, profile


# -- trajectories -----------------------------------------------------------


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    lp: list = field(default_factory=list)
    distance: list = field(default_factory=list)
    cumulative_dissipation: list = field(default_factory=list)
    energy_residual: list = field(default_factory=list)
    mass_drift: list = field(default_factory=list)
    densities: list = field(default_factory=list)
    potentials: list = field(default_factory=list)
    events: list = field(default_factory=list)
    grid: Optional[RadialGrid] = None
    frame: str = "original"
    config: Optional[RunConfig] = None

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.reports])

    def lp_column(self, p: float) -> np.ndarray:
        idx = LP_EXPONENTS.index(p)
        return np.array([row[idx] for row in self.lp])

    def density(self, i: int) -> Field:
        return Field(self.grid, self.densities[i], "density")


def step_times(T: float, dt: float, t_first: Optional[float] = None, growth: float = 1.05) -> np.ndarray:
    """Step end times: geometric from ``t_first`` with ratio ``growth`` until the increment
    reaches ``dt``, then uniform with step ``dt`` up to T."""
    times = []
    t = 0.0
    if t_first is not None:
        t = t_first
        times.append(t)
        while t * (growth - 1) < dt and t < T:
            t = min(t * growth, T)
            times.append(t)
    n_uniform = max(int(math.ceil((T - t) / dt - 1e-9)), 0)
    if n_uniform:
        times.extend(np.linspace(t, T, n_uniform + 1)[1:].tolist())
    return np.array(times)


def _dissipation(s: State) -> float:
    g = s.grid
    rate = laplacian_values(g, s.u.values, s.u.outer) + s.f.values - s.alpha * s.u.values
    return entropy_dissipation(s.f, s.u) + TWO_PI * float(np.dot(g.volumes, rate ** 2)) / s.epsilon


def _free_energy(s: State) -> float:
    return energy_report(s.f, s.u, s.alpha, s.epsilon).free_energy


@dataclass(frozen=True)
class BlowUpThresholds:
    ratio: float = 1e6
    fraction: float = 0.9


def _blow_up_indicators(grid: RadialGrid, f: np.ndarray):
    inner = grid.faces <= 2 * grid.faces[1] + 1e-15
    cells = np.nonzero(inner[1:])[0]
    core = TWO_PI * float(np.dot(grid.volumes[cells], f[cells]))
    return float(np.max(f)), core


def blow_up_monitor(traj: Trajectory, thresholds: BlowUpThresholds = BlowUpThresholds()):
    """First sample where ||f||_inf exceeds ratio * initial or the mass inside r < 2h
    exceeds fraction * 8 pi; None when no sample qualifies."""
    if not traj.densities:
        return None
    start = float(np.max(traj.densities[0]))
    for t, f in zip(traj.times, traj.densities):
        event = _check_blow_up(traj.grid, f, start, thresholds, t)
        if event:
            return event
    return None


def _check_blow_up(grid, f, start, thresholds, t):
    peak, core = _blow_up_indicators(grid, f)
    if peak > thresholds.ratio * start:
        return {"event": "blow_up", "time": t, "indicator": "sup_norm", "value": peak, "initial": start}
    if core > thresholds.fraction * 8 * math.pi:
        return {"event": "blow_up", "time": t, "indicator": "core_mass", "value": core}
    return None


def run(cfg: RunConfig, grid: Optional[RadialGrid] = None, state: Optional[State] = None,
        profile: Optional[ProfilePair] = None, keep_states: bool = True) -> Trajectory:
    """Integrate to cfg.T, sampling every ``cfg.cadence`` steps and at the final time."""
    if state is None:
        state, prof = initial_state(cfg, grid)
        profile = profile or prof
    g = state.grid
    space = NormSpace(Space.H1k, cfg.k, cfg.ell)
    thresholds = BlowUpThresholds(cfg.blowup_ratio, cfg.blowup_fraction)
    traj = Trajectory(grid=g, frame=state.frame, config=cfg)
    m0 = discrete_mass(g, state.f.values)
    f_peak0 = float(np.max(state.f.values))
    original = state.frame == "original"
    F0 = _free_energy(state) if original else math.nan
    d_prev = _dissipation(state) if original else 0.0
    integral = 0.0

    def sample(s: State):
        rep = energy_report(s.f, s.u, s.alpha, s.epsilon)
        traj.times.append(s.t)
        traj.reports.append(rep)
        traj.lp.append([lp_norm(s.f, p) for p in LP_EXPONENTS])
        traj.cumulative_dissipation.append(integral)
        traj.energy_residual.append(rep.free_energy + integral - F0 if original else math.nan)
        traj.mass_drift.append(discrete_mass(g, s.f.values) / m0 - 1.0)
        traj.distance.append(stability_distance(s, profile, space) if profile is not None else math.nan)
        if keep_states:
            traj.densities.append(s.f.values)
            traj.potentials.append(s.u.values)
        return _check_blow_up(g, s.f.values, f_peak0, thresholds, s.t)

    sample(state)
    times = step_times(cfg.T, cfg.dt, cfg.t_first, cfg.growth)
    t_prev = 0.0
    for j, t_next in enumerate(times):
        state = step(state, t_next - t_prev, cfg.scheme)
        state = replace(state, t=float(t_next))
        if original:
            d_new = _dissipation(state)
            integral += 0.5 * (d_prev + d_new) * (t_next - t_prev)
            d_prev = d_new
        t_prev = t_next
        if (j + 1) % cfg.cadence == 0 or j == len(times) - 1:
            event = sample(state)
            if event:
                traj.events.append(event)
                break
    traj.final_state = state
    return traj


# -- probes -----------------------------------------------------------------


def small_time_decay_probe(traj: Trajectory, q: float = 4 / 3) -> dict:
    """Series t^{1-1/q} ||f||_q and t^{p-1} ||f||_p^p for p in {2, 3} over the samples t > 0."""
    if not 4 / 3 <= q < 2:
        raise ContractError("q must lie in [4/3, 2)")
    out = {"t": [], "q": [], "p2": [], "p3": []}
    for t, f in zip(traj.times, traj.densities):
        if t <= 0:
            continue
        fld = Field(traj.grid, f, "density")
        out["t"].append(t)
        out["q"].append(t ** (1 - 1 / q) * lp_norm(fld, q))
        out["p2"].append(t * lp_norm(fld, 2) ** 2)
        out["p3"].append(t ** 2 * lp_norm(fld, 3) ** 3)
    return {k: np.array(v) for k, v in out.items()}


def restrict_to(fine: RadialGrid, coarse: RadialGrid, values: np.ndarray) -> np.ndarray:
    """Transfer nodal values to a coarser grid: pair averaging when the fine grid is a
    uniform two-fold refinement, linear interpolation with even extension otherwise."""
    if fine == coarse:
        return np.asarray(values)
    if (fine.grading == coarse.grading == "uniform" and fine.n == 2 * coarse.n
            and fine.r_max == coarse.r_max):
        return 0.5 * (values[0::2] + values[1::2])
    r = np.concatenate(([-fine.nodes[0]], fine.nodes))
    v = np.concatenate(([values[0]], values))
    return np.interp(coarse.nodes, r, v)


def uniqueness_gap(trajA: Trajectory, trajB: Trajectory) -> dict:
    """Delta(t) = sup_{s <= t} s^{1/4} ||f_A(s) - f_B(s)||_{4/3} on the coarser grid."""
    if trajA.frame != trajB.frame:
        raise ContractError("trajectories live in different frames")
    if len(trajA.times) != len(trajB.times) or not np.allclose(trajA.times, trajB.times, rtol=1e-9, atol=1e-14):
        raise ContractError("trajectories are sampled at different times")
    a, b = (trajA, trajB) if trajA.grid.n <= trajB.grid.n else (trajB, trajA)
    coarse = a.grid
    out_t, out_d = [], []
    running = 0.0
    for t, fa, fb in zip(a.times, a.densities, b.densities):
        diff = Field(coarse, fa - restrict_to(b.grid, coarse, fb))
        value = t ** 0.25 * lp_norm(diff, 4 / 3) if t > 0 else 0.0
        running = max(running, value)
        out_t.append(t)
        out_d.append(running)
    return {"t": np.array(out_t), "delta": np.array(out_d)}


def to_self_similar(grid_ss: RadialGrid, grid_orig: RadialGrid, f: np.ndarray, t: float) -> tuple[np.ndarray, float]:
    """Map an original-frame density at time t to self-similar variables:
    g(tau, y) = R^2 f(t, R y) with R = (1 + t)^{1/2} and tau = log(1 + t)."""
    R = math.sqrt(1 + t)
    r = np.concatenate(([-grid_orig.nodes[0]], grid_orig.nodes))
    v = np.concatenate(([f[0]], f))
    return R * R * np.interp(R * grid_ss.nodes, r, v, right=0.0), math.log1p(t)


def self_similar_companion(s: State) -> State:
    """The self-similar state matching an original-frame state at t = 0, with the
    ghost value following the Newtonian far field -(M/2pi)(log r + tau/2)."""
    if s.frame != "original" or s.t != 0 or s.alpha != 0:
        raise ContractError("companion runs start from an original-frame state at t = 0 with alpha = 0")
    m = discrete_mass(s.grid, s.f.values)
    return State(s.f, s.u, 0.0, "self_similar", s.epsilon, 0.0, s.chemotaxis, ghost_drift=-m / (4 * math.pi))
