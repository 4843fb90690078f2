"""The linearisation of the rescaled system at a profile and its analysis.

Unknowns are the cell values of the density perturbation f and of the potential
perturbation u (ghost value zero). The density rows are the exact Jacobian of
the exponentially fitted flux used by the time stepper, so the matrices here are
the linearisation of the discrete dynamics, not a separate discretisation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .eigen import eigvals_qr
from .errors import ContractError, DomainError, SolverError
from .evolve import Operators, flux_matrix, flux_potential_matrix, operators
from .profiles import ProfilePair
from .radial_core import Field, NormSpace, RadialGrid, Space, TWO_PI, japanese, norm

KINDS = ("lambda_eps", "omega", "cutoff_A", "B_eps")
DENSE_QR_LIMIT = 2000


def smooth_cutoff(r: np.ndarray) -> np.ndarray:
    """C^2 bump: 1 on [0, 1/2], quintic smoothstep down to 0 at 2."""
    x = np.clip((np.asarray(r, dtype=float) - 0.5) / 1.5, 0.0, 1.0)
    return 1.0 - x ** 3 * (10 - 15 * x + 6 * x * x)


def newtonian_matrix(grid: RadialGrid) -> np.ndarray:
    """Matrix of f -> kappa_0 * f with the Newtonian ghost value (see poisson_solve_radial)."""
    n = grid.n
    cum = np.tril(np.ones((n, n))) * grid.volumes[None, :]
    steps = (grid.spacing / grid.face_radii)[:, None] * cum
    ghost_row = -math.log(grid.ghost) * cum[-1]
    return ghost_row[None, :] + np.cumsum(steps[::-1], axis=0)[::-1]


@dataclass
class OperatorMatrix:
    kind: str
    blocks: tuple
    grid: RadialGrid
    space: NormSpace
    projector: np.ndarray
    params: dict
    profile: Optional[ProfilePair] = field(default=None, repr=False)
    sparse: Optional[sp.spmatrix] = field(default=None, repr=False)

    @property
    def two_field(self) -> bool:
        return self.blocks[1] is not None

    @property
    def matrix(self) -> np.ndarray:
        if not self.two_field:
            return self.blocks[0]
        return np.block([[self.blocks[0], self.blocks[1]], [self.blocks[2], self.blocks[3]]])

    @property
    def size(self) -> int:
        return self.grid.n * (2 if self.two_field else 1)

    def mass_row(self) -> np.ndarray:
        """Linear functional giving the discrete mass (up to 2 pi) of a state vector."""
        m = np.zeros(self.size)
        m[: self.grid.n] = self.grid.volumes
        return m

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self.sparse is not None:
            return self.sparse @ x
        return self.matrix @ x

    def column_sum_defect(self) -> float:
        """max |sum_i w_i A_ij| over the density rows, relative to the entry scale."""
        w = self.grid.volumes
        n = self.grid.n
        rows = self.matrix[:n]
        scale = np.max(np.abs(w[:, None] * rows)) or 1.0
        return float(np.max(np.abs(w @ rows)) / scale)


def _zero_mass_projector(grid: RadialGrid, two_field: bool) -> np.ndarray:
    n = grid.n
    m = grid.volumes / np.linalg.norm(grid.volumes)
    size = 2 * n if two_field else n
    P = np.identity(size)
    P[:n, :n] -= np.outer(m, m)
    return P


def _lambda_blocks(p: ProfilePair, chemotaxis: float = 1.0):
    g = p.grid
    ops = operators(g)
    winv = sp.diags(1.0 / g.volumes)
    psi = chemotaxis * p.V.values - g.nodes ** 2 / 4.0
    ff = winv @ flux_matrix(g, psi)
    fu = chemotaxis * (winv @ flux_potential_matrix(g, psi, p.G.values))
    eps = p.epsilon
    uf = sp.identity(g.n) / eps
    uu = ops.matrix(ops.lap) / eps + ops.matrix(ops.trans)
    return ff.tocsr(), fu.tocsr(), uf.tocsr(), uu.tocsr()


def cutoff_matrix(grid: RadialGrid, N: float, R: float) -> np.ndarray:
    """N (chi_R f - chi_1 <chi_R f>) with chi_1 = chi / <chi>."""
    r = grid.nodes
    chiR = smooth_cutoff(r / R) if R > 0 else np.zeros_like(r)
    chi = smooth_cutoff(r)
    chi1 = chi / (TWO_PI * np.dot(grid.volumes, chi))
    return N * (np.diag(chiR) - np.outer(chi1, TWO_PI * grid.volumes * chiR))


def assemble(profile: ProfilePair, kind: str, space: Optional[NormSpace] = None,
             N: float = 40.0, R: float = 40.0) -> OperatorMatrix:
    if kind not in KINDS:
        raise ContractError(f"unknown operator kind {kind!r}")
    space = space or NormSpace(Space.X)
    g = profile.grid
    n = g.n
    params = {"epsilon": profile.epsilon, "N": N, "R": R, "alpha": 0.0, "M": profile.M}
    if kind == "omega":
        if profile.epsilon != 0:
            raise ContractError("the parabolic-elliptic limit needs the eps = 0 profile")
        ff, fu, _, _ = _lambda_blocks(replace(profile, epsilon=1.0))
        K = newtonian_matrix(g)
        omega = ff.toarray() + fu @ K
        return OperatorMatrix(kind, (omega, None, None, None), g, space,
                              _zero_mass_projector(g, False), params, profile)
    if profile.epsilon <= 0:
        raise ContractError(f"{kind} needs a profile with eps > 0")
    if kind in ("cutoff_A", "B_eps") and (N < 0 or R < 0):
        raise DomainError("N and R must be non-negative")
    blocks = _lambda_blocks(profile)
    sparse = sp.bmat([[blocks[0], blocks[1]], [blocks[2], blocks[3]]], format="csr")
    dense = tuple(b.toarray() for b in blocks)
    if kind == "lambda_eps":
        return OperatorMatrix(kind, dense, g, space, _zero_mass_projector(g, True), params, profile, sparse)
    A = cutoff_matrix(g, N, R)
    zero = np.zeros((n, n))
    if kind == "cutoff_A":
        return OperatorMatrix(kind, (A, zero, zero, zero), g, space, _zero_mass_projector(g, True), params, profile)
    Bff = dense[0] - A
    sparse_B = sparse - sp.bmat([[sp.csr_matrix(A), None], [None, sp.csr_matrix((n, n))]], format="csr")
    return OperatorMatrix(kind, (Bff, dense[1], dense[2], dense[3]), g, space,
                          _zero_mass_projector(g, True), params, profile, sparse_B)


# -- spectra ----------------------------------------------------------------


def zero_mass_basis_reduce(op: OperatorMatrix) -> np.ndarray:
    """Matrix of op on the zero-mass subspace in an orthonormal Householder basis."""
    A = op.matrix
    m = op.mass_row()
    v = m / np.linalg.norm(m)
    v[0] += np.sign(v[0]) or 1.0
    v /= np.linalg.norm(v)
    # H A H with H = I - 2 v v^T, then drop the first row and column (span of m)
    HA = A - 2.0 * np.outer(v, v @ A)
    HAH = HA - 2.0 * np.outer(HA @ v, v)
    return HAH[1:, 1:]


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    abscissa: float
    residuals: np.ndarray
    subspace: str
    method: str
    all_eigenvalues: np.ndarray = field(repr=False, default=None)

    def conjugation_defect(self) -> float:
        ev = self.all_eigenvalues
        a = np.sort_complex(ev)
        b = np.sort_complex(np.conj(ev))
        return float(np.max(np.abs(a - b)) / max(np.max(np.abs(ev)), 1.0))

    def rows(self):
        return [(float(z.real), float(z.imag), float(res)) for z, res in zip(self.eigenvalues, self.residuals)]


def dense_eigvals(a: np.ndarray, method: str = "auto") -> np.ndarray:
    if method == "auto":
        method = "qr" if a.shape[0] <= DENSE_QR_LIMIT else "lapack"
    if method == "qr":
        return eigvals_qr(a)
    if method == "lapack":
        return sla.eigvals(a)
    raise ContractError(f"unknown eigensolver {method!r}")


def _solver(op: OperatorMatrix, shift: complex):
    size = op.size
    if op.sparse is not None:
        lu = splu((op.sparse - shift * sp.identity(size)).astype(complex).tocsc())
        return lu.solve
    lu = sla.lu_factor(op.matrix - shift * np.identity(size))
    return lambda b: sla.lu_solve(lu, b)


def refine_eigenpair(op: OperatorMatrix, lam: complex, iters: int = 3, seed: int = 0):
    """Inverse iteration with Rayleigh-quotient updates; returns (lambda, vector, residual)."""
    rng = np.random.default_rng(seed)
    size = op.size
    x = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    # start inside the zero-mass subspace
    m = op.mass_row()
    x -= m * (m @ x) / (m @ m)
    scale = max(abs(lam), 1.0)
    best = (lam, x, math.inf)
    shift = lam
    for it in range(iters + 2):
        try:
            solve = _solver(op, shift + 1e-13 * scale * (1 + 1j) * (it == 0))
            x = solve(x)
        except (RuntimeError, np.linalg.LinAlgError):
            pass  # exactly singular shift: keep the current vector
        x /= np.linalg.norm(x)
        Ax = op.apply(x)
        rq = complex(np.vdot(x, Ax))
        res = float(np.linalg.norm(Ax - rq * x))
        if res < best[2]:
            best = (rq, x, res)
        if res <= 1e-14 * scale:
            break
        shift = rq
    return best


def spectrum(op: OperatorMatrix, restrict_zero_mass: bool = True, count: int = 20,
             method: str = "auto", refine: bool = True) -> SpectrumReport:
    """Rightmost ``count`` eigenvalues, each refined and checked by its residual."""
    A = zero_mass_basis_reduce(op) if restrict_zero_mass else op.matrix
    ev = dense_eigvals(A, method)
    if not np.all(np.isfinite(ev)):
        raise SolverError("eigenvalue computation produced non-finite values")
    order = np.lexsort((-ev.imag, -ev.real))
    ev = ev[order]
    top = ev[:count].copy()
    residuals = np.full(len(top), math.nan)
    if refine:
        for i, lam in enumerate(top):
            if lam.imag < 0 and i > 0 and abs(top[i - 1] - np.conj(lam)) < 1e-8 * max(1, abs(lam)):
                top[i] = np.conj(top[i - 1])
                residuals[i] = residuals[i - 1]
                continue
            rq, _, res = refine_eigenpair(op, lam)
            if abs(rq - lam) <= 1e-6 * max(1.0, abs(lam)):
                top[i] = rq.real if lam.imag == 0 else rq
            residuals[i] = res
    abscissa = float(np.max(ev.real))
    return SpectrumReport(top, abscissa, residuals, "zero_mass" if restrict_zero_mass else "full",
                          method, ev)


# -- semigroup --------------------------------------------------------------


def smooth_zero_mass_seed(grid: RadialGrid, two_field: bool, rng: np.random.Generator) -> np.ndarray:
    r = grid.nodes
    basis = np.array([(r * r / 4) ** j * np.exp(-r * r / 4) for j in range(4)])
    f = rng.standard_normal(4) @ basis
    f -= (grid.volumes @ f) / (grid.volumes @ basis[0]) * basis[0]
    if not two_field:
        return f
    ub = np.array([(r * r / 2) ** j * np.exp(-r * r / 2) for j in range(3)])
    return np.concatenate((f, rng.standard_normal(3) @ ub))


def state_norm(op: OperatorMatrix, x: np.ndarray, tag: Space) -> float:
    g = op.grid
    n = g.n
    f = Field(g, x[:n].real, "density")
    sp_ = replace(op.space, tag=tag)
    if not op.two_field:
        return norm(f, replace(op.space, tag=Space.L2k))
    u = Field(g, x[n:].real, "potential", 0.0)
    return norm((f, u), sp_)


@dataclass
class DecayReport:
    slope_X: float
    slope_Z: float
    worst: float
    times: np.ndarray
    norms_X: np.ndarray
    norms_Z: np.ndarray
    z_time_integral: np.ndarray

    def as_dict(self) -> dict:
        return {"slope_X": self.slope_X, "slope_Z": self.slope_Z, "worst": self.worst}


def semigroup_decay(op: OperatorMatrix, T: float = 20.0, seeds: int = 3, dt: float = 0.02,
                    seed: int = 0, startup: int = 4) -> DecayReport:
    """Evolve random smooth zero-mass data by Crank-Nicolson (with backward Euler start-up
    half steps to damp stiff modes) and fit log-norm slopes over [T/2, T]."""
    size = op.size
    A = op.sparse if op.sparse is not None else sp.csr_matrix(op.matrix)
    I = sp.identity(size, format="csc")
    # the backward Euler half step and the implicit half of Crank-Nicolson share one factorisation
    be = cn_left = splu((I - 0.5 * dt * A).tocsc())
    cn_right = (I + 0.5 * dt * A).tocsr()
    steps = int(round(T / dt))
    rng = np.random.default_rng(seed)
    times = np.arange(steps + 1) * dt
    normsX = np.zeros((seeds, steps + 1))
    normsZ = np.zeros((seeds, steps + 1))
    two = op.two_field
    tagZ = Space.Z if two else Space.L2k
    tagX = Space.X if two else Space.L2k
    for s in range(seeds):
        x = smooth_zero_mass_seed(op.grid, two, rng)
        normsX[s, 0] = state_norm(op, x, tagX)
        normsZ[s, 0] = state_norm(op, x, tagZ)
        for j in range(1, steps + 1):
            if j <= startup // 2:
                x = be.solve(be.solve(x))  # two backward Euler steps of dt/2
            else:
                x = cn_left.solve(cn_right @ x)
            normsX[s, j] = state_norm(op, x, tagX)
            normsZ[s, j] = state_norm(op, x, tagZ)
    window = times >= T / 2

    def slope(norms):
        worst = -math.inf
        for row in norms:
            worst = max(worst, float(np.polyfit(times[window], np.log(row[window]), 1)[0]))
        return worst

    sX, sZ = slope(normsX), slope(normsZ)
    # finite-horizon stand-in for the integral term of the time-regularised norm
    integral = np.sqrt(np.concatenate(([0.0], np.cumsum(0.5 * dt * (normsZ[:, 1:] ** 2 + normsZ[:, :-1] ** 2), axis=1)[0])))
    return DecayReport(sX, sZ, max(sX, sZ), times, normsX, normsZ, integral)


# -- resolvent --------------------------------------------------------------


def _weight_matrices(op: OperatorMatrix):
    g = op.grid
    sf = np.sqrt(TWO_PI * g.volumes * japanese(g.nodes) ** (2 * op.space.k))
    su = np.sqrt(TWO_PI * g.volumes)
    return sf, su


def weighted_opnorm(A: np.ndarray, row_w: np.ndarray, col_w: np.ndarray) -> float:
    """Operator 2-norm between weighted L^2 spaces with diagonal square-root weights."""
    return float(np.linalg.norm(row_w[:, None] * A / col_w[None, :], 2))


@dataclass
class SchurReport:
    R11: np.ndarray
    R12: np.ndarray
    R21: np.ndarray
    R22: np.ndarray
    relative_difference: float
    condition_d: float
    condition_s: float
    norm_R12: float
    norm_bd: float


def resolvent_schur(op: OperatorMatrix, z: complex, cond_limit: float = 1e13) -> SchurReport:
    """Block resolvent (Lambda - z)^{-1} through the Schur complement s = a - b d^{-1} c."""
    if op.kind != "lambda_eps":
        raise ContractError("resolvent_schur needs a lambda_eps operator")
    ff, fu, uf, uu = op.blocks
    n = op.grid.n
    I = np.identity(n)
    a = ff - z * I
    b = fu.astype(complex)
    c = uf.astype(complex)
    d = uu - z * I
    cd = np.linalg.cond(d)
    if cd > cond_limit:
        raise SolverError(f"d(z) is near singular (condition {cd:.3e})", cd)
    dinv = np.linalg.inv(d)
    s = a - b @ dinv @ c
    cs = np.linalg.cond(s)
    if cs > cond_limit:
        raise SolverError(f"Schur complement near singular (condition {cs:.3e})", cs)
    sinv = np.linalg.inv(s)
    bd = b @ dinv
    R11 = sinv
    R12 = -sinv @ bd
    R21 = -dinv @ c @ sinv
    R22 = dinv + dinv @ c @ sinv @ bd
    full = np.block([[R11, R12], [R21, R22]])
    direct = np.linalg.inv(op.matrix - z * np.identity(2 * n))
    rel = float(np.linalg.norm(full - direct) / np.linalg.norm(direct))
    sf, su = _weight_matrices(op)
    return SchurReport(R11, R12, R21, R22, rel, float(cd), float(cs),
                       weighted_opnorm(R12, sf, su), weighted_opnorm(bd, sf, su))


def omega_resolvent(op_omega: OperatorMatrix, z: complex) -> np.ndarray:
    n = op_omega.grid.n
    return np.linalg.inv(op_omega.matrix - z * np.identity(n))


# -- the d operator ---------------------------------------------------------


def _d_bands(ops: Operators, epsilon: float, z: complex, scaled: bool) -> np.ndarray:
    if scaled:
        ab = ops.lap / epsilon + ops.trans
        ab = ab.astype(complex)
        ab[1] -= z
    else:
        ab = (ops.lap + epsilon * ops.trans).astype(complex)
        ab[1] -= epsilon * z
    return ab


def solve_d(epsilon: float, z: complex, f: Field, scaled: bool = False) -> Field:
    """Solve Lap u + (eps/2) x.grad u - eps z u = f, or with ``scaled`` the form
    (1/eps) Lap v + (1/2) x.grad v - z v = f; zero ghost value in both."""
    if not complex(z).real > -0.5:
        raise DomainError(f"solve_d needs Re z > -1/2, got {z}")
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    ab = _d_bands(operators(f.grid), epsilon, complex(z), scaled)
    u = sla.solve_banded((1, 1), ab, f.values.astype(complex))
    return Field(f.grid, u, "generic", 0.0)


def l2_volume_norm(grid: RadialGrid, v: np.ndarray) -> float:
    return float(np.sqrt(TWO_PI * np.dot(grid.volumes, np.abs(v) ** 2)))


def d_resolvent_ratio(epsilon: float, z: complex, u: Field) -> float:
    """(1/2 + Re z) ||v|| / ||u|| for v = d(z)^{-1} u; at most one."""
    v = solve_d(epsilon, z, u, scaled=True)
    return (0.5 + complex(z).real) * l2_volume_norm(u.grid, v.values) / l2_volume_norm(u.grid, u.values)


def d_gradient_ratio(epsilon: float, z: complex, u: Field) -> float:
    """(||Lap v|| + ||grad v||) / ||u|| for v = d(z)^{-1} u."""
    g = u.grid
    v = solve_d(epsilon, z, u, scaled=True)
    ops = operators(g)
    lap = ops.lap
    vv = v.values
    lv = lap[1] * vv
    lv[:-1] += lap[0, 1:] * vv[1:]
    lv[1:] += lap[2, :-1] * vv[:-1]
    d = np.append(np.diff(vv), -vv[-1]) / g.spacing
    grad = math.sqrt(TWO_PI * float(np.sum(g.face_radii * g.spacing * np.abs(d) ** 2)))
    return (l2_volume_norm(g, lv) + grad) / l2_volume_norm(g, u.values)


def d_gradient_opnorm(grid: RadialGrid, epsilon: float, z: complex) -> dict:
    """Operator norms of u -> grad v and u -> Lap v for v = d(z)^{-1} u in the
    volume-weighted L^2 norms, from dense matrices."""
    n = grid.n
    ops = operators(grid)
    d = ops.matrix(_d_bands(ops, epsilon, complex(z), True)).toarray()
    dinv = np.linalg.inv(d)
    lap = ops.matrix(ops.lap).toarray() @ dinv
    # face differences, the last one towards the zero ghost value
    D = (np.eye(n, k=1) - np.eye(n))[:, :] / grid.spacing[:, None]
    grad = D @ dinv
    w = np.sqrt(TWO_PI * grid.volumes)
    wf = np.sqrt(TWO_PI * grid.face_radii * grid.spacing)
    g = weighted_opnorm(grad, wf, w)
    l = weighted_opnorm(lap, w, w)
    return {"gradient": g, "laplacian": l, "total": g + l}


# -- hypo-dissipativity -----------------------------------------------------


@dataclass
class Certificate:
    value: float
    threshold: float
    passed: bool
    params: dict

    def as_dict(self) -> dict:
        return {"value": self.value, "threshold": self.threshold, "passed": self.passed, **self.params}


def hypodissipativity_check(opB: OperatorMatrix, space: Optional[NormSpace] = None, a: float = -0.4) -> Certificate:
    """sup Re<w, B w>/<w, w> over zero-mass w in the twisted norm
    ||f||^2_{L^2_k} + eta ||u - kappa_f||^2 (+ gradient terms for Ystar)."""
    if opB.kind not in ("B_eps", "lambda_eps"):
        raise ContractError("hypodissipativity_check needs a B_eps (or lambda_eps) operator")
    if not -0.5 < a < 0:
        raise DomainError("a must lie in (-1/2, 0)")
    space = space or replace(opB.space, tag=Space.Xstar)
    if space.tag not in (Space.Xstar, Space.Ystar):
        raise ContractError("the certificate is defined in Xstar or Ystar")
    g = opB.grid
    n = g.n
    K = newtonian_matrix(g)
    sf, su = _weight_matrices(replace(opB, space=space))
    eta = space.eta
    # y = P x with x = (f, u), y = (S_f f, sqrt(eta) S_u (u - K f))
    P = np.zeros((2 * n, 2 * n))
    P[:n, :n] = np.diag(sf)
    P[n:, :n] = -math.sqrt(eta) * su[:, None] * K
    P[n:, n:] = np.diag(math.sqrt(eta) * su)
    Pinv = np.linalg.inv(P)
    Bm = opB.matrix
    if space.tag == Space.Ystar:
        # gradient terms: energy-weighted face differences
        Gf = _gradient_factor(g, space.k)
        Gu = _gradient_factor(g, 0.0)
        eta1 = space.eta1
        Pg = np.zeros((2 * n, 2 * n))
        Pg[:n, :n] = Gf
        Pg[n:, :n] = -math.sqrt(eta1) * Gu @ K
        Pg[n:, n:] = math.sqrt(eta1) * Gu
        Pfull = np.vstack((P, Pg))
        gram = Pfull.T @ Pfull
        L = np.linalg.cholesky(gram)
        Linv = np.linalg.inv(L)
        Mt = L.T @ Bm @ Linv.T
        m = np.zeros(2 * n)
        m[:n] = g.volumes
        c = Linv @ m
    else:
        Mt = P @ Bm @ Pinv
        m = np.zeros(2 * n)
        m[:n] = g.volumes
        c = Pinv.T @ m
    sym = 0.5 * (Mt + Mt.T)
    v = c / np.linalg.norm(c)
    v[0] += np.sign(v[0]) or 1.0
    v /= np.linalg.norm(v)
    Hs = sym - 2.0 * np.outer(v, v @ sym)
    Hs = Hs - 2.0 * np.outer(Hs @ v, v)
    red = Hs[1:, 1:]
    value = float(sla.eigvalsh(0.5 * (red + red.T), subset_by_index=[red.shape[0] - 1, red.shape[0] - 1])[0])
    params = {"epsilon": opB.params["epsilon"], "N": opB.params["N"], "R": opB.params["R"],
              "k": space.k, "eta": eta, "space": space.tag.value, "n": n}
    return Certificate(value, a, value <= a, params)


def _gradient_factor(grid: RadialGrid, k: float) -> np.ndarray:
    """Matrix D with |D x|^2 = int |x'|^2 <r>^{2k} from face differences (no-flux outer face)."""
    n = grid.n
    rf = grid.face_radii[:-1]
    wts = np.sqrt(TWO_PI * rf * grid.spacing[:-1] * japanese(rf) ** (2 * k)) / grid.spacing[:-1]
    D = np.zeros((n - 1, n))
    idx = np.arange(n - 1)
    D[idx, idx] = -wts
    D[idx, idx + 1] = wts
    # pad to square so it stacks with the L^2 factor
    return np.vstack((D, np.zeros((1, n))))
