import math

import numpy as np
import pytest

from kslab.errors import ConfigurationError, ContractError
from kslab.kernels import poisson_solve_radial
from kslab.radial_core import (
    Field,
    NormSpace,
    Space,
    build_grid,
    diff_op,
    discrete_mass,
    integrate,
    integrate_moment,
    laplacian_values,
    mass,
    norm,
)


def test_uniform_grid_spacing_and_unit_integral():
    g = build_grid(8.0, 512)
    assert np.allclose(np.diff(g.nodes), 8 / 512)
    assert g.faces[-1] == 8.0
    assert abs(integrate(g, np.ones(g.n), with_2pi=False) - 32.0) <= 1e-12 * 32


def test_geometric_grid_invariants():
    g = build_grid(12.0, 1024, "geometric", 1.005)
    assert np.all(np.diff(g.nodes) > 0)
    assert g.nodes[0] > 0
    assert np.all(g.weights > 0) and np.all(g.volumes > 0)
    one = integrate(g, np.ones(g.n), with_2pi=False)
    assert abs(one / 72.0 - 1) <= 1e-12
    assert np.diff(g.nodes)[-1] / np.diff(g.nodes)[0] > 100


def test_r_squared_quadrature_exact():
    g = build_grid(8.0, 512)
    assert abs(integrate(g, g.nodes ** 2, with_2pi=False) / 1024.0 - 1) <= 1e-8


def test_quadrature_converges_at_high_order():
    errs = []
    for n in (64, 128, 256):
        g = build_grid(10.0, n)
        errs.append(abs(integrate(g, np.exp(-g.nodes ** 2 / 2), with_2pi=False) - (1 - math.exp(-50))))
    assert errs[0] / errs[1] > 10 and errs[1] / errs[2] > 10


@pytest.mark.parametrize("r_max,n", [(0.0, 64), (-1.0, 64), (8.0, 8)])
def test_build_grid_rejects_bad_input(r_max, n):
    with pytest.raises(ConfigurationError):
        build_grid(r_max, n)


def test_build_grid_rejects_unknown_grading():
    with pytest.raises(ConfigurationError):
        build_grid(8.0, 64, "chebyshev")


def test_gaussian_line_moment():
    g = build_grid(12.0, 1024)
    f = Field.from_function(g, lambda r: np.exp(-r * r / 2))
    assert abs(integrate_moment(f, 2, False) - 2.0) <= 1e-8


def test_zero_field_moments():
    g = build_grid(8.0, 128)
    z = Field.zeros(g)
    assert all(integrate_moment(z, j) == 0.0 for j in range(9))


def test_algebraic_density_has_unit_mass():
    # the closed form of int 2 r (1 + r^2)^-2 dr over [0, R] is R^2 / (1 + R^2)
    g = build_grid(400.0, 20000, "geometric", 1.0005)
    f = Field.from_function(g, lambda r: (1 + r * r) ** -2 / math.pi)
    assert abs(mass(f) - 400 ** 2 / (1 + 400 ** 2)) <= 1e-8
    assert abs(mass(f) - 1) <= 1e-5


def test_moment_order_limit():
    g = build_grid(8.0, 64)
    with pytest.raises(ContractError):
        integrate_moment(Field.zeros(g), 9)


def test_norms_of_zero_pair():
    g = build_grid(8.0, 64)
    z = Field.zeros(g, "density")
    u = Field.zeros(g, "potential")
    for tag in (Space.L2, Space.L2k, Space.H1k, Space.H2):
        assert norm(z, NormSpace(tag)) == 0.0
    for tag in (Space.X, Space.Y, Space.Z):
        assert norm((z, u), NormSpace(tag)) == 0.0
    for tag in (Space.Xstar, Space.Ystar, Space.Zstar):
        assert norm((z, u), NormSpace(tag), kappa_f=u) == 0.0


def test_weighted_l2_matches_gauss_legendre_reference():
    g = build_grid(8.0, 512)
    f = Field.from_function(g, lambda r: np.exp(-r * r / 2))
    x, w = np.polynomial.legendre.leggauss(129)
    r = 4.0 * (x + 1)
    ref = math.sqrt(4.0 * np.sum(w * 2 * math.pi * r * np.exp(-r * r) * (1 + r * r) ** 8))
    assert abs(norm(f, NormSpace(Space.L2k, k=8)) / ref - 1) <= 1e-8


def test_starred_norm_requires_newtonian_potential():
    g = build_grid(8.0, 64)
    z = Field.zeros(g, "density")
    with pytest.raises(ContractError):
        norm((z, Field.zeros(g, "potential")), NormSpace(Space.Xstar))
    with pytest.raises(ContractError):
        norm(z, NormSpace(Space.X))


def test_x_and_xstar_norms_are_equivalent_on_zero_mass_family():
    g = build_grid(12.0, 400)
    r = g.nodes
    rng = np.random.default_rng(3)
    ratios = []
    for _ in range(12):
        f = (rng.standard_normal() + rng.standard_normal() * r * r) * np.exp(-r * r / 2)
        f -= discrete_mass(g, f) / discrete_mass(g, np.exp(-r * r / 2)) * np.exp(-r * r / 2)
        u = rng.standard_normal() * np.exp(-r * r / 3)
        ff = Field(g, f, "density")
        uu = Field(g, u, "potential", 0.0)
        kf = poisson_solve_radial(ff)[0]
        sp = NormSpace(Space.Xstar, eta=1.0, eta1=1.0, eta2=1.0)
        ratios.append(norm((ff, uu), NormSpace(Space.X)) / norm((ff, uu), sp, kappa_f=kf))
    assert 0.1 < min(ratios) and max(ratios) < 10


def test_norm_space_validation():
    with pytest.raises(ConfigurationError):
        NormSpace(Space.L2k, k=7)
    with pytest.raises(ConfigurationError):
        NormSpace(Space.L2k, k=8, ell=3)
    with pytest.raises(ConfigurationError):
        NormSpace(Space.X, eta=0.0)


def test_weighted_norm_monotone_in_k():
    g = build_grid(8.0, 128)
    f = Field.from_function(g, lambda r: np.exp(-r))
    vals = [norm(f, NormSpace(Space.L2k, k=k, ell=4)) for k in (7.5, 8, 9, 10)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_laplacian_of_r_squared_is_four():
    g = build_grid(8.0, 512)
    lap = diff_op(Field(g, g.nodes ** 2), "laplacian").values
    assert np.max(np.abs(lap[1:-1] - 4)) <= 1e-8 * 4


def test_laplacian_of_gaussian_is_second_order():
    errs = []
    for n in (128, 256, 512):
        g = build_grid(10.0, n)
        r = g.nodes
        lap = laplacian_values(g, np.exp(-r * r / 4), None)
        exact = (r * r / 4 - 1) * np.exp(-r * r / 4)
        errs.append(np.max(np.abs(lap - exact)[: n // 2]))
    order = np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])
    assert min(order) > 1.8


def test_conservative_laplacian_has_no_mass():
    g = build_grid(8.0, 300, "geometric", 1.01)
    rng = np.random.default_rng(0)
    f = Field(g, rng.standard_normal(g.n))
    assert abs(discrete_mass(g, diff_op(f, "laplacian").values)) <= 1e-10 * np.max(np.abs(f.values))


def test_gradient_even_extension_and_accuracy():
    g = build_grid(8.0, 400)
    r = g.nodes
    d = diff_op(Field(g, np.exp(-r * r / 2)), "gradient").values
    assert np.max(np.abs(d + r * np.exp(-r * r / 2))) <= 1e-3


def test_div_flux_of_constant():
    g = build_grid(8.0, 400)
    out = diff_op(Field(g, np.ones(g.n)), "div_flux").values
    # (1/r)(r)' = 1/r
    assert np.max(np.abs(out[1:-1] - 1 / g.nodes[1:-1]) * g.nodes[1:-1]) <= 1e-10


def test_diff_op_rejects_unknown():
    g = build_grid(8.0, 64)
    with pytest.raises(ContractError):
        diff_op(Field.zeros(g), "curl")


def test_field_invariants_and_serialisation():
    g = build_grid(8.0, 64)
    with pytest.raises(ContractError):
        Field(g, np.ones(10))
    with pytest.raises(ContractError):
        Field(g, np.full(g.n, np.nan))
    f = Field(g, np.linspace(0, 1, g.n), "potential", -0.5)
    back = Field.from_json(f.to_json())
    assert back.grid == g and np.array_equal(back.values, f.values) and back.outer == -0.5
    text = f.to_csv(["run test"])
    lines = text.splitlines()
    assert lines[0].startswith("#") and lines[1].startswith("# grid=uniform")
    assert lines[2] == "r,value" and len(lines) == 3 + g.n
