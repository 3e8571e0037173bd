import numpy as np
import pytest
from scipy import integrate

from conftest import shear_field, tg_field
from dissipation_lab.errors import ParameterError, PreconditionError, ResolutionError
from dissipation_lab.grid import Grid, SampledField
from dissipation_lab.mollify import (KernelProfile, build_kernel, commutator_norm,
                                     double_mollify_points, mollify, mollify_points,
                                     read_kernel_table, self_convolve, write_kernel_table)
from dissipation_lab.testfunctions import TestFunction, bump


def _bump_1d_oracle():
    """Normalising constant and CDF of exp(-1/(1-s^2)) on (-1, 1)."""
    f = lambda s: np.exp(-1.0 / (1.0 - s * s)) if abs(s) < 1 else 0.0
    c = integrate.quad(f, -1, 1, epsabs=1e-14)[0]
    return f, c


def test_standard_bump_1d_mass_and_evenness(rho1):
    assert rho1.mass == pytest.approx(1.0, abs=1e-15)
    v, _ = rho1.evaluate(np.array([[0.3], [-0.3]]))
    assert v[0] == v[1]
    # node set symmetric under z -> -z, values even, gradients odd
    order = np.lexsort(rho1.nodes.T)
    rev = np.lexsort((-rho1.nodes).T)
    assert np.array_equal(rho1.nodes[order], -rho1.nodes[rev])
    assert np.array_equal(rho1.values[order], rho1.values[rev])


def test_kernel_values_match_closed_form(rho1):
    f, c = _bump_1d_oracle()
    z = np.array([0.0, 0.25, 0.6])
    v, g = rho1.evaluate(z[:, None])
    # discrete normalisation differs from the continuum one by the quadrature error only
    assert np.allclose(v, [f(s) / c for s in z], rtol=2e-5)
    fd = (rho1.evaluate(z[:, None] + 1e-6)[0] - rho1.evaluate(z[:, None] - 1e-6)[0]) / 2e-6
    assert np.allclose(g[:, 0], fd, atol=1e-6)


def test_half_support_and_resolution():
    k = build_kernel(KernelProfile(radius=0.5), 2, 17)
    assert k.half_support and k.mass == pytest.approx(1.0, abs=1e-14)
    assert np.max(np.linalg.norm(k.nodes, axis=1)) < 0.5
    with pytest.raises(ResolutionError):
        build_kernel(KernelProfile(), 2, 16)


def test_anisotropic_width_ratio():
    k = build_kernel(KernelProfile("anisotropic-bump", matrix=((4.0, 0.0), (0.0, 0.25))), 2, 32)
    m = k.second_moments()
    assert m[1, 1] / m[0, 0] == pytest.approx(256.0, rel=1e-6)
    assert np.sqrt(m[1, 1] / m[0, 0]) == pytest.approx(16.0, rel=1e-6)
    assert not k.radial
    assert np.max(np.linalg.norm(k.nodes, axis=1)) <= 1.0
    with pytest.raises(ParameterError):
        build_kernel(KernelProfile("anisotropic-bump", matrix=((1.0, 0.0), (0.0, 0.0))), 2, 17)
    with pytest.raises(ParameterError):
        build_kernel(KernelProfile("anisotropic-bump", matrix=((1.0, 0.0), (0.0, -1.0))), 2, 17)


def test_flow_averaged_kernel_admissible():
    k = build_kernel(KernelProfile("flow-averaged-bump", generator=((2.0, 0.0), (0.0, -2.0))), 2, 24)
    assert k.mass == pytest.approx(1.0, abs=1e-14)
    assert k.is_nonnegative()
    assert np.max(np.linalg.norm(k.nodes, axis=1)) <= 1.0 + 1e-12
    v, _ = k.evaluate(np.array([[0.2, 0.1], [-0.2, -0.1]]))
    assert v[0] == pytest.approx(v[1], rel=1e-13)


def test_mollify_constant_and_affine(rho2):
    g = Grid.from_bounds((-1.0, -1.0), (1.0, 1.0), (64, 64))
    c = SampledField(g, np.full((64, 64, 2), 2.5))
    assert np.allclose(mollify(c, rho2, 0.2).values, 2.5, atol=1e-14)
    a = SampledField.from_function(g, lambda p: (1.0 + 2 * p[:, 0] - p[:, 1])[:, None])
    al = mollify(a, rho2, 0.2)
    exact = 1.0 + 2 * al.grid.points()[:, 0] - al.grid.points()[:, 1]
    assert np.allclose(al.flat()[:, 0], exact, atol=1e-13)


def test_mollify_shear_profile_matches_1d_oracle():
    # a jump makes the node quadrature first order in 1/n, hence the finer kernel
    rho = build_kernel(KernelProfile(), 2, 64)
    u = shear_field(1024)
    ell = 0.1
    ys = np.array([-0.06, -0.02, 0.0, 0.03, 0.07])
    pts = np.column_stack([np.zeros_like(ys), ys])
    vals, _ = mollify_points(u, rho, ell, pts)
    # sgn * rho_ell at height y = 2 A(y / ell) - 1 with A the CDF of the 2D bump marginal
    f = lambda s, t: np.exp(-1.0 / (1.0 - s * s - t * t)) if s * s + t * t < 1 else 0.0
    marg = lambda t: integrate.quad(lambda s: f(s, t), -np.sqrt(max(1 - t * t, 0)),
                                    np.sqrt(max(1 - t * t, 0)), epsabs=1e-14)[0]
    tot = integrate.quad(marg, -1, 1, epsabs=1e-14)[0]
    cdf = lambda y: integrate.quad(marg, -1, y, epsabs=1e-14)[0] / tot
    oracle = np.array([2 * cdf(y / ell) - 1 for y in ys])
    assert np.allclose(vals[:, 0], oracle, atol=2e-3)
    assert np.all(np.diff(vals[:, 0]) > 0)
    assert abs(vals[2, 0]) < 1e-12


def test_mollify_grid_matches_points(rho2):
    u = tg_field(64)
    ul, gr = mollify(u, rho2, 0.5, with_gradient=True)
    pts = ul.grid.points()[::97]
    v, gp = mollify_points(u, rho2, 0.5, pts, ngrad=2)
    assert np.allclose(ul.flat()[::97], v, atol=1e-13)
    assert np.allclose(gr.reshape(-1, 2, 2)[::97], gp, atol=1e-12)


def test_mollify_gradient_is_exact_convolution_derivative(rho2):
    u = tg_field(128)
    pts = np.array([[3.0, 2.0], [1.0, 4.5]])
    _, g = mollify_points(u, rho2, 0.4, pts, ngrad=2)
    h = 1e-5
    for k in range(2):
        e = np.eye(2)[k] * h
        fd = (mollify_points(u, rho2, 0.4, pts + e)[0] - mollify_points(u, rho2, 0.4, pts - e)[0]) / (2 * h)
        # the interpolant is piecewise bilinear, so compare with a loose tolerance
        assert np.allclose(g[:, :, k], fd, atol=5e-3)


def test_young_stability(rho2):
    u = shear_field(128)
    assert mollify(u, rho2, 0.1).sup_norm() <= u.sup_norm() + 1e-14


def test_adjoint_identity(rho2):
    u = tg_field(128)
    phi = bump((3.0, 3.0), 1.2)
    ell = 0.3
    ul = mollify(u, rho2, ell)
    lhs = np.sum(ul.flat() * phi(ul.grid.points())[:, None], axis=0) * ul.grid.cell_volume
    # phi * rho_ell evaluated in closed form at the nodes of u
    pts = u.grid.points()
    phil = np.zeros(len(pts))
    for z, m in zip(rho2.nodes, rho2.masses()):
        phil += m * phi(pts + ell * z)
    rhs = np.sum(u.flat() * phil[:, None], axis=0) * u.grid.cell_volume
    assert np.allclose(lhs, rhs, atol=2e-3)


def test_self_convolve_properties(rho2_half):
    eta = self_convolve(rho2_half)
    assert eta.mass == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(eta.second_moments(), 2 * rho2_half.second_moments(), rtol=1e-12)
    v, _ = eta.evaluate(np.array([[0.3, -0.2], [-0.3, 0.2]]))
    assert v[0] == pytest.approx(v[1], rel=1e-12)
    assert np.max(np.linalg.norm(eta.nodes, axis=1)) <= 1.0
    with pytest.raises(PreconditionError):
        self_convolve(build_kernel(KernelProfile(), 2, 17))


def test_double_mollification_equals_eta(rho2_half):
    u = tg_field(128)
    eta = self_convolve(rho2_half)
    pts = np.random.default_rng(3).uniform(2.0, 4.0, size=(25, 2))
    twice = double_mollify_points(u, rho2_half, 0.5, pts)
    once, _ = mollify_points(u, eta, 0.5, pts)
    assert np.max(np.abs(twice - once)) < 1e-10


def test_commutator_norm(rho2):
    u = tg_field(128)
    assert commutator_norm(lambda p: np.ones(len(p)), u, rho2, 0.3) < 1e-13
    # smooth u: the first-order term cancels by evenness, so the decay is faster than linear
    phi = TestFunction((3.0, 3.0), 1.5, {(1, 0): 1.0}, label="x1-bump")
    smooth = [commutator_norm(phi, u, rho2, e) for e in (0.4, 0.2)]
    assert smooth[1] < 0.5 * smooth[0]


def test_commutator_norm_linear_decay_on_jump(rho2):
    u = shear_field(256)
    # d(phi)/dy must not vanish on the jump line for the O(ell) term to survive
    phi = TestFunction((0.0, 0.0), 0.5, {(0, 1): 1.0}, label="x2-bump")
    ells = (0.2, 0.1, 0.05)
    vals = [commutator_norm(phi, u, rho2, e) for e in ells]
    L = phi.lipschitz()
    for e, v in zip(ells, vals):
        assert v <= L * e * u.sup_norm() * rho2.abs_mass()
    assert vals[1] / vals[0] == pytest.approx(0.5, rel=0.2)
    assert vals[2] / vals[1] == pytest.approx(0.5, rel=0.2)


def test_kernel_table_roundtrip(tmp_path, rho1):
    p = tmp_path / "k.csv"
    write_kernel_table(rho1, p)
    t = read_kernel_table(p)
    assert np.array_equal(t["nodes"], rho1.nodes)
    assert np.array_equal(t["weights"], rho1.weights)
