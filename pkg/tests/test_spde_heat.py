import math

import numpy as np
import pytest
from scipy import integrate, linalg

from mlmc_weak import spde_heat as heat
from mlmc_weak.rng import BrownianIncrements

CFG = heat.HeatConfig()
CFG2 = heat.HeatConfig(operator="G2")


def test_config_validation():
    with pytest.raises(ValueError, match="trace class"):
        heat.HeatConfig(eta=1.0)
    with pytest.raises(ValueError):
        heat.HeatConfig(c_mu=0.0)
    assert CFG2.operator is heat.Operator.G2


def test_eigen_and_covariance():
    lam, e1 = heat.eigenpair(1)
    assert lam == pytest.approx(9.8696, abs=1e-4)
    norm, _ = integrate.quad(lambda x: e1(x) ** 2, 0, 1)
    assert norm == pytest.approx(1.0)
    assert heat.q_eigenvalue(1, CFG) == 5.0
    assert heat.q_eigenvalue(2, CFG) == pytest.approx(0.15625)
    with pytest.raises(ValueError):
        heat.eigenpair(0)


@pytest.mark.parametrize("j", [1, 2, 3, 4, 7])
def test_x0_coefficient_against_quadrature(j):
    _, ej = heat.eigenpair(j)
    ref, _ = integrate.quad(lambda x: heat.x0_function(x) * ej(x), 0, 1, epsabs=1e-14)
    assert heat.x0_coefficient(j) == pytest.approx(ref, abs=1e-12)
    assert abs(heat.x0_coefficient(j) - ref) < 1e-8


def test_x0_coefficient_values_and_parseval():
    assert heat.x0_coefficient(2) == 0.0
    assert heat.x0_coefficient(1) == pytest.approx(0.182442, abs=1e-6)
    ref, _ = integrate.quad(lambda x: heat.x0_function(x) ** 2, 0, 1)
    assert ref == pytest.approx(1 / 30)
    total = np.sum(heat.x0_coefficient(np.arange(1, 2001)) ** 2)
    assert total == pytest.approx(1 / 30, rel=1e-12)


def test_assemble_small():
    mass, stiff = heat.assemble_matrices(2)
    np.testing.assert_allclose(mass.to_dense(), [[1 / 3]])
    np.testing.assert_allclose(stiff.to_dense(), [[4.0]])
    with pytest.raises(ValueError):
        heat.assemble_matrices(1)


def _hat(i, n_h):
    return lambda x: np.interp(x, np.arange(n_h + 1) / n_h, np.eye(n_h + 1)[i])


def test_assemble_against_quadrature():
    n_h = 5
    mass, stiff = heat.assemble_matrices(n_h)
    h = 1 / n_h
    ref_m = np.zeros((n_h - 1, n_h - 1))
    ref_a = np.zeros_like(ref_m)
    pts = np.arange(n_h + 1) * h
    for a in range(1, n_h):
        for b in range(1, n_h):
            ref_m[a - 1, b - 1] = integrate.quad(lambda x: _hat(a, n_h)(x) * _hat(b, n_h)(x), 0, 1,
                                                 points=pts[1:-1])[0]
            # hat derivatives are +-1/h on their two cells
            da = lambda x: np.where((x > pts[a - 1]) & (x < pts[a]), 1 / h,
                                    np.where((x > pts[a]) & (x < pts[a + 1]), -1 / h, 0.0))
            db = lambda x: np.where((x > pts[b - 1]) & (x < pts[b]), 1 / h,
                                    np.where((x > pts[b]) & (x < pts[b + 1]), -1 / h, 0.0))
            ref_a[a - 1, b - 1] = integrate.quad(lambda x: da(x) * db(x), 0, 1, points=pts[1:-1])[0]
    np.testing.assert_allclose(mass.to_dense(), ref_m, atol=1e-12)
    np.testing.assert_allclose(stiff.to_dense(), ref_a, atol=1e-9)


def test_thomas_against_solve_banded():
    rng = np.random.default_rng(1)
    n = 9
    tri = heat.Tridiagonal(rng.uniform(-1, 0, n - 1), rng.uniform(3, 4, n), rng.uniform(-1, 0, n - 1))
    rhs = rng.normal(size=(3, n))
    ab = np.zeros((3, n))
    ab[0, 1:], ab[1], ab[2, :-1] = tri.sup, tri.diag, tri.sub
    ref = linalg.solve_banded((1, 1), ab, rhs.T).T
    np.testing.assert_allclose(heat.thomas_solve(tri, rhs), ref, rtol=1e-12)
    np.testing.assert_allclose(tri.matvec(rhs), rhs @ tri.to_dense().T, rtol=1e-12)


def test_interpolate_examples():
    np.testing.assert_allclose(heat.interpolate(heat.x0_function, 4), [3 / 16, 4 / 16, 3 / 16])
    lin = lambda x: np.minimum(x, 1 - x)
    coarse = heat.interpolate(lin, 4)
    np.testing.assert_allclose(heat.prolong(coarse, 4, 16), heat.interpolate(lin, 16), atol=1e-15)
    with pytest.raises(ValueError):
        heat.prolong(coarse, 4, 6)


def test_discrete_norm():
    assert heat.discrete_norm_sq(np.zeros(3), 4) == 0.0
    assert heat.discrete_norm_sq(np.full(3, 2.0), 4) == pytest.approx(3.0)
    _, e1 = heat.eigenpair(1)
    vals = [heat.discrete_norm_sq(heat.interpolate(e1, n), n) for n in (4, 16, 64)]
    assert abs(vals[-1] - 1) < 1e-12


def test_kl_coeffs():
    np.testing.assert_array_equal(heat.kl_increment_coeffs(np.zeros(4), CFG), np.zeros(4))
    np.testing.assert_allclose(heat.kl_increment_coeffs(np.array([1.0]), CFG), [math.sqrt(5)])


def _interp_norm_sq(n_h):
    _, e1 = heat.eigenpair(1)
    f = lambda x: np.interp(x, np.arange(n_h + 1) / n_h, np.r_[0, heat.interpolate(e1, n_h), 0])
    return integrate.quad(lambda x: f(x) ** 2, 0, 1, points=np.arange(1, n_h) / n_h, limit=200)[0]


@pytest.mark.parametrize("n_h", [4, 8, 32])
def test_apply_g1h_single_mode(n_h):
    mass, _ = heat.assemble_matrices(n_h)
    basis = heat.sine_basis(n_h, 1)
    mb = mass.matvec(basis)
    v = basis[0]
    coeff = np.array([0.37])
    out = heat.apply_g1h(v, coeff, basis, mb)
    np.testing.assert_allclose(out, _interp_norm_sq(n_h) * 0.37 * v, rtol=1e-9)
    np.testing.assert_array_equal(heat.apply_g1h(np.zeros_like(v), coeff, basis, mb), 0 * v)
    np.testing.assert_array_equal(heat.apply_g1h(v, np.zeros(1), basis, mb), 0 * v)


def test_interpolated_norm_tends_to_one():
    errs = [abs(_interp_norm_sq(n) - 1) for n in (4, 16, 64)]
    assert errs[0] > errs[1] > errs[2] and errs[2] < 1e-3


def test_apply_g2h():
    basis = heat.sine_basis(8, 3)
    v = np.linspace(0.1, 0.7, 7)
    c = np.array([0.2, -0.1, 0.05])
    np.testing.assert_array_equal(heat.apply_g2h(np.zeros(7), c, basis), np.zeros(7))
    np.testing.assert_array_equal(heat.apply_g2h(v, np.zeros(3), basis), np.zeros(7))
    x = heat.nodes(8)
    noise = sum(c[j] * math.sqrt(2) * np.sin((j + 1) * math.pi * x) for j in range(3))
    np.testing.assert_allclose(heat.apply_g2h(v, c, basis), np.sin(v) * noise, rtol=1e-12)


@pytest.mark.parametrize("ell,base_k,expected", [
    (1, 1.0, (0.25, 4, 0.5, 2, 2)),
    (3, 1.0, (2.0 ** -6, 64, 1 / 8, 8, 8)),
    (0, 0.25, (0.25, 4, 0.5, 2, 2)),
])
def test_level_params(ell, base_k, expected):
    p = heat.level_params(ell, base_k)
    assert (p.k, p.n_k, p.h, p.n_h, p.kappa) == pytest.approx(expected)


def test_level_params_errors():
    with pytest.raises(ValueError):
        heat.level_params(-1)
    with pytest.raises(ValueError):
        heat.level_params(1, r=0.5)


def _dense_reference(cfg, lvl, dbeta, x0):
    mass, stiff = heat.assemble_matrices(lvl.n_h)
    m, a = mass.to_dense(), stiff.to_dense()
    basis = heat.sine_basis(lvl.n_h, lvl.kappa)
    sqrt_mu = np.sqrt(heat.q_eigenvalue(np.arange(1, lvl.kappa + 1), cfg))
    x = x0.copy()
    for row in dbeta:
        c = sqrt_mu * row
        if cfg.operator is heat.Operator.G1:
            g = ((basis @ m @ x) * c) @ basis
        else:
            g = np.sin(x) * (c @ basis)
        x = np.linalg.solve(m + lvl.k * a, m @ (x + g))
    return x


@pytest.mark.parametrize("cfg", [CFG, CFG2])
def test_implicit_euler_against_dense_solver(cfg):
    lvl = heat.level_params(2)
    dbeta = np.random.default_rng(3).normal(0, math.sqrt(lvl.k), (lvl.n_k, lvl.kappa))
    x0 = heat.interpolate(heat.x0_function, lvl.n_h)
    got = heat.implicit_euler_path(cfg, lvl, BrownianIncrements(lvl.k, dbeta))
    np.testing.assert_allclose(got, _dense_reference(cfg, lvl, dbeta, x0), rtol=1e-10, atol=1e-16)


def test_implicit_euler_zero_cases():
    lvl = heat.level_params(2)
    zero = BrownianIncrements(lvl.k, np.zeros((lvl.n_k, lvl.kappa)))
    path = heat.implicit_euler_path(CFG, lvl, zero, x_init=np.zeros(lvl.n_h - 1), record=True)
    assert path.shape == (lvl.n_k + 1, lvl.n_h - 1) and not path.any()
    states = heat.implicit_euler_path(CFG2, lvl, zero, record=True)
    norms = [heat.discrete_norm_sq(s, lvl.n_h) for s in states]
    assert all(b <= a for a, b in zip(norms, norms[1:]))
    with pytest.raises(ValueError):
        heat.implicit_euler_path(CFG, lvl, BrownianIncrements(lvl.k, np.zeros((3, lvl.kappa))))


def test_exact_terminal_g1():
    beta = np.random.default_rng(0).normal(size=6)
    j = np.arange(1, 7)
    # beta(0) = 0 for every mode
    np.testing.assert_allclose(heat.exact_terminal_g1(CFG, np.zeros(6), 6, t=0.0), heat.x0_coefficient(j))
    out = heat.exact_terminal_g1(CFG, beta, 6)
    assert not out[1::2].any()
    val = heat.exact_terminal_g1(CFG, np.zeros(1), 1)[0]
    assert val == pytest.approx(0.182442 * math.exp(-(math.pi ** 2 + 2.5)), rel=1e-5)
    with pytest.raises(ValueError):
        heat.exact_terminal_g1(CFG, beta, 7)


def test_exact_norm_identities():
    beta = np.random.default_rng(1).normal(size=40)
    coeffs = heat.exact_terminal_g1(CFG, beta, 40)
    assert heat.exact_norm_sq_g1(CFG, beta, 40) == pytest.approx(np.sum(coeffs ** 2), rel=1e-12)
    assert heat.exact_norm_sq_g1(CFG, np.zeros(40), 40, t=0.0) == pytest.approx(1 / 30, rel=1e-5)
    assert heat.exact_expected_norm_sq_g1(CFG, 0.0, 10**5) == pytest.approx(1 / 30, rel=1e-12)


def test_spectral_to_nodal():
    c = np.array([0.5, 0.0, -0.2])
    x = heat.nodes(8)
    ref = sum(c[j] * math.sqrt(2) * np.sin((j + 1) * math.pi * x) for j in range(3))
    np.testing.assert_allclose(heat.spectral_to_nodal(c, 8), ref, atol=1e-15)
