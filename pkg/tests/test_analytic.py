import math

import numpy as np
import pytest

from snotlab import analytic


def quad_gauss_cdf(x, n=120):
    """Numerical-integration oracle for the standard normal CDF:
    Gauss-Legendre quadrature of the density from -40 to x."""
    lo = -40.0
    nodes, weights = np.polynomial.legendre.leggauss(n)
    ts = 0.5 * (x - lo) * nodes + 0.5 * (x + lo)
    dens = np.exp(-0.5 * ts**2) / math.sqrt(2 * math.pi)
    return float(0.5 * (x - lo) * weights @ dens)


def test_phi_cdf_basics():
    assert analytic.phi_cdf(0.0) == 0.5
    assert abs(analytic.phi_cdf(1.959964) - 0.975) < 1e-6
    assert abs(analytic.phi_cdf(1.959964) - quad_gauss_cdf(1.959964)) < 1e-12


def test_phi_cdf_symmetry():
    rng = np.random.default_rng(0)
    xs = rng.normal(size=64) * 3
    np.testing.assert_allclose(analytic.phi_cdf(-xs), 1.0 - analytic.phi_cdf(xs), atol=1e-14)


def test_phi_cdf_against_quadrature_grid():
    for x in (-3.0, -1.2, 0.3, 2.4):
        assert abs(analytic.phi_cdf(x) - quad_gauss_cdf(x)) < 1e-12


def test_phi_inv_round_trip():
    ps = np.array([1e-10, 1e-4, 0.2, 0.5, 0.8, 1 - 1e-4, 1 - 1e-12])
    xs = analytic.phi_inv(ps)
    np.testing.assert_allclose(analytic.phi_cdf(xs), ps, rtol=1e-12, atol=1e-300)
    assert analytic.phi_inv(0.5) == 0.0
    with pytest.raises(ValueError):
        analytic.phi_inv(1.5)


def test_map_gauss_to_uniform_fixed_points():
    assert analytic.map_gauss_to_uniform(0.0, 0.3) == 0.0
    for eps in (0.1, 0.3, 1.0):
        deriv0 = analytic.map_gauss_to_uniform_deriv(0.0, eps)
        assert abs(deriv0 - 2.0 / (eps * math.sqrt(2 * math.pi))) < 1e-12
        # finite differences of the map at 0 agree with the closed derivative
        h = 1e-7
        fd = (analytic.map_gauss_to_uniform(h, eps) - analytic.map_gauss_to_uniform(-h, eps)) / (2 * h)
        assert abs(fd - deriv0) < 1e-6 * deriv0
    with pytest.raises(ValueError):
        analytic.map_gauss_to_uniform(0.0, 0.0)


def test_map_gauss_to_uniform_is_increasing():
    xs = np.linspace(-3, 3, 200)
    vals = analytic.map_gauss_to_uniform(xs, 0.4)
    assert np.all(np.diff(vals) > 0)


def test_pushforward_kolmogorov_smirnov():
    rng = np.random.default_rng(1)
    eps = 0.3
    samples = eps * rng.standard_normal(100_000)
    mapped = np.sort(analytic.map_gauss_to_uniform(samples, eps))
    # KS distance against Unif(-1, 1)
    cdf_ref = (mapped + 1.0) / 2.0
    emp_hi = np.arange(1, len(mapped) + 1) / len(mapped)
    emp_lo = np.arange(0, len(mapped)) / len(mapped)
    ks = max(np.max(np.abs(emp_hi - cdf_ref)), np.max(np.abs(emp_lo - cdf_ref)))
    assert ks < 0.01


def test_degenerate_limit_cases():
    assert analytic.map_degenerate_limit(-1.0) == 0.0
    assert analytic.map_degenerate_limit(0.0) == 0.5
    assert analytic.map_degenerate_limit(1.0) == 1.0
    # tails of Phi(x/eps) converge to the step away from 0
    for x in (-1.0, 1.0, -2.0, 4.0):
        for eps in (0.05, 0.02):
            gap = abs(analytic.map_gauss_to_unit_uniform(x, eps) - analytic.map_degenerate_limit(x))
            assert gap < 1e-6
    # the limit is not a transport map: a point mass at 0 lands on 1/2
    assert analytic.map_degenerate_limit(np.zeros(5)).tolist() == [0.5] * 5


def test_map_delta_to_gaussian():
    x = np.array([[1.0, -2.0, 0.5]])
    np.testing.assert_allclose(analytic.map_delta_to_gaussian(x, 0.5), x / 0.5)
    assert analytic.map_delta_to_gaussian(0.0, 0.2) == 0.0
    with pytest.raises(ValueError):
        analytic.map_delta_to_gaussian(x, -1.0)


def test_map_delta_to_gaussian_covariance():
    rng = np.random.default_rng(2)
    eps = 0.25
    samples = eps * rng.standard_normal((100_000, 3))
    mapped = analytic.map_delta_to_gaussian(samples, eps)
    cov = np.cov(mapped.T)
    np.testing.assert_allclose(cov, np.eye(3), atol=0.05)


def test_quantile_atoms():
    atoms = analytic.gaussian_quantile_atoms(101, 0.5)
    assert atoms[50] == 0.0
    assert np.all(np.diff(atoms) > 0)
    uni = analytic.uniform_quantile_atoms(4, -1.0, 1.0)
    np.testing.assert_allclose(uni, [-0.75, -0.25, 0.25, 0.75])
