import math

import numpy as np
import pytest

from snotlab import analytic, metrics, nn
from snotlab.errors import ConfigurationError
from snotlab.measures import EmpiricalMeasure, uniform_measure


def constant_map_network(d_in, value):
    """Network that outputs a constant vector regardless of input."""
    h = len(value)
    return nn.MlpParams(np.zeros((h, d_in)), np.zeros(h), np.zeros((len(value), h)),
                        np.asarray(value, dtype=float))


def test_tangential_error_cases():
    rng = np.random.default_rng(0)
    pts = np.c_[rng.uniform(-1, 1, 50), np.zeros(50)]
    mu = uniform_measure(pts)
    # map with zero first component
    net = constant_map_network(2, [0.0, 0.7])
    assert metrics.tangential_error(net, mu, m=1) == 0.0
    net = constant_map_network(2, [0.3, -0.2])
    assert metrics.tangential_error(net, mu, m=1) == pytest.approx(0.3)
    # symmetric +/- a first components cancel
    pm = uniform_measure(np.array([[1.0, 0.0], [-1.0, 0.0]]))
    sym = nn.linear_map_network(2, 0.5)
    assert metrics.tangential_error(sym, pm, m=1) == pytest.approx(0.0, abs=1e-12)


def test_normal_error_reference_quantiles():
    atoms = analytic.uniform_quantile_atoms(2048)
    mu = uniform_measure(np.c_[np.zeros(2048), atoms])
    ident = nn.linear_map_network(2, 1.0)
    assert metrics.normal_error(ident, mu, m=1) < 1e-5


def test_normal_error_constant_offsets():
    mu = uniform_measure(np.zeros((64, 2)))
    net = constant_map_network(2, [0.0, 0.5])
    # E[(0.5 - U)^2] = 0.25 + 1/3
    assert metrics.normal_error(net, mu, m=1) == pytest.approx(0.25 + 1.0 / 3.0, abs=1e-3)
    net0 = constant_map_network(2, [0.0, 0.0])
    assert metrics.normal_error(net0, mu, m=1) == pytest.approx(1.0 / 3.0, abs=1e-3)


def test_normal_error_discretization_stability():
    rng = np.random.default_rng(1)
    pts = np.c_[rng.uniform(-1, 1, 500), rng.uniform(-1, 1, 500)]
    mu = uniform_measure(pts)
    ident = nn.linear_map_network(2, 1.0)
    a = metrics.normal_error(ident, mu, m=1, reference_atoms=2048)
    b = metrics.normal_error(ident, mu, m=1, reference_atoms=4096)
    assert abs(a - b) < 1e-4


def test_d_cost_d_target_identity_same_measure():
    rng = np.random.default_rng(2)
    mu = uniform_measure(rng.normal(size=(40, 2)))
    ident = nn.linear_map_network(2, 1.0)
    assert metrics.d_cost(ident, mu, mu) == pytest.approx(0.0, abs=1e-12)
    assert metrics.d_target(ident, mu, mu) == pytest.approx(0.0, abs=1e-12)


def test_d_cost_d_target_point_masses():
    mu = uniform_measure(np.zeros((1, 1)))
    nu = uniform_measure(np.ones((1, 1)))
    ident = nn.linear_map_network(1, 1.0)
    assert metrics.d_cost(ident, mu, nu) == pytest.approx(1.0, abs=1e-12)
    assert metrics.d_target(ident, mu, nu) == pytest.approx(1.0, abs=1e-12)


def test_d_cost_d_target_exact_1d_map():
    # matched quantiles of N(0, eps^2) and Unif(-1,1); the interpolant network
    # realizes the exact monotone transport on the atoms
    eps, n = 0.4, 512
    xs = analytic.gaussian_quantile_atoms(n, eps)
    mu = uniform_measure(xs[:, None])
    nu = uniform_measure(analytic.map_gauss_to_uniform(xs, eps)[:, None])
    net = _relu_interpolant(xs, analytic.map_gauss_to_uniform(xs, eps))
    assert metrics.d_cost(net, mu, nu) < 1e-6
    assert metrics.d_target(net, mu, nu) < 1e-6


def _relu_interpolant(xs, ys):
    """Exact 1D piecewise-linear interpolant as a single-hidden-layer net."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    slopes = np.diff(ys) / np.diff(xs)
    w1 = np.ones((len(xs), 1))
    b1 = -xs.copy()
    gains = np.empty(len(xs))
    gains[0] = slopes[0]
    gains[1:-1] = np.diff(slopes)
    gains[-1] = 0.0
    w2 = gains[None, :]
    # left of the first knot, the map extends linearly with the first slope
    b2 = np.array([ys[0] - slopes[0] * (xs[0] - xs[0])])
    net = nn.MlpParams(w1, b1, w2, b2)
    # adjust offset: at xs[0] every relu is inactive except none
    out0 = nn.forward(net, np.array([[xs[0]]]))[0][0, 0]
    net.b2[0] += ys[0] - out0
    return net


def test_sup_jacobian_known_scale():
    for eps in (0.5, 0.1):
        net = nn.linear_map_network(3, 1.0 / eps)
        got = metrics.sup_jacobian_norm(net, np.zeros((4, 3)))
        assert got == pytest.approx(1.0 / eps, abs=1e-6)
    zero = nn.MlpParams(np.zeros((4, 2)), np.zeros(4), np.zeros((2, 4)), np.zeros(2))
    assert metrics.sup_jacobian_norm(zero, np.zeros((1, 2))) == 0.0


def test_sup_jacobian_matches_numpy_spectral_norm():
    rng = np.random.default_rng(3)
    net = nn.init_mlp(4, 16, 4, seed=8)
    probes = rng.normal(size=(10, 4))
    got = metrics.sup_jacobian_norm(net, probes)
    ref = max(np.linalg.norm(nn.jacobian_map(net, x), 2) for x in probes)
    assert got == pytest.approx(ref, rel=1e-6)


def test_fit_rate_exact_power_laws():
    pts = [metrics.RatePoint(n, 2.0 * n ** (-1.0 / 3.0), 1, 0.0) for n in (10, 100, 1000, 5000)]
    fit = metrics.fit_rate(pts)
    assert fit.slope == pytest.approx(-1.0 / 3.0, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(2.0), abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    pts = [metrics.RatePoint(n, n ** (-0.5), 1, 0.0) for n in (10, 100, 1000)]
    assert metrics.fit_rate(pts).slope == pytest.approx(-0.5, abs=1e-12)


def test_fit_rate_noisy_recovery():
    rng = np.random.default_rng(4)
    true_slope = -0.42
    pts = [
        metrics.RatePoint(n, float(3.0 * n**true_slope * math.exp(rng.normal() * 0.01)), 1, 0.0)
        for n in (50, 100, 200, 400, 800, 1600)
    ]
    fit = metrics.fit_rate(pts)
    assert abs(fit.slope - true_slope) < 0.02


def test_fit_rate_validation():
    pts = [metrics.RatePoint(10, 1.0, 1, 0.0), metrics.RatePoint(20, 0.5, 1, 0.0)]
    with pytest.raises(ConfigurationError):
        metrics.fit_rate(pts)
    with pytest.raises(ConfigurationError):
        metrics.RatePoint(10, -1.0, 1, 0.0)


def test_alpha_stability_values():
    assert metrics.alpha_stability(4, 1) == pytest.approx(0.1)
    assert metrics.alpha_stability(1e9, 3) == pytest.approx(1.0 / 6.0, abs=1e-6)


def test_plan_stability_trivial_and_projection():
    rng = np.random.default_rng(5)
    mu = uniform_measure(rng.normal(size=(8, 2)))
    nu = uniform_measure(rng.normal(size=(9, 2)))
    res = metrics.plan_stability_ratio(mu, mu, nu, p=4.0)
    assert res.w2_plans == pytest.approx(0.0, abs=1e-9)
    assert res.w1_sources == pytest.approx(0.0, abs=1e-9)
    assert res.alpha_p == pytest.approx(4.0 / (24.0 + 32.0))
    mu2 = uniform_measure(rng.normal(size=(7, 2)))
    res = metrics.plan_stability_ratio(mu, mu2, nu, p=4.0)
    assert res.w2_plans >= res.w2_sources - 1e-9


def test_hessian_check_linear_family():
    rng = np.random.default_rng(6)
    mu = uniform_measure(rng.normal(size=(30, 3)))
    nu = uniform_measure(rng.normal(size=(40, 3)))
    theta = rng.normal(size=3) * 0.4
    rep = metrics.hessian_check(metrics.LINEAR_POTENTIAL, theta, mu, nu)
    expected_grad = nu.weights @ nu.points - mu.weights @ mu.points - theta
    np.testing.assert_allclose(rep.grad_closed, expected_grad, atol=1e-12)
    np.testing.assert_allclose(rep.hess_closed, -np.eye(3), atol=1e-12)
    assert rep.max_discrepancy < 1e-5


def test_hessian_check_linear_matched_means_zero_grad():
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(25, 2))
    mu = uniform_measure(pts)
    nu = uniform_measure(pts.copy())
    rep = metrics.hessian_check(metrics.LINEAR_POTENTIAL, np.zeros(2), mu, nu)
    np.testing.assert_allclose(rep.grad_closed, 0.0, atol=1e-12)


def test_hessian_check_quadratic_family():
    rng = np.random.default_rng(8)
    mu = uniform_measure(rng.normal(size=(35, 2)))
    nu = uniform_measure(rng.normal(size=(30, 2)))
    rep = metrics.hessian_check(metrics.QUADRATIC_POTENTIAL, np.array([0.3]), mu, nu)
    assert rep.max_discrepancy < 1e-5
    with pytest.raises(ConfigurationError):
        metrics.hessian_check(metrics.QUADRATIC_POTENTIAL, np.array([1.2]), mu, nu)


@pytest.mark.parametrize("trial", range(10))
def test_hessian_check_randomized(trial):
    rng = np.random.default_rng(900 + trial)
    d = int(rng.integers(1, 4))
    w1 = rng.uniform(0.2, 1, 20); w1 /= w1.sum()
    mu = EmpiricalMeasure(rng.normal(size=(20, d)), w1)
    nu = uniform_measure(rng.normal(size=(25, d)))
    rep = metrics.hessian_check(metrics.LINEAR_POTENTIAL, rng.normal(size=d) * 0.5, mu, nu)
    assert rep.max_discrepancy < 1e-5
    rep = metrics.hessian_check(metrics.QUADRATIC_POTENTIAL,
                                np.array([float(rng.uniform(-0.5, 0.5))]), mu, nu)
    assert rep.max_discrepancy < 1e-5
