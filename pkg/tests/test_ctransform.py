import numpy as np
import pytest

from snotlab import costs, discrete_ot
from snotlab.ctransform import (
    GridPotential,
    c_transform,
    cc_transform,
    recovery_residual,
    semidual_value,
)
from snotlab.errors import ConfigurationError
from snotlab.measures import EmpiricalMeasure, uniform_measure

SQ = costs.sq_half(1.0)


def grid_1d(values):
    support = np.array([[0.0], [1.0]])
    return GridPotential(support, np.asarray(values, dtype=float), SQ)


def test_zero_potential_equidistant_point():
    pot = grid_1d([0.0, 0.0])
    vals, arg = c_transform(pot, np.array([[0.5]]))
    assert abs(vals[0] - 0.125) < 1e-15
    assert arg[0] == 0  # smallest index on the tie


def test_biased_potential_picks_far_candidate():
    pot = grid_1d([0.0, 1.0])
    vals, arg = c_transform(pot, np.array([[0.5]]))
    assert abs(vals[0] - (-0.875)) < 1e-15
    assert arg[0] == 1


def test_transform_matches_enumeration():
    rng = np.random.default_rng(0)
    support = rng.normal(size=(50, 3))
    values = rng.normal(size=50)
    pot = GridPotential(support, values, SQ)
    x = rng.normal(size=(20, 3))
    got, arg = c_transform(pot, x)
    for i in range(20):
        gaps = [0.5 * np.sum((x[i] - support[j]) ** 2) - values[j] for j in range(50)]
        assert abs(got[i] - min(gaps)) < 1e-12
        assert arg[i] == int(np.argmin(gaps))


def test_cc_is_idempotent_on_c_concave_potential():
    rng = np.random.default_rng(1)
    support = rng.normal(size=(15, 2))
    x_grid = rng.normal(size=(12, 2))
    w = GridPotential(x_grid, rng.normal(size=12), SQ)
    concave_vals, _ = c_transform(w, support)  # W^c seen as potential on support
    pot = GridPotential(support, concave_vals, SQ)
    cc = cc_transform(pot, support, x_grid)
    np.testing.assert_allclose(cc, concave_vals, atol=1e-12)


def test_cc_dominates_and_shares_transform():
    rng = np.random.default_rng(2)
    support = rng.normal(size=(30, 2))
    values = rng.normal(size=30)
    pot = GridPotential(support, values, SQ)
    x_grid = rng.normal(size=(20, 2))
    cc = cc_transform(pot, support, x_grid)
    assert np.all(cc >= values - 1e-12)
    pot_cc = GridPotential(support, cc, SQ)
    vc, _ = c_transform(pot, x_grid)
    vcc_c, _ = c_transform(pot_cc, x_grid)
    np.testing.assert_allclose(vcc_c, vc, atol=1e-12)
    # idempotence on the grid
    cc2 = cc_transform(pot_cc, support, x_grid)
    np.testing.assert_allclose(cc2, cc, atol=1e-12)


def test_lipschitz_in_sup_norm():
    rng = np.random.default_rng(3)
    support = rng.normal(size=(25, 2))
    x = rng.normal(size=(30, 2))
    for _ in range(20):
        f = rng.normal(size=25)
        g = rng.normal(size=25)
        fc, _ = c_transform(GridPotential(support, f, SQ), x)
        gc, _ = c_transform(GridPotential(support, g, SQ), x)
        assert np.max(np.abs(fc - gc)) <= np.max(np.abs(f - g)) + 1e-12


def test_dual_feasibility():
    rng = np.random.default_rng(4)
    support = rng.normal(size=(20, 3))
    values = rng.normal(size=20)
    pot = GridPotential(support, values, SQ)
    x = rng.normal(size=(15, 3))
    vc, _ = c_transform(pot, x)
    cmat = costs.cost_matrix(SQ, x, support)
    assert np.max(vc[:, None] + values[None, :] - cmat) <= 1e-12


def test_weak_duality_and_lp_dual_equality():
    rng = np.random.default_rng(5)
    for trial in range(30):
        n, m_atoms, d = int(rng.integers(3, 20)), int(rng.integers(3, 20)), int(rng.integers(1, 4))
        mu = uniform_measure(rng.normal(size=(n, d)))
        w = rng.uniform(0.2, 1.0, m_atoms)
        nu = EmpiricalMeasure(rng.normal(size=(m_atoms, d)), w / w.sum())
        cost = costs.sq_half(float(rng.uniform(0.5, 2.0)))
        plan = discrete_ot.solve_exact(mu, nu, cost)
        arbitrary = GridPotential(nu.points, rng.normal(size=m_atoms), cost)
        assert semidual_value(arbitrary, mu, nu.weights) <= plan.cost_value + 1e-9
        dual_pot = GridPotential(nu.points, plan.dual_target, cost)
        assert abs(semidual_value(dual_pot, mu, nu.weights) - plan.cost_value) < 1e-8


def test_semidual_trivial_zero():
    pot = GridPotential(np.zeros((1, 1)), np.zeros(1), SQ)
    mu = uniform_measure(np.zeros((1, 1)))
    assert semidual_value(pot, mu, np.ones(1)) == 0.0


def test_semidual_weight_misalignment():
    pot = grid_1d([0.0, 0.0])
    mu = uniform_measure(np.zeros((1, 1)))
    with pytest.raises(ConfigurationError):
        semidual_value(pot, mu, np.ones(3))


def test_recovery_residual_argmin_map_is_zero():
    rng = np.random.default_rng(6)
    support = rng.normal(size=(12, 2))
    pot = GridPotential(support, rng.normal(size=12), SQ)
    x = rng.normal(size=(9, 2))
    w = np.full(9, 1.0 / 9)
    _, arg = c_transform(pot, x)
    res = recovery_residual(pot, support[arg], x, w)
    assert abs(res) < 1e-12


def test_recovery_residual_worst_map_positive_and_nonneg():
    rng = np.random.default_rng(7)
    support = rng.normal(size=(12, 2))
    values = rng.normal(size=12)
    pot = GridPotential(support, values, SQ)
    x = rng.normal(size=(9, 2))
    w = np.full(9, 1.0 / 9)
    gaps = costs.cost_matrix(SQ, x, support) - values[None, :]
    worst = support[np.argmax(gaps, axis=1)]
    expected = float(w @ (gaps.max(axis=1) - gaps.min(axis=1)))
    got = recovery_residual(pot, worst, x, w)
    assert abs(got - expected) < 1e-12
    assert got > 0
    for _ in range(10):
        t_random = rng.normal(size=(9, 2))
        assert recovery_residual(pot, t_random, x, w) >= -1e-9


def test_potential_csv_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    pot = GridPotential(rng.normal(size=(9, 2)), rng.normal(size=9), SQ)
    path = tmp_path / "potential.csv"
    from snotlab.ctransform import potential_from_csv, potential_to_csv

    potential_to_csv(pot, path)
    back = potential_from_csv(path, SQ)
    assert np.array_equal(back.support, pot.support)
    assert np.array_equal(back.values, pot.values)
    assert path.read_text().splitlines()[0] == "y0,y1,V"


def test_normalize_anchor():
    support = np.array([[2.0, 0.0], [0.1, 0.1], [1.0, 1.0]])
    pot = GridPotential(support, np.array([3.0, 5.0, 7.0]), SQ)
    normed = pot.normalize()
    assert normed.values[1] == 0.0  # nearest the origin
    np.testing.assert_allclose(normed.values, [-2.0, 0.0, 2.0])
    anchored = pot.normalize(anchor=2)
    assert anchored.values[2] == 0.0
