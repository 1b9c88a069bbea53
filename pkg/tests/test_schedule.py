import math

import pytest

from snotlab import schedule as sched
from snotlab.errors import ConfigurationError


def test_epsilon_stat_inverse_sqrt():
    assert sched.epsilon_stat(100, 1, 1.0, 1.0) == 0.1


def test_epsilon_stat_cube_root_exact():
    assert sched.epsilon_stat(10**6, 3, 1.0, 1.0) == 0.01


def test_epsilon_stat_m2_natural_log():
    expected = math.sqrt(math.log(100) / 100)
    assert abs(sched.epsilon_stat(100, 2, 1.0, 1.0) - expected) < 1e-15
    assert abs(expected - 0.21460) < 5e-6


def test_epsilon_stat_prefactor():
    assert sched.epsilon_stat(100, 1, 2.0, 3.0) == pytest.approx(3.0 / 2.0 * 0.1)


def test_epsilon_stat_validation():
    with pytest.raises(ConfigurationError):
        sched.epsilon_stat(1, 2, 1.0)
    with pytest.raises(ConfigurationError):
        sched.epsilon_stat(10, 0, 1.0)
    with pytest.raises(ConfigurationError):
        sched.epsilon_stat(10, 1, 0.0)


def test_epsilon_stat_strictly_decreasing_and_scaling():
    for m in (1, 2, 3, 5):
        values = [sched.epsilon_stat(n, m, 1.0) for n in range(3, 400)]
        assert all(a > b for a, b in zip(values, values[1:]))
    for m in (3, 4):
        big = 10**6
        ratio = sched.epsilon_stat(2 * big, m, 1.0) / sched.epsilon_stat(big, m, 1.0)
        assert abs(ratio - 2 ** (-1.0 / m)) < 1e-6


def test_constant_schedule():
    s = sched.constant(0.05)
    for n in (1, 128, 10**6):
        assert sched.effective_eps(s, n) == 0.05


def test_stepwise_linear_first_iteration_value():
    s = sched.stepwise_linear(0.2, 0.05, period=2000, total=20000, batch_size=128)
    got = sched.effective_eps(s, 128)  # iteration k = 0
    expected = (1 - 1 / 20000) * 0.2 + (1 / 20000) * 0.05
    assert got == pytest.approx(expected, abs=1e-12)
    assert got == pytest.approx(0.19999, abs=1e-4)


def test_stepwise_linear_piecewise_constant_and_monotone():
    s = sched.stepwise_linear(0.2, 0.05, period=100, total=1000, batch_size=4)
    eps_by_iter = [sched.effective_eps(s, (k + 1) * 4) for k in range(1000)]
    for start in range(0, 1000, 100):
        block = eps_by_iter[start:start + 100]
        assert len(set(block)) == 1
    assert all(a >= b for a, b in zip(eps_by_iter, eps_by_iter[1:]))


def test_rate_optimal_floor_binds():
    s = sched.rate_optimal(m=3, e_abs_y=1.0, c0=1.0, eps_min=0.1, period=10, batch_size=100)
    # late in training eps_stat is far below the floor
    assert sched.effective_eps(s, 10**7) == 0.1


def test_rate_optimal_monotone_piecewise():
    s = sched.rate_optimal(m=2, e_abs_y=1.0, c0=1.0, eps_min=0.01, period=50, batch_size=8)
    eps_by_iter = [sched.effective_eps(s, (k + 1) * 8) for k in range(600)]
    assert all(a >= b for a, b in zip(eps_by_iter, eps_by_iter[1:]))
    assert all(e >= 0.01 for e in eps_by_iter)
    for start in range(0, 600, 50):
        block = eps_by_iter[start:start + 50]
        assert len(set(block)) == 1
    # first period uses the first batch's sample count
    assert eps_by_iter[0] == max(sched.epsilon_stat(8, 2, 1.0), 0.01)
    # second period boundary at n = period * batch
    assert eps_by_iter[50] == max(sched.epsilon_stat(400, 2, 1.0), 0.01)


def test_effective_eps_needs_positive_n():
    with pytest.raises(ConfigurationError):
        sched.effective_eps(sched.constant(0.1), 0)


def test_crossover_inverse_of_rate():
    assert sched.crossover_n(1, 1.0, 1.0, 0.1) == 100
    assert sched.crossover_n(3, 1.0, 1.0, 0.01) == 10**6
    got = sched.crossover_n(2, 1.0, 1.0, 0.2146)
    assert abs(got - 100) <= 1
    for n in (got, got + 1):
        assert sched.epsilon_stat(n, 2, 1.0) <= 0.2146
    assert sched.epsilon_stat(got - 1, 2, 1.0) > 0.2146


def test_schedule_trace_matches_closed_form():
    s = sched.rate_optimal(m=1, e_abs_y=1.0, c0=1.0, eps_min=0.02, period=7, batch_size=16)
    rows = sched.schedule_trace(s, 100)
    assert [r[0] for r in rows] == list(range(100))
    for k, n, eps in rows:
        assert n == (k + 1) * 16
        boundary = (k // 7) * 7
        n_b = max(boundary * 16, 16)
        assert eps == max(sched.epsilon_stat(n_b, 1, 1.0), 0.02)


def test_schedule_from_json():
    s = sched.schedule_from_json({"kind": "constant", "eps": 0.3})
    assert s.eps == 0.3
    s = sched.schedule_from_json(
        {"kind": "stepwise_linear", "sigma_max": 0.4, "sigma_min": 0.1,
         "period": 10, "total": 100}, batch_size=32)
    assert s.sigma_max == 0.4 and s.batch_size == 32
    s = sched.schedule_from_json(
        {"kind": "rate_optimal", "m": 2, "e_abs_y": 1.5, "eps_min": 0.05}, batch_size=64)
    assert s.m == 2 and s.e_abs_y == 1.5
    with pytest.raises(ConfigurationError):
        sched.schedule_from_json({"kind": "mystery"})
    with pytest.raises(ConfigurationError):
        sched.stepwise_linear(sigma_max=0.01, sigma_min=0.05)
