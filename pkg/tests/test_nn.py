import numpy as np
import pytest

from snotlab import nn
from snotlab.errors import ConfigurationError, TrainingFault


def fd_grad(fn, tensor, idx, h=1e-6):
    flat = tensor.ravel()
    old = flat[idx]
    flat[idx] = old + h
    f1 = fn()
    flat[idx] = old - h
    f0 = fn()
    flat[idx] = old
    return (f1 - f0) / (2 * h)


def test_forward_zero_params():
    p = nn.MlpParams(np.zeros((4, 2)), np.zeros(4), np.zeros((3, 4)), np.zeros(3))
    out, _ = nn.forward(p, np.random.default_rng(0).normal(size=(5, 2)))
    assert np.all(out == 0.0)


def test_forward_identity_construction():
    net = nn.linear_map_network(3, 1.0, box=50.0)
    x = np.random.default_rng(1).uniform(-5, 5, size=(10, 3))
    out, _ = nn.forward(net, x)
    np.testing.assert_allclose(out, x, atol=1e-12)


def test_forward_matches_reference_evaluation():
    rng = np.random.default_rng(2)
    p = nn.init_mlp(4, 7, 3, seed=5)
    x = rng.normal(size=(6, 4))
    out, _ = nn.forward(p, x)
    for i in range(6):
        hidden = np.maximum(p.w1 @ x[i] + p.b1, 0.0)
        ref = p.w2 @ hidden + p.b2
        np.testing.assert_allclose(out[i], ref, atol=1e-12)


def test_forward_shape_check():
    p = nn.init_mlp(3, 4, 2, seed=0)
    with pytest.raises(ConfigurationError):
        nn.forward(p, np.zeros((2, 5)))


def test_backward_zero_grad_out():
    p = nn.init_mlp(3, 4, 2, seed=1)
    x = np.random.default_rng(3).normal(size=(5, 3))
    _, cache = nn.forward(p, x)
    grads = nn.backward(p, cache, np.zeros((5, 2)))
    for t in grads.tensors():
        assert np.all(t == 0.0)


def test_backward_stale_cache():
    p = nn.init_mlp(3, 4, 2, seed=1)
    q = nn.init_mlp(3, 4, 2, seed=2)
    x = np.zeros((2, 3))
    _, cache = nn.forward(p, x)
    with pytest.raises(ConfigurationError):
        nn.backward(q, cache, np.zeros((2, 2)))


def test_backward_single_unit_hand_derived():
    # scalar network: y = w2 * relu(w1 x + b1) + b2
    w1, b1, w2, b2 = 1.5, 0.2, -2.0, 0.7
    p = nn.MlpParams(np.array([[w1]]), np.array([b1]), np.array([[w2]]), np.array([b2]))
    x = np.array([[0.9]])
    out, cache = nn.forward(p, x)
    pre = w1 * 0.9 + b1
    assert out[0, 0] == pytest.approx(w2 * pre + b2)
    g = nn.backward(p, cache, np.ones((1, 1)))
    assert g.w2[0, 0] == pytest.approx(pre)
    assert g.b2[0] == pytest.approx(1.0)
    assert g.w1[0, 0] == pytest.approx(w2 * 0.9)
    assert g.b1[0] == pytest.approx(w2)


@pytest.mark.parametrize("trial", range(15))
def test_backward_finite_differences(trial):
    rng = np.random.default_rng(100 + trial)
    p = nn.init_mlp(int(rng.integers(1, 5)), int(rng.integers(2, 8)),
                    int(rng.integers(1, 4)), seed=trial)
    x = rng.normal(size=(int(rng.integers(1, 6)), p.d_in))
    g_out = rng.normal(size=(x.shape[0], p.d_out))
    _, cache = nn.forward(p, x)
    grads = nn.backward(p, cache, g_out)
    scalar = lambda: float((nn.forward(p, x)[0] * g_out).sum())
    for t, g in zip(p.tensors(), grads.tensors()):
        for idx in rng.choice(t.size, size=min(3, t.size), replace=False):
            fd = fd_grad(scalar, t, idx, h=1e-5)
            assert abs(fd - g.ravel()[idx]) <= 1e-5 * max(1.0, abs(fd))


def test_jacobian_inactive_and_linear_regimes():
    p = nn.MlpParams(np.eye(2), np.full(2, -100.0), np.eye(2), np.zeros(2))
    assert np.all(nn.jacobian_map(p, np.zeros(2)) == 0.0)
    lin = nn.linear_map_network(2, 3.0)
    np.testing.assert_allclose(nn.jacobian_map(lin, np.zeros(2)), 3.0 * np.eye(2), atol=1e-12)


def test_jacobian_finite_differences():
    rng = np.random.default_rng(4)
    p = nn.init_mlp(3, 9, 2, seed=11)
    x = rng.normal(size=3)
    jac = nn.jacobian_map(p, x)
    for k in range(3):
        e = np.zeros(3)
        e[k] = 1e-6
        fd = (nn.forward(p, x + e)[0] - nn.forward(p, x - e)[0]).ravel() / 2e-6
        np.testing.assert_allclose(jac[:, k], fd, atol=1e-5)


def test_directional_derivative_consistency():
    rng = np.random.default_rng(5)
    p = nn.init_mlp(4, 10, 4, seed=3)
    x = rng.normal(size=4)
    v = rng.normal(size=4)
    jac = nn.jacobian_map(p, x)
    t = 1e-6
    fd = (nn.forward(p, x + t * v)[0] - nn.forward(p, x)[0]).ravel() / t
    np.testing.assert_allclose(jac @ v, fd, atol=1e-4)


def test_input_gradients_scalar_only():
    p = nn.init_mlp(3, 4, 2, seed=0)
    with pytest.raises(ConfigurationError):
        nn.input_gradients(p, np.zeros((2, 3)))


def test_adam_zero_gradient_keeps_params():
    p = nn.init_mlp(2, 3, 1, seed=7)
    before = p.copy()
    state = nn.init_adam(p)
    zero = nn.MlpParams(*(np.zeros_like(t) for t in p.tensors()))
    nn.adam_step(p, zero, state)
    assert state.t == 1
    for a, b in zip(p.tensors(), before.tensors()):
        np.testing.assert_array_equal(a, b)


def test_adam_first_step_closed_form():
    p = nn.MlpParams(np.zeros((1, 1)), np.zeros(1), np.zeros((1, 1)), np.zeros(1))
    state = nn.init_adam(p, lr=0.05, beta1=0.0, beta2=0.9)
    g = nn.MlpParams(np.ones((1, 1)), np.zeros(1), np.zeros((1, 1)), np.zeros(1))
    nn.adam_step(p, g, state)
    assert p.w1[0, 0] == pytest.approx(-0.05 / (1.0 + 1e-8), abs=1e-15)


def test_adam_constant_gradient_bounded_monotone():
    p = nn.MlpParams(np.zeros((1, 1)), np.zeros(1), np.zeros((1, 1)), np.zeros(1))
    lr = 1e-3
    state = nn.init_adam(p, lr=lr)
    g = nn.MlpParams(np.full((1, 1), 2.5), np.zeros(1), np.zeros((1, 1)), np.zeros(1))
    prev = 0.0
    for _ in range(50):
        before = p.w1[0, 0]
        nn.adam_step(p, g, state)
        step = p.w1[0, 0] - before
        assert step < 0
        assert abs(step) <= lr * (1.0 + 1e-6)
        assert p.w1[0, 0] < prev
        prev = p.w1[0, 0]


def test_adam_rejects_nonfinite():
    p = nn.init_mlp(1, 2, 1, seed=0)
    state = nn.init_adam(p)
    bad = nn.MlpParams(np.full((2, 1), np.nan), np.zeros(2), np.zeros((1, 2)), np.zeros(1))
    with pytest.raises(TrainingFault):
        nn.adam_step(p, bad, state)


def test_init_bounds_and_determinism():
    p = nn.init_mlp(16, 8, 4, seed=42)
    q = nn.init_mlp(16, 8, 4, seed=42)
    for a, b in zip(p.tensors(), q.tensors()):
        np.testing.assert_array_equal(a, b)
    assert np.max(np.abs(p.w1)) <= 1.0 / 4.0
    assert np.max(np.abs(p.w2)) <= 1.0 / np.sqrt(8)


def test_checkpoint_round_trip(tmp_path):
    p = nn.init_mlp(3, 5, 2, seed=9)
    path = tmp_path / "ckpt.npz"
    nn.save_params(path, p)
    q = nn.load_params(path)
    for a, b in zip(p.tensors(), q.tensors()):
        np.testing.assert_array_equal(a, b)
