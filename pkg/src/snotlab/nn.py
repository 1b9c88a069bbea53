"""Single-hidden-layer ReLU network with exact manual backprop and Adam.

The forward pass is y = W2 relu(W1 x + b1) + b2, row-wise over batches.
Gradients are exact for the a.e.-defined ReLU derivative with the
convention relu'(0) = 0, which keeps parameter trajectories bitwise
reproducible.  Checkpoints are numpy ``.npz`` archives of the four tensors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, TrainingFault
from .rng import derive_rng


@dataclass
class MlpParams:
    """Parameter (or gradient) container: W1 (h, d_in), b1 (h,),
    W2 (d_out, h), b2 (d_out,)."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @property
    def d_in(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    @property
    def d_out(self) -> int:
        return self.w2.shape[0]

    def tensors(self):
        return (self.w1, self.b1, self.w2, self.b2)

    def copy(self) -> "MlpParams":
        return MlpParams(*(t.copy() for t in self.tensors()))

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(t)) for t in self.tensors())


def init_mlp(d_in: int, hidden: int, d_out: int, seed: int) -> MlpParams:
    """Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per tensor."""
    if min(d_in, hidden, d_out) < 1:
        raise ConfigurationError("network dimensions must be positive")
    rng = derive_rng(seed, "mlp-init")
    s1 = 1.0 / np.sqrt(d_in)
    s2 = 1.0 / np.sqrt(hidden)
    return MlpParams(
        w1=rng.uniform(-s1, s1, size=(hidden, d_in)),
        b1=rng.uniform(-s1, s1, size=hidden),
        w2=rng.uniform(-s2, s2, size=(d_out, hidden)),
        b2=rng.uniform(-s2, s2, size=d_out),
    )


@dataclass
class ForwardCache:
    params: MlpParams
    x: np.ndarray
    pre: np.ndarray  # hidden pre-activations
    act: np.ndarray  # relu(pre)


def forward(params: MlpParams, x_batch: np.ndarray):
    """Batched forward pass; returns (outputs, cache for backward)."""
    x = np.atleast_2d(np.asarray(x_batch, dtype=np.float64))
    if x.shape[1] != params.d_in:
        raise ConfigurationError(
            f"input dim {x.shape[1]} does not match network d_in {params.d_in}"
        )
    pre = x @ params.w1.T + params.b1
    act = np.maximum(pre, 0.0)
    out = act @ params.w2.T + params.b2
    return out, ForwardCache(params, x, pre, act)


def backward(params: MlpParams, cache: ForwardCache, grad_out: np.ndarray) -> MlpParams:
    """Exact gradients of <grad_out, forward(x)> w.r.t. all parameters."""
    if cache.params is not params:
        raise ConfigurationError("stale cache: built for different parameters")
    g = np.atleast_2d(np.asarray(grad_out, dtype=np.float64))
    if g.shape != (cache.x.shape[0], params.d_out):
        raise ConfigurationError(f"grad_out shape {g.shape} mismatch")
    d_w2 = g.T @ cache.act
    d_b2 = g.sum(axis=0)
    d_act = g @ params.w2
    d_pre = np.where(cache.pre > 0.0, d_act, 0.0)
    d_w1 = d_pre.T @ cache.x
    d_b1 = d_pre.sum(axis=0)
    return MlpParams(d_w1, d_b1, d_w2, d_b2)


def jacobian_map(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Exact input Jacobian W2 diag(relu'(W1 x + b1)) W1 at one point."""
    x = np.asarray(x, dtype=np.float64).ravel()
    mask = (params.w1 @ x + params.b1) > 0.0
    return (params.w2 * mask[None, :]) @ params.w1


def input_gradients(params: MlpParams, x_batch: np.ndarray) -> np.ndarray:
    """Batched input gradients for a scalar-output network, shape (n, d_in)."""
    if params.d_out != 1:
        raise ConfigurationError("input_gradients requires a scalar output")
    x = np.atleast_2d(np.asarray(x_batch, dtype=np.float64))
    mask = (x @ params.w1.T + params.b1) > 0.0
    return (mask * params.w2[0][None, :]) @ params.w1


@dataclass
class AdamState:
    m: MlpParams
    v: MlpParams
    t: int
    beta1: float = 0.0
    beta2: float = 0.9
    lr: float = 1e-4
    eps_div: float = 1e-8

    def copy(self) -> "AdamState":
        return AdamState(self.m.copy(), self.v.copy(), self.t, self.beta1,
                         self.beta2, self.lr, self.eps_div)


def init_adam(
    params: MlpParams,
    lr: float = 1e-4,
    beta1: float = 0.0,
    beta2: float = 0.9,
    eps_div: float = 1e-8,
) -> AdamState:
    zeros = lambda: MlpParams(*(np.zeros_like(t) for t in params.tensors()))
    return AdamState(m=zeros(), v=zeros(), t=0, beta1=beta1, beta2=beta2,
                     lr=lr, eps_div=eps_div)


def adam_step(params: MlpParams, grads: MlpParams, state: AdamState):
    """In-place Adam update with bias correction; returns (params, state)."""
    if not grads.all_finite():
        raise TrainingFault("non-finite gradients in adam_step")
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for p, g, m, v in zip(params.tensors(), grads.tensors(),
                          state.m.tensors(), state.v.tensors()):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(g)
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps_div)
    if not params.all_finite():
        raise TrainingFault("non-finite parameters after adam_step")
    return params, state


def linear_map_network(d: int, scale: float, box: float = 100.0) -> MlpParams:
    """Construct parameters that realize T(x) = scale * x exactly on the box
    |x_i| < box, using paired (+x, -x) hidden units kept in the linear regime.

    Used as a known-Jacobian probe: the input Jacobian is scale * I.
    """
    eye = np.eye(d)
    w1 = np.vstack([eye, -eye])
    b1 = np.full(2 * d, box)
    w2 = 0.5 * scale * np.hstack([eye, -eye])
    b2 = np.zeros(d)
    return MlpParams(w1, b1, w2, b2)


def save_params(path, params: MlpParams) -> None:
    np.savez(path, w1=params.w1, b1=params.b1, w2=params.w2, b2=params.b2)


def load_params(path) -> MlpParams:
    with np.load(path) as data:
        return MlpParams(data["w1"], data["b1"], data["w2"], data["b2"])
