"""Max-min training of a potential network V and map network T.

Each outer iteration draws a smoothed source batch x^ = x + eps * z at the
schedule's current noise level, runs K_T descent steps on T against the
objective

    L(V, T) = mean_x [ tau/2 |x^ - T(x^)|^2 - V(T(x^)) ]
            + mean_y [ V(y) ] + lambda_r1 * mean_y |grad_y V(y)|^2

and then one ascent step on V.  All batches are drawn through the measures
API with seeds derived from (config.seed, iteration, step), so runs are
bitwise reproducible and the smoothed batch matches ``measures.smooth``
under the same sub-seed.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import measures, metrics, nn
from .ctransform import GridPotential, c_transform
from .costs import sq_half
from .errors import ConfigurationError, TrainingFault
from .measures import DatasetSpec, NoiseModel
from .rng import derive_rng, seed_sequence
from .schedule import NoiseSchedule, constant, effective_eps

log = logging.getLogger(__name__)

_DIVERGENCE_LIMIT = 1e6


def _child_seed(root: int, *path) -> int:
    return int(seed_sequence(root, *path).generate_state(1)[0])


def default_hidden_width(d: int) -> int:
    """256 below ambient dimension 16, 1024 from 16 up."""
    return 256 if d < 16 else 1024


@dataclass
class TrainConfig:
    d: int
    hidden_width: int | None = None
    batch_size: int = 128
    iterations: int = 20000
    k_t: int = 20
    lr: float = 1e-4
    tau: float = 1.0
    lambda_r1: float = 0.0
    schedule: NoiseSchedule = field(default_factory=lambda: constant(0.0))
    seed: int = 0
    log_every: int = 500
    eval_samples: int = 512
    train_samples: int | None = None
    noise_kind: str = measures.GAUSSIAN
    beta1: float = 0.0
    beta2: float = 0.9

    def __post_init__(self):
        if self.d < 1 or self.batch_size < 1 or self.iterations < 1 or self.k_t < 1:
            raise ConfigurationError("d, batch_size, iterations, k_t must be >= 1")
        if self.lr <= 0 or self.tau <= 0 or self.lambda_r1 < 0:
            raise ConfigurationError("lr, tau must be > 0 and lambda_r1 >= 0")
        if self.hidden_width is None:
            self.hidden_width = default_hidden_width(self.d)
        if self.hidden_width < 1:
            raise ConfigurationError("hidden_width must be >= 1")

    @property
    def noise(self) -> NoiseModel:
        return NoiseModel(self.noise_kind, self.d)


@dataclass
class TrainRecord:
    iteration: int
    eps: float
    loss: float
    d_cost: float
    d_target: float
    wall_ms: float


def _r1_grads(v_params: nn.MlpParams, y: np.ndarray):
    """Value and V-parameter gradients of mean |grad_y V(y)|^2.

    The ReLU mask is locally constant, so only W1 and W2 receive gradient.
    """
    n = y.shape[0]
    mask = (y @ v_params.w1.T + v_params.b1) > 0.0
    g = (mask * v_params.w2[0][None, :]) @ v_params.w1  # (n, d)
    value = float(np.einsum("nd,nd->", g, g)) / n
    s = g @ v_params.w1.T  # (n, h)
    d_w2 = (2.0 / n) * (mask * s).sum(axis=0)[None, :]
    d_w1 = (2.0 / n) * (mask * v_params.w2[0][None, :]).T @ g
    return value, nn.MlpParams(
        d_w1, np.zeros_like(v_params.b1), d_w2, np.zeros_like(v_params.b2)
    )


def loss_minimax(
    v_params: nn.MlpParams,
    t_params: nn.MlpParams,
    x_batch: np.ndarray,
    y_batch: np.ndarray,
    tau: float,
    lambda_r1: float,
    side: str,
):
    """Empirical objective value and exact gradients for one network.

    ``side`` is "T" (gradients for the map, which descends) or "V"
    (gradients for the potential, which ascends).
    """
    if side not in ("T", "V"):
        raise ConfigurationError(f"side must be 'T' or 'V', got {side!r}")
    x = np.atleast_2d(x_batch)
    y = np.atleast_2d(y_batch)
    if x.shape[0] < 1 or y.shape[0] < 1:
        raise ConfigurationError("batches must be nonempty")
    n_x, n_y = x.shape[0], y.shape[0]

    tx, cache_t = nn.forward(t_params, x)
    v_tx, cache_vt = nn.forward(v_params, tx)
    v_y, cache_vy = nn.forward(v_params, y)

    diff = tx - x
    transport = 0.5 * tau * float(np.einsum("nd,nd->", diff, diff)) / n_x
    loss = transport - float(v_tx.mean()) + float(v_y.mean())
    r1_value = 0.0
    if lambda_r1 > 0.0:
        r1_value, r1_g = _r1_grads(v_params, y)
        loss += lambda_r1 * r1_value

    if not np.isfinite(loss):
        raise TrainingFault("non-finite minimax loss", {"loss": loss})

    if side == "T":
        grad_tx = (tau * diff - nn.input_gradients(v_params, tx)) / n_x
        grads = nn.backward(t_params, cache_t, grad_tx)
        return loss, grads

    g_vt = nn.backward(v_params, cache_vt, np.full((n_x, 1), -1.0 / n_x))
    g_vy = nn.backward(v_params, cache_vy, np.full((n_y, 1), 1.0 / n_y))
    tensors = [a + b for a, b in zip(g_vt.tensors(), g_vy.tensors())]
    if lambda_r1 > 0.0:
        tensors = [a + lambda_r1 * b for a, b in zip(tensors, r1_g.tensors())]
    return loss, nn.MlpParams(*tensors)


def recovered_map_eval(t_params: nn.MlpParams, x_points: np.ndarray) -> np.ndarray:
    """Apply the learned map rowwise (pure evaluation)."""
    out, _ = nn.forward(t_params, np.atleast_2d(x_points))
    return out


def _draw_batch(cfg: TrainConfig, spec: DatasetSpec, base_points, tag, k, j, eps):
    """Smoothed source batch for inner step j of iteration k."""
    seed_x = _child_seed(cfg.seed, tag, k, j)
    if base_points is None:
        batch = measures.sample(spec, cfg.batch_size, seed_x)
    else:
        idx = derive_rng(seed_x, "idx").integers(0, base_points.shape[0], cfg.batch_size)
        batch = measures.uniform_measure(base_points[idx])
    if eps == 0.0:
        return batch.points
    seed_z = _child_seed(cfg.seed, tag + "-z", k, j)
    return measures.smooth(batch, cfg.noise, eps, seed_z).points


def recovery_audit(
    v_params: nn.MlpParams,
    t_params: nn.MlpParams,
    x_batch: np.ndarray,
    y_batch: np.ndarray,
    tau: float,
) -> float:
    """Gap between V(T(x)) and the batchwise discrete argmin of the
    c-transform; small values mean the amortized argmin tracks the grid."""
    y = np.atleast_2d(y_batch)
    v_y, _ = nn.forward(v_params, y)
    pot = GridPotential(y, v_y[:, 0], sq_half(tau))
    vc, _ = c_transform(pot, x_batch)
    tx = recovered_map_eval(t_params, x_batch)
    v_tx, _ = nn.forward(v_params, tx)
    diff = tx - x_batch
    direct = 0.5 * tau * np.einsum("nd,nd->n", diff, diff) - v_tx[:, 0]
    return float(np.mean(direct - vc))


def train(config: TrainConfig, source: DatasetSpec, target: DatasetSpec,
          log_hook=None):
    """Run the outer loop; returns (V params, T params, list of TrainRecord).

    ``log_hook(iteration, eps, v_params, t_params)``, when given, is called
    at every logging step for experiment-specific measurements.  Raises
    :class:`TrainingFault` (with a diagnostic record) on divergence.
    """
    if source.d != config.d or target.d != config.d:
        raise ConfigurationError("source/target dimension must match config.d")
    cfg = config
    v_params = nn.init_mlp(cfg.d, cfg.hidden_width, 1, _child_seed(cfg.seed, "v-init"))
    t_params = nn.init_mlp(cfg.d, cfg.hidden_width, cfg.d, _child_seed(cfg.seed, "t-init"))
    adam_v = nn.init_adam(v_params, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2)
    adam_t = nn.init_adam(t_params, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2)

    base_points = None
    if cfg.train_samples is not None:
        base = measures.sample(source, cfg.train_samples, _child_seed(cfg.seed, "dataset"))
        base_points = base.points

    records: list[TrainRecord] = []
    decel_hits = 0
    decel_total = 0
    t_start = time.perf_counter()
    loss = float("nan")
    for k in range(cfg.iterations):
        eps = effective_eps(cfg.schedule, (k + 1) * cfg.batch_size)
        y_batch = measures.sample(target, cfg.batch_size, _child_seed(cfg.seed, "y", k, 0)).points
        is_log_iter = (k + 1) % cfg.log_every == 0 or k == cfg.iterations - 1

        delta_last = None
        for j in range(cfg.k_t):
            x_batch = _draw_batch(cfg, source, base_points, "x", k, j, eps)
            loss, g_t = loss_minimax(
                v_params, t_params, x_batch, y_batch, cfg.tau, cfg.lambda_r1, "T"
            )
            nn.adam_step(t_params, g_t, adam_t)
            if is_log_iter and j == cfg.k_t - 1:
                after, _ = loss_minimax(
                    v_params, t_params, x_batch, y_batch, cfg.tau, cfg.lambda_r1, "T"
                )
                delta_last = abs(after - loss)
        if is_log_iter and delta_last is not None:
            # monitoring only: one further map step should move the loss less
            # than the phase's final step did (inner problem roughly solved)
            probe_x = _draw_batch(cfg, source, base_points, "probe", k, 0, eps)
            before, g_probe = loss_minimax(
                v_params, t_params, probe_x, y_batch, cfg.tau, cfg.lambda_r1, "T"
            )
            t_probe = t_params.copy()
            nn.adam_step(t_probe, g_probe, adam_t.copy())
            after, _ = loss_minimax(
                v_params, t_probe, probe_x, y_batch, cfg.tau, cfg.lambda_r1, "T"
            )
            decel_total += 1
            decel_hits += int(abs(after - before) < delta_last)

        x_batch = _draw_batch(cfg, source, base_points, "x", k, cfg.k_t, eps)
        loss, g_v = loss_minimax(
            v_params, t_params, x_batch, y_batch, cfg.tau, cfg.lambda_r1, "V"
        )
        ascent = nn.MlpParams(*(-t for t in g_v.tensors()))
        nn.adam_step(v_params, ascent, adam_v)

        if abs(loss) > _DIVERGENCE_LIMIT or not np.isfinite(loss):
            raise TrainingFault(
                f"training diverged at iteration {k}",
                {"iteration": k, "loss": loss, "eps": eps},
            )

        if is_log_iter:
            d_cost, d_target = _eval_errors(cfg, source, target, t_params, k, eps)
            wall_ms = (time.perf_counter() - t_start) * 1e3
            records.append(TrainRecord(k, eps, loss, d_cost, d_target, wall_ms))
            if log_hook is not None:
                log_hook(k, eps, v_params, t_params)
            audit = recovery_audit(v_params, t_params, x_batch, y_batch, cfg.tau)
            log.info(
                "iter %d eps=%.5g loss=%.5g d_cost=%.4g d_target=%.4g audit=%.4g",
                k, eps, loss, d_cost, d_target, audit,
            )
    if decel_total:
        log.info(
            "inner-phase deceleration held on %d/%d logged iterations",
            decel_hits, decel_total,
        )
    return v_params, t_params, records


def _eval_errors(cfg: TrainConfig, source, target, t_params, k, eps):
    """In-training error estimates, taken on the smoothed source at the
    current noise level (the distribution the map is actually fit to)."""
    n_eval = cfg.eval_samples
    mu = measures.sample(source, n_eval, _child_seed(cfg.seed, "eval-mu", k))
    if eps > 0.0:
        mu = measures.smooth(mu, cfg.noise, eps, _child_seed(cfg.seed, "eval-z", k))
    nu = measures.sample(target, n_eval, _child_seed(cfg.seed, "eval-nu", k))
    try:
        d_cost = metrics.d_cost(t_params, mu, nu)
        d_target = metrics.d_target(t_params, mu, nu)
    except Exception:  # capacity or degenerate eval; keep training
        return float("nan"), float("nan")
    return d_cost, d_target


def config_from_json(obj: dict, schedule: NoiseSchedule) -> TrainConfig:
    """Build a TrainConfig from a JSON-style dict (schedule parsed separately)."""
    fields = {
        k: obj[k]
        for k in (
            "d", "hidden_width", "batch_size", "iterations", "k_t", "lr", "tau",
            "lambda_r1", "seed", "log_every", "eval_samples", "train_samples",
            "noise_kind", "beta1", "beta2",
        )
        if k in obj
    }
    return TrainConfig(schedule=schedule, **fields)
