"""Named experiments: estimation-rate slopes, conditioning sweeps, the
terminal-noise study, and the perpendicular spurious-solution study.

Every experiment derives per-task seeds from its root seed, so sweeps are
reproducible regardless of execution order and safe to parallelize.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import discrete_ot, measures, metrics, schedule as sched, trainer
from .errors import ConfigurationError
from .measures import DatasetSpec, NoiseModel
from .rng import seed_sequence
from .trainer import TrainConfig


def _child_seed(root: int, *path) -> int:
    return int(seed_sequence(root, *path).generate_state(1)[0])


def _parallel_map(fn, tasks, threads: int):
    if threads <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


# ---------------------------------------------------------------------------
# estimation-rate slopes
# ---------------------------------------------------------------------------

@dataclass
class SlopeResult:
    eps: float
    points: list[metrics.RatePoint]
    fit: metrics.RateFit


def slope_experiment(
    m: int,
    d: int,
    eps_list: list[float],
    n_list: list[int],
    replicates: int = 20,
    seed: int = 0,
    atoms: int = 4096,
    noise_kind: str = measures.GAUSSIAN,
    max_entries: int = 40_000_000,
    threads: int = 1,
) -> list[SlopeResult]:
    """E[W_2(mu~, mu_N^eps)] across N for each eps, with log-log fits.

    ``mu~`` is a fixed quantile-stratified discretization of the embedded
    uniform cube, so the distance is exactly computable by the discrete
    solver; the smoothed clouds draw fresh samples per replicate.
    """
    spec = DatasetSpec(measures.UNIFORM_CUBE_EMBEDDED, d=d, m=m)
    reference = measures.stratified_discretization(spec, atoms)
    noise = NoiseModel(noise_kind, d)

    def one(task):
        eps_idx, n_idx, rep = task
        eps = eps_list[eps_idx]
        n = n_list[n_idx]
        s = _child_seed(seed, "slope", eps_idx, n_idx, rep)
        base = measures.sample(spec, n, s)
        cloud = measures.smooth(base, noise, eps, _child_seed(s, "noise"))
        return discrete_ot.wasserstein(reference, cloud, order=2, max_entries=max_entries)

    tasks = [
        (ei, ni, r)
        for ei in range(len(eps_list))
        for ni in range(len(n_list))
        for r in range(replicates)
    ]
    values = np.array(_parallel_map(one, tasks, threads)).reshape(
        len(eps_list), len(n_list), replicates
    )

    results = []
    for ei, eps in enumerate(eps_list):
        points = [
            metrics.RatePoint(
                n=n_list[ni],
                value=float(values[ei, ni].mean()),
                replicates=replicates,
                std_err=float(values[ei, ni].std(ddof=1) / np.sqrt(replicates))
                if replicates > 1
                else 0.0,
            )
            for ni in range(len(n_list))
        ]
        results.append(SlopeResult(eps, points, metrics.fit_rate(points)))
    return results


# ---------------------------------------------------------------------------
# training-based sweeps
# ---------------------------------------------------------------------------

@dataclass
class RunOutcome:
    eps: float
    seed: int
    records: list[trainer.TrainRecord]
    mse_trace: list[tuple[int, float]]
    final_map_mse: float
    final_sup_jacobian: float


def _delta_to_gaussian_specs(d: int):
    source = DatasetSpec(measures.POINT_MASS, d=d)
    target = DatasetSpec(measures.STANDARD_GAUSSIAN, d=d, m=d)
    return source, target


def conditioning_run(
    base: TrainConfig, eps: float, run_seed: int, probe_count: int = 512,
) -> RunOutcome:
    """One constant-eps run on the point-mass to gaussian problem.

    The smoothed source is exactly N(0, eps^2 I), whose Monge map to the
    standard gaussian is x/eps, so the tracked error is the mean squared
    deviation of the learned map from x/eps on smoothed probe points.
    """
    if eps <= 0:
        raise ConfigurationError("conditioning runs need eps > 0")
    source, target = _delta_to_gaussian_specs(base.d)
    cfg = TrainConfig(
        d=base.d, hidden_width=base.hidden_width, batch_size=base.batch_size,
        iterations=base.iterations, k_t=base.k_t, lr=base.lr, tau=base.tau,
        lambda_r1=base.lambda_r1, schedule=sched.constant(eps), seed=run_seed,
        log_every=base.log_every, eval_samples=base.eval_samples,
        train_samples=base.train_samples, noise_kind=base.noise_kind,
        beta1=base.beta1, beta2=base.beta2,
    )
    probes_base = measures.sample(source, probe_count, _child_seed(run_seed, "probes"))
    probes = measures.smooth(
        probes_base, cfg.noise, eps, _child_seed(run_seed, "probe-noise")
    ).points
    exact = probes / eps
    mse_trace: list[tuple[int, float]] = []

    def hook(iteration, _eps, _v_params, t_params):
        tx = trainer.recovered_map_eval(t_params, probes)
        mse_trace.append((iteration, float(np.mean(np.sum((tx - exact) ** 2, axis=1)))))

    _, t_params, records = trainer.train(cfg, source, target, log_hook=hook)
    sup_jac = metrics.sup_jacobian_norm(t_params, probes)
    return RunOutcome(eps, run_seed, records, mse_trace, mse_trace[-1][1], sup_jac)


def conditioning_experiment(
    eps_list: list[float],
    n_seeds: int,
    base: TrainConfig,
    threshold_factor: float = 1.5,
):
    """Constant-eps sweep on the point-mass to gaussian problem.

    The iterations-to-threshold target is ``threshold_factor`` times the
    best map error the largest-eps run achieves, paired per seed.  Returns
    (rows, outcomes) where rows are CSV-ready dicts.
    """
    eps_sorted = sorted(eps_list, reverse=True)
    outcomes: dict[tuple[float, int], RunOutcome] = {}
    for eps in eps_sorted:
        for s in range(n_seeds):
            run_seed = _child_seed(base.seed, "conditioning", s)
            outcomes[(eps, s)] = conditioning_run(base, eps, run_seed)

    largest = eps_sorted[0]
    rows = []
    for s in range(n_seeds):
        best = min(v for _, v in outcomes[(largest, s)].mse_trace)
        thr = threshold_factor * best
        for eps in eps_sorted:
            out = outcomes[(eps, s)]
            reached = False
            iters = out.records[-1].iteration
            for it, val in out.mse_trace:
                if val <= thr:
                    reached = True
                    iters = it
                    break
            rows.append({
                "eps": eps,
                "seed": s,
                "threshold": thr,
                "iters_to_threshold": iters,
                "reached": int(reached),
                "final_map_mse": out.final_map_mse,
                "final_sup_jacobian": out.final_sup_jacobian,
            })
    return rows, outcomes


def conditioning_summary(rows) -> dict:
    eps_values = sorted({r["eps"] for r in rows}, reverse=True)
    summary = {}
    for eps in eps_values:
        sub = [r for r in rows if r["eps"] == eps]
        summary[repr(eps)] = {
            "median_iters_to_threshold": float(np.median([r["iters_to_threshold"] for r in sub])),
            "all_reached": bool(all(r["reached"] for r in sub)),
            "var_final_map_mse": float(np.var([r["final_map_mse"] for r in sub], ddof=1))
            if len(sub) > 1 else 0.0,
            "median_final_sup_jacobian": float(np.median([r["final_sup_jacobian"] for r in sub])),
        }
    return summary


def terminal_noise_experiment(
    m: int,
    d: int,
    n_samples: int,
    eps_grid: list[float],
    n_seeds: int,
    base: TrainConfig,
    eval_samples: int = 1024,
):
    """Train at constant eps on the embedded-cube to cube problem and
    measure the map error (target distribution error on unsmoothed source
    samples) per eps.  Returns (rows, summary)."""
    source = DatasetSpec(measures.UNIFORM_CUBE_EMBEDDED, d=d, m=m,
                         params={"low": 0.0, "high": 1.0})
    target = DatasetSpec(measures.UNIFORM_CUBE_EMBEDDED, d=d, m=d,
                         params={"low": 0.0, "high": 1.0})
    rows = []
    for eps in eps_grid:
        for s in range(n_seeds):
            run_seed = _child_seed(base.seed, "terminal", s)
            cfg = TrainConfig(
                d=d, hidden_width=base.hidden_width, batch_size=base.batch_size,
                iterations=base.iterations, k_t=base.k_t, lr=base.lr, tau=base.tau,
                lambda_r1=base.lambda_r1, schedule=sched.constant(eps), seed=run_seed,
                log_every=base.log_every, eval_samples=base.eval_samples,
                train_samples=n_samples, noise_kind=base.noise_kind,
                beta1=base.beta1, beta2=base.beta2,
            )
            _, t_params, _ = trainer.train(cfg, source, target)
            mu = measures.sample(source, eval_samples, _child_seed(run_seed, "eval-mu"))
            nu = measures.sample(target, eval_samples, _child_seed(run_seed, "eval-nu"))
            rows.append({"eps": eps, "seed": s,
                         "map_error": metrics.d_target(t_params, mu, nu)})

    e_abs_y = measures.mean_noise_norm(NoiseModel(base.noise_kind, d))
    eps_stat = sched.epsilon_stat(n_samples, m, e_abs_y)
    summary = {"eps_stat": eps_stat, "n_samples": n_samples, "per_eps": {}}
    means, ses = {}, {}
    for eps in eps_grid:
        vals = np.array([r["map_error"] for r in rows if r["eps"] == eps])
        means[eps] = float(vals.mean())
        ses[eps] = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
        summary["per_eps"][repr(eps)] = {"mean": means[eps], "std_err": ses[eps]}
    floor_eps = min(means, key=means.get)
    knee = None
    for eps in sorted(eps_grid):
        if means[eps] > means[floor_eps] + 2.0 * max(ses[eps], ses[floor_eps]):
            knee = eps
            break
    summary["error_floor_eps"] = floor_eps
    summary["knee_eps"] = knee
    return rows, summary


PERPENDICULAR_SCHEDULES = ("unsmoothed", "stepwise_linear", "rate_optimal")


def perpendicular_schedule(
    kind: str, d: int, iterations: int, batch_size: int, eps_min: float = 0.05,
    sigma_max: float = 0.2, period: int | None = None, c0: float = 1.0,
    noise_kind: str = measures.GAUSSIAN,
) -> sched.NoiseSchedule:
    """The three schedule variants compared on the perpendicular dataset."""
    if period is None:
        period = max(1, iterations // 10)
    if kind == "unsmoothed":
        return sched.constant(0.0)
    if kind == "stepwise_linear":
        return sched.stepwise_linear(sigma_max=sigma_max, sigma_min=eps_min,
                                     period=period, total=iterations,
                                     batch_size=batch_size)
    if kind == "rate_optimal":
        e_abs_y = measures.mean_noise_norm(NoiseModel(noise_kind, d))
        return sched.rate_optimal(m=d // 2, e_abs_y=e_abs_y, c0=c0,
                                  eps_min=eps_min, period=period,
                                  batch_size=batch_size)
    raise ConfigurationError(f"unknown perpendicular schedule {kind!r}")


def perpendicular_run(
    base: TrainConfig, schedule_kind: str, run_seed: int,
    eval_samples: int = 2000, eps_min: float = 0.05,
):
    """One training run on the perpendicular pair; returns its metrics."""
    d = base.d
    m = d // 2
    source = DatasetSpec(measures.PERPENDICULAR, d=d, m=m, params={"role": "source"})
    target = DatasetSpec(measures.PERPENDICULAR, d=d, m=m, params={"role": "target"})
    schedule = perpendicular_schedule(
        schedule_kind, d, base.iterations, base.batch_size, eps_min=eps_min,
        noise_kind=base.noise_kind,
    )
    cfg = TrainConfig(
        d=d, hidden_width=base.hidden_width, batch_size=base.batch_size,
        iterations=base.iterations, k_t=base.k_t, lr=base.lr, tau=base.tau,
        lambda_r1=base.lambda_r1, schedule=schedule, seed=run_seed,
        log_every=base.log_every, eval_samples=base.eval_samples,
        noise_kind=base.noise_kind, beta1=base.beta1, beta2=base.beta2,
    )
    v_params, t_params, records = trainer.train(cfg, source, target)

    mu = measures.sample(source, eval_samples, _child_seed(run_seed, "metric-mu"))
    nu = measures.sample(target, eval_samples, _child_seed(run_seed, "metric-nu"))
    terminal_eps = sched.effective_eps(schedule, cfg.iterations * cfg.batch_size)
    mu_term = measures.smooth(mu, cfg.noise, terminal_eps, _child_seed(run_seed, "metric-z"))
    out = {
        "schedule": schedule_kind,
        "seed": run_seed,
        "terminal_eps": terminal_eps,
        "tangential_error": metrics.tangential_error(t_params, mu, m=m),
        "normal_error": metrics.normal_error(t_params, mu_term, m=m),
        "normal_error_unsmoothed_eval": metrics.normal_error(t_params, mu, m=m),
        "d_cost": metrics.d_cost(t_params, mu, nu),
        "d_target": metrics.d_target(t_params, mu, nu),
    }
    return out, (v_params, t_params, records)
