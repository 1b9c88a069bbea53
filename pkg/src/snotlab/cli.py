"""Command-line experiment runner.

    snot-lab train          --config cfg.json [--seed S] [--out DIR]
    snot-lab slope          --config cfg.json [--seed S] [--out DIR] [--threads T]
    snot-lab conditioning   --config cfg.json [--seed S] [--out DIR]
    snot-lab terminal-noise --config cfg.json [--seed S] [--out DIR]
    snot-lab schedule-trace --config cfg.json [--out DIR]
    snot-lab selftest       [--mutate backward-sign]

Every command is deterministic under --seed; CSV bodies are byte-identical
across reruns except for wall-clock columns, and timestamps only appear in
the leading comment line.  Config schemas are documented in the README.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path


from . import experiments, measures, metrics, nn, schedule as sched, trainer
from .errors import CapacityError, ConfigurationError, TrainingFault
from .measures import NoiseModel, spec_from_json
from .schedule import schedule_from_json


def _load_config(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            f"config parse error at line {exc.lineno} column {exc.colno}: {exc.msg}"
        )


def _out_dir(args, command) -> Path:
    out = Path(args.out) if args.out else Path("runs") / command
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path: Path, command: str, seed, header: list[str], rows) -> None:
    """Comment line carries the only timestamp; the body is deterministic."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# snot-lab {command} seed={seed} generated={time.strftime('%Y-%m-%dT%H:%M:%S')}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([
                repr(float(v)) if isinstance(v, float) else v for v in row
            ])


def _write_json(path: Path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _resolve_schedule(cfg: dict, d: int, batch_size: int, noise_kind: str):
    obj = dict(cfg.get("schedule", {"kind": "constant", "eps": 0.0}))
    if obj.get("kind") == sched.RATE_OPTIMAL and obj.get("e_abs_y") in (None, "auto"):
        obj["e_abs_y"] = measures.mean_noise_norm(NoiseModel(noise_kind, d))
    return schedule_from_json(obj, batch_size=batch_size)


def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    out = _out_dir(args, "train")
    source = spec_from_json(cfg["source"])
    target = spec_from_json(cfg["target"])
    noise_kind = cfg.get("noise_kind", measures.GAUSSIAN)
    schedule = _resolve_schedule(cfg, int(cfg["d"]), int(cfg.get("batch_size", 128)),
                                 noise_kind)
    config = trainer.config_from_json(cfg, schedule)

    try:
        v_params, t_params, records = trainer.train(config, source, target)
    except TrainingFault as fault:
        _write_json(out / "fault.json", {"error": str(fault), **fault.record})
        print(f"training fault: {fault}", file=sys.stderr)
        return 1

    _write_csv(
        out / "train_records.csv", "train", config.seed,
        ["iter", "eps", "loss", "d_cost", "d_target", "wall_ms"],
        [(r.iteration, r.eps, r.loss, r.d_cost, r.d_target, r.wall_ms) for r in records],
    )
    nn.save_params(out / "v_params.npz", v_params)
    nn.save_params(out / "t_params.npz", t_params)

    final = _final_metrics(cfg, config, source, target, t_params, schedule)
    _write_json(out / "metrics.json", final)
    _write_json(out / "summary.json", {
        "command": "train", "seed": config.seed, "iterations": config.iterations,
        "final_loss": records[-1].loss, "records": len(records), "metrics": final,
    })
    print(f"train: wrote {out}/train_records.csv ({len(records)} records)")
    return 0


def _final_metrics(cfg, config, source, target, t_params, schedule) -> dict:
    eval_n = int(cfg.get("metric_samples", 2000))
    seed = config.seed
    mu = measures.sample(source, eval_n, trainer._child_seed(seed, "final-mu"))
    nu = measures.sample(target, eval_n, trainer._child_seed(seed, "final-nu"))
    out = {
        "d_cost": metrics.d_cost(t_params, mu, nu),
        "d_target": metrics.d_target(t_params, mu, nu),
    }
    if source.kind == measures.PERPENDICULAR:
        m = source.m
        terminal_eps = sched.effective_eps(schedule, config.iterations * config.batch_size)
        mu_term = measures.smooth(mu, config.noise, terminal_eps,
                                  trainer._child_seed(seed, "final-z"))
        out["tangential_error"] = metrics.tangential_error(t_params, mu, m=m)
        if source.d - m == 1:
            out["normal_error"] = metrics.normal_error(t_params, mu_term, m=m)
            out["normal_error_unsmoothed_eval"] = metrics.normal_error(t_params, mu, m=m)
        out["terminal_eps"] = terminal_eps
    return out


def cmd_slope(args) -> int:
    cfg = _load_config(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    out = _out_dir(args, "slope")
    results = experiments.slope_experiment(
        m=int(cfg["m"]),
        d=int(cfg["d"]),
        eps_list=[float(e) for e in cfg["eps_list"]],
        n_list=[int(n) for n in cfg["n_list"]],
        replicates=int(cfg.get("replicates", 20)),
        seed=seed,
        atoms=int(cfg.get("atoms", 4096)),
        noise_kind=cfg.get("noise_kind", measures.GAUSSIAN),
        max_entries=int(cfg.get("max_entries", 40_000_000)),
        threads=args.threads,
    )
    rows = [
        (res.eps, pt.n, pt.value, pt.std_err, pt.replicates)
        for res in results
        for pt in res.points
    ]
    _write_csv(out / "slope_points.csv", "slope", seed,
               ["eps", "n", "w2_mean", "w2_std_err", "replicates"], rows)
    fits = {
        repr(res.eps): {
            "slope": res.fit.slope,
            "intercept": res.fit.intercept,
            "r2": res.fit.r_squared,
            "n_points": res.fit.n_points,
        }
        for res in results
    }
    _write_json(out / "slope_fits.json", fits)
    _write_json(out / "summary.json", {"command": "slope", "seed": seed, "fits": fits})
    print(f"slope: wrote {out}/slope_points.csv and slope_fits.json")
    for res in results:
        print(f"  eps={res.eps:g}: slope={res.fit.slope:+.4f} r2={res.fit.r_squared:.4f}")
    return 0


def _base_config(cfg: dict, seed: int) -> trainer.TrainConfig:
    return trainer.config_from_json(
        {**cfg.get("train", {}), "seed": seed}, sched.constant(0.0)
    )


def cmd_conditioning(args) -> int:
    cfg = _load_config(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    out = _out_dir(args, "conditioning")
    base = _base_config(cfg, seed)
    rows, _ = experiments.conditioning_experiment(
        eps_list=[float(e) for e in cfg["eps_list"]],
        n_seeds=int(cfg.get("seeds", 10)),
        base=base,
        threshold_factor=float(cfg.get("threshold_factor", 1.5)),
    )
    _write_csv(
        out / "conditioning.csv", "conditioning", seed,
        ["eps", "seed", "threshold", "iters_to_threshold", "reached",
         "final_map_mse", "final_sup_jacobian"],
        [(r["eps"], r["seed"], r["threshold"], r["iters_to_threshold"], r["reached"],
          r["final_map_mse"], r["final_sup_jacobian"]) for r in rows],
    )
    summary = experiments.conditioning_summary(rows)
    _write_json(out / "summary.json",
                {"command": "conditioning", "seed": seed, "per_eps": summary})
    print(f"conditioning: wrote {out}/conditioning.csv")
    for eps, stats in summary.items():
        print(f"  eps={eps}: median iters-to-threshold={stats['median_iters_to_threshold']:g} "
              f"jac={stats['median_final_sup_jacobian']:.2f}")
    return 0


def cmd_terminal_noise(args) -> int:
    cfg = _load_config(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    out = _out_dir(args, "terminal-noise")
    base = _base_config(cfg, seed)
    m, d = int(cfg["m"]), int(cfg["d"])
    n_samples = int(cfg["n_samples"])
    if "eps_grid" in cfg:
        eps_grid = [float(e) for e in cfg["eps_grid"]]
    else:
        e_abs_y = measures.mean_noise_norm(NoiseModel(base.noise_kind, d))
        eps_stat = sched.epsilon_stat(n_samples, m, e_abs_y)
        eps_grid = [eps_stat * float(f) for f in cfg.get("eps_factors", [0.1, 0.5, 10.0])]
    rows, summary = experiments.terminal_noise_experiment(
        m=m, d=d, n_samples=n_samples, eps_grid=eps_grid,
        n_seeds=int(cfg.get("seeds", 5)), base=base,
        eval_samples=int(cfg.get("metric_samples", 1024)),
    )
    _write_csv(out / "terminal_noise.csv", "terminal-noise", seed,
               ["eps", "seed", "map_error"],
               [(r["eps"], r["seed"], r["map_error"]) for r in rows])
    _write_json(out / "summary.json",
                {"command": "terminal-noise", "seed": seed, **summary})
    print(f"terminal-noise: wrote {out}/terminal_noise.csv (eps_stat={summary['eps_stat']:g})")
    return 0


def cmd_schedule_trace(args) -> int:
    cfg = _load_config(args.config)
    out = _out_dir(args, "schedule-trace")
    batch_size = int(cfg.get("batch_size", 128))
    noise_kind = cfg.get("noise_kind", measures.GAUSSIAN)
    d = int(cfg.get("d", 1))
    schedule = _resolve_schedule(cfg, d, batch_size, noise_kind)
    rows = sched.schedule_trace(schedule, int(cfg["iterations"]))
    _write_csv(out / "schedule_trace.csv", "schedule-trace", cfg.get("seed", 0),
               ["iter", "n", "eps"], rows)
    print(f"schedule-trace: wrote {out}/schedule_trace.csv ({len(rows)} rows)")
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    t0 = time.perf_counter()
    ok, results = run_selftest(mutate=args.mutate)
    print(f"selftest: {'all suites passed' if ok else 'FAILURES'} "
          f"in {time.perf_counter() - t0:.1f}s")
    if not ok:
        for res in results:
            if not res.passed:
                print(f"  failing: {res.name} ({res.detail})", file=sys.stderr)
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="snot-lab",
        description="Semi-dual neural optimal transport laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, needs_config=True):
        p = sub.add_parser(name)
        if needs_config:
            p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=1, help="parallel sweep tasks")
        p.set_defaults(fn=fn)
        return p

    add("train", cmd_train)
    add("slope", cmd_slope)
    add("conditioning", cmd_conditioning)
    add("terminal-noise", cmd_terminal_noise)
    add("schedule-trace", cmd_schedule_trace)
    p_self = add("selftest", cmd_selftest, needs_config=False)
    p_self.add_argument("--mutate", default=None,
                        help="inject a documented fault (backward-sign) to "
                             "verify the harness detects it")

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
