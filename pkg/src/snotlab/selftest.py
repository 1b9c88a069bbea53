"""Randomized invariant suites over the numerical core.

Each suite returns a :class:`SuiteResult`; ``run_selftest`` executes them
all and reports per-suite pass/fail.  The acceptance tests reuse these
functions with their own instance counts.

``run_selftest(mutate="backward-sign")`` deliberately corrupts the
backward pass while the suites run; it must fail, which sanity-checks that
the harness can actually detect broken gradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import analytic, costs, discrete_ot, measures, metrics, nn
from .ctransform import GridPotential, c_transform, cc_transform, semidual_value
from .measures import EmpiricalMeasure, NoiseModel, uniform_measure
from .rng import derive_rng
from .trainer import loss_minimax


@dataclass
class SuiteResult:
    name: str
    passed: bool
    checks: int
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return f"[{status}] {self.name}: {self.checks} checks{extra}"


def _random_weights(rng, n):
    if rng.random() < 0.5:
        return np.full(n, 1.0 / n)
    w = rng.uniform(0.2, 1.0, n)
    return w / w.sum()


def _random_measure(rng, n, d, scale=1.0):
    return EmpiricalMeasure(scale * rng.normal(size=(n, d)), _random_weights(rng, n))


def suite_ctransform(n_instances: int = 100, seed: int = 10) -> SuiteResult:
    """1-Lipschitz transform, dual feasibility, V^cc >= V, (V^cc)^c = V^c,
    idempotence, weak duality, and equality at LP dual potentials."""
    rng = derive_rng(seed, "ctransform-suite")
    worst = 0.0
    checks = 0
    for trial in range(n_instances):
        d = int(rng.integers(1, 4))
        n_y = int(rng.integers(3, 30))
        n_x = int(rng.integers(3, 25))
        cost = costs.sq_half(float(rng.uniform(0.5, 2.0))) if trial % 2 else costs.euclidean(1.0)
        support = rng.normal(size=(n_y, d))
        f_vals = rng.normal(size=n_y)
        g_vals = rng.normal(size=n_y)
        x = rng.normal(size=(n_x, d))

        pot_f = GridPotential(support, f_vals, cost)
        pot_g = GridPotential(support, g_vals, cost)
        fc, arg_f = c_transform(pot_f, x)
        gc, _ = c_transform(pot_g, x)

        # exhaustive re-evaluation (independent double loop)
        brute = np.array(
            [min(costs.cost_pairs(cost, x[i:i+1], support[j:j+1])[0] - f_vals[j]
                 for j in range(n_y)) for i in range(n_x)]
        )
        err = float(np.max(np.abs(fc - brute)))
        lip = float(np.max(np.abs(fc - gc)) - np.max(np.abs(f_vals - g_vals)))
        cmat = costs.cost_matrix(cost, x, support)
        feas = float(np.max(fc[:, None] + f_vals[None, :] - cmat))

        cc = cc_transform(pot_f, support, x)
        cc_gain = float(np.min(cc - f_vals))
        pot_cc = GridPotential(support, cc, cost)
        ccc, _ = c_transform(pot_cc, x)
        ccc_err = float(np.max(np.abs(ccc - fc)))
        cc2 = cc_transform(pot_cc, support, x)
        idem = float(np.max(np.abs(cc2 - cc)))

        mu = EmpiricalMeasure(x, _random_weights(rng, n_x))
        nu_w = _random_weights(rng, n_y)
        nu = EmpiricalMeasure(support, nu_w)
        plan = discrete_ot.solve_exact(mu, nu, cost)
        weak = semidual_value(pot_f, mu, nu_w) - plan.cost_value
        pot_dual = GridPotential(support, plan.dual_target, cost)
        strong = abs(semidual_value(pot_dual, mu, nu_w) - plan.cost_value)

        worst = max(worst, err, lip, feas, cc_gain and max(0.0, -cc_gain), ccc_err, idem)
        checks += 7
        if err > 1e-12 or lip > 1e-12 or feas > 1e-12 or cc_gain < -1e-12:
            return SuiteResult("c-transform", False, checks,
                               f"instance {trial}: transform identity violated")
        if ccc_err > 1e-12 or idem > 1e-12:
            return SuiteResult("c-transform", False, checks,
                               f"instance {trial}: (V^cc) identities violated")
        if weak > 1e-9 or strong > 1e-8:
            return SuiteResult("c-transform", False, checks,
                               f"instance {trial}: duality violated (weak={weak:.2e}, strong={strong:.2e})")
    return SuiteResult("c-transform", True, checks, f"worst residual {worst:.2e}")


def suite_ot_oracle(n_instances: int = 200, seed: int = 11) -> SuiteResult:
    """Simplex cost equals permutation brute force; marginals feasible."""
    rng = derive_rng(seed, "oracle-suite")
    checks = 0
    worst = 0.0
    for trial in range(n_instances):
        n = int(rng.integers(1, 7))
        d = int(rng.integers(1, 5))
        mu = uniform_measure(rng.normal(size=(n, d)))
        nu = uniform_measure(rng.normal(size=(n, d)))
        cost = costs.sq_half(1.0) if trial % 2 else costs.euclidean(1.0)
        lp = discrete_ot.solve_exact(mu, nu, cost)
        bf = discrete_ot.brute_force(mu, nu, cost)
        gap = abs(lp.cost_value - bf.cost_value)
        marg = max(
            float(np.max(np.abs(lp.row_sums() - mu.weights))),
            float(np.max(np.abs(lp.col_sums() - nu.weights))),
        )
        worst = max(worst, gap, marg)
        checks += 2
        if gap > 1e-9 or marg > 1e-9:
            return SuiteResult("ot-oracle", False, checks,
                               f"instance {trial}: gap={gap:.2e} marg={marg:.2e}")
    return SuiteResult("ot-oracle", True, checks, f"worst {worst:.2e}")


def suite_1d_monotone(n_instances: int = 200, seed: int = 12) -> SuiteResult:
    """Monotone coupling cost equals the LP cost in one dimension."""
    rng = derive_rng(seed, "monotone-suite")
    checks = 0
    worst = 0.0
    for trial in range(n_instances):
        n = int(rng.integers(2, 40))
        m = int(rng.integers(2, 40))
        mu = EmpiricalMeasure(rng.normal(size=(n, 1)), _random_weights(rng, n))
        nu = EmpiricalMeasure(rng.normal(size=(m, 1)), _random_weights(rng, m))
        cost = costs.sq_half(float(rng.uniform(0.5, 2.0))) if trial % 2 else costs.euclidean(1.0)
        gap = abs(
            discrete_ot.solve_1d(mu, nu, cost).cost_value
            - discrete_ot.solve_exact(mu, nu, cost).cost_value
        )
        worst = max(worst, gap)
        checks += 1
        if gap > 1e-9:
            return SuiteResult("1d-monotone", False, checks, f"instance {trial}: gap={gap:.2e}")
    return SuiteResult("1d-monotone", True, checks, f"worst {worst:.2e}")


def suite_projection(n_instances: int = 200, seed: int = 13, max_atoms: int = 50) -> SuiteResult:
    """Plan distance dominates the source distance (1-Lipschitz projection)."""
    rng = derive_rng(seed, "projection-suite")
    checks = 0
    worst = 0.0
    for trial in range(n_instances):
        d = int(rng.integers(1, 4))
        n1 = int(rng.integers(2, max_atoms + 1))
        n2 = int(rng.integers(2, max_atoms + 1))
        n3 = int(rng.integers(2, max_atoms + 1))
        mu1 = _random_measure(rng, n1, d)
        mu2 = EmpiricalMeasure(
            mu1.points + rng.normal(size=(n1, d)) * rng.uniform(0.01, 1.0), mu1.weights.copy()
        ) if trial % 3 == 0 else _random_measure(rng, n2, d)
        nu = _random_measure(rng, n3, d)
        res = metrics.plan_stability_ratio(mu1, mu2, nu)
        slack = res.w2_sources - res.w2_plans
        worst = max(worst, slack)
        checks += 1
        if slack > 1e-9:
            return SuiteResult("plan-projection", False, checks,
                               f"instance {trial}: W2(plans) below W2(sources) by {slack:.2e}")
    return SuiteResult("plan-projection", True, checks, f"worst slack {worst:.2e}")


def suite_smoothing_bound(n_instances: int = 200, seed: int = 14) -> SuiteResult:
    """W_1(mu_N, mu_N^eps) <= eps * mean |Y_i| (identity coupling bound)."""
    rng = derive_rng(seed, "smoothing-suite")
    checks = 0
    worst = -np.inf
    for trial in range(n_instances):
        d = int(rng.integers(1, 11))
        n = int(rng.integers(2, 201))
        eps = float(rng.uniform(0.01, 1.0))
        noise = NoiseModel(measures.GAUSSIAN if trial % 2 else measures.UNIFORM_BALL, d)
        base = uniform_measure(rng.normal(size=(n, d)))
        smoothed = measures.smooth(base, noise, eps, seed=int(rng.integers(0, 2**31)))
        y_norms = np.linalg.norm((smoothed.points - base.points) / eps, axis=1)
        bound = eps * float(y_norms.mean())
        w1 = discrete_ot.wasserstein(base, smoothed, order=1)
        excess = w1 - bound
        worst = max(worst, excess)
        checks += 1
        if excess > 1e-9:
            return SuiteResult("smoothing-bound", False, checks,
                               f"instance {trial}: W1 exceeds bound by {excess:.2e}")
    return SuiteResult("smoothing-bound", True, checks, f"worst excess {worst:.2e}")


def suite_triangle(n_instances: int = 100, seed: int = 15) -> SuiteResult:
    rng = derive_rng(seed, "triangle-suite")
    checks = 0
    worst = -np.inf
    for trial in range(n_instances):
        d = int(rng.integers(1, 4))
        ms = [_random_measure(rng, int(rng.integers(2, 25)), d) for _ in range(3)]
        for order in (1, 2):
            ab = discrete_ot.wasserstein(ms[0], ms[1], order)
            bc = discrete_ot.wasserstein(ms[1], ms[2], order)
            ac = discrete_ot.wasserstein(ms[0], ms[2], order)
            excess = ac - (ab + bc)
            worst = max(worst, excess)
            checks += 1
            if excess > 1e-9:
                return SuiteResult("triangle", False, checks,
                                   f"instance {trial} order {order}: excess {excess:.2e}")
    return SuiteResult("triangle", True, checks, f"worst excess {worst:.2e}")


def _fd_scalar(fn, t, idx, h=1e-5):
    flat = t.ravel()
    old = flat[idx]
    flat[idx] = old + h
    f1 = fn()
    flat[idx] = old - h
    f0 = fn()
    flat[idx] = old
    return (f1 - f0) / (2.0 * h)


def suite_nn_gradients(n_instances: int = 100, seed: int = 16) -> SuiteResult:
    """backward and jacobian_map against central finite differences."""
    rng = derive_rng(seed, "nn-grad-suite")
    checks = 0
    worst = 0.0
    for trial in range(n_instances):
        d_in = int(rng.integers(1, 5))
        hidden = int(rng.integers(2, 8))
        d_out = int(rng.integers(1, 4))
        p = nn.init_mlp(d_in, hidden, d_out, seed=int(rng.integers(0, 2**31)))
        x = rng.normal(size=(int(rng.integers(1, 6)), d_in))
        g_out = rng.normal(size=(x.shape[0], d_out))
        _, cache = nn.forward(p, x)
        grads = nn.backward(p, cache, g_out)
        scalar = lambda: float((nn.forward(p, x)[0] * g_out).sum())
        for t, g in zip(p.tensors(), grads.tensors()):
            for idx in rng.choice(t.size, size=min(3, t.size), replace=False):
                fd = _fd_scalar(scalar, t, idx)
                rel = abs(fd - g.ravel()[idx]) / max(1.0, abs(fd))
                worst = max(worst, rel)
                checks += 1
                if rel > 1e-5:
                    return SuiteResult("nn-gradients", False, checks,
                                       f"instance {trial}: rel err {rel:.2e}")
        # directional consistency of the input jacobian
        x0 = rng.normal(size=d_in)
        jac = nn.jacobian_map(p, x0)
        v = rng.normal(size=d_in)
        t_step = 1e-6
        fd_dir = (nn.forward(p, x0 + t_step * v)[0] - nn.forward(p, x0 - t_step * v)[0]).ravel() / (
            2.0 * t_step
        )
        err = float(np.max(np.abs(jac @ v - fd_dir)))
        worst = max(worst, err)
        checks += 1
        if err > 1e-4:
            return SuiteResult("nn-gradients", False, checks,
                               f"instance {trial}: jacobian dir err {err:.2e}")
    return SuiteResult("nn-gradients", True, checks, f"worst rel err {worst:.2e}")


def suite_loss_gradients(n_instances: int = 20, seed: int = 17) -> SuiteResult:
    """loss_minimax gradients for both networks against finite differences."""
    rng = derive_rng(seed, "loss-grad-suite")
    checks = 0
    worst = 0.0
    for trial in range(n_instances):
        d = int(rng.integers(1, 4))
        v_params = nn.init_mlp(d, 4, 1, seed=int(rng.integers(0, 2**31)))
        t_params = nn.init_mlp(d, 4, d, seed=int(rng.integers(0, 2**31)))
        x = rng.normal(size=(5, d))
        y = rng.normal(size=(6, d))
        tau = float(rng.uniform(0.5, 2.0))
        lam = float(rng.uniform(0.0, 1.0))
        for side, net in (("T", t_params), ("V", v_params)):
            _, grads = loss_minimax(v_params, t_params, x, y, tau, lam, side)
            fn = lambda: loss_minimax(v_params, t_params, x, y, tau, lam, side)[0]
            for t, g in zip(net.tensors(), grads.tensors()):
                for idx in rng.choice(t.size, size=min(2, t.size), replace=False):
                    fd = _fd_scalar(fn, t, idx)
                    rel = abs(fd - g.ravel()[idx]) / max(1.0, abs(fd))
                    worst = max(worst, rel)
                    checks += 1
                    if rel > 1e-5:
                        return SuiteResult("loss-gradients", False, checks,
                                           f"instance {trial} side {side}: rel err {rel:.2e}")
    return SuiteResult("loss-gradients", True, checks, f"worst rel err {worst:.2e}")


def suite_hessian(n_instances: int = 20, seed: int = 18) -> SuiteResult:
    """Reduced-objective derivative identities on both closed-form families."""
    rng = derive_rng(seed, "hessian-suite")
    checks = 0
    worst = 0.0
    for trial in range(n_instances):
        d = int(rng.integers(1, 4))
        mu = _random_measure(rng, int(rng.integers(10, 60)), d)
        nu = _random_measure(rng, int(rng.integers(10, 60)), d)
        for family, theta in (
            (metrics.LINEAR_POTENTIAL, rng.normal(size=d) * 0.5),
            (metrics.QUADRATIC_POTENTIAL, np.array([float(rng.uniform(-0.5, 0.5))])),
        ):
            rep = metrics.hessian_check(family, theta, mu, nu)
            worst = max(worst, rep.max_discrepancy)
            checks += 1
            if rep.max_discrepancy > 1e-5:
                return SuiteResult("hessian-check", False, checks,
                                   f"instance {trial} {family}: disc {rep.max_discrepancy:.2e}")
    return SuiteResult("hessian-check", True, checks, f"worst disc {worst:.2e}")


def suite_analytic_maps(n_atoms: int = 1000, seed: int = 19) -> SuiteResult:
    """Monotone coupling on quantile atoms against the closed-form maps."""
    checks = 0
    worst = 0.0
    for eps in (0.1, 0.3, 1.0):
        xs = analytic.gaussian_quantile_atoms(n_atoms, eps)
        ys = analytic.uniform_quantile_atoms(n_atoms)
        mu = uniform_measure(xs[:, None])
        nu = uniform_measure(ys[:, None])
        plan = discrete_ot.solve_1d(mu, nu, costs.sq_half(1.0))
        induced = np.empty(n_atoms)
        induced[plan.source_idx] = ys[plan.target_idx]
        sup_err = float(np.max(np.abs(induced - analytic.map_gauss_to_uniform(xs, eps))))
        deriv_err = abs(
            analytic.map_gauss_to_uniform_deriv(0.0, eps) - 2.0 / (eps * math.sqrt(2.0 * math.pi))
        )
        worst = max(worst, sup_err, deriv_err)
        checks += 2
        if sup_err > 0.02 or deriv_err > 1e-6:
            return SuiteResult("analytic-maps", False, checks,
                               f"eps={eps}: sup={sup_err:.2e} deriv={deriv_err:.2e}")
    # constructed linear network has the exact known Jacobian norm
    for eps in (0.5, 0.1):
        net = nn.linear_map_network(3, 1.0 / eps)
        got = metrics.sup_jacobian_norm(net, np.zeros((1, 3)))
        err = abs(got - 1.0 / eps)
        worst = max(worst, err)
        checks += 1
        if err > 1e-6:
            return SuiteResult("analytic-maps", False, checks, f"jacobian probe err {err:.2e}")
    # degenerate limit: tails converge to the step map, but its pushforward
    # of a point mass is the midpoint, not the uniform target
    for x in (-1.0, 1.0, -2.5, 3.0):
        gap = abs(analytic.map_gauss_to_unit_uniform(x, 0.05) - analytic.map_degenerate_limit(x))
        worst = max(worst, gap)
        checks += 1
        if gap > 1e-6:
            return SuiteResult("analytic-maps", False, checks, f"tail gap {gap:.2e} at {x}")
    if analytic.map_degenerate_limit(0.0) != 0.5:
        return SuiteResult("analytic-maps", False, checks + 1, "midpoint value wrong")
    checks += 1
    return SuiteResult("analytic-maps", True, checks, f"worst {worst:.2e}")


ALL_SUITES = (
    suite_ctransform,
    suite_ot_oracle,
    suite_1d_monotone,
    suite_projection,
    suite_smoothing_bound,
    suite_triangle,
    suite_nn_gradients,
    suite_loss_gradients,
    suite_hessian,
    suite_analytic_maps,
)


def run_selftest(mutate: str | None = None, verbose: bool = True):
    """Run every suite; returns (all_passed, results).

    ``mutate="backward-sign"`` flips the sign of the W1 gradient inside
    ``nn.backward`` for the duration of the run; the gradient suites must
    then fail (harness sanity check).
    """
    original = nn.backward
    if mutate == "backward-sign":
        def corrupted(params, cache, grad_out):
            grads = original(params, cache, grad_out)
            return nn.MlpParams(-grads.w1, grads.b1, grads.w2, grads.b2)

        nn.backward = corrupted
    elif mutate is not None:
        raise ValueError(f"unknown mutation {mutate!r}")
    try:
        results = [suite() for suite in ALL_SUITES]
    finally:
        nn.backward = original
    if verbose:
        for res in results:
            print(res.line())
    return all(r.passed for r in results), results
