"""Evaluation quantities: tangential/normal error decomposition, transport
cost and target errors, map-gradient norms, plan-stability measurements,
reduced-objective derivative checks, and log-log rate fitting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import analytic, discrete_ot, nn
from .costs import sq_half
from .errors import ConfigurationError
from .measures import EmpiricalMeasure, uniform_measure

LINEAR_POTENTIAL = "linear"
QUADRATIC_POTENTIAL = "quadratic"


@dataclass(frozen=True)
class RatePoint:
    """One estimated expected distance at sample size N."""

    n: int
    value: float
    replicates: int
    std_err: float

    def __post_init__(self):
        if self.value <= 0:
            raise ConfigurationError("rate points must have positive values")
        if self.replicates < 1:
            raise ConfigurationError("replicates must be >= 1")


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    n_points: int


def fit_rate(points: list[RatePoint]) -> RateFit:
    """OLS of ln(value) on ln(N)."""
    if len(points) < 3:
        raise ConfigurationError("rate fit needs at least 3 points")
    ns = np.array([p.n for p in points], dtype=np.float64)
    if len(np.unique(ns)) != len(ns):
        raise ConfigurationError("rate fit needs distinct N values")
    x = np.log(ns)
    y = np.log(np.array([p.value for p in points]))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return RateFit(float(slope), float(intercept), min(max(r2, 0.0), 1.0), len(points))


def tangential_error(
    t_params: nn.MlpParams, source: EmpiricalMeasure, m: int | None = None
) -> float:
    """Norm of the weighted mean of the map's first-block outputs.

    For perpendicular-style geometry the target's first block is identically
    zero, so this measures the on-manifold (tangential) mismatch.
    """
    if m is None:
        m = source.dim // 2
    tx = nn.forward(t_params, source.points)[0][:, :m]
    return float(np.linalg.norm(source.weights @ tx))


def normal_error(
    t_params: nn.MlpParams,
    smoothed_source: EmpiricalMeasure,
    m: int | None = None,
    reference_atoms: int = 2048,
    low: float = -1.0,
    high: float = 1.0,
) -> float:
    """Squared W_2 between the pushforward's normal block and the uniform
    reference marginal, via the monotone 1D coupling on quantile atoms.

    ``m`` is the tangential block size; the normal block is the remaining
    d - m coordinates (must be one-dimensional here).
    """
    d = smoothed_source.dim
    if m is None:
        m = d // 2
    if d - m != 1:
        raise ConfigurationError("normal_error expects a 1D normal block")
    pushed = nn.forward(t_params, smoothed_source.points)[0][:, m:]
    push_measure = EmpiricalMeasure(pushed, smoothed_source.weights.copy())
    ref = uniform_measure(
        analytic.uniform_quantile_atoms(reference_atoms, low, high)[:, None]
    )
    plan = discrete_ot.solve_1d(push_measure, ref, sq_half(2.0))
    return float(plan.cost_value)


def transport_cost_of_map(t_params: nn.MlpParams, mu: EmpiricalMeasure) -> float:
    """mu-weighted mean of |T(x) - x|^2."""
    tx = nn.forward(t_params, mu.points)[0]
    diff = tx - mu.points
    return float(mu.weights @ np.einsum("nd,nd->n", diff, diff))


def d_cost(
    t_params: nn.MlpParams,
    mu: EmpiricalMeasure,
    nu: EmpiricalMeasure,
    max_entries: int = discrete_ot.DEFAULT_MAX_ENTRIES,
) -> float:
    """|W_2^2(mu, nu) - mean |T(x) - x|^2| on the given sample clouds."""
    w2 = discrete_ot.wasserstein(mu, nu, order=2, max_entries=max_entries)
    return abs(w2**2 - transport_cost_of_map(t_params, mu))


def d_target(
    t_params: nn.MlpParams,
    mu: EmpiricalMeasure,
    nu: EmpiricalMeasure,
    max_entries: int = discrete_ot.DEFAULT_MAX_ENTRIES,
) -> float:
    """W_2^2 between the pushforward of mu and nu."""
    tx = nn.forward(t_params, mu.points)[0]
    pushed = EmpiricalMeasure(tx, mu.weights.copy())
    return discrete_ot.wasserstein(pushed, nu, order=2, max_entries=max_entries) ** 2


def spectral_norm(matrix: np.ndarray, iters: int = 50, tol: float = 1e-8) -> float:
    """Largest singular value by power iteration on J^T J."""
    a = np.asarray(matrix, dtype=np.float64)
    if a.size == 0:
        return 0.0
    gram = a.T @ a
    # deterministic start with a slight tilt so no single axis is unlucky
    v = np.ones(gram.shape[0]) + 1e-3 * np.arange(gram.shape[0])
    v /= np.linalg.norm(v)
    prev = 0.0
    for _ in range(iters):
        w = gram @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        if abs(norm - prev) <= tol * max(norm, 1.0):
            prev = norm
            break
        prev = norm
    return float(np.sqrt(prev))


def sup_jacobian_norm(t_params: nn.MlpParams, probe_points: np.ndarray) -> float:
    """Max spectral norm of the map Jacobian over the probe points."""
    probes = np.atleast_2d(np.asarray(probe_points, dtype=np.float64))
    if probes.shape[0] < 1:
        raise ConfigurationError("probe set must be nonempty")
    return max(spectral_norm(nn.jacobian_map(t_params, x)) for x in probes)


def alpha_stability(p: float, d: int) -> float:
    """Plan-stability exponent p / (6p + 16d)."""
    if p <= 0 or d < 1:
        raise ConfigurationError("need p > 0 and d >= 1")
    return p / (6.0 * p + 16.0 * d)


@dataclass(frozen=True)
class PlanStability:
    w2_plans: float
    w1_sources: float
    w2_sources: float
    alpha_p: float


def plan_stability_ratio(
    mu1: EmpiricalMeasure,
    mu2: EmpiricalMeasure,
    nu: EmpiricalMeasure,
    p: float = 4.0,
    max_entries: int = discrete_ot.DEFAULT_MAX_ENTRIES,
) -> PlanStability:
    """Measured plan distance vs source distance, with the theory exponent.

    Only the projection lower bound W_2(plans) >= W_2(mu1, mu2) is checked;
    the upper-bound constants are never instantiated.
    """
    cost = sq_half(2.0)
    plan1 = discrete_ot.solve_exact(mu1, nu, cost, max_entries)
    plan2 = discrete_ot.solve_exact(mu2, nu, cost, max_entries)
    w2_plans = discrete_ot.plan_distance(plan1, mu1, nu, plan2, mu2, nu, max_entries)
    w1_sources = discrete_ot.wasserstein(mu1, mu2, order=1, max_entries=max_entries)
    w2_sources = discrete_ot.wasserstein(mu1, mu2, order=2, max_entries=max_entries)
    if w2_plans < w2_sources - 1e-9:
        raise RuntimeError(
            f"projection bound violated: plans {w2_plans} < sources {w2_sources}"
        )
    return PlanStability(w2_plans, w1_sources, w2_sources, alpha_stability(p, mu1.dim))


# ---------------------------------------------------------------------------
# reduced semi-dual objective J(theta) for closed-form potential families
# ---------------------------------------------------------------------------

def _check_family(family: str):
    if family not in (LINEAR_POTENTIAL, QUADRATIC_POTENTIAL):
        raise ConfigurationError(f"unknown potential family {family!r}")


def reduced_objective(
    family: str, theta: np.ndarray, mu: EmpiricalMeasure, nu: EmpiricalMeasure
) -> float:
    """J(theta) = mean_mu V_theta^c(x) + mean_nu V_theta(y), closed form.

    linear:    V(y) = theta . y      => T(x) = x + theta
    quadratic: V(y) = theta/2 |y|^2  => T(x) = x / (1 - theta), theta < 1
    """
    _check_family(family)
    x, wx = mu.points, mu.weights
    y, wy = nu.points, nu.weights
    if family == LINEAR_POTENTIAL:
        theta = np.asarray(theta, dtype=np.float64).ravel()
        vc = -(x @ theta) - 0.5 * float(theta @ theta)
        v = y @ theta
        return float(wx @ vc + wy @ v)
    th = float(np.asarray(theta).ravel()[0])
    if th >= 1.0:
        raise ConfigurationError("quadratic family needs theta < 1")
    x2 = wx @ np.einsum("nd,nd->n", x, x)
    y2 = wy @ np.einsum("nd,nd->n", y, y)
    return float(-th / (2.0 * (1.0 - th)) * x2 + 0.5 * th * y2)


def reduced_map(family: str, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    _check_family(family)
    if family == LINEAR_POTENTIAL:
        return x + np.asarray(theta, dtype=np.float64).ravel()[None, :]
    th = float(np.asarray(theta).ravel()[0])
    if th >= 1.0:
        raise ConfigurationError("quadratic family needs theta < 1")
    return x / (1.0 - th)


def _lemma_derivatives(family, theta, mu, nu):
    """Gradient/Hessian from the reduced-objective derivative formulas."""
    x, wx = mu.points, mu.weights
    y, wy = nu.points, nu.weights
    if family == LINEAR_POTENTIAL:
        # grad_theta V = y; G = I; grad_x T = I
        tx = reduced_map(family, theta, x)
        grad = wy @ y - wx @ tx
        hess = -np.eye(x.shape[1])
        return grad, hess
    th = float(np.asarray(theta).ravel()[0])
    tx = reduced_map(family, theta, x)
    # grad_theta V = |y|^2 / 2; G(x) = T(x); grad_x T = I / (1 - theta)
    grad = 0.5 * (wy @ np.einsum("nd,nd->n", y, y) - wx @ np.einsum("nd,nd->n", tx, tx))
    amp = wx @ np.einsum("nd,nd->n", tx, tx) / (1.0 - th)
    hess = -amp
    return np.array([grad]), np.array([[hess]])


def _closed_derivatives(family, theta, mu, nu):
    x, wx = mu.points, mu.weights
    y, wy = nu.points, nu.weights
    if family == LINEAR_POTENTIAL:
        theta = np.asarray(theta, dtype=np.float64).ravel()
        grad = wy @ y - wx @ x - theta
        hess = -np.eye(len(theta))
        return grad, hess
    th = float(np.asarray(theta).ravel()[0])
    x2 = wx @ np.einsum("nd,nd->n", x, x)
    y2 = wy @ np.einsum("nd,nd->n", y, y)
    grad = np.array([-x2 / (2.0 * (1.0 - th) ** 2) + 0.5 * y2])
    hess = np.array([[-x2 / (1.0 - th) ** 3]])
    return grad, hess


def _fd_derivatives(family, theta, mu, nu, step):
    theta = np.asarray(theta, dtype=np.float64).ravel()
    k = len(theta)
    grad = np.empty(k)
    hess = np.empty((k, k))
    j0 = reduced_objective(family, theta, mu, nu)

    def j_at(t):
        return reduced_objective(family, t, mu, nu)

    for i in range(k):
        e = np.zeros(k)
        e[i] = step
        grad[i] = (j_at(theta + e) - j_at(theta - e)) / (2.0 * step)
        hess[i, i] = (j_at(theta + e) - 2.0 * j0 + j_at(theta - e)) / step**2
    for i in range(k):
        for jx in range(i + 1, k):
            ei = np.zeros(k)
            ej = np.zeros(k)
            ei[i] = step
            ej[jx] = step
            hess[i, jx] = hess[jx, i] = (
                j_at(theta + ei + ej)
                - j_at(theta + ei - ej)
                - j_at(theta - ei + ej)
                + j_at(theta - ei - ej)
            ) / (4.0 * step**2)
    return grad, hess


@dataclass(frozen=True)
class HessianReport:
    grad_formula: np.ndarray
    grad_fd: np.ndarray
    grad_closed: np.ndarray
    hess_formula: np.ndarray
    hess_fd: np.ndarray
    hess_closed: np.ndarray
    max_discrepancy: float


def hessian_check(
    family: str,
    theta: np.ndarray,
    mu: EmpiricalMeasure,
    nu: EmpiricalMeasure,
    fd_step: float = 1e-4,
) -> HessianReport:
    """Compare reduced-objective derivatives three ways: the derivative
    formulas, central finite differences of J, and closed forms."""
    _check_family(family)
    g_a, h_a = _lemma_derivatives(family, theta, mu, nu)
    g_b, h_b = _fd_derivatives(family, theta, mu, nu, fd_step)
    g_c, h_c = _closed_derivatives(family, theta, mu, nu)
    disc = max(
        float(np.max(np.abs(g_a - g_b))),
        float(np.max(np.abs(g_a - g_c))),
        float(np.max(np.abs(g_b - g_c))),
        float(np.max(np.abs(h_a - h_b))),
        float(np.max(np.abs(h_a - h_c))),
        float(np.max(np.abs(h_b - h_c))),
    )
    return HessianReport(g_a, g_b, g_c, h_a, h_b, h_c, disc)
