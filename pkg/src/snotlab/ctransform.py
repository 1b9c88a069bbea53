"""c-transform machinery on finite candidate sets.

A :class:`GridPotential` stores dual-potential values on candidate target
points; the transform V^c(x) = min_y [c(x, y) - V(y)] is evaluated by
exhaustive minimization over that set, which is how the trainer's
discretized semi-dual objective sees it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .costs import CostKind, cost_matrix, cost_pairs, sqdist_matrix
from .errors import ConfigurationError
from .measures import EmpiricalMeasure

_CHUNK = 1 << 22  # matrix entries per evaluation chunk


@dataclass(frozen=True)
class GridPotential:
    """Potential values on a finite candidate set under a fixed cost."""

    support: np.ndarray
    values: np.ndarray
    cost: CostKind

    def __post_init__(self):
        sup = np.ascontiguousarray(np.atleast_2d(self.support), dtype=np.float64)
        val = np.ascontiguousarray(np.atleast_1d(self.values), dtype=np.float64)
        if sup.shape[0] < 1:
            raise ConfigurationError("potential support must be nonempty")
        if val.shape != (sup.shape[0],):
            raise ConfigurationError(
                f"values shape {val.shape} does not match {sup.shape[0]} support points"
            )
        if not (np.all(np.isfinite(sup)) and np.all(np.isfinite(val))):
            raise ConfigurationError("support/values contain NaN/Inf")
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "values", val)

    @property
    def n(self) -> int:
        return self.support.shape[0]

    @property
    def dim(self) -> int:
        return self.support.shape[1]

    def normalize(self, anchor: int | None = None) -> "GridPotential":
        """Shift values so the anchor point carries exactly 0.

        The default anchor is the support point nearest the origin (smallest
        index on ties), standing in for the normalization V(0) = 0 when the
        origin itself is not a candidate point.
        """
        if anchor is None:
            anchor = int(np.argmin(np.einsum("nd,nd->n", self.support, self.support)))
        return GridPotential(self.support, self.values - self.values[anchor], self.cost)


def potential_to_csv(pot: GridPotential, path) -> None:
    """Write ``y0,...,y{d-1},V`` rows in full double precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"y{k}" for k in range(pot.dim)] + ["V"])
        for row, v in zip(pot.support, pot.values):
            writer.writerow([repr(float(c)) for c in row] + [repr(float(v))])


def potential_from_csv(path, cost: CostKind) -> GridPotential:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64)
    return GridPotential(data[:, :-1], data[:, -1], cost)


def _chunk_rows(n_rows: int, n_cols: int) -> int:
    return max(1, min(n_rows, _CHUNK // max(n_cols, 1)))


def c_transform(pot: GridPotential, x_points: np.ndarray):
    """V^c on the given x rows: values and attaining support indices.

    Ties resolve to the smallest support index (np.argmin convention).
    """
    x = np.atleast_2d(np.asarray(x_points, dtype=np.float64))
    if x.shape[1] != pot.dim:
        raise ConfigurationError(f"dimension mismatch: {x.shape[1]} vs {pot.dim}")
    n = x.shape[0]
    values = np.empty(n)
    argmin = np.empty(n, dtype=np.int64)
    step = _chunk_rows(n, pot.n)
    for lo in range(0, n, step):
        hi = min(lo + step, n)
        gaps = cost_matrix(pot.cost, x[lo:hi], pot.support) - pot.values[None, :]
        idx = np.argmin(gaps, axis=1)
        argmin[lo:hi] = idx
        values[lo:hi] = gaps[np.arange(hi - lo), idx]
    return values, argmin


def cc_transform(pot: GridPotential, y_eval: np.ndarray, x_grid: np.ndarray) -> np.ndarray:
    """V^cc on y_eval, with the outer infimum taken over the supplied x grid."""
    y = np.atleast_2d(np.asarray(y_eval, dtype=np.float64))
    x = np.atleast_2d(np.asarray(x_grid, dtype=np.float64))
    if x.shape[0] < 1 or y.shape[0] < 1:
        raise ConfigurationError("empty evaluation grid")
    vc, _ = c_transform(pot, x)
    out = np.empty(y.shape[0])
    step = _chunk_rows(y.shape[0], x.shape[0])
    for lo in range(0, y.shape[0], step):
        hi = min(lo + step, y.shape[0])
        gaps = cost_matrix(pot.cost, y[lo:hi], x) - vc[None, :]
        out[lo:hi] = gaps.min(axis=1)
    return out


def semidual_value(
    pot: GridPotential, mu: EmpiricalMeasure, nu_weights: np.ndarray
) -> float:
    """Semi-dual objective: sum_i mu_i V^c(x_i) + sum_j nu_j V(y_j)."""
    nu_w = np.asarray(nu_weights, dtype=np.float64)
    if nu_w.shape != (pot.n,):
        raise ConfigurationError(
            f"nu weights shape {nu_w.shape} does not align with support ({pot.n},)"
        )
    vc, _ = c_transform(pot, mu.points)
    return float(mu.weights @ vc + nu_w @ pot.values)


def nearest_support(pot: GridPotential, points: np.ndarray) -> np.ndarray:
    """Indices of the nearest support point per row (smallest index on ties)."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = pts.shape[0]
    idx = np.empty(n, dtype=np.int64)
    step = _chunk_rows(n, pot.n)
    for lo in range(0, n, step):
        hi = min(lo + step, n)
        idx[lo:hi] = np.argmin(sqdist_matrix(pts[lo:hi], pot.support), axis=1)
    return idx


def recovery_residual(
    pot: GridPotential,
    t_values: np.ndarray,
    x_points: np.ndarray,
    mu_weights: np.ndarray,
) -> float:
    """mu-weighted mean of c(x, T(x)) - V(T(x)) - V^c(x), with T snapped to
    the support.

    Nonnegative by construction; zero exactly when T selects an attaining
    candidate for every sample.
    """
    x = np.atleast_2d(np.asarray(x_points, dtype=np.float64))
    tv = np.atleast_2d(np.asarray(t_values, dtype=np.float64))
    w = np.asarray(mu_weights, dtype=np.float64)
    if x.shape[0] != tv.shape[0] or x.shape[0] != w.shape[0]:
        raise ConfigurationError("x_points, t_values, mu_weights must align")
    snap = nearest_support(pot, tv)
    vc, _ = c_transform(pot, x)
    gaps = cost_pairs(pot.cost, x, pot.support[snap]) - pot.values[snap] - vc
    return float(w @ gaps)
