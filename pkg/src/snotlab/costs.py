"""Transport cost functions on point clouds.

Two cost families are supported, both with an intensity knob ``tau``:

* ``sqeuclidean_half``: c(x, y) = tau/2 * |x - y|^2
* ``euclidean``:        c(x, y) = tau * |x - y|
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

SQEUCLIDEAN_HALF = "sqeuclidean_half"
EUCLIDEAN = "euclidean"
_KINDS = (SQEUCLIDEAN_HALF, EUCLIDEAN)

# above this many (N*M*d) scalars, squared distances switch from exact
# broadcasting to the Gram-expansion form (clamped at 0)
_BROADCAST_BUDGET = 20_000_000


@dataclass(frozen=True)
class CostKind:
    kind: str = SQEUCLIDEAN_HALF
    tau: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigurationError(f"unknown cost kind {self.kind!r}")
        if not self.tau > 0:
            raise ConfigurationError(f"cost intensity must be positive, got {self.tau}")


def sq_half(tau: float = 1.0) -> CostKind:
    return CostKind(SQEUCLIDEAN_HALF, tau)


def euclidean(tau: float = 1.0) -> CostKind:
    return CostKind(EUCLIDEAN, tau)


def sqdist_matrix(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pairwise squared euclidean distances, shape (N, M)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if x.shape[1] != y.shape[1]:
        raise ConfigurationError(
            f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}"
        )
    n, m = x.shape[0], y.shape[0]
    if n * m * x.shape[1] <= _BROADCAST_BUDGET:
        diff = x[:, None, :] - y[None, :, :]
        return np.einsum("nmd,nmd->nm", diff, diff)
    # Gram expansion: |x|^2 + |y|^2 - 2<x,y>; cancellation can leave small
    # negatives, which the clamp removes
    d2 = (
        np.sum(x * x, axis=1)[:, None]
        + np.sum(y * y, axis=1)[None, :]
        - 2.0 * (x @ y.T)
    )
    np.maximum(d2, 0.0, out=d2)
    return d2


def cost_matrix(cost: CostKind, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Dense cost matrix C[i, j] = c(x_i, y_j)."""
    d2 = sqdist_matrix(x, y)
    if cost.kind == SQEUCLIDEAN_HALF:
        return (0.5 * cost.tau) * d2
    return cost.tau * np.sqrt(d2)


def cost_pairs(cost: CostKind, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Rowwise costs c(x_i, y_i) for equal-length point arrays."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if x.shape != y.shape:
        raise ConfigurationError(f"shape mismatch: {x.shape} vs {y.shape}")
    d2 = np.sum((x - y) ** 2, axis=1)
    if cost.kind == SQEUCLIDEAN_HALF:
        return (0.5 * cost.tau) * d2
    return cost.tau * np.sqrt(d2)
