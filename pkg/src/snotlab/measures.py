"""Probability measures as weighted point clouds, plus the synthetic
dataset samplers and the additive-noise smoothing operator.

All sampling is reproducible: identical (spec, n, seed) triples yield
bitwise-identical point matrices.  Created measures are immutable (their
arrays are marked read-only) and safe to share across threads.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .rng import derive_rng

# dataset kinds
PERPENDICULAR = "perpendicular"
ONE_TO_MANY = "one_to_many"
UNIFORM_CUBE_EMBEDDED = "uniform_cube_embedded"
POINT_MASS = "point_mass"
STANDARD_GAUSSIAN = "standard_gaussian"
UNIFORM_INTERVAL = "uniform_interval"
DATASET_KINDS = (
    PERPENDICULAR,
    ONE_TO_MANY,
    UNIFORM_CUBE_EMBEDDED,
    POINT_MASS,
    STANDARD_GAUSSIAN,
    UNIFORM_INTERVAL,
)

# noise kinds
GAUSSIAN = "gaussian"
UNIFORM_BALL = "uniform_ball"
NOISE_KINDS = (GAUSSIAN, UNIFORM_BALL)

_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Weighted point cloud in R^d: points (N, d) and weights summing to 1."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.ascontiguousarray(np.atleast_2d(self.points), dtype=np.float64)
        w = np.ascontiguousarray(np.atleast_1d(self.weights), dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ConfigurationError("points must be a nonempty (N, d) matrix")
        if w.shape != (pts.shape[0],):
            raise ConfigurationError(
                f"weights shape {w.shape} does not match {pts.shape[0]} points"
            )
        if not np.all(np.isfinite(pts)):
            raise ConfigurationError("points contain NaN/Inf")
        if np.any(w < 0):
            raise ConfigurationError("weights must be non-negative")
        if abs(w.sum() - 1.0) > _WEIGHT_TOL:
            raise ConfigurationError(f"weights sum to {w.sum()!r}, expected 1")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def uniform_measure(points: np.ndarray) -> EmpiricalMeasure:
    """Uniform-weight measure on the given points."""
    points = np.atleast_2d(points)
    n = points.shape[0]
    return EmpiricalMeasure(points, np.full(n, 1.0 / n))


def dirac(at: np.ndarray) -> EmpiricalMeasure:
    return EmpiricalMeasure(np.atleast_2d(at), np.ones(1))


def measure_to_csv(measure: EmpiricalMeasure, path) -> None:
    """Write ``x0,...,x{d-1},w`` rows in full double precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{k}" for k in range(measure.dim)] + ["w"])
        for row, w in zip(measure.points, measure.weights):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(w))])


def measure_from_csv(path) -> EmpiricalMeasure:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64)
    return EmpiricalMeasure(data[:, :-1], data[:, -1])


@dataclass(frozen=True)
class DatasetSpec:
    """Description of one synthetic distribution.

    ``m`` is the intrinsic dimension (coordinates actually carrying mass);
    ``params`` holds kind-specific settings:

    * perpendicular / one_to_many: ``role`` in {"source", "target"}
    * uniform_cube_embedded: ``low``/``high`` cube bounds (default -1/1)
    * point_mass: ``at`` (scalar or length-d vector, default 0)
    * uniform_interval: ``low``/``high`` endpoints (d must be 1)
    """

    kind: str
    d: int
    m: int = 1
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in DATASET_KINDS:
            raise ConfigurationError(f"unknown dataset kind {self.kind!r}")
        if self.d < 1:
            raise ConfigurationError("ambient dimension d must be >= 1")
        if not 1 <= self.m <= self.d:
            raise ConfigurationError(
                f"manifold dimension m={self.m} must satisfy 1 <= m <= d={self.d}"
            )
        if self.kind in (PERPENDICULAR, ONE_TO_MANY):
            role = self.params.get("role", "source")
            if role not in ("source", "target"):
                raise ConfigurationError(f"role must be source/target, got {role!r}")
        if self.kind == ONE_TO_MANY and self.params.get("role") == "target":
            if self.m >= self.d:
                raise ConfigurationError("one_to_many target needs m < d")
        if self.kind == UNIFORM_INTERVAL and self.d != 1:
            raise ConfigurationError("uniform_interval requires d == 1")

    @property
    def role(self) -> str:
        return self.params.get("role", "source")


def spec_from_json(obj: dict) -> DatasetSpec:
    obj = dict(obj)
    kind = obj.pop("kind")
    d = int(obj.pop("d"))
    m = int(obj.pop("m", 1))
    params = obj.pop("params", {})
    params.update(obj)  # allow flat role/low/high keys
    return DatasetSpec(kind=kind, d=d, m=m, params=params)


def sample(spec: DatasetSpec, n: int, seed: int) -> EmpiricalMeasure:
    """Draw n i.i.d. samples with uniform weights 1/n."""
    if n < 1:
        raise ConfigurationError("sample count must be >= 1")
    rng = derive_rng(seed, "sample")
    d, m = spec.d, spec.m
    pts = np.zeros((n, d))

    if spec.kind == POINT_MASS:
        at = np.asarray(spec.params.get("at", 0.0), dtype=np.float64)
        pts += np.broadcast_to(at, (d,))
    elif spec.kind == STANDARD_GAUSSIAN:
        pts = rng.standard_normal((n, d))
    elif spec.kind == UNIFORM_INTERVAL:
        low = float(spec.params.get("low", -1.0))
        high = float(spec.params.get("high", 1.0))
        pts = rng.uniform(low, high, size=(n, 1))
    elif spec.kind == UNIFORM_CUBE_EMBEDDED:
        low = float(spec.params.get("low", -1.0))
        high = float(spec.params.get("high", 1.0))
        pts[:, :m] = rng.uniform(low, high, size=(n, m))
    elif spec.kind == PERPENDICULAR:
        if spec.role == "source":
            # supported on [-1,1]^m x {0}^(d-m)
            pts[:, :m] = rng.uniform(-1.0, 1.0, size=(n, m))
        else:
            # supported on {0}^(d-m) x [-1,1]^m
            pts[:, d - m :] = rng.uniform(-1.0, 1.0, size=(n, m))
    elif spec.kind == ONE_TO_MANY:
        if spec.role == "source":
            pts[:, :m] = rng.uniform(-1.0, 1.0, size=(n, m))
        else:
            # first block uniform, second block +/- unit vector along its
            # first coordinate (embedding documented in the README)
            pts[:, :m] = rng.uniform(-1.0, 1.0, size=(n, m))
            signs = rng.integers(0, 2, size=n) * 2.0 - 1.0
            pts[:, m] = signs
    else:  # pragma: no cover - guarded by DatasetSpec validation
        raise ConfigurationError(f"unhandled kind {spec.kind!r}")

    return uniform_measure(pts)


@dataclass(frozen=True)
class NoiseModel:
    """Additive-noise law Y: isotropic standard gaussian or uniform unit ball.

    Both have E|Y| finite, as the finite-sample stability bound requires.
    """

    kind: str = GAUSSIAN
    dim: int = 1

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ConfigurationError(f"unknown noise kind {self.kind!r}")
        if self.dim < 1:
            raise ConfigurationError("noise dim must be >= 1")


def noise_sample(noise: NoiseModel, n: int, rng: np.random.Generator) -> np.ndarray:
    if noise.kind == GAUSSIAN:
        return rng.standard_normal((n, noise.dim))
    # uniform on the unit ball: gaussian direction, radius ~ U^(1/d)
    g = rng.standard_normal((n, noise.dim))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    radius = rng.uniform(0.0, 1.0, size=(n, 1)) ** (1.0 / noise.dim)
    return g / norms * radius


def smooth(
    measure: EmpiricalMeasure, noise: NoiseModel, epsilon: float, seed: int
) -> EmpiricalMeasure:
    """Additive-noise smoothing: points X_i + eps * Y_i, weights unchanged."""
    if epsilon < 0:
        raise ConfigurationError(f"epsilon must be >= 0, got {epsilon}")
    if noise.dim != measure.dim:
        raise ConfigurationError(
            f"noise dim {noise.dim} does not match measure dim {measure.dim}"
        )
    if epsilon == 0.0:
        return EmpiricalMeasure(measure.points.copy(), measure.weights.copy())
    rng = derive_rng(seed, "smooth")
    y = noise_sample(noise, measure.n, rng)
    return EmpiricalMeasure(measure.points + epsilon * y, measure.weights.copy())


_NOISE_NORM_CACHE: dict[tuple, float] = {}


def mean_noise_norm(noise: NoiseModel, n_mc: int = 100_000, seed: int = 0) -> float:
    """Monte Carlo estimate of E|Y|, cached per (noise, n_mc, seed)."""
    if n_mc < 1:
        raise ConfigurationError("n_mc must be >= 1")
    key = (noise.kind, noise.dim, n_mc, seed)
    if key not in _NOISE_NORM_CACHE:
        rng = derive_rng(seed, "noise-norm")
        y = noise_sample(noise, n_mc, rng)
        _NOISE_NORM_CACHE[key] = float(np.mean(np.linalg.norm(y, axis=1)))
    return _NOISE_NORM_CACHE[key]


def stratified_discretization(spec: DatasetSpec, n_atoms: int) -> EmpiricalMeasure:
    """Quantile-stratified fixed discretization of a product-uniform spec.

    Places one atom at the center of each cell of a per-axis equal-mass grid
    over the m active coordinates (zeros elsewhere).  The per-axis count is
    round(n_atoms^(1/m)); the returned measure has that count to the m-th
    power atoms, which equals n_atoms whenever n_atoms is a perfect m-th
    power.
    """
    if spec.kind == UNIFORM_CUBE_EMBEDDED:
        low = float(spec.params.get("low", -1.0))
        high = float(spec.params.get("high", 1.0))
    elif spec.kind == PERPENDICULAR and spec.role == "source":
        low, high = -1.0, 1.0
    else:
        raise ConfigurationError(
            f"no stratified discretization for kind {spec.kind!r}"
        )
    m, d = spec.m, spec.d
    k = max(1, round(n_atoms ** (1.0 / m)))
    centers = low + (high - low) * (np.arange(k) + 0.5) / k
    grids = np.meshgrid(*([centers] * m), indexing="ij")
    pts = np.zeros((k**m, d))
    for axis in range(m):
        pts[:, axis] = grids[axis].ravel()
    return uniform_measure(pts)
