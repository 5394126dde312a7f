"""Discrete probability measures, sphere sampling, and per-step sample draws."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DiscreteMeasure",
    "SampleBatch",
    "sample_unit_sphere",
    "sample_batch",
    "project",
]

_WEIGHT_TOL = 1e-12


def _frozen_array(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted point cloud: ``points`` is (n, d), ``weights`` sums to one.

    Weights are normalized by their sum at construction, so the sum-to-one
    invariant holds after every constructor. Instances are immutable and safe
    to share across threads.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if points.ndim != 2 or points.shape[0] < 1:
            raise ValueError("points must be a non-empty (n, d) matrix")
        if not np.isfinite(points).all():
            raise ValueError("points must be finite")
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if weights.shape[0] != points.shape[0]:
            raise ValueError(
                f"got {weights.shape[0]} weights for {points.shape[0]} points"
            )
        if not np.isfinite(weights).all() or (weights < 0).any():
            raise ValueError("weights must be finite and nonnegative")
        total = weights.sum()
        if total <= 0:
            raise ValueError("weights must have positive sum")
        weights = weights / total
        object.__setattr__(self, "points", _frozen_array(points))
        object.__setattr__(self, "weights", _frozen_array(weights))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def support_radius(self) -> float:
        """Largest support-point Euclidean norm (R_x / R_y of the measure)."""
        return float(np.linalg.norm(self.points, axis=1).max())

    @classmethod
    def uniform(cls, points) -> "DiscreteMeasure":
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(points, np.full(points.shape[0], 1.0 / points.shape[0]))

    @classmethod
    def from_csv(cls, path, has_weights: bool | None = None) -> "DiscreteMeasure":
        """Load a measure from CSV, one support point per row.

        A trailing weight column is detected automatically when
        ``has_weights`` is None: the last column must be nonnegative and sum
        to 1 within 1e-6. Absent weights mean uniform.
        """
        if not os.path.exists(path):
            raise FileNotFoundError(f"measure file not found: {path}")
        raw = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
        if has_weights is None:
            last = raw[:, -1]
            has_weights = (
                raw.shape[1] >= 2
                and (last >= 0).all()
                and abs(last.sum() - 1.0) <= 1e-6
            )
        if has_weights:
            if raw.shape[1] < 2:
                raise ValueError(f"{path}: weight column requires >= 2 columns")
            return cls(raw[:, :-1], raw[:, -1])
        return cls.uniform(raw)

    def to_csv(self, path, include_weights: bool = True) -> None:
        cols = self.points
        if include_weights:
            cols = np.column_stack([self.points, self.weights])
        lines = [",".join(format(v, ".17g") for v in row) for row in cols]
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")


@dataclass(frozen=True)
class SampleBatch:
    """One SGD draw: input rows ``X`` (n, d_x), target rows ``Y`` (n, d_y),
    and ``thetas`` (L, d_y) unit projection directions."""

    X: np.ndarray
    Y: np.ndarray
    thetas: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        thetas = np.atleast_2d(np.asarray(self.thetas, dtype=float))
        if X.shape[0] != Y.shape[0]:
            raise ValueError("X and Y must have the same number of rows")
        if thetas.shape[0] < 1:
            raise ValueError("need at least one projection direction")
        if thetas.shape[1] != Y.shape[1]:
            raise ValueError("theta dimension must match Y dimension")
        norms = np.linalg.norm(thetas, axis=1)
        if np.abs(norms - 1.0).max() > _WEIGHT_TOL:
            raise ValueError("every theta row must have unit Euclidean norm")
        object.__setattr__(self, "X", _frozen_array(X))
        object.__setattr__(self, "Y", _frozen_array(Y))
        object.__setattr__(self, "thetas", _frozen_array(thetas))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def L(self) -> int:
        return self.thetas.shape[0]


def sample_unit_sphere(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Draw uniformly on the unit sphere S^{dim-1} (normalized Gaussian)."""
    if dim < 1:
        raise ValueError(f"invalid dimension {dim}: need dim >= 1")
    while True:
        v = rng.standard_normal(dim)
        norm = np.linalg.norm(v)
        if norm > 0.0:
            return v / norm


def sample_batch(
    mx: DiscreteMeasure,
    my: DiscreteMeasure,
    n: int,
    L: int,
    rng: np.random.Generator,
) -> SampleBatch:
    """Draw n i.i.d. support rows from each measure plus L unit directions."""
    if n < 1 or L < 1:
        raise ValueError("n and L must be >= 1")
    xi = rng.choice(mx.n, size=n, p=mx.weights)
    yi = rng.choice(my.n, size=n, p=my.weights)
    thetas = np.stack([sample_unit_sphere(my.dim, rng) for _ in range(L)])
    return SampleBatch(mx.points[xi], my.points[yi], thetas)


def project(X: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Project each row of X onto the unit direction theta (one dot product per row)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if X.shape[1] != theta.shape[0]:
        raise ValueError(
            f"dimension mismatch: X has {X.shape[1]} columns, theta has {theta.shape[0]}"
        )
    if abs(np.linalg.norm(theta) - 1.0) > 1e-9:
        raise ValueError("theta must have unit Euclidean norm")
    return X @ theta
