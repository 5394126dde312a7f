"""Continuous-time diagnostics: interpolation, path distance, flow surrogate, criticality.

SGD iterates become piecewise-affine curves; the distance between curves is a
geometrically weighted sup-distance over growing segments, matching the metric
under which small-step trajectories approach subgradient flows. The reference
flow is an explicit fine-step Euler integration of the averaged a.e. gradient,
a desk-scale stand-in for the differential-inclusion solution set. The
criticality gap measures how far a point is from generalized (normal-cone)
stationarity on the projection ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measures import DiscreteMeasure
from .network import NetworkSpec
from .sgd import DivergenceError, Trajectory
from .swloss import estimate_grad_F

__all__ = [
    "InterpolatedPath",
    "DcResult",
    "interpolate",
    "evaluate_path",
    "distance_d_c",
    "reference_flow",
    "criticality_gap",
]


@dataclass(frozen=True)
class InterpolatedPath:
    """Piecewise-affine curve through ``points`` at knot spacing ``step``."""

    points: np.ndarray
    step: float

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] < 1:
            raise ValueError("need at least one knot")
        if self.step <= 0:
            raise ValueError("step must be positive")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def duration(self) -> float:
        return (self.points.shape[0] - 1) * self.step

    @property
    def max_slope(self) -> float:
        if self.points.shape[0] < 2:
            return 0.0
        hops = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        return float(hops.max() / self.step)

    @classmethod
    def from_trajectory(cls, traj: Trajectory) -> "InterpolatedPath":
        return cls(traj.iterates, traj.config.alpha)

    def save_csv(self, path) -> None:
        d = self.points.shape[1]
        lines = [",".join(["s"] + [f"u{i}" for i in range(d)])]
        for t, row in enumerate(self.points):
            vals = [format(t * self.step, ".17g")]
            vals += [format(v, ".17g") for v in row]
            lines.append(",".join(vals))
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")


def interpolate(path: InterpolatedPath, s: float) -> np.ndarray:
    """Evaluate the curve at time s: exact at knots, affine in between."""
    return evaluate_path(path, np.asarray([s], dtype=float))[0]


def evaluate_path(path: InterpolatedPath, s) -> np.ndarray:
    """Vectorized curve evaluation at the times in s; returns (len(s), d)."""
    s = np.asarray(s, dtype=float).reshape(-1)
    m = path.points.shape[0] - 1
    dur = path.duration
    if (s < 0).any() or (s > dur * (1.0 + 1e-12) + 1e-300).any():
        raise ValueError(f"time out of range [0, {dur}]")
    ratio = s / path.step
    near = np.rint(ratio)
    snap = np.abs(ratio - near) <= 1e-12 * np.maximum(1.0, np.abs(ratio))
    ratio = np.where(snap, near, ratio)
    t = np.floor(ratio).astype(int)
    t = np.clip(t, 0, max(m - 1, 0))
    frac = ratio - t
    if m == 0:
        return np.repeat(path.points, s.shape[0], axis=0)
    base = path.points[t]
    out = base + frac[:, None] * (path.points[t + 1] - path.points[t])
    at_upper = frac == 1.0  # exact knot values, no rounding through the affine form
    if at_upper.any():
        out[at_upper] = path.points[t[at_upper] + 1]
    return out


@dataclass(frozen=True)
class DcResult:
    """Weighted sup-distance value plus its two reported error bounds:
    the geometric series tail ``2^-k_max`` and the grid under-sampling bound."""

    value: float
    tail_bound: float
    grid_bound: float


def distance_d_c(
    a: InterpolatedPath,
    b: InterpolatedPath,
    k_max: int = 8,
    grid_per_unit: int = 200,
) -> DcResult:
    """Sum over segments [0, k] of ``2^-k min(1, sup ||a - b||)``, k = 1..k_max.

    The sup over each segment is taken on a uniform grid with ``grid_per_unit``
    points per unit time; the reported ``grid_bound`` uses the paths' slopes.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if grid_per_unit < 2:
        raise ValueError("grid_per_unit must be >= 2")
    if a.duration < k_max or b.duration < k_max:
        raise ValueError(
            f"both paths must cover [0, {k_max}]; durations are "
            f"{a.duration:g} and {b.duration:g}"
        )
    num = k_max * grid_per_unit
    s = np.linspace(0.0, float(k_max), num + 1)
    gaps = np.linalg.norm(evaluate_path(a, s) - evaluate_path(b, s), axis=1)
    running = np.maximum.accumulate(gaps)
    value = 0.0
    for k in range(1, k_max + 1):
        value += 2.0**-k * min(1.0, float(running[k * grid_per_unit]))
    ds = 1.0 / grid_per_unit
    grid_bound = (a.max_slope + b.max_slope) * ds
    return DcResult(value=value, tail_bound=2.0**-k_max, grid_bound=grid_bound)


def reference_flow(
    spec: NetworkSpec,
    u0,
    mx: DiscreteMeasure,
    my: DiscreteMeasure,
    n: int,
    p: float,
    horizon: float,
    step_ref: float,
    num_mc: int = 8,
    rng: np.random.Generator | None = None,
    exhaustive: bool = False,
    compare_alpha: float | None = None,
) -> InterpolatedPath:
    """Fine-step explicit Euler integration of the averaged a.e. gradient.

    ``compare_alpha`` is the smallest SGD step this flow will be compared
    against; the flow step must be at most one fiftieth of it. Exhaustive mode
    makes the vector field (and hence the whole path) deterministic.
    """
    if step_ref <= 0 or horizon <= 0:
        raise ValueError("step_ref and horizon must be positive")
    if compare_alpha is not None and step_ref > compare_alpha / 50.0:
        raise ValueError(
            f"step_ref={step_ref:g} too coarse: need step_ref <= alpha/50 = "
            f"{compare_alpha / 50.0:g}"
        )
    if not exhaustive and rng is None:
        raise ValueError("Monte-Carlo flow needs an rng")
    v = np.asarray(u0, dtype=float).reshape(-1).copy()
    steps = int(math.ceil(horizon / step_ref))
    points = np.empty((steps + 1, v.shape[0]))
    points[0] = v
    for j in range(steps):
        g = estimate_grad_F(spec, v, mx, my, n, num_mc, rng, p, exhaustive=exhaustive)
        v = v - step_ref * g
        if not np.isfinite(v).all():
            raise DivergenceError(j + 1, what="reference flow")
        points[j + 1] = v
    return InterpolatedPath(points, step_ref)


def criticality_gap(
    spec: NetworkSpec,
    u,
    r: float,
    mx: DiscreteMeasure,
    my: DiscreteMeasure,
    n: int,
    p: float = 2.0,
    num_mc: int = 64,
    rng: np.random.Generator | None = None,
    exhaustive: bool = False,
) -> float:
    """Distance of the estimated population gradient from the normal cone.

    Interior points report ``||g||``; points on the boundary shell (within
    ``1e-9 r``) report ``min over s >= 0 of ||g + s u||``, i.e. outward-pointing
    negative gradients are stationary. Points outside the ball are rejected.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    u = np.asarray(u, dtype=float).reshape(-1)
    norm = float(np.linalg.norm(u))
    tol = 1e-9 * r
    if norm > r * (1.0 + 1e-9):
        raise ValueError(f"||u||={norm:g} is outside the radius-{r:g} ball")
    g = estimate_grad_F(spec, u, mx, my, n, num_mc, rng, p, exhaustive=exhaustive)
    if norm < r - tol:
        return float(np.linalg.norm(g))
    ray = float(g @ u) / (norm * norm)
    if ray >= 0.0:
        return float(np.linalg.norm(g))
    return float(np.linalg.norm(g - ray * u))
