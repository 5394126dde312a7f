"""Independent oracles: permutation brute force, finite differences, Lipschitz probes.

These deliberately share no code with the operations they validate; the
brute-force cost even projects rows with its own dot products.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ProbeReport",
    "wasserstein_1d_bruteforce",
    "fd_gradient",
    "fd_jacobian",
    "lipschitz_probe",
    "relative_error",
]

FD_STEP = 1e-5


@dataclass(frozen=True)
class ProbeReport:
    """Outcome of a sampling probe: extreme value, where it occurred, sample count."""

    value: float
    argmax: tuple
    num_samples: int
    label: str = "max_ratio"

    def to_json(self) -> str:
        return json.dumps(
            {
                "label": self.label,
                "value": self.value,
                "argmax": [list(np.asarray(a, dtype=float).reshape(-1)) for a in self.argmax],
                "num_samples": self.num_samples,
            },
            sort_keys=True,
        )


def wasserstein_1d_bruteforce(X, Y, theta, p: float = 2.0) -> float:
    """Minimum over all n! matchings of the mean order-p projected cost.

    Straight-line enumeration, refused for n > 8.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    theta = np.asarray(theta, dtype=float).reshape(-1)
    n = X.shape[0]
    if Y.shape[0] != n:
        raise ValueError("X and Y must have the same number of rows")
    if n > 8:
        raise ValueError(f"brute force refused for n={n} > 8 (factorial cost)")
    px = [float(np.dot(row, theta)) for row in X]
    py = [float(np.dot(row, theta)) for row in Y]
    best = math.inf
    for perm in itertools.permutations(range(n)):
        total = 0.0
        for k in range(n):
            total += abs(px[k] - py[perm[k]]) ** p
        best = min(best, total / n)
    return best


def fd_gradient(fun, u, h: float = FD_STEP) -> np.ndarray:
    """Central finite differences of a scalar function, coordinate by coordinate."""
    if h <= 0:
        raise ValueError("h must be positive")
    u = np.asarray(u, dtype=float).reshape(-1)
    grad = np.empty_like(u)
    for i in range(u.shape[0]):
        e = np.zeros_like(u)
        e[i] = h
        grad[i] = (fun(u + e) - fun(u - e)) / (2.0 * h)
    return grad


def fd_jacobian(fun, u, h: float = FD_STEP) -> np.ndarray:
    """Central finite differences of a vector function; columns index u coordinates."""
    if h <= 0:
        raise ValueError("h must be positive")
    u = np.asarray(u, dtype=float).reshape(-1)
    cols = []
    for i in range(u.shape[0]):
        e = np.zeros_like(u)
        e[i] = h
        cols.append((np.asarray(fun(u + e)) - np.asarray(fun(u - e))) / (2.0 * h))
    return np.stack(cols, axis=-1)


def relative_error(approx, reference) -> float:
    """max |a - b| / max(1, ||reference||): the metric used by every FD suite."""
    a = np.asarray(approx, dtype=float).reshape(-1)
    b = np.asarray(reference, dtype=float).reshape(-1)
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.linalg.norm(b))))


def _uniform_ball(rng: np.random.Generator, center: np.ndarray, eps: float) -> np.ndarray:
    d = center.shape[0]
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    return center + eps * rng.random() ** (1.0 / d) * v


def lipschitz_probe(
    fun,
    center,
    eps: float,
    num_pairs: int,
    rng: np.random.Generator,
) -> ProbeReport:
    """Max sampled difference quotient of ``fun`` over uniform pairs in B(center, eps).

    Pairs closer than 1e-9 are resampled so the quotient stays well defined.
    """
    if num_pairs < 1:
        raise ValueError("num_pairs must be >= 1")
    center = np.asarray(center, dtype=float).reshape(-1)
    best = -math.inf
    best_pair = (center, center)
    for _ in range(num_pairs):
        while True:
            a = _uniform_ball(rng, center, eps)
            b = _uniform_ball(rng, center, eps)
            sep = float(np.linalg.norm(a - b))
            if sep >= 1e-9:
                break
        ratio = abs(fun(a) - fun(b)) / sep
        if ratio > best:
            best = ratio
            best_pair = (a, b)
    return ProbeReport(value=float(best), argmax=best_pair, num_samples=num_pairs)
