"""Fixed-step SGD schemes with full trajectory recording.

Two schemes: plain (``u - alpha * phi``) and projected-noised
(``project_ball(u - alpha * phi + alpha * beta * noise, r)``). Runs are
bit-reproducible: the seed feeds three independent substreams (init / batches / noise)
so the projected scheme with beta = 0 replays exactly the plain batch sequence.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .measures import DiscreteMeasure, sample_batch
from .network import NetworkSpec
from .swloss import alpha_zero, grad_phi, sample_loss_f, estimate_F

__all__ = [
    "SGDConfig",
    "InitSpec",
    "Trajectory",
    "DivergenceError",
    "project_ball",
    "step_plain",
    "step_projected_noised",
    "initial_point",
    "run",
]

SCHEMES = ("plain", "projected_noised")
NOISE_LAWS = ("gaussian", "ball")

_ONE_MINUS_ULP = 1.0 - 2.0**-52


class DivergenceError(RuntimeError):
    """Raised when an iterate turns non-finite (the step size is too large)."""

    def __init__(self, step: int, what: str = "SGD"):
        self.step = step
        super().__init__(
            f"{what} produced a non-finite iterate at step {step}; "
            "the step size is likely too large"
        )


@dataclass(frozen=True)
class InitSpec:
    """Initial distribution: a point mass or the uniform law on a centered ball.

    ``radius=None`` on a ball means the default min(1, R_u - eps), which keeps
    the start inside the indicator plateau (a dead-zone start has zero gradient).
    """

    kind: str = "ball"
    point: tuple = ()
    radius: float | None = None

    def __post_init__(self):
        if self.kind not in ("point", "ball"):
            raise ValueError(f"unknown init kind {self.kind!r}")
        if self.kind == "point" and len(self.point) == 0:
            raise ValueError("point init needs coordinates")
        if self.kind == "ball" and self.radius is not None and self.radius <= 0:
            raise ValueError("ball init radius must be positive")
        object.__setattr__(self, "point", tuple(float(v) for v in self.point))

    def to_dict(self) -> dict:
        if self.kind == "point":
            return {"kind": "point", "point": list(self.point)}
        return {"kind": "ball", "radius": self.radius}

    @classmethod
    def from_dict(cls, doc) -> "InitSpec":
        if doc is None:
            return cls()
        if doc.get("kind") == "point":
            return cls(kind="point", point=tuple(doc["point"]))
        return cls(kind="ball", radius=doc.get("radius"))


@dataclass(frozen=True)
class SGDConfig:
    """One run: step size, scheme, batch shape, order, init law, and seed."""

    alpha: float
    t_max: int
    n: int
    seed: int
    scheme: str = "plain"
    beta: float = 0.0
    radius_r: float | None = None
    L: int = 1
    p: float = 2.0
    init: InitSpec = field(default_factory=InitSpec)
    noise_law: str = "gaussian"

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.t_max < 0:
            raise ValueError("t_max must be >= 0")
        if self.n < 1 or self.L < 1:
            raise ValueError("n and L must be >= 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.noise_law not in NOISE_LAWS:
            raise ValueError(f"unknown noise law {self.noise_law!r}")
        if self.scheme == "projected_noised":
            if self.radius_r is None or self.radius_r <= 0:
                raise ValueError("projected_noised needs radius_r > 0")
            if self.beta < 0:
                raise ValueError("beta must be >= 0")
        if not (0 <= int(self.seed) < 2**63):
            raise ValueError("seed must be a nonnegative 64-bit integer")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "t_max": self.t_max,
            "n": self.n,
            "seed": int(self.seed),
            "scheme": self.scheme,
            "beta": self.beta,
            "radius_r": self.radius_r,
            "L": self.L,
            "p": self.p,
            "init": self.init.to_dict(),
            "noise_law": self.noise_law,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SGDConfig":
        return cls(
            alpha=float(doc["alpha"]),
            t_max=int(doc["t_max"]),
            n=int(doc["n"]),
            seed=int(doc["seed"]),
            scheme=doc.get("scheme", "plain"),
            beta=float(doc.get("beta", 0.0)),
            radius_r=None if doc.get("radius_r") is None else float(doc["radius_r"]),
            L=int(doc.get("L", 1)),
            p=float(doc.get("p", 2.0)),
            init=InitSpec.from_dict(doc.get("init")),
            noise_law=doc.get("noise_law", "gaussian"),
        )


@dataclass(frozen=True)
class Trajectory:
    """Recorded run: iterates (t_max+1, d_u) plus per-step diagnostics.

    ``losses[t]`` and ``phi_norms[t]`` describe the update that produced
    ``iterates[t+1]`` (both evaluated at ``iterates[t]`` on that step's batch).
    ``f_records`` holds optional (t, mean, std_error) population-loss probes.
    """

    iterates: np.ndarray
    losses: np.ndarray
    phi_norms: np.ndarray
    f_records: tuple
    config: SGDConfig

    def __post_init__(self):
        it = np.asarray(self.iterates, dtype=float)
        it.setflags(write=False)
        object.__setattr__(self, "iterates", it)
        for name in ("losses", "phi_norms"):
            a = np.asarray(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def t_max(self) -> int:
        return self.iterates.shape[0] - 1

    @property
    def d_u(self) -> int:
        return self.iterates.shape[1]

    def save_csv(self, path) -> None:
        """One row per iterate: t, u coordinates, sample loss, ||phi||.

        Row t carries the diagnostics of the step that produced it; row 0 has
        none (rendered as nan). Floats use 17 significant digits so the file
        round-trips bit-faithfully.
        """
        cols = ["t"] + [f"u{i}" for i in range(self.d_u)] + ["sample_loss", "phi_norm"]
        lines = [",".join(cols)]
        for t in range(self.t_max + 1):
            loss = self.losses[t - 1] if t >= 1 else math.nan
            pn = self.phi_norms[t - 1] if t >= 1 else math.nan
            vals = [str(t)]
            vals += [format(v, ".17g") for v in self.iterates[t]]
            vals += [format(loss, ".17g"), format(pn, ".17g")]
            lines.append(",".join(vals))
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")

    def summary_dict(self) -> dict:
        out = {
            "config": self.config.to_dict(),
            "t_max": self.t_max,
            "d_u": self.d_u,
            "final_u_norm": float(np.linalg.norm(self.iterates[-1])),
            "max_u_norm": float(np.linalg.norm(self.iterates, axis=1).max()),
            "f_records": [[int(t), m, s] for (t, m, s) in self.f_records],
        }
        if self.t_max >= 1:
            out["initial_loss"] = float(self.losses[0])
            out["final_loss"] = float(self.losses[-1])
            out["final_phi_norm"] = float(self.phi_norms[-1])
        return out

    def save_summary(self, path) -> None:
        with open(path, "w", newline="") as fh:
            json.dump(self.summary_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def project_ball(u, r: float) -> np.ndarray:
    """Orthogonal projection on the centered closed ball of radius r.

    The output norm is <= r exactly: the radial rescale is followed by at most
    a couple of one-ulp shrinks to absorb rounding.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    u = np.asarray(u, dtype=float).reshape(-1)
    norm = float(np.linalg.norm(u))
    if norm <= r:
        return u.copy()
    v = u * (r / norm)
    while float(np.linalg.norm(v)) > r:
        v = v * _ONE_MINUS_ULP
    return v


def step_plain(spec: NetworkSpec, u, batch, alpha: float, p: float = 2.0) -> np.ndarray:
    """One fixed-step update: u - alpha * phi(u, batch)."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    u = np.asarray(u, dtype=float).reshape(-1)
    return u - alpha * grad_phi(spec, u, batch, p)


def step_projected_noised(
    spec: NetworkSpec,
    u,
    batch,
    noise,
    alpha: float,
    beta: float,
    r: float,
    p: float = 2.0,
) -> np.ndarray:
    """One noised update projected back on the radius-r ball."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    u = np.asarray(u, dtype=float).reshape(-1)
    noise = np.asarray(noise, dtype=float).reshape(-1)
    v = u - alpha * grad_phi(spec, u, batch, p) + alpha * beta * noise
    return project_ball(v, r)


def initial_point(spec: NetworkSpec, init: InitSpec, rng: np.random.Generator) -> np.ndarray:
    if init.kind == "point":
        u0 = np.asarray(init.point, dtype=float)
        if u0.shape[0] != spec.d_u:
            raise ValueError(f"point init has length {u0.shape[0]}, need d_u={spec.d_u}")
        if not np.isfinite(u0).all():
            raise ValueError("point init must be finite")
        return u0.copy()
    radius = init.radius
    if radius is None:
        radius = min(1.0, spec.R_u - spec.eps)
    v = rng.standard_normal(spec.d_u)
    v /= np.linalg.norm(v)
    return radius * rng.random() ** (1.0 / spec.d_u) * v


def _draw_noise(law: str, d_u: int, rng: np.random.Generator) -> np.ndarray:
    if law == "gaussian":
        return rng.standard_normal(d_u)
    v = rng.standard_normal(d_u)
    v /= np.linalg.norm(v)
    return rng.random() ** (1.0 / d_u) * v


def run(
    spec: NetworkSpec,
    config: SGDConfig,
    mx: DiscreteMeasure,
    my: DiscreteMeasure,
    m_hat: float | None = None,
    estimate_f_every: int = 0,
    estimate_f_mc: int = 64,
    estimate_f_exhaustive: bool = False,
) -> Trajectory:
    """Run one SGD trajectory; fully deterministic given the config seed.

    Substreams [seed, 0] / [seed, 1] / [seed, 2] drive init, batches and noise.
    When ``m_hat`` (the probed second-derivative constant) is supplied, a
    warning is emitted if alpha reaches the absolute-continuity threshold.
    Non-finite iterates abort with :class:`DivergenceError` naming the step.
    """
    rng_init = np.random.default_rng([int(config.seed), 0])
    rng_batch = np.random.default_rng([int(config.seed), 1])
    rng_noise = np.random.default_rng([int(config.seed), 2])
    rng_f = np.random.default_rng([int(config.seed), 3])

    if m_hat is not None:
        a0 = alpha_zero(spec.d_y, my.support_radius, spec.d_u, m_hat)
        if config.alpha >= a0:
            warnings.warn(
                f"alpha={config.alpha:g} is at or above the estimated "
                f"absolute-continuity threshold {a0:g}; the convergence "
                "guarantees assume a smaller step",
                RuntimeWarning,
                stacklevel=2,
            )

    u = initial_point(spec, config.init, rng_init)
    projected = config.scheme == "projected_noised"
    if projected:
        u = project_ball(u, config.radius_r)

    iterates = np.empty((config.t_max + 1, spec.d_u))
    iterates[0] = u
    losses = np.empty(config.t_max)
    phi_norms = np.empty(config.t_max)
    f_records = []

    def _record_f(t, point):
        mean, se = estimate_F(
            spec, point, mx, my, config.n, estimate_f_mc, rng_f, config.p,
            exhaustive=estimate_f_exhaustive,
        )
        f_records.append((t, mean, se))

    if estimate_f_every > 0:
        _record_f(0, u)

    for t in range(config.t_max):
        batch = sample_batch(mx, my, config.n, config.L, rng_batch)
        phi = grad_phi(spec, u, batch, config.p)
        losses[t] = sample_loss_f(spec, u, batch, config.p)
        phi_norms[t] = float(np.linalg.norm(phi))
        with np.errstate(over="ignore", invalid="ignore"):
            if projected:
                noise = _draw_noise(config.noise_law, spec.d_u, rng_noise)
                u = project_ball(u - config.alpha * phi + config.alpha * config.beta * noise,
                                 config.radius_r)
            else:
                u = u - config.alpha * phi
        if not np.isfinite(u).all():
            raise DivergenceError(t + 1)
        iterates[t + 1] = u
        if estimate_f_every > 0 and (t + 1) % estimate_f_every == 0:
            _record_f(t + 1, u)

    return Trajectory(
        iterates=iterates,
        losses=losses,
        phi_norms=phi_norms,
        f_records=tuple(f_records),
        config=config,
    )
