"""Bounded recursive networks with explicit parameter Jacobians.

A network maps ``(u, x) -> base(u, x) * bump(u) * bump(x)`` where ``base`` is
a recursion ``h_n = act(sum_i A_{n,i}(u) h_i + B_n u)`` over layers, each
``A_{n,i}`` is linear in the parameter vector u (a 3-tensor, by default a
disjoint reshaped slice of u), and the bumps are smooth ball indicators that
force the map to vanish outside fixed parameter / input radii. Everything
needed for training is closed-form: forward evaluation and the d_y x d_u
Jacobian with respect to u.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NetworkSpec",
    "SliceWeight",
    "TensorWeight",
    "SliceBias",
    "MatrixBias",
    "LayerMap",
    "smooth_indicator",
    "smooth_indicator_grad",
    "forward",
    "forward_batch",
    "jacobian_u",
    "estimate_lipschitz_constant",
    "estimate_output_bound",
    "estimate_second_derivative_bound",
    "save_spec",
    "load_spec",
]

SMOOTH_ACTIVATIONS = ("identity", "sigmoid", "tanh", "softplus")
PIECEWISE_ACTIVATIONS = ("relu", "leaky_relu")
ACTIVATIONS = SMOOTH_ACTIVATIONS + PIECEWISE_ACTIVATIONS


# ---------------------------------------------------------------------------
# smooth ball indicator
# ---------------------------------------------------------------------------

def _bump(s: float) -> float:
    # exp(-1/s) for s > 0, else 0; underflow to 0.0 near s = 0+ is harmless.
    if s <= 0.0:
        return 0.0
    if s < 1e-3:  # exp(-1000) underflows anyway; skip the libm call
        return 0.0
    return math.exp(-1.0 / s)


def _bump_deriv(s: float) -> float:
    if s <= 0.0 or s < 1e-3:
        return 0.0
    return math.exp(-1.0 / s) / (s * s)


def _ramp(s: float) -> float:
    """C-infinity ramp: 0 for s <= 0, 1 for s >= 1."""
    fs = _bump(s)
    fc = _bump(1.0 - s)
    if fs == 0.0:
        return 0.0
    if fc == 0.0:
        return 1.0
    return fs / (fs + fc)


def _ramp_deriv(s: float) -> float:
    fs = _bump(s)
    fc = _bump(1.0 - s)
    if fs == 0.0 or fc == 0.0:
        return 0.0
    dfs = _bump_deriv(s)
    dfc = _bump_deriv(1.0 - s)
    denom = fs + fc
    return (dfs * fc + fs * dfc) / (denom * denom)


def smooth_indicator(v, R: float, eps: float) -> float:
    """Smoothed ball indicator: 1 for ||v|| <= R-eps, 0 for ||v|| >= R+eps.

    Equals ``ramp(((R+eps)^2 - ||v||^2) / (4 R eps))`` with the classical
    exp(-1/s) ramp, hence C-infinity in v.
    """
    if eps <= 0.0 or R <= 0.0:
        raise ValueError("R and eps must be positive")
    v = np.asarray(v, dtype=float).reshape(-1)
    sq = float(v @ v)
    s = ((R + eps) ** 2 - sq) / (4.0 * R * eps)
    return _ramp(s)


def smooth_indicator_grad(v, R: float, eps: float) -> np.ndarray:
    """Analytic gradient of :func:`smooth_indicator` with respect to v."""
    if eps <= 0.0 or R <= 0.0:
        raise ValueError("R and eps must be positive")
    v = np.asarray(v, dtype=float).reshape(-1)
    sq = float(v @ v)
    s = ((R + eps) ** 2 - sq) / (4.0 * R * eps)
    ds = _ramp_deriv(s)
    if ds == 0.0:
        return np.zeros_like(v)
    return ds * (-v / (2.0 * R * eps))


# ---------------------------------------------------------------------------
# parameter maps: weights A_{n,i}(u) and intercepts B_n u
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SliceWeight:
    """A(u) = u[start : start + rows*cols] reshaped to (rows, cols)."""

    start: int
    rows: int
    cols: int

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def matrix(self, u: np.ndarray) -> np.ndarray:
        return u[self.start : self.start + self.size].reshape(self.rows, self.cols)


@dataclass(frozen=True)
class TensorWeight:
    """General 3-tensor map: A(u) = tensor . u with tensor (rows, cols, d_u)."""

    tensor: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.tensor, dtype=float)
        if t.ndim != 3:
            raise ValueError("weight tensor must have shape (rows, cols, d_u)")
        t = t.copy()
        t.setflags(write=False)
        object.__setattr__(self, "tensor", t)

    @property
    def rows(self) -> int:
        return self.tensor.shape[0]

    @property
    def cols(self) -> int:
        return self.tensor.shape[1]

    def matrix(self, u: np.ndarray) -> np.ndarray:
        return self.tensor @ u


@dataclass(frozen=True)
class SliceBias:
    """B u = u[start : start + dim]."""

    start: int
    dim: int

    def vector(self, u: np.ndarray) -> np.ndarray:
        return u[self.start : self.start + self.dim]


@dataclass(frozen=True)
class MatrixBias:
    """B u for an explicit (dim, d_u) matrix B."""

    matrix_: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix_, dtype=float)
        if m.ndim != 2:
            raise ValueError("bias matrix must be 2-D")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix_", m)

    @property
    def dim(self) -> int:
        return self.matrix_.shape[0]

    def vector(self, u: np.ndarray) -> np.ndarray:
        return self.matrix_ @ u


@dataclass(frozen=True)
class LayerMap:
    """Wiring of one layer: source layer indices, their weight maps, optional bias."""

    sources: tuple
    weights: tuple
    bias: object = None


# ---------------------------------------------------------------------------
# spec
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NetworkSpec:
    """Architecture plus indicator radii; immutable, shareable across threads.

    ``layer_dims`` is (d_0=d_x, d_1, ..., d_N=d_y). A single activation is
    used at every layer, which keeps the regularity regime uniform: either
    all-C2-smooth or all-piecewise-linear. ``eps`` is the indicator smoothing
    width; the map is identically zero once ||u|| >= R_u+eps or ||x|| >= R_x+eps.
    """

    layer_dims: tuple
    activation: str
    layers: tuple
    d_u: int
    R_u: float
    R_x: float
    eps: float
    leaky_slope: float = 0.01
    init_seed: int | None = None
    residual: bool = field(default=False)
    has_bias: bool = field(default=True)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ValueError("layer_dims must list >= 2 positive integers")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not (self.eps > 0.0 and self.R_u > self.eps and self.R_x > self.eps):
            raise ValueError("need eps > 0, R_u > eps and R_x > eps")
        if self.d_u < 1:
            raise ValueError("d_u must be positive")
        if len(self.layers) != len(dims) - 1:
            raise ValueError("need one LayerMap per layer 1..N")
        for n, layer in enumerate(self.layers, start=1):
            if len(layer.sources) != len(layer.weights):
                raise ValueError(f"layer {n}: sources and weights misaligned")
            for i, w in zip(layer.sources, layer.weights):
                if not (0 <= i < n):
                    raise ValueError(f"layer {n}: source {i} must satisfy 0 <= i < n")
                if w.rows != dims[n] or w.cols != dims[i]:
                    raise ValueError(f"layer {n}: weight for source {i} has wrong shape")
                if isinstance(w, SliceWeight):
                    if w.start < 0 or w.start + w.size > self.d_u:
                        raise ValueError(f"layer {n}: weight slice outside [0, d_u)")
                elif isinstance(w, TensorWeight):
                    if w.tensor.shape[2] != self.d_u:
                        raise ValueError(f"layer {n}: weight tensor last axis != d_u")
                else:
                    raise ValueError(f"layer {n}: unknown weight map {type(w)}")
            b = layer.bias
            if b is not None:
                if b.dim != dims[n]:
                    raise ValueError(f"layer {n}: bias dimension mismatch")
                if isinstance(b, SliceBias):
                    if b.start < 0 or b.start + b.dim > self.d_u:
                        raise ValueError(f"layer {n}: bias slice outside [0, d_u)")
                elif isinstance(b, MatrixBias):
                    if b.matrix_.shape[1] != self.d_u:
                        raise ValueError(f"layer {n}: bias matrix columns != d_u")
                else:
                    raise ValueError(f"layer {n}: unknown bias map {type(b)}")
        object.__setattr__(self, "layer_dims", dims)

    @property
    def d_x(self) -> int:
        return self.layer_dims[0]

    @property
    def d_y(self) -> int:
        return self.layer_dims[-1]

    @property
    def num_layers(self) -> int:
        return len(self.layer_dims) - 1

    @property
    def is_smooth(self) -> bool:
        return self.activation in SMOOTH_ACTIVATIONS

    @classmethod
    def dense(
        cls,
        layer_dims,
        activation: str = "tanh",
        *,
        R_u: float,
        R_x: float,
        eps: float,
        leaky_slope: float = 0.01,
        residual: bool = False,
        bias: bool = True,
        init_seed: int | None = None,
    ) -> "NetworkSpec":
        """Standard dense layout: each layer reads the previous one (all previous
        when ``residual``), every weight and bias owns a disjoint slice of u."""
        dims = tuple(int(d) for d in layer_dims)
        cursor = 0
        layers = []
        for n in range(1, len(dims)):
            sources = tuple(range(n)) if residual else (n - 1,)
            weights = []
            for i in sources:
                w = SliceWeight(cursor, dims[n], dims[i])
                cursor += w.size
                weights.append(w)
            b = None
            if bias:
                b = SliceBias(cursor, dims[n])
                cursor += dims[n]
            layers.append(LayerMap(sources, tuple(weights), b))
        return cls(
            layer_dims=dims,
            activation=activation,
            layers=tuple(layers),
            d_u=cursor,
            R_u=R_u,
            R_x=R_x,
            eps=eps,
            leaky_slope=leaky_slope,
            init_seed=init_seed,
            residual=residual,
            has_bias=bias,
        )


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------

def _activate(spec: NetworkSpec, z: np.ndarray) -> np.ndarray:
    a = spec.activation
    if a == "identity":
        return z
    if a == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    if a == "tanh":
        return np.tanh(z)
    if a == "softplus":
        return np.logaddexp(0.0, z)
    if a == "relu":
        return np.maximum(z, 0.0)
    # leaky_relu
    return np.where(z > 0.0, z, spec.leaky_slope * z)


def _activate_deriv(spec: NetworkSpec, z: np.ndarray) -> np.ndarray:
    # piecewise-linear kinks at z == 0 take derivative 0 (a.e.-gradient choice)
    a = spec.activation
    if a == "identity":
        return np.ones_like(z)
    if a == "sigmoid":
        s = 1.0 / (1.0 + np.exp(-z))
        return s * (1.0 - s)
    if a == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    if a == "softplus":
        return 1.0 / (1.0 + np.exp(-z))
    if a == "relu":
        return np.where(z > 0.0, 1.0, 0.0)
    return np.where(z > 0.0, 1.0, np.where(z < 0.0, spec.leaky_slope, 0.0))


# ---------------------------------------------------------------------------
# forward / jacobian
# ---------------------------------------------------------------------------

def _check_inputs(spec: NetworkSpec, u, x):
    u = np.asarray(u, dtype=float).reshape(-1)
    x = np.asarray(x, dtype=float).reshape(-1)
    if u.shape[0] != spec.d_u:
        raise ValueError(f"u has length {u.shape[0]}, spec needs d_u={spec.d_u}")
    if x.shape[0] != spec.d_x:
        raise ValueError(f"x has length {x.shape[0]}, spec needs d_x={spec.d_x}")
    return u, x


def _base_pass(spec: NetworkSpec, u: np.ndarray, x: np.ndarray):
    """Run the layer recursion; returns hidden values and pre-activations."""
    hs = [x]
    zs = [None]
    for n, layer in enumerate(spec.layers, start=1):
        z = np.zeros(spec.layer_dims[n])
        for i, w in zip(layer.sources, layer.weights):
            z = z + w.matrix(u) @ hs[i]
        if layer.bias is not None:
            z = z + layer.bias.vector(u)
        zs.append(z)
        hs.append(_activate(spec, z))
    return hs, zs


def forward(spec: NetworkSpec, u, x) -> np.ndarray:
    """Evaluate the network at one input; exactly zero outside the indicator shells."""
    u, x = _check_inputs(spec, u, x)
    cx = smooth_indicator(x, spec.R_x, spec.eps)
    cu = smooth_indicator(u, spec.R_u, spec.eps)
    if cx == 0.0 or cu == 0.0:
        return np.zeros(spec.d_y)
    hs, _ = _base_pass(spec, u, x)
    return hs[-1] * (cu * cx)


def forward_batch(spec: NetworkSpec, u, X) -> np.ndarray:
    """Apply :func:`forward` to every row of X; returns (n, d_y)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.stack([forward(spec, u, row) for row in X])


def jacobian_u(spec: NetworkSpec, u, x) -> np.ndarray:
    """d_y x d_u Jacobian of u -> T(u, x), by reverse-mode accumulation.

    The backward sweep pushes output sensitivities down the layer recursion;
    weight maps contribute twice, as matrices acting on upstream Jacobians and
    through their own (linear) dependence on u. The smooth-indicator product
    rule is applied analytically at the end.
    """
    u, x = _check_inputs(spec, u, x)
    cx = smooth_indicator(x, spec.R_x, spec.eps)
    if cx == 0.0:
        return np.zeros((spec.d_y, spec.d_u))
    nu = float(np.linalg.norm(u))
    if nu >= spec.R_u + spec.eps:
        return np.zeros((spec.d_y, spec.d_u))
    cu = smooth_indicator(u, spec.R_u, spec.eps)
    gu = smooth_indicator_grad(u, spec.R_u, spec.eps)

    hs, zs = _base_pass(spec, u, x)
    N = spec.num_layers
    dims = spec.layer_dims
    d_y, d_u = spec.d_y, spec.d_u

    # H[n] = d base / d h_n, accumulated from consumers above layer n.
    H = [None] * (N + 1)
    H[N] = np.eye(d_y)
    S = [None] * (N + 1)  # pre-activation adjoints d base / d z_n
    for i in range(N - 1, 0, -1):
        H[i] = np.zeros((d_y, dims[i]))
    jac_base = np.zeros((d_y, d_u))
    for n in range(N, 0, -1):
        layer = spec.layers[n - 1]
        S[n] = H[n] * _activate_deriv(spec, zs[n])[None, :]
        for i, w in zip(layer.sources, layer.weights):
            if i > 0:
                H[i] = H[i] + S[n] @ w.matrix(u)
            # d(A(u) h_i)/du with h_i held fixed
            if isinstance(w, SliceWeight):
                block = np.einsum("yj,k->yjk", S[n], hs[i]).reshape(d_y, w.size)
                jac_base[:, w.start : w.start + w.size] += block
            else:
                jac_base += np.einsum("yj,jkl,k->yl", S[n], w.tensor, hs[i])
        b = layer.bias
        if isinstance(b, SliceBias):
            jac_base[:, b.start : b.start + b.dim] += S[n]
        elif isinstance(b, MatrixBias):
            jac_base += S[n] @ b.matrix_
    base = hs[-1]
    return cx * (cu * jac_base + np.outer(base, gu))


# ---------------------------------------------------------------------------
# empirical assumption probes
# ---------------------------------------------------------------------------

def _uniform_ball(rng: np.random.Generator, dim: int, radius: float) -> np.ndarray:
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    return radius * rng.random() ** (1.0 / dim) * v


def estimate_lipschitz_constant(
    spec: NetworkSpec,
    num_pairs: int = 2000,
    rng: np.random.Generator | None = None,
    margin: float = 1.05,
) -> float:
    """Empirical joint Lipschitz bound for (u, x) -> T(u, x).

    Samples difference quotients over random far and near pairs plus exact
    u-Jacobian spectral norms, and reports the maximum times ``margin``. The
    probed region covers the indicator shells, where the slope peaks.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    ru = spec.R_u + 2.0 * spec.eps
    rx = spec.R_x + 2.0 * spec.eps
    best = 0.0
    for k in range(num_pairs):
        u1 = _uniform_ball(rng, spec.d_u, ru)
        x1 = _uniform_ball(rng, spec.d_x, rx)
        if k % 2 == 0:
            u2 = _uniform_ball(rng, spec.d_u, ru)
            x2 = _uniform_ball(rng, spec.d_x, rx)
        else:
            # near pairs estimate the local slope much more sharply
            u2 = u1 + 1e-4 * rng.standard_normal(spec.d_u)
            x2 = x1 + 1e-4 * rng.standard_normal(spec.d_x)
        denom = np.linalg.norm(u1 - u2) + np.linalg.norm(x1 - x2)
        if denom < 1e-12:
            continue
        num = np.linalg.norm(forward(spec, u1, x1) - forward(spec, u2, x2))
        best = max(best, num / denom)
    for _ in range(max(1, num_pairs // 10)):
        u1 = _uniform_ball(rng, spec.d_u, ru)
        x1 = _uniform_ball(rng, spec.d_x, rx)
        best = max(best, float(np.linalg.norm(jacobian_u(spec, u1, x1), 2)))
    return margin * best


def estimate_output_bound(
    spec: NetworkSpec,
    xs,
    num_u: int = 2000,
    rng: np.random.Generator | None = None,
    margin: float = 1.05,
) -> float:
    """Empirical uniform bound on ||T(u, x)|| over all u and the given inputs."""
    rng = np.random.default_rng(0) if rng is None else rng
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    best = 0.0
    for _ in range(num_u):
        u = _uniform_ball(rng, spec.d_u, spec.R_u + spec.eps)
        x = xs[rng.integers(xs.shape[0])]
        best = max(best, float(np.linalg.norm(forward(spec, u, x))))
    return margin * best


def _kink_margin(spec: NetworkSpec, u: np.ndarray, x: np.ndarray) -> float:
    """Smallest |pre-activation| over all layers (piecewise regimes only)."""
    _, zs = _base_pass(spec, u, x)
    return min(float(np.abs(z).min()) for z in zs[1:])


def estimate_second_derivative_bound(
    spec: NetworkSpec,
    xs,
    num_points: int = 20,
    max_index_pairs: int = 100,
    h: float = 1e-4,
    rng: np.random.Generator | None = None,
) -> float:
    """Estimate the uniform second-derivative constant M.

    Finite-difference probes of d2 T / du_i du_j and of d2 (T_a T_b) / du_i du_j
    over random points; the maximum observed magnitude is the constant fed to
    the learning-rate threshold. For piecewise-linear activations, stencils
    whose pre-activations come within 1e-2 of a kink are skipped.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    d_u = spec.d_u
    pairs = [(i, j) for i in range(d_u) for j in range(i, d_u)]
    if len(pairs) > max_index_pairs:
        idx = rng.choice(len(pairs), size=max_index_pairs, replace=False)
        pairs = [pairs[k] for k in idx]
    best = 0.0
    guard = not spec.is_smooth
    for _ in range(num_points):
        u = _uniform_ball(rng, d_u, spec.R_u + 2.0 * spec.eps)
        x = xs[rng.integers(xs.shape[0])]
        if guard and _kink_margin(spec, u, x) < 1e-2:
            continue
        fc = forward(spec, u, x)
        for i, j in pairs:
            ei = np.zeros(d_u)
            ei[i] = h
            ej = np.zeros(d_u)
            ej[j] = h
            if i == j:
                fp = forward(spec, u + ei, x)
                fm = forward(spec, u - ei, x)
                d2T = (fp - 2.0 * fc + fm) / (h * h)
                d2TT = (
                    np.outer(fp, fp) - 2.0 * np.outer(fc, fc) + np.outer(fm, fm)
                ) / (h * h)
            else:
                fpp = forward(spec, u + ei + ej, x)
                fpm = forward(spec, u + ei - ej, x)
                fmp = forward(spec, u - ei + ej, x)
                fmm = forward(spec, u - ei - ej, x)
                d2T = (fpp - fpm - fmp + fmm) / (4.0 * h * h)
                d2TT = (
                    np.outer(fpp, fpp)
                    - np.outer(fpm, fpm)
                    - np.outer(fmp, fmp)
                    + np.outer(fmm, fmm)
                ) / (4.0 * h * h)
            best = max(best, float(np.linalg.norm(d2T)), float(np.abs(d2TT).max()))
    return best


# ---------------------------------------------------------------------------
# plain-text (JSON) serialization of dense specs
# ---------------------------------------------------------------------------

def spec_to_dict(spec: NetworkSpec) -> dict:
    for layer in spec.layers:
        for w in layer.weights:
            if not isinstance(w, SliceWeight):
                raise ValueError("only dense slice-layout specs serialize to config files")
        if layer.bias is not None and not isinstance(layer.bias, SliceBias):
            raise ValueError("only dense slice-layout specs serialize to config files")
    return {
        "layer_dims": list(spec.layer_dims),
        "activation": spec.activation,
        "leaky_slope": spec.leaky_slope,
        "residual": spec.residual,
        "bias": spec.has_bias,
        "R_u": spec.R_u,
        "R_x": spec.R_x,
        "eps": spec.eps,
        "init_seed": spec.init_seed,
    }


def spec_from_dict(doc: dict) -> NetworkSpec:
    return NetworkSpec.dense(
        doc["layer_dims"],
        doc.get("activation", "tanh"),
        R_u=float(doc["R_u"]),
        R_x=float(doc["R_x"]),
        eps=float(doc["eps"]),
        leaky_slope=float(doc.get("leaky_slope", 0.01)),
        residual=bool(doc.get("residual", False)),
        bias=bool(doc.get("bias", True)),
        init_seed=doc.get("init_seed"),
    )


def save_spec(spec: NetworkSpec, path) -> None:
    with open(path, "w", newline="") as fh:
        json.dump(spec_to_dict(spec), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_spec(path) -> NetworkSpec:
    if not os.path.exists(path):
        raise FileNotFoundError(f"network spec file not found: {path}")
    with open(path) as fh:
        return spec_from_dict(json.load(fh))
