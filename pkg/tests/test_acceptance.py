"""Acceptance gate: ten criteria, one test each, printed as pass/fail lines.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. Tolerances and runtime budgets are pinned here and not configurable.
"""

import json
import math
import os
import time

import numpy as np

from swsgd import cli
from swsgd import network as nw
from swsgd import swloss as sl
from swsgd.measures import DiscreteMeasure, sample_batch
from swsgd.network import NetworkSpec, smooth_indicator
from swsgd.oracle import fd_gradient, lipschitz_probe, relative_error, wasserstein_1d_bruteforce
from swsgd.sgd import SGDConfig, run
from swsgd.trajectory import InterpolatedPath, criticality_gap, distance_d_c, reference_flow

from conftest import kink_free_batch

TOY_ALPHAS = (0.1, 0.03, 0.01)


def _report(num, label, ok, detail=""):
    print(f"[criterion {num:02d}] {'PASS' if ok else 'FAIL'} {label} {detail}".rstrip())
    assert ok, f"criterion {num} failed: {label} {detail}"


def toy_problem():
    net = NetworkSpec.dense((1, 1), "identity", R_u=4.0, R_x=4.0, eps=0.5, bias=False)
    mx = DiscreteMeasure.uniform([[0.5], [1.0], [1.5], [2.0]])
    my = DiscreteMeasure.uniform([[1.0], [2.0], [3.0], [4.0]])
    return net, mx, my


def _at_most_one_small_inversion(values, allowance=0.10):
    inversions = 0
    for prev, nxt in zip(values, values[1:]):
        if nxt > prev:
            inversions += 1
            if nxt - prev > allowance * prev:
                return False
    return inversions <= 1


def test_criterion_01_sorting_optimality():
    start = time.monotonic()
    rng = np.random.default_rng(101)
    worst = 0.0
    for i in range(1000):
        n = int(rng.integers(1, 7))
        d = int(rng.integers(1, 4))
        p = (1.0, 1.5, 2.0, 3.0)[i % 4]
        X = rng.normal(size=(n, d))
        Y = rng.normal(size=(n, d))
        theta = rng.normal(size=d)
        theta /= np.linalg.norm(theta)
        a = sl.w_theta_p(X, Y, theta, p)
        b = wasserstein_1d_bruteforce(X, Y, theta, p)
        worst = max(worst, abs(a - b) / max(1.0, abs(b)))
    elapsed = time.monotonic() - start
    _report(
        1, "sorting optimality vs n!-permutation oracle",
        worst <= 1e-12 and elapsed < 10.0,
        f"(max err {worst:.2e}, {elapsed:.1f}s)",
    )


def test_criterion_02_gradient_correctness():
    start = time.monotonic()
    rng = np.random.default_rng(102)
    results = {}
    for activation in ("tanh", "relu"):
        net = NetworkSpec.dense((2, 3, 2), activation, R_u=6.0, R_x=6.0, eps=1.0)
        worst = 0.0
        checked = 0
        while checked < 100:
            u = rng.uniform(-0.8, 0.8, net.d_u)
            mx = DiscreteMeasure.uniform(rng.uniform(-1.5, 1.5, (5, 2)))
            my = DiscreteMeasure.uniform(rng.uniform(-1.5, 1.5, (5, 2)))
            batch = sample_batch(mx, my, 3, 1, rng)
            if not kink_free_batch(net, u, batch, margin=1e-3):
                continue
            g = sl.grad_phi(net, u, batch, 2.0)
            gfd = fd_gradient(lambda v: sl.sample_loss_f(net, v, batch, 2.0), u, 1e-5)
            worst = max(worst, relative_error(g, gfd))
            checked += 1
        results[activation] = worst
    elapsed = time.monotonic() - start
    ok = all(v < 1e-5 for v in results.values()) and elapsed < 30.0
    _report(
        2, "a.e. gradient matches central finite differences",
        ok,
        f"(tanh {results['tanh']:.2e}, relu {results['relu']:.2e}, {elapsed:.1f}s)",
    )


def test_criterion_03_lipschitz_dominance():
    rng = np.random.default_rng(103)
    violations = 0
    tightest = math.inf
    for _ in range(10):  # K_w instances
        n = int(rng.integers(2, 6))
        d = int(rng.integers(1, 4))
        X = rng.normal(size=(n, d))
        Y = rng.normal(size=(n, d))
        theta = rng.normal(size=d)
        theta /= np.linalg.norm(theta)
        p = float(rng.choice([1.0, 1.5, 2.0, 3.0]))
        r = float(rng.uniform(0.3, 1.5))
        bound = sl.lipschitz_K_w(r, X, Y, p)
        rep = lipschitz_probe(
            lambda v: sl.w_theta_p(v.reshape(n, d), Y, theta, p),
            X.reshape(-1), r, 10_000, rng,
        )
        if rep.value > bound:
            violations += 1
        tightest = min(tightest, bound / max(rep.value, 1e-300))

    net = NetworkSpec.dense((1, 2), "tanh", R_u=4.0, R_x=4.0, eps=0.5)
    L_hat = nw.estimate_lipschitz_constant(net, num_pairs=2000, rng=rng)
    for _ in range(10):  # K_f instances
        n = int(rng.integers(2, 5))
        X = rng.uniform(-1.0, 1.0, (n, 1))
        Y = rng.uniform(-1.0, 1.0, (n, 2))
        theta = rng.normal(size=2)
        theta /= np.linalg.norm(theta)
        p = float(rng.choice([1.0, 1.5, 2.0, 3.0]))
        u0 = rng.uniform(-0.6, 0.6, net.d_u)
        eps = float(rng.uniform(0.2, 0.8))
        bound = sl.lipschitz_K_f(net, eps, u0, X, Y, L_hat, p)
        from swsgd.measures import SampleBatch

        batch = SampleBatch(X, Y, theta.reshape(1, 2))
        rep = lipschitz_probe(
            lambda v: sl.sample_loss_f(net, v, batch, p), u0, eps, 10_000, rng
        )
        if rep.value > bound:
            violations += 1
        tightest = min(tightest, bound / max(rep.value, 1e-300))
    _report(
        3, "Lipschitz constants dominate sampled quotients",
        violations == 0,
        f"(20 instances, min bound/quotient {tightest:.2f})",
    )


def test_criterion_04_projection_invariant():
    net, mx, my = toy_problem()
    worst = 0.0
    r = 1.2
    for alpha in TOY_ALPHAS:
        for seed in range(10):
            cfg = SGDConfig(alpha=alpha, t_max=300, n=2, seed=seed,
                            scheme="projected_noised", beta=1.0, radius_r=r)
            traj = run(net, cfg, mx, my)
            norms = np.linalg.norm(traj.iterates, axis=1)
            worst = max(worst, float(norms.max()))
            assert (norms <= r).all()
    _report(4, "projected iterates stay inside the ball", worst <= r,
            f"(max norm {worst:.15g} <= r={r})")


def test_criterion_05_theorem1_qualitative():
    start = time.monotonic()
    net, mx, my = toy_problem()
    k_max = 2
    step_ref = min(TOY_ALPHAS) / 50.0
    dcs = {a: [] for a in TOY_ALPHAS}
    for seed in range(20):
        paths = {}
        u0 = None
        for alpha in TOY_ALPHAS:
            cfg = SGDConfig(alpha=alpha, t_max=int(math.ceil(k_max / alpha)),
                            n=2, seed=seed)
            traj = run(net, cfg, mx, my)
            paths[alpha] = InterpolatedPath.from_trajectory(traj)
            u0 = traj.iterates[0]
        flow = reference_flow(net, u0, mx, my, n=2, p=2.0, horizon=float(k_max),
                              step_ref=step_ref, exhaustive=True,
                              compare_alpha=min(TOY_ALPHAS))
        for alpha in TOY_ALPHAS:
            dcs[alpha].append(distance_d_c(paths[alpha], flow, k_max=k_max).value)
    medians = [float(np.median(dcs[a])) for a in TOY_ALPHAS]
    elapsed = time.monotonic() - start
    ok = _at_most_one_small_inversion(medians) and elapsed < 300.0
    _report(
        5, "interpolations approach the reference flow as alpha decreases",
        ok,
        f"(medians {[f'{m:.3f}' for m in medians]} for alphas {list(TOY_ALPHAS)}, {elapsed:.0f}s)",
    )


def test_criterion_06_theorem2_qualitative():
    start = time.monotonic()
    net, mx, my = toy_problem()
    r, beta, t_max = 3.0, 0.1, 1000
    tail_fraction = 0.2
    med_by_alpha = []
    init_gaps = []
    for alpha in TOY_ALPHAS:
        per_seed = []
        for seed in range(20):
            cfg = SGDConfig(alpha=alpha, t_max=t_max, n=2, seed=seed,
                            scheme="projected_noised", beta=beta, radius_r=r)
            traj = run(net, cfg, mx, my)
            t_start = int(math.ceil((1.0 - tail_fraction) * t_max))
            gaps = [
                criticality_gap(net, traj.iterates[t], r, mx, my, 2, 2.0, exhaustive=True)
                for t in range(t_start, t_max + 1)
            ]
            per_seed.append(float(np.median(gaps)))
            if alpha == TOY_ALPHAS[0]:
                init_gaps.append(
                    criticality_gap(net, traj.iterates[0], r, mx, my, 2, 2.0,
                                    exhaustive=True)
                )
        med_by_alpha.append(float(np.median(per_seed)))
    med_init = float(np.median(init_gaps))
    elapsed = time.monotonic() - start
    ok = (
        _at_most_one_small_inversion(med_by_alpha)
        and med_by_alpha[-1] < 0.2 * med_init
        and elapsed < 300.0
    )
    _report(
        6, "tail criticality gaps shrink with alpha",
        ok,
        f"(medians {[f'{m:.3f}' for m in med_by_alpha]}, initial {med_init:.3f}, {elapsed:.0f}s)",
    )


def test_criterion_07_alpha_zero_formula():
    rng = np.random.default_rng(107)
    worst = 0.0
    for _ in range(20):
        d_y = int(rng.integers(1, 10))
        d_u = int(rng.integers(1, 200))
        R_y = float(rng.uniform(0.01, 50.0))
        M = float(rng.uniform(0.01, 100.0))
        got = sl.alpha_zero(d_y, R_y, d_u, M)
        expect = 1.0 / ((d_y * d_y + 2.0 * R_y) * d_u * M)
        worst = max(worst, abs(got - expect) / expect)
    _report(7, "step threshold matches straight-line formula", worst <= 1e-15,
            f"(max rel err {worst:.2e})")


def test_criterion_08_p_consistency():
    rng = np.random.default_rng(108)
    worst = 0.0
    for _ in range(250):  # loss evaluations
        n = int(rng.integers(1, 7))
        d = int(rng.integers(1, 4))
        X = rng.normal(size=(n, d))
        Y = rng.normal(size=(n, d))
        theta = rng.normal(size=d)
        theta /= np.linalg.norm(theta)
        a = sl.w_theta_p(X, Y, theta, 2.0)
        b = sl.w_theta_2(X, Y, theta)
        worst = max(worst, abs(a - b) / max(1.0, abs(b)))
    for _ in range(200):  # gradient evaluations, projected-cost level
        n = int(rng.integers(1, 6))
        d = int(rng.integers(1, 4))
        X = rng.normal(size=(n, d))
        Y = rng.normal(size=(n, d))
        theta = rng.normal(size=d)
        theta /= np.linalg.norm(theta)
        a = sl.grad_w_theta(X, Y, theta, 2.0)
        b = sl.grad_w_theta_2(X, Y, theta)
        worst = max(worst, float(np.abs(a - b).max()) / max(1.0, float(np.abs(b).max())))
    net = NetworkSpec.dense((2, 3, 2), "tanh", R_u=6.0, R_x=6.0, eps=1.0)
    for _ in range(50):  # gradient evaluations, network level
        u = rng.uniform(-0.8, 0.8, net.d_u)
        mx = DiscreteMeasure.uniform(rng.uniform(-1.2, 1.2, (4, 2)))
        my = DiscreteMeasure.uniform(rng.uniform(-1.2, 1.2, (4, 2)))
        batch = sample_batch(mx, my, 3, 2, rng)
        a = sl.grad_phi(net, u, batch, 2.0)
        b = sl.grad_phi_2(net, u, batch)
        worst = max(worst, float(np.abs(a - b).max()) / max(1.0, float(np.abs(b).max())))
    _report(8, "general-p path at p=2 equals the specialized path", worst <= 1e-12,
            f"(500 evaluations, max err {worst:.2e})")


def test_criterion_09_smooth_indicator():
    R, eps = 1.0, 0.25
    inner = abs(smooth_indicator([R - eps], R, eps) - 1.0)
    outer = abs(smooth_indicator([R + eps], R, eps) - 0.0)
    half = abs(smooth_indicator([math.sqrt(R * R + eps * eps)], R, eps) - 0.5)
    values_ok = inner <= 1e-12 and outer <= 1e-12 and half <= 1e-12

    h = 1e-5
    delta = 5 * h

    def radial(t):
        return smooth_indicator([t, 0.0], R, eps)

    def d1(t):
        return (radial(t + h) - radial(t - h)) / (2 * h)

    def d2(t):
        return (radial(t + h) - 2 * radial(t) + radial(t - h)) / (h * h)

    max_jump = 0.0
    for boundary in (R - eps, R + eps):
        max_jump = max(max_jump, abs(d1(boundary + delta) - d1(boundary - delta)))
        max_jump = max(max_jump, abs(d2(boundary + delta) - d2(boundary - delta)))
    _report(
        9, "smooth indicator values and derivative continuity",
        values_ok and max_jump < 1e-4,
        f"(value errs {inner:.1e}/{outer:.1e}/{half:.1e}, max derivative jump {max_jump:.2e})",
    )


def test_criterion_10_cli_determinism(tmp_path):
    (tmp_path / "mx.csv").write_text("1\n2\n")
    (tmp_path / "my.csv").write_text("2\n4\n")
    base = {
        "network": {"layer_dims": [1, 1], "activation": "identity", "bias": False,
                    "R_u": 4.0, "R_x": 4.0, "eps": 0.5},
        "measures": {"mx": "mx.csv", "my": "my.csv"},
        "sgd": {"alpha": 0.1, "t_max": 15, "n": 2, "seed": 0, "scheme": "plain"},
        "sweep": {"alphas": [0.2, 0.1], "seeds": [0, 1]},
        "diagnostics": {"k_max": 1, "grid_per_unit": 100, "alpha_threshold_check": False,
                        "tail_fraction": 0.25},
        "output_dir": str(tmp_path / "out"),
    }
    crit = json.loads(json.dumps(base))
    crit["sgd"].update({"scheme": "projected_noised", "beta": 0.2, "radius_r": 2.5,
                        "t_max": 15})
    cfg_plain = tmp_path / "plain.json"
    cfg_plain.write_text(json.dumps(base))
    cfg_crit = tmp_path / "crit.json"
    cfg_crit.write_text(json.dumps(crit))

    def snapshot(out_dir):
        return {
            name: (out_dir / name).read_bytes() for name in sorted(os.listdir(out_dir))
        }

    all_identical = True
    for label, argv in {
        "train": ["train", "--config", str(cfg_plain)],
        "compare-flow": ["compare-flow", "--config", str(cfg_plain)],
        "criticality": ["criticality", "--config", str(cfg_crit)],
        "verify": ["verify", "--out", str(tmp_path / "out")],
    }.items():
        out_dir = tmp_path / "out"
        assert cli.main(argv) == 0, label
        first = snapshot(out_dir)
        assert cli.main(argv) == 0, label
        second = snapshot(out_dir)
        if first != second:
            all_identical = False
            break
    _report(10, "repeated CLI invocations are byte-identical", all_identical,
            f"(last checked: {label})")
