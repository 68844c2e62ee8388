"""Acceptance criteria, one test per criterion.

Each test records a ``PASS``/``FAIL`` line (printed immediately and repeated
in the pytest terminal summary).  Run standalone with
``python3 tests/test_acceptance.py`` to get only the criterion lines.
"""

from __future__ import annotations

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lrmoments import cli_io  # noqa: E402
from lrmoments import lasso_panel as lp  # noqa: E402
from lrmoments import panel_moments as pm  # noqa: E402
from lrmoments.mc.harness import ExperimentConfig, run_power, run_size  # noqa: E402
from lrmoments.score_test import make_folds, panel_score_test  # noqa: E402
from lrmoments.synthetic import natality_like, truth  # noqa: E402
from lrmoments.teacher_va import hermite_all, moment_basis  # noqa: E402

import kotlarski_oracle  # noqa: E402
import orthogonality  # noqa: E402
from oracles import gauss_hermite_std  # noqa: E402
from test_illposed import penrose_at_zero, rank_recovery_trials, scheme_agreement  # noqa: E402

RESULTS: list[str] = []
MC_SEED = 2026


def record(number: int, title: str, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} | {detail}"
    RESULTS.append(line)
    print(line, flush=True)
    return ok


# -- Monte Carlo -------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_01_lr_size_n500():
    cfg = ExperimentConfig(n=500, reps=500, statistics=("LR",), levels=(0.05,), seed=MC_SEED)
    run = run_size(cfg)
    rate = run.table.rate("LR", 0.05)
    detail = f"LR rejection {rate:.4f} over {run.null_stats.shape[0]} reps (failures {run.table.failures}); band [0.03, 0.08]"
    assert record(1, "LR size at n=500, 5% nominal", 0.03 <= rate <= 0.08, detail)


@pytest.mark.slow
def test_criterion_02_plugin_size_n250():
    cfg = ExperimentConfig(n=250, reps=500, statistics=("plugin", "LR"), levels=(0.05,), seed=MC_SEED)
    run = run_size(cfg)
    plug = run.table.rate("plugin", 0.05)
    lr = run.table.rate("LR", 0.05)
    detail = f"plug-in rejection {plug:.4f} (LR {lr:.4f}) over {run.null_stats.shape[0]} reps; need >= 0.15"
    assert record(2, "plug-in size at n=250, 5% nominal", plug >= 0.15, detail)


@pytest.mark.slow
def test_criterion_03_size_adjusted_power_n1000():
    cfg = ExperimentConfig(n=1000, reps=500, statistics=("LR", "W49"), levels=(0.05,), seed=MC_SEED)
    null = run_size(cfg)
    curves = run_power(cfg, (-0.5, 0.45), null)
    parts, ok = [], True
    for d in (-0.5, 0.45):
        lr, w = curves.at("LR", 0.05, d), curves.at("W49", 0.05, d)
        ok &= lr >= w
        parts.append(f"delta={d:+.2f}: LR {lr:.3f} vs W49 {w:.3f}")
    parts.append(f"null size LR {null.table.rate('LR', 0.05):.3f}, W49 {null.table.rate('W49', 0.05):.3f}")
    assert record(3, "size-adjusted LR power >= W49 at n=1000", ok, "; ".join(parts))


# -- exact oracles -------------------------------------------------------------------


def test_criterion_04_exact_orthogonality():
    start = time.perf_counter()
    rep = orthogonality.orthogonality_report()
    elapsed = time.perf_counter() - start
    mean = max(rep[k]["mean"] for k in ("beta", "alpha", "variance"))
    deriv = max(v for k in ("beta", "alpha", "variance") for v in rep[k]["derivatives"].values())
    cham = rep["chamberlain_beta_derivative"]
    ok = mean <= 1e-10 and deriv <= 1e-10 and cham > 1e-2 and elapsed <= 60
    detail = f"max|E g| {mean:.2e}, max nuisance derivative {deriv:.2e}, Chamberlain beta-derivative {cham:.3f}, {elapsed:.2f}s"
    assert record(4, "exact orthogonality on the discrete panel", ok, detail)


def test_criterion_05_kotlarski_identity():
    err = kotlarski_oracle.identity_error(4)
    assert record(5, "Kotlarski conditional identity, k<=4", err <= 1e-8, f"max error {err:.2e} (64-node Gauss-Hermite)")


def test_criterion_06_hermite():
    x, w = gauss_hermite_std(64)
    conv = 0.0
    for theta in (0.3, 0.7, 1.0, 2.5):
        for alpha in np.linspace(-3, 3, 25):
            for k in range(7):
                conv = max(conv, abs(w @ moment_basis(k, alpha + theta * x, theta) - alpha**k))
    H = hermite_all(10, x)
    fact = np.array([math.factorial(k) for k in range(11)], dtype=float)
    orth = float(np.max(np.abs((H * w) @ H.T - np.diag(fact))))
    ok = conv <= 1e-8 and orth <= 1e-8
    assert record(6, "Hermite convolution and orthogonality", ok, f"convolution {conv:.2e}, orthogonality {orth:.2e}")


def test_criterion_07_lasso():
    rng = np.random.default_rng(7)
    # single standardized column: closed-form soft threshold
    x = rng.normal(size=400)
    x = (x - x.mean()) / x.std()
    y = 0.3 * x + rng.normal(size=400)
    W1, Y1 = x.reshape(200, 2, 1), y.reshape(200, 2)
    phi = lp.penalty_loadings(W1, Y1).phi
    gram, xty, yty = lp._gram(Y1, W1)
    c_n = 0.1
    b1, *_ = lp.coordinate_descent(gram, xty, yty, c_n, phi)
    b = x @ y / x.size
    soft = abs(b1[0] - math.copysign(max(abs(b) - c_n * phi[0], 0.0), b))
    # KKT and monotone objective at p = 200, nT = 2000
    n, T, p = 500, 4, 200
    W = rng.normal(size=(n, T, p))
    beta = np.zeros(p)
    beta[:5] = [1.0, -0.8, 0.6, 0.4, -0.3]
    Y = np.einsum("itp,p->it", W, beta) + rng.normal(size=(n, T))
    fit = lp.fit(Y, W)
    kkt = float(np.max(lp.kkt_residuals(fit.beta, Y, W, fit.c_n, fit.loadings.phi)))
    path = np.asarray(fit.objective_path)
    worst_rise = float(np.max(np.diff(path), initial=-np.inf))
    mono = worst_rise <= 1e-12 * float(np.abs(path).max())
    ok = soft <= 1e-10 and kkt <= 1e-6 and mono and fit.converged
    detail = f"soft-threshold error {soft:.2e}, max KKT residual {kkt:.2e}, largest per-sweep change {worst_rise:.2e}"
    assert record(7, "Lasso soft-threshold, KKT, monotone objective", ok, detail)


def test_criterion_08_truncated_pinv():
    hits = rank_recovery_trials(100, seed=0)
    penrose = penrose_at_zero()
    ok = hits == 100 and penrose <= 1e-8
    assert record(8, "truncated pinv rank recovery and Penrose", ok, f"rank 2 recovered in {hits}/100, Penrose residual {penrose:.2e}")


def test_criterion_09_regularization_agreement():
    worst, smin = 0.0, math.inf
    for seed in range(20):
        d, s = scheme_agreement(seed)
        worst, smin = max(worst, d), min(smin, s)
    ok = worst <= 1e-6 and smin >= 0.1
    assert record(9, "LF / Tikhonov / spectral cut-off / min-norm agree", ok, f"max pairwise distance {worst:.2e} over 20 systems, min sigma {smin:.3f}")


# -- CLI determinism and coverage -------------------------------------------------------


def test_criterion_10_determinism_and_coverage():
    fixture = str(cli_io.bundled_fixture())
    identical = True
    for command in ("fit-beta", "fit-ame", "fit-variance"):
        a = cli_io.run([command, "--data", fixture, "--seed", "3"])
        b = cli_io.run([command, "--data", fixture, "--seed", "3"])
        identical &= a[0] == 0 and a == b
    tr = truth(10)
    targets = {
        "beta": (pm.BetaCombination(np.eye(10)[:, 0]), tr.beta[0]),
        "ame": (pm.AlphaMean(np.array([0.0, 1.0])), tr.alpha_mean[1]),
        "variance": (pm.AlphaQuadratic(np.diag([0.0, 1.0]), pm.s2_iid(3)), tr.quadratic(np.diag([0.0, 1.0]))),
    }
    covered = {k: 0 for k in targets}
    for draw in range(100):
        data = natality_like(seed=10_000 + draw)
        folds = make_folds(data.n, 4, seed=draw)
        for name, (target, value) in targets.items():
            rep = panel_score_test(data, folds, target, psi0=value)
            covered[name] += rep.region.contains(value)
    ok = identical and all(c >= 90 for c in covered.values())
    detail = f"byte-identical reports: {identical}; 95% CI coverage /100: " + ", ".join(f"{k} {v}" for k, v in covered.items())
    assert record(10, "report determinism and CI coverage", ok, detail)


if __name__ == "__main__":
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_criterion_")]
    failed = 0
    for t in tests:
        try:
            t()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
