"""Size and power experiments for tests of ``H0: beta = beta0``.

Each replication simulates a sample, cross-fits the mixing distribution on
``L`` folds and computes

* ``plugin``: ``n mbar^2 / W`` with ``m`` the score at the fitted mixing law,
* ``LR``: ``n gbar^2 / W`` with ``g`` the efficient-score (projected) moment,
* ``W9``, ``W25``, ``W49``: functional-differencing GMM Wald statistics.

``plugin`` and ``LR`` share ``W``, the centered variance of ``g``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.typing import NDArray

from ..distributions import binomial_se, chi2_quantile
from ..rng import generator
from ..score_test import make_folds
from .deconvolution import deconvolve_eta
from .dgp import DiscreteMixingDistribution, eta_grid, sample_dgp
from .moments import FDProjector, efficient_score_moment, fd_gmm, fd_offsets

ALL_STATISTICS = ("plugin", "LR", "W9", "W25", "W49")
MAX_FAILURE_SHARE = 0.05
ANNIHILATION_TOL = 1e-3


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    reps: int
    beta0: float = 1.0
    levels: tuple[float, ...] = (0.05, 0.10)
    L: int = 4
    n_z: int = 1000
    n_alpha: int = 100
    ks: int = 10
    seed: int = 0
    statistics: tuple[str, ...] = ALL_STATISTICS
    fd_weight_rcond: float = 0.03
    threads: int = 1

    def __post_init__(self) -> None:
        if self.n < 2 * self.L or self.reps < 0:
            raise ValueError("need n >= 2L and reps >= 0")
        if min(self.L, self.n_z, self.n_alpha, self.ks) < 1:
            raise ValueError("L, n_z, n_alpha and ks must be positive")
        if not all(0.0 < lv < 1.0 for lv in self.levels):
            raise ValueError("levels must lie in (0, 1)")
        unknown = set(self.statistics) - set(ALL_STATISTICS)
        if unknown:
            raise ValueError(f"unknown statistics {sorted(unknown)}")

    def echo(self) -> dict:
        out = asdict(self)
        out["levels"] = list(self.levels)
        out["statistics"] = list(self.statistics)
        return out


@dataclass(frozen=True)
class ReplicationResult:
    index: int
    stats: dict[str, float]
    annihilation_ok: bool
    dropped_points: int
    error: str | None = None


def replicate(config: ExperimentConfig, index: int, beta_true: float, tag: int = 0) -> ReplicationResult:
    """One simulated sample; statistics test ``beta = config.beta0``."""
    try:
        rng = generator(config.seed, (tag << 32) + index)
        eta = eta_grid()
        sample = sample_dgp(config.n, beta_true, eta, rng)
        stats: dict[str, float] = {}
        annihilation_ok = True
        dropped = 0
        if {"plugin", "LR"} & set(config.statistics):
            folds = make_folds(config.n, config.L, int(rng.integers(2**63)))
            g = np.zeros(config.n)
            m = np.zeros(config.n)
            keep = np.ones(config.n, dtype=bool)
            for ell in range(config.L):
                test = folds.indices(ell)
                train = np.flatnonzero(folds.assignment != ell)
                fit = deconvolve_eta(sample.y1[train], eta.grid)
                eta_hat = DiscreteMixingDistribution(eta.grid, fit.masses)
                es = efficient_score_moment(config.beta0, eta_hat, rng, config.n_z, config.n_alpha, config.ks)
                g[test], m[test], valid = es.evaluate(sample.y1[test], sample.y2[test])
                keep[test] = valid
                if np.max(np.abs(es.annihilation()), initial=0.0) > ANNIHILATION_TOL:
                    annihilation_ok = False
            dropped = int((~keep).sum())
            g, m = g[keep], m[keep]
            n_eff = g.size
            w = float(np.var(g))
            if "LR" in config.statistics:
                stats["LR"] = n_eff * g.mean() ** 2 / w if w > 0 else 0.0
            if "plugin" in config.statistics:
                stats["plugin"] = n_eff * m.mean() ** 2 / w if w > 0 else 0.0
        for name in ("W9", "W25", "W49"):
            if name in config.statistics:
                proj = FDProjector(fd_offsets(int(name[1:])))
                res = fd_gmm(sample.y1, sample.y2, config.beta0, projector=proj, weight_rcond=config.fd_weight_rcond)
                stats[name] = res.wald
        return ReplicationResult(index, stats, annihilation_ok, dropped)
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        return ReplicationResult(index, {}, False, 0, f"{type(exc).__name__}: {exc}")


def _run_one(args):
    return replicate(*args)


def simulate(config: ExperimentConfig, beta_true: float, tag: int = 0) -> list[ReplicationResult]:
    """All replications, ordered by index.  Aborts if more than 5% fail."""
    jobs = [(config, i, beta_true, tag) for i in range(config.reps)]
    if config.threads > 1 and config.reps > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(_run_one, jobs, chunksize=max(1, config.reps // (4 * config.threads))))
    else:
        results = [_run_one(j) for j in jobs]
    failures = sum(r.error is not None for r in results)
    if config.reps and failures > MAX_FAILURE_SHARE * config.reps:
        raise RuntimeError(f"{failures} of {config.reps} replications failed; first: {next(r.error for r in results if r.error)}")
    return results


def stat_matrix(results: list[ReplicationResult], names) -> NDArray[np.float64]:
    """Replications x statistics, failed replications dropped."""
    ok = [r for r in results if r.error is None]
    return np.array([[r.stats[nm] for nm in names] for r in ok]).reshape(len(ok), len(names))


@dataclass(frozen=True)
class RejectionRow:
    statistic: str
    n: int
    level: float
    rate: float
    se: float
    reps: int


@dataclass(frozen=True)
class RejectionTable:
    rows: tuple[RejectionRow, ...]
    failures: int = 0
    annihilation_share: float = float("nan")

    def rate(self, statistic: str, level: float) -> float:
        for r in self.rows:
            if r.statistic == statistic and math.isclose(r.level, level):
                return r.rate
        raise KeyError((statistic, level))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["statistic", "n", "level", "rate", "se", "reps"])
        for r in self.rows:
            w.writerow([r.statistic, r.n, f"{r.level:.4f}", f"{r.rate:.6f}", f"{r.se:.6f}", r.reps])
        return buf.getvalue()


@dataclass(frozen=True)
class SizeRun:
    table: RejectionTable
    null_stats: NDArray[np.float64]
    statistics: tuple[str, ...]
    results: list[ReplicationResult] = field(repr=False, default_factory=list)


def run_size(config: ExperimentConfig) -> SizeRun:
    """Rejection rates at the chi-square(1) critical values under ``beta = beta0``."""
    names = tuple(s for s in ALL_STATISTICS if s in config.statistics)
    if config.reps == 0:
        return SizeRun(RejectionTable(()), np.zeros((0, len(names))), names, [])
    results = simulate(config, config.beta0, tag=0)
    stats = stat_matrix(results, names)
    reps = stats.shape[0]
    rows = []
    for j, nm in enumerate(names):
        for lv in config.levels:
            rate = float(np.mean(stats[:, j] > chi2_quantile(lv, 1)))
            rows.append(RejectionRow(nm, config.n, lv, rate, binomial_se(rate, reps), reps))
    ok = [r for r in results if r.error is None]
    share = float(np.mean([r.annihilation_ok for r in ok])) if ok else float("nan")
    table = RejectionTable(tuple(rows), len(results) - reps, share)
    return SizeRun(table, stats, names, results)


@dataclass(frozen=True)
class PowerCurves:
    deltas: tuple[float, ...]
    statistics: tuple[str, ...]
    levels: tuple[float, ...]
    critical_values: dict[tuple[str, float], float]
    power: dict[tuple[str, float], tuple[float, ...]]
    reps: int

    def at(self, statistic: str, level: float, delta: float) -> float:
        i = int(np.argmin(np.abs(np.asarray(self.deltas) - delta)))
        return self.power[(statistic, level)][i]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["statistic", "level", "delta", "power", "critical_value", "reps"])
        for (nm, lv), vals in self.power.items():
            for d, p in zip(self.deltas, vals):
                w.writerow([nm, f"{lv:.4f}", f"{d:.4f}", f"{p:.6f}", f"{self.critical_values[(nm, lv)]:.6f}", self.reps])
        return buf.getvalue()


def size_adjusted_critical_values(null_stats: NDArray[np.float64], names, levels) -> dict:
    return {
        (nm, lv): float(np.quantile(null_stats[:, j], 1.0 - lv))
        for j, nm in enumerate(names)
        for lv in levels
    }


def run_power(config: ExperimentConfig, deltas, null: SizeRun | None = None) -> PowerCurves:
    """Size-adjusted power at ``beta = beta0 + delta`` using empirical null quantiles."""
    deltas = tuple(float(d) for d in deltas)
    if null is None:
        null = run_size(config)
    names = null.statistics
    crit = size_adjusted_critical_values(null.null_stats, names, config.levels)
    power: dict[tuple[str, float], list[float]] = {(nm, lv): [] for nm in names for lv in config.levels}
    for k, d in enumerate(deltas):
        stats = stat_matrix(simulate(config, config.beta0 + d, tag=k + 1), names)
        for j, nm in enumerate(names):
            for lv in config.levels:
                power[(nm, lv)].append(float(np.mean(stats[:, j] > crit[(nm, lv)])))
    return PowerCurves(deltas, names, tuple(config.levels), crit, {k: tuple(v) for k, v in power.items()}, config.reps)


def default_deltas() -> tuple[float, ...]:
    """``-0.5, -0.475, ..., 0.45``."""
    return tuple(np.round(np.arange(-0.5, 0.45 + 1e-9, 0.025), 4))


def manifest(config: ExperimentConfig, outputs: dict[str, str]) -> str:
    """JSON manifest: config echo plus SHA-256 digests of the config and each output."""
    cfg = json.dumps(config.echo(), sort_keys=True)
    body = {
        "config": config.echo(),
        "config_sha256": hashlib.sha256(cfg.encode()).hexdigest(),
        "outputs": {k: hashlib.sha256(v.encode()).hexdigest() for k, v in sorted(outputs.items())},
    }
    return json.dumps(body, indent=2, sort_keys=True) + "\n"
