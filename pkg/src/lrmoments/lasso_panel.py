"""Panel Lasso with data-driven penalty loadings.

Solves, on within-transformed data (one ``T``-block per unit),

    min_b  1/(nT) sum_i |Y~_i - W~_i b|^2 + 2 c_n sum_j phi_j |b_j|

by cyclic coordinate descent.  Penalty loadings are clustered by unit, so
within-unit serial correlation of the scores is kept.  :func:`fit` runs the
initial-loadings fit followed by ``K - 1`` refits with loadings refreshed
from the current residuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from numpy.typing import NDArray

from .distributions import normal_quantile

LOADING_FLOOR = 1e-12


class ConfigError(ValueError):
    """Invalid Lasso configuration."""


def default_gamma(p: int, n_train: int, T: int) -> float:
    return 0.1 / math.log(max(p, n_train * T))


@dataclass(frozen=True)
class LassoConfig:
    c: float = 1.1
    gamma_rule: Callable[[int, int, int], float] = default_gamma
    K: int = 3
    cd_tol: float = 1e-8
    cd_max_iter: int = 10_000

    def __post_init__(self) -> None:
        if not self.c > 1.0:
            raise ConfigError(f"c must exceed 1, got {self.c}")
        if self.K < 1:
            raise ConfigError(f"K must be >= 1, got {self.K}")
        if self.cd_tol <= 0 or self.cd_max_iter < 1:
            raise ConfigError("cd_tol must be positive and cd_max_iter >= 1")


@dataclass(frozen=True)
class PenaltyLoadings:
    phi: NDArray[np.float64]
    diagnostics: tuple[str, ...] = ()


@dataclass(frozen=True)
class LassoFit:
    beta: NDArray[np.float64]
    loadings: PenaltyLoadings
    c_n: float
    active_set: tuple[int, ...]
    objective: float
    iterations: int
    converged: bool
    objective_path: tuple[float, ...] = ()
    diagnostics: tuple[str, ...] = field(default=())


def tuning(n_train: int, T: int, p: int, config: LassoConfig = LassoConfig()) -> float:
    """Penalty level ``c / sqrt(n_train T) * Phi^{-1}(1 - gamma / (2p))``."""
    if min(n_train, T, p) < 1:
        raise ConfigError("n_train, T and p must be positive")
    gamma = config.gamma_rule(p, n_train, T)
    if not 0.0 < gamma < 1.0:
        raise ConfigError(f"gamma must lie in (0, 1), got {gamma}")
    tail = gamma / (2.0 * p)
    if tail >= 1.0:
        raise ConfigError(f"gamma/(2p) = {tail} >= 1")
    return config.c / math.sqrt(n_train * T) * normal_quantile(1.0 - tail)


def penalty_loadings(
    W_tilde: NDArray[np.float64],
    residuals: NDArray[np.float64],
    mode: Literal["initial", "refined"] = "initial",
) -> PenaltyLoadings:
    """Unit-clustered loadings ``phi_j^2 = 1/(nT) sum_i (sum_t W~_itj r_it)^2``.

    ``residuals`` is ``Y~`` for the initial loadings and the current within
    residuals for the refined ones; the formula is the same.
    """
    if mode not in ("initial", "refined"):
        raise ValueError(f"unknown loadings mode {mode!r}")
    w = np.asarray(W_tilde, dtype=float)
    r = np.asarray(residuals, dtype=float)
    if w.ndim != 3 or r.shape != w.shape[:2]:
        raise ValueError(f"shape mismatch: W~ {w.shape}, residuals {r.shape}")
    n, t, _ = w.shape
    scores = np.einsum("itj,it->ij", w, r)
    phi = np.sqrt(np.sum(scores**2, axis=0) / (n * t))
    low = phi < LOADING_FLOOR
    diagnostics: tuple[str, ...] = ()
    if np.any(low):
        cols = np.flatnonzero(low).tolist()
        diagnostics = (f"loadings floored at {LOADING_FLOOR:g} for columns {cols}",)
        phi = np.where(low, LOADING_FLOOR, phi)
    return PenaltyLoadings(phi=phi, diagnostics=diagnostics)


def penalized_objective(
    beta: NDArray[np.float64],
    gram: NDArray[np.float64],
    xty: NDArray[np.float64],
    yty: float,
    c_n: float,
    phi: NDArray[np.float64],
) -> float:
    return float(
        beta @ gram @ beta - 2.0 * xty @ beta + yty + 2.0 * c_n * np.sum(phi * np.abs(beta))
    )


def coordinate_descent(
    gram: NDArray[np.float64],
    xty: NDArray[np.float64],
    yty: float,
    c_n: float,
    phi: NDArray[np.float64],
    beta0: NDArray[np.float64] | None = None,
    tol: float = 1e-8,
    max_iter: int = 10_000,
) -> tuple[NDArray[np.float64], int, bool, list[float]]:
    """Cyclic coordinate descent on the Gram form of the objective.

    Returns ``(beta, sweeps, converged, objective_per_sweep)``.
    """
    p = gram.shape[0]
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=float)
    g_beta = gram @ beta
    diag = np.diag(gram).copy()
    thresholds = c_n * phi
    path = [penalized_objective(beta, gram, xty, yty, c_n, phi)]
    converged = False
    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        max_change = 0.0
        for j in range(p):
            if diag[j] <= 0.0:
                new = 0.0
            else:
                z = xty[j] - g_beta[j] + diag[j] * beta[j]
                new = math.copysign(max(abs(z) - thresholds[j], 0.0), z) / diag[j]
            delta = new - beta[j]
            if delta != 0.0:
                g_beta += gram[:, j] * delta
                beta[j] = new
                max_change = max(max_change, abs(delta))
        path.append(penalized_objective(beta, gram, xty, yty, c_n, phi))
        if max_change < tol:
            converged = True
            break
    return beta, sweeps, converged, path


def _gram(Y_tilde: NDArray[np.float64], W_tilde: NDArray[np.float64]):
    n, t, p = W_tilde.shape
    x = W_tilde.reshape(n * t, p)
    y = Y_tilde.reshape(n * t)
    nt = n * t
    return x.T @ x / nt, x.T @ y / nt, float(y @ y) / nt


def fit(
    Y_tilde: NDArray[np.float64],
    W_tilde: NDArray[np.float64],
    config: LassoConfig = LassoConfig(),
    c_n: float | None = None,
) -> LassoFit:
    """Algorithm-1 Lasso: initial loadings from ``Y~``, then ``K-1`` refinements.

    Parameters
    ----------
    Y_tilde:
        ``n x T`` within-transformed outcomes.
    W_tilde:
        ``n x T x p`` within-transformed regressors.
    c_n:
        Penalty level; :func:`tuning` is used when omitted.
    """
    y = np.asarray(Y_tilde, dtype=float)
    w = np.asarray(W_tilde, dtype=float)
    n, t, p = w.shape
    if c_n is None:
        c_n = tuning(n, t, p, config)
    gram, xty, yty = _gram(y, w)

    loadings = penalty_loadings(w, y, "initial")
    diagnostics = list(loadings.diagnostics)
    beta = None
    total_sweeps = 0
    converged = True
    path: list[float] = []
    for step in range(config.K):
        if step > 0:
            resid = y - np.einsum("itj,j->it", w, beta)
            loadings = penalty_loadings(w, resid, "refined")
            diagnostics.extend(loadings.diagnostics)
        beta, sweeps, ok, step_path = coordinate_descent(
            gram, xty, yty, c_n, loadings.phi, beta, config.cd_tol, config.cd_max_iter
        )
        total_sweeps += sweeps
        converged = converged and ok
        path = step_path
    if not converged:
        diagnostics.append(f"coordinate descent hit cd_max_iter={config.cd_max_iter}")
    return LassoFit(
        beta=beta,
        loadings=loadings,
        c_n=float(c_n),
        active_set=tuple(np.flatnonzero(beta).tolist()),
        objective=path[-1],
        iterations=total_sweeps,
        converged=converged,
        objective_path=tuple(path),
        diagnostics=tuple(dict.fromkeys(diagnostics)),
    )


def kkt_residuals(
    beta: NDArray[np.float64],
    Y_tilde: NDArray[np.float64],
    W_tilde: NDArray[np.float64],
    c_n: float,
    phi: NDArray[np.float64],
) -> NDArray[np.float64]:
    """Per-coordinate KKT violation (zero at an exact minimizer)."""
    gram, xty, _ = _gram(np.asarray(Y_tilde, float), np.asarray(W_tilde, float))
    grad = gram @ beta - xty
    active = beta != 0.0
    out = np.maximum(np.abs(grad) - c_n * phi, 0.0)
    out[active] = np.abs(grad[active] + c_n * phi[active] * np.sign(beta[active]))
    return out
