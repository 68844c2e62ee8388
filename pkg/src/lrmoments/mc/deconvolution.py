"""Exponential-family g-modeling of a mixing distribution on a fixed grid.

``eta_j proportional to exp(Q_j' kappa)`` with ``Q`` a Legendre basis in
alpha; ``kappa`` maximizes the mean log-likelihood of ``Y = alpha + e``
(``e ~ N(0, sigma^2)``) minus ``lam |kappa|^2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre
from numpy.typing import ArrayLike, NDArray
from scipy import optimize
from scipy.special import logsumexp

LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class Deconvolution:
    masses: NDArray[np.float64]
    kappa: NDArray[np.float64]
    loglik: float
    converged: bool
    message: str


def basis(grid: ArrayLike, degree: int = 5) -> NDArray[np.float64]:
    """Legendre polynomials of degree 1..degree on the grid mapped to [-1, 1]."""
    g = np.asarray(grid, dtype=float)
    x = 2.0 * (g - g.min()) / (g.max() - g.min()) - 1.0
    q = legendre.legvander(x, degree)[:, 1:]
    return q - q.mean(axis=0)


def deconvolve_eta(
    y: ArrayLike,
    grid: ArrayLike,
    degree: int = 5,
    lam: float | None = None,
    sigma: float = 1.0,
) -> Deconvolution:
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size == 0:
        raise ValueError("deconvolution needs data")
    grid = np.asarray(grid, dtype=float)
    n = y.size
    if lam is None:
        lam = 0.1 / np.sqrt(n)
    Q = basis(grid, degree)
    logk = -0.5 * ((y[:, None] - grid[None, :]) / sigma) ** 2 - LOG_SQRT_2PI - np.log(sigma)

    def objective(kappa):
        s = Q @ kappa
        log_eta = s - logsumexp(s)
        joint = logk + log_eta[None, :]
        lf = logsumexp(joint, axis=1)
        post = np.exp(joint - lf[:, None]).mean(axis=0)
        eta = np.exp(log_eta)
        val = -(lf.mean() - lam * kappa @ kappa)
        grad = -(Q.T @ (post - eta) - 2.0 * lam * kappa)
        return val, grad

    res = optimize.minimize(objective, np.zeros(Q.shape[1]), jac=True, method="L-BFGS-B")
    s = Q @ res.x
    masses = np.exp(s - logsumexp(s))
    masses /= masses.sum()
    return Deconvolution(masses, res.x, float(-res.fun), bool(res.success), str(res.message))
