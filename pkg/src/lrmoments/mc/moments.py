"""Moment functions for ``beta`` in the simulation design.

* :func:`score_m` - the model score for ``beta`` at a given mixing distribution
  (the non-orthogonal plug-in moment).
* :func:`efficient_score_moment` - the score minus its projection on the
  (discretized, spectrally truncated) range of the mixing-distribution score
  operator.
* :func:`fd_moments` and :func:`fd_gmm` - functional-differencing moments
  ``h(y) - projection on span{f(.|alpha_j)}`` in ``L2(dy)`` with Gaussian
  test functions ``h(y) = phi_2(y - rho)``, and the two-step GMM/Wald arm.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import optimize

from ..linops import truncated_psd_pinv
from .dgp import DiscreteMixingDistribution

INV_2PI = 1.0 / (2.0 * np.pi)
DENSITY_FLOOR = 1e-300


def _phi(x):
    return np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)


def conditional_density(y1, y2, alpha, beta: float) -> NDArray[np.float64]:
    """``f(z | alpha) = phi(y1 - alpha) phi(y2 - beta alpha)`` on an outer grid (points x alphas)."""
    y1 = np.asarray(y1, dtype=float)[:, None]
    y2 = np.asarray(y2, dtype=float)[:, None]
    a = np.asarray(alpha, dtype=float)[None, :]
    return INV_2PI * np.exp(-0.5 * ((y1 - a) ** 2 + (y2 - beta * a) ** 2))


def score_m(y1, y2, beta: float, eta: DiscreteMixingDistribution):
    """``d log f_{beta,eta}(z) / d beta`` and the mixture density ``f``."""
    dens = conditional_density(y1, y2, eta.grid, beta) * eta.masses[None, :]
    f = dens.sum(axis=1)
    num = (dens * (eta.grid[None, :] * (np.asarray(y2)[:, None] - beta * eta.grid[None, :]))).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        m = num / f
    return m, f


@dataclass(frozen=True)
class EfficientScore:
    """Fold-level projection objects; call :meth:`evaluate` at data points."""

    beta0: float
    eta: DiscreteMixingDistribution
    alpha_tilde: NDArray[np.float64]
    coef: NDArray[np.float64]  # S^+_{ks} m on the synthetic points
    S: NDArray[np.float64]
    m_synth: NDArray[np.float64]
    right_vectors: NDArray[np.float64]  # retained right singular vectors of S
    ks: int

    def evaluate(self, y1, y2) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.bool_]]:
        """Returns ``(g, m, valid)``; points with ``f < 1e-300`` are flagged invalid and set to 0."""
        m, f = score_m(y1, y2, self.beta0, self.eta)
        valid = np.isfinite(m) & (f > DENSITY_FLOOR)
        fz = conditional_density(y1, y2, self.alpha_tilde, self.beta0)
        with np.errstate(divide="ignore", invalid="ignore"):
            row = fz / f[:, None]
        g = np.where(valid, m - np.where(valid[:, None], row, 0.0) @ self.coef, 0.0)
        return g, np.where(valid, m, 0.0), valid

    def annihilation(self) -> NDArray[np.float64]:
        """``V_ks' S' g / n_z`` on the synthetic points (zero up to rounding)."""
        g = self.m_synth - self.S @ self.coef
        return self.right_vectors.T @ (self.S.T @ g) / self.S.shape[0]


def efficient_score_moment(
    beta0: float,
    eta_hat: DiscreteMixingDistribution,
    rng: np.random.Generator,
    n_z: int = 1000,
    n_alpha: int = 100,
    ks: int = 10,
) -> EfficientScore:
    """Build the projection of the score on the orthocomplement of the UH score range.

    ``n_z`` points are drawn from ``f_{beta0, eta_hat}`` and ``n_alpha`` support
    points are resampled (with replacement) from ``eta_hat``;
    ``S[i, k] = f(z_i | alpha_k) / f(z_i)``.
    """
    a_z = rng.choice(eta_hat.grid, size=n_z, p=eta_hat.masses)
    e = rng.standard_normal((n_z, 2))
    y1 = a_z + e[:, 0]
    y2 = beta0 * a_z + e[:, 1]
    alpha_tilde = rng.choice(eta_hat.grid, size=n_alpha, p=eta_hat.masses)
    m, f = score_m(y1, y2, beta0, eta_hat)
    S = conditional_density(y1, y2, alpha_tilde, beta0) / f[:, None]
    u, s, vt = np.linalg.svd(S, full_matrices=False)
    keep = s > max(S.shape) * np.finfo(float).eps * s[0]
    keep[ks:] = False
    coef = (vt[keep].T / s[keep]) @ (u[:, keep].T @ m)
    return EfficientScore(beta0, eta_hat, alpha_tilde, coef, S, m, vt[keep].T, int(keep.sum()))


# -- functional differencing --------------------------------------------------


def fd_offsets(grid_size: int) -> NDArray[np.float64]:
    """Square lattices ``{-r..r}^2`` with 9, 25 or 49 points, ``(0, 0)`` first."""
    radius = {9: 1, 25: 2, 49: 3}.get(grid_size)
    if radius is None:
        raise ValueError("grid_size must be 9, 25 or 49")
    pts = sorted(
        itertools.product(range(-radius, radius + 1), repeat=2),
        key=lambda p: (max(abs(p[0]), abs(p[1])), abs(p[0]) + abs(p[1]), p),
    )
    return np.array(pts, dtype=float)


def fd_alpha_grid() -> NDArray[np.float64]:
    return np.round(np.linspace(-4.0, 6.0, 101), 10)


def _phi_sqrt2(x):
    return np.exp(-0.25 * x * x) / np.sqrt(4.0 * np.pi)


@dataclass
class FDProjector:
    """``g_FD(y; beta) = h(y) - sum_j c_j f(y | alpha_j)`` with ``c = G^+ b``.

    ``G`` and ``b`` are exact ``L2(R^2)`` inner products of Gaussian bumps.
    """

    offsets: NDArray[np.float64]
    alpha: NDArray[np.float64] = field(default_factory=fd_alpha_grid)
    rcond: float = 1e-10
    _cache: dict = field(default_factory=dict, repr=False)

    def coefficients(self, beta: float) -> NDArray[np.float64]:
        key = float(beta)
        if key not in self._cache:
            d = self.alpha[:, None] - self.alpha[None, :]
            G = _phi_sqrt2(d) * _phi_sqrt2(beta * d)
            b = _phi_sqrt2(self.offsets[None, :, 0] - self.alpha[:, None]) * _phi_sqrt2(
                self.offsets[None, :, 1] - beta * self.alpha[:, None]
            )
            lam_max = float(np.linalg.eigvalsh(G)[-1])
            G_pinv = truncated_psd_pinv(G, self.rcond * lam_max).pinv
            if len(self._cache) > 256:
                self._cache.clear()
            self._cache[key] = G_pinv @ b
        return self._cache[key]

    def moments(self, y1, y2, beta: float) -> NDArray[np.float64]:
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        h = INV_2PI * np.exp(
            -0.5 * ((y1[:, None] - self.offsets[None, :, 0]) ** 2 + (y2[:, None] - self.offsets[None, :, 1]) ** 2)
        )
        return h - conditional_density(y1, y2, self.alpha, beta) @ self.coefficients(beta)

    def conditional_means(self, beta: float, alphas: ArrayLike) -> NDArray[np.float64]:
        """Exact ``E[g_FD | alpha]`` (rows: alphas, columns: moments)."""
        a = np.asarray(alphas, dtype=float)
        hb = _phi_sqrt2(self.offsets[None, :, 0] - a[:, None]) * _phi_sqrt2(self.offsets[None, :, 1] - beta * a[:, None])
        d = a[:, None] - self.alpha[None, :]
        Gb = _phi_sqrt2(d) * _phi_sqrt2(beta * d)
        return hb - Gb @ self.coefficients(beta)


def fd_moments(y1, y2, beta0: float, grid_size: int) -> NDArray[np.float64]:
    return FDProjector(fd_offsets(grid_size)).moments(y1, y2, beta0)


@dataclass(frozen=True)
class GMMResult:
    beta_hat: float
    avar: float
    wald: float
    converged: bool
    diagnostics: tuple[str, ...] = ()


def fd_gmm(
    y1,
    y2,
    beta0: float,
    grid_size: int = 49,
    bounds: tuple[float, float] = (0.1, 3.0),
    projector: FDProjector | None = None,
    weight_rcond: float = 0.03,
) -> GMMResult:
    """Two-step GMM for ``beta`` on the FD moments and the Wald statistic for ``beta0``.

    The second-step weight is the inverse of the moment covariance with
    eigenvalues below ``weight_rcond * lambda_max`` discarded; with dozens of
    nearly collinear moments a smaller cut-off makes the estimated variance
    collapse and the Wald test over-reject badly.
    """
    proj = projector if projector is not None else FDProjector(fd_offsets(grid_size))
    n = len(y1)

    def gbar(b):
        return proj.moments(y1, y2, b).mean(axis=0)

    def obj_identity(b):
        g = gbar(b)
        return float(g @ g)

    r1 = optimize.minimize_scalar(obj_identity, bounds=bounds, method="bounded", options={"xatol": 1e-7})
    G1 = proj.moments(y1, y2, r1.x)
    omega = np.cov(G1, rowvar=False, bias=True)
    lam_max = float(np.linalg.eigvalsh(omega)[-1])
    W = truncated_psd_pinv(omega, weight_rcond * lam_max).pinv

    def obj_opt(b):
        g = gbar(b)
        return float(g @ W @ g)

    r2 = optimize.minimize_scalar(obj_opt, bounds=bounds, method="bounded", options={"xatol": 1e-7})
    bh = float(r2.x)
    h = 1e-5
    D = (gbar(bh + h) - gbar(bh - h)) / (2 * h)
    omega2 = np.cov(proj.moments(y1, y2, bh), rowvar=False, bias=True)
    dwd = float(D @ W @ D)
    diag: list[str] = []
    if dwd <= 1e-14:
        diag.append("singular GMM Jacobian")
        return GMMResult(bh, float("inf"), 0.0, False, tuple(diag))
    avar = float(D @ W @ omega2 @ W @ D) / dwd**2 / n
    wald = (bh - beta0) ** 2 / avar
    edge = min(bh - bounds[0], bounds[1] - bh) < 1e-4
    if edge:
        diag.append("GMM estimate at the search bound")
    return GMMResult(bh, avar, wald, bool(r1.success and r2.success and not edge), tuple(diag))
