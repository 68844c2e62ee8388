"""Synthetic natality-like panel with known population targets.

Mothers (units) have ``T`` births.  The outcome is birth weight (kg), the
heterogeneity regressors are ``V = [1, smoke]`` so ``alpha_i`` holds the
mother-specific intercept and smoking effect, and ``W`` holds ``p`` controls
with a sparse coefficient vector.  Smoking status varies within every
mother so each ``V_i`` has full column rank.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .panel_moments import PanelDataset
from .rng import generator

ALPHA_MEAN = np.array([3.4, -0.15])
ALPHA_SD = np.array([0.35, 0.08])
ALPHA_CORR = -0.3
SIGMA_EPS = 0.3


@dataclass(frozen=True)
class SyntheticTruth:
    beta: np.ndarray
    alpha_mean: np.ndarray
    alpha_second_moment: np.ndarray  # E[alpha alpha']
    sigma2: float

    def quadratic(self, omega: np.ndarray) -> float:
        return float(np.sum(omega * self.alpha_second_moment))


def truth(p: int = 10) -> SyntheticTruth:
    beta = np.zeros(p)
    beta[:3] = [0.08, -0.05, 0.03]
    cov = np.array(
        [
            [ALPHA_SD[0] ** 2, ALPHA_CORR * ALPHA_SD[0] * ALPHA_SD[1]],
            [ALPHA_CORR * ALPHA_SD[0] * ALPHA_SD[1], ALPHA_SD[1] ** 2],
        ]
    )
    return SyntheticTruth(beta, ALPHA_MEAN.copy(), cov + np.outer(ALPHA_MEAN, ALPHA_MEAN), SIGMA_EPS**2)


def natality_like(n: int = 200, T: int = 3, p: int = 10, seed: int = 20261016) -> PanelDataset:
    rng = generator(seed)
    tr = truth(p)
    # smoking pattern: at least one smoking and one non-smoking birth per mother
    smoke = rng.integers(0, 2, size=(n, T)).astype(float)
    flat = smoke.min(axis=1) == smoke.max(axis=1)
    flip = rng.integers(0, T, size=n)
    smoke[flat, flip[flat]] = 1.0 - smoke[flat, flip[flat]]
    V = np.stack([np.ones((n, T)), smoke], axis=2)

    chol = np.linalg.cholesky(tr.alpha_second_moment - np.outer(tr.alpha_mean, tr.alpha_mean))
    alpha = tr.alpha_mean + rng.standard_normal((n, 2)) @ chol.T
    # controls: mother-level component correlated with alpha plus birth-level noise
    level = 0.5 * (alpha[:, :1] - tr.alpha_mean[0]) / ALPHA_SD[0]
    W = level[:, :, None] + rng.standard_normal((n, T, p))
    W[:, :, 0] += 0.4 * smoke
    eps = SIGMA_EPS * rng.standard_normal((n, T))
    Y = np.einsum("itp,p->it", W, tr.beta) + np.einsum("itq,iq->it", V, alpha) + eps
    ids = tuple(f"m{i + 1:04d}" for i in range(n))
    return PanelDataset(Y, W, V, ids)
