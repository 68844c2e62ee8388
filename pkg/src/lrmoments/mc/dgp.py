"""Simulation design: discretized normal heterogeneity on an 81-point grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from ..distributions import normal_cdf
from ..kotlarski import KotlarskiSample
from ..rng import generator


@dataclass(frozen=True)
class DiscreteMixingDistribution:
    grid: NDArray[np.float64]
    masses: NDArray[np.float64]

    def __post_init__(self) -> None:
        if self.grid.shape != self.masses.shape:
            raise ValueError("grid and masses differ in length")
        if np.any(self.masses < 0) or abs(self.masses.sum() - 1.0) > 1e-12:
            raise ValueError("masses must be nonnegative and sum to one")

    @property
    def mean(self) -> float:
        return float(self.masses @ self.grid)

    @property
    def variance(self) -> float:
        return float(self.masses @ (self.grid - self.mean) ** 2)


def alpha_grid() -> NDArray[np.float64]:
    return np.round(np.linspace(-3.0, 5.0, 81), 10)


def eta_grid() -> DiscreteMixingDistribution:
    """Normal CDF increments between grid midpoints; end cells absorb the tails."""
    grid = alpha_grid()
    mids = 0.5 * (grid[1:] + grid[:-1])
    cdf = normal_cdf(mids)
    masses = np.diff(np.concatenate([[0.0], cdf, [1.0]]))
    return DiscreteMixingDistribution(grid, masses)


def sample_dgp(
    n: int,
    beta0: float,
    eta: DiscreteMixingDistribution,
    seed: int | np.random.Generator,
) -> KotlarskiSample:
    """``Y1 = alpha + e1``, ``Y2 = beta0 alpha + e2`` with standard normal errors."""
    rng = seed if isinstance(seed, np.random.Generator) else generator(seed)
    alpha = rng.choice(eta.grid, size=n, p=eta.masses)
    e = rng.standard_normal((n, 2))
    return KotlarskiSample(alpha + e[:, 0], beta0 * alpha + e[:, 1])
