"""Locally robust moments for ``E[alpha^k]`` in the factor-loading Kotlarski model

    Y1 = alpha + eps1,   Y2 = beta0 * alpha + eps2,

with ``alpha``, ``eps1``, ``eps2`` mutually independent and the errors
mean zero.  The building block is

    a_k = beta0 psi_k - Y2 Y1^{k-1}
          + sum_{j<k} (C(k-1, j-1) beta0 Y1^{k-j} - C(k-1, j) Y2 Y1^{k-j-1}) psi_j

whose conditional mean given ``alpha`` is ``sum_j c_{k,j} (psi_j - alpha^j)``.
The orthogonalized moment

    g_k = a_k + sum_{0<j<k} gamma_{k,j} a_j - gamma_{k,0} (Y2 - beta0 Y1)

has conditional mean ``beta0 (psi_k - alpha^k)`` and zero derivative in
``beta0`` and in the lower moments ``psi_1..psi_{k-1}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .linops import InputError

MEAN_Y1_TOL = 1e-10
SLOPE_TOL = 1e-10


class IdentificationError(ValueError):
    """A coefficient needed by the recursion is not identified (division by ~0)."""


@dataclass(frozen=True)
class KotlarskiSample:
    y1: NDArray[np.float64]
    y2: NDArray[np.float64]

    def __post_init__(self) -> None:
        y1 = np.asarray(self.y1, dtype=float).reshape(-1)
        y2 = np.asarray(self.y2, dtype=float).reshape(-1)
        if y1.shape != y2.shape:
            raise InputError("y1 and y2 must have the same length")
        if y1.size < 2:
            raise InputError("need at least two observations")
        if not (np.all(np.isfinite(y1)) and np.all(np.isfinite(y2))):
            raise InputError("sample has non-finite entries")
        object.__setattr__(self, "y1", y1)
        object.__setattr__(self, "y2", y2)

    @property
    def n(self) -> int:
        return self.y1.size


@dataclass(frozen=True)
class DataMoments:
    """``EY1[m] = E[Y1^m]`` for ``m = 0..K`` and ``EY2Y1[m] = E[Y2 Y1^m]`` for ``m = 0..K-1``."""

    EY1: NDArray[np.float64]
    EY2Y1: NDArray[np.float64]

    @classmethod
    def from_sample(cls, sample: KotlarskiSample, K: int) -> "DataMoments":
        powers = sample.y1[:, None] ** np.arange(K + 1)[None, :]
        return cls(powers.mean(axis=0), (sample.y2[:, None] * powers[:, :K]).mean(axis=0))

    @property
    def K(self) -> int:
        return self.EY1.size - 1


@dataclass(frozen=True)
class KotlarskiCoefficients:
    """Coefficients of the orthogonalized moments up to order ``K``.

    ``c[k-1, j-1] = c_{k,j}``; ``b[k-1] = b_k``; ``gamma[k-1][j] = gamma_{k,j}``
    for ``j = 0..k-1``.
    """

    K: int
    beta0: float
    c: NDArray[np.float64]
    b: NDArray[np.float64]
    gamma: tuple[NDArray[np.float64], ...]
    data_moments: DataMoments
    psi: NDArray[np.float64]


def _c_matrix(K: int, beta0: float, dm: DataMoments) -> NDArray[np.float64]:
    c = np.zeros((K, K))
    for k in range(1, K + 1):
        c[k - 1, k - 1] = beta0
        for j in range(1, k):
            c[k - 1, j - 1] = comb(k - 1, j - 1) * beta0 * dm.EY1[k - j] - comb(k - 1, j) * dm.EY2Y1[k - j - 1]
    return c


def _b_vector(K: int, dm: DataMoments, psi: NDArray[np.float64]) -> NDArray[np.float64]:
    # derivative of E[a_k] with respect to beta0
    b = np.zeros(K)
    for k in range(1, K + 1):
        b[k - 1] = psi[k - 1] + sum(comb(k - 1, j - 1) * dm.EY1[k - j] * psi[j - 1] for j in range(1, k))
    return b


def coefficients(K: int, beta0: float, data_moments: DataMoments, psi: ArrayLike) -> KotlarskiCoefficients:
    """Run the backward recursion for every order ``k <= K``.

    ``psi`` holds ``psi_1..psi_K``; ``gamma_{k,.}`` only uses ``psi_1..psi_k``
    (``psi_k`` enters ``gamma_{k,0}`` through ``b_k``).
    """
    if beta0 == 0.0:
        raise IdentificationError("beta0 must be nonzero")
    if data_moments.K < K:
        raise InputError(f"data moments only go up to order {data_moments.K}")
    psi = np.asarray(psi, dtype=float).reshape(-1)
    if psi.size < K:
        raise InputError(f"need {K} psi values, got {psi.size}")
    psi = psi[:K]
    mean_y1 = data_moments.EY1[1]
    if abs(mean_y1) <= MEAN_Y1_TOL:
        raise IdentificationError(
            "E[Y1] is numerically zero: the beta0-correction gamma_{k,0} is not identified"
        )
    c = _c_matrix(K, beta0, data_moments)
    b = _b_vector(K, data_moments, psi)
    gammas = []
    for k in range(1, K + 1):
        g = np.zeros(k)
        for j in range(k - 1, 0, -1):
            g[j] = -(c[k - 1, j - 1] + sum(g[h] * c[h - 1, j - 1] for h in range(j + 1, k))) / beta0
        g[0] = -(b[k - 1] + sum(g[h] * b[h - 1] for h in range(1, k))) / mean_y1
        gammas.append(g)
    return KotlarskiCoefficients(K, float(beta0), c, b, tuple(gammas), data_moments, psi)


def eval_a(k: int, y1: ArrayLike, y2: ArrayLike, beta0: float, psi: ArrayLike) -> NDArray[np.float64]:
    """``a_k`` evaluated at each ``(y1, y2)``; ``psi`` holds ``psi_1..psi_k``."""
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    psi = np.asarray(psi, dtype=float).reshape(-1)
    out = beta0 * psi[k - 1] - y2 * y1 ** (k - 1)
    for j in range(1, k):
        out = out + (comb(k - 1, j - 1) * beta0 * y1 ** (k - j) - comb(k - 1, j) * y2 * y1 ** (k - j - 1)) * psi[j - 1]
    return out


def eval_g(k: int, y1: ArrayLike, y2: ArrayLike, coeffs: KotlarskiCoefficients, psi_k: float | None = None):
    """Orthogonalized moment ``g_k``; ``psi_k`` overrides the stored ``psi[k-1]``.

    When ``psi_k`` is overridden the coefficients are left unchanged, so the
    caller is responsible for consistency of ``gamma_{k,0}``.
    """
    psi = coeffs.psi.copy()
    if psi_k is not None:
        psi[k - 1] = psi_k
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    gam = coeffs.gamma[k - 1]
    out = eval_a(k, y1, y2, coeffs.beta0, psi)
    for j in range(1, k):
        out = out + gam[j] * eval_a(j, y1, y2, coeffs.beta0, psi)
    return out - gam[0] * (y2 - coeffs.beta0 * y1)


@dataclass(frozen=True)
class KotlarskiEstimate:
    psi_hat: NDArray[np.float64]
    moments: NDArray[np.float64]  # n x K, column k-1 holds g_k at psi_hat
    slopes: NDArray[np.float64]
    coefficients: KotlarskiCoefficients

    def standard_errors(self) -> NDArray[np.float64]:
        """Sandwich standard errors ``sd(g_k) / (|slope_k| sqrt(n))`` (lower orders held fixed)."""
        n = self.moments.shape[0]
        return self.moments.std(axis=0) / (np.abs(self.slopes) * np.sqrt(n))


def estimate_moments(
    sample: KotlarskiSample,
    beta0: float,
    K: int,
    data_moments: DataMoments | None = None,
) -> KotlarskiEstimate:
    """Sequentially solve ``mean g_k(psi_k) = 0`` for ``k = 1..K``.

    ``g_k`` is affine in ``psi_k``: the direct term contributes ``beta0`` and
    ``gamma_{k,0}`` contributes ``mean(Y2 - beta0 Y1) / E[Y1]``, so each step
    is a single division.
    """
    if K < 1:
        raise InputError("K must be at least 1")
    dm = data_moments if data_moments is not None else DataMoments.from_sample(sample, K)
    psi = np.zeros(K)
    slopes = np.zeros(K)
    diff_mean = float(np.mean(sample.y2 - beta0 * sample.y1))
    for k in range(1, K + 1):
        psi[k - 1] = 0.0
        coeffs = coefficients(k, beta0, dm, psi[:k])
        intercept = float(np.mean(eval_g(k, sample.y1, sample.y2, coeffs)))
        slope = beta0 + diff_mean / dm.EY1[1]
        if abs(slope) < SLOPE_TOL:
            raise IdentificationError(f"moment of order {k} has zero slope in psi_{k}")
        psi[k - 1] = -intercept / slope
        slopes[k - 1] = slope
    coeffs = coefficients(K, beta0, dm, psi)
    values = np.column_stack([eval_g(k, sample.y1, sample.y2, coeffs) for k in range(1, K + 1)])
    return KotlarskiEstimate(psi, values, slopes, coeffs)
