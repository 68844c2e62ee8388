"""Hermite-series moments for analytic functionals in ``Y = alpha + theta u``.

With ``u ~ N(0, 1)`` independent of ``alpha`` the probabilists' Hermite
polynomials satisfy ``E[theta^k He_k(Y / theta) | alpha] = alpha^k``, so an
analytic ``r(alpha) = sum_j r_j alpha^j`` is matched by

    g0(Y, theta) = sum_j theta^j r_j He_j(Y / theta),

and ``g = g0 - psi - Gamma g1`` with ``Gamma = E[dg0/dtheta] / E[dg1/dtheta]``
is insensitive to first-order errors in ``theta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .linops import InputError

J_MAX = 60
TAIL_TOL = 1e-10
RELEVANCE_TOL = 1e-8


class AdmissibilityError(ValueError):
    """The coefficient sequence does not define an admissible analytic functional."""


class RelevanceError(ValueError):
    """The auxiliary moment has (numerically) zero mean derivative in theta."""


def hermite_all(J: int, x: ArrayLike) -> NDArray[np.float64]:
    """``He_0..He_J`` at ``x``; returns shape ``(J + 1,) + x.shape``."""
    x = np.asarray(x, dtype=float)
    out = np.empty((J + 1,) + x.shape)
    out[0] = 1.0
    if J >= 1:
        out[1] = x
    for j in range(1, J):
        out[j + 1] = x * out[j] - j * out[j - 1]
    return out


def hermite(j: int, x: ArrayLike) -> NDArray[np.float64]:
    """Probabilists' Hermite polynomial ``He_j`` by the three-term recursion."""
    if j < 0:
        raise InputError("Hermite order must be nonnegative")
    return hermite_all(j, x)[j]


def _scaled_all(J: int, y: ArrayLike, theta: float) -> NDArray[np.float64]:
    """``theta^j He_j(y / theta)`` for ``j = 0..J``.

    Uses the scaled recursion ``P_{j+1} = y P_j - j theta^2 P_{j-1}``, which
    avoids forming ``y / theta`` and large powers of ``theta`` separately.
    """
    y = np.asarray(y, dtype=float)
    t2 = theta * theta
    out = np.empty((J + 1,) + y.shape)
    out[0] = 1.0
    if J >= 1:
        out[1] = y
    for j in range(1, J):
        out[j + 1] = y * out[j] - j * t2 * out[j - 1]
    return out


def moment_basis(k: int, y: ArrayLike, theta: float) -> NDArray[np.float64]:
    """``theta^k He_k(y / theta)``, whose conditional mean given alpha is ``alpha^k``."""
    if theta <= 0:
        raise InputError("theta must be positive")
    if k < 0:
        raise InputError("order must be nonnegative")
    return _scaled_all(k, y, theta)[k]


@dataclass(frozen=True)
class AnalyticFunctional:
    """``r(alpha) = sum_j r_j alpha^j``.

    ``r_coeffs`` may be a finite sequence or a callable ``j -> r_j``
    (evaluated up to :data:`J_MAX`).  ``dr_coeffs`` optionally gives the
    theta-derivatives of the coefficients when ``r`` depends on theta.
    """

    r_coeffs: Sequence[float] | Callable[[int], float]
    J: int | None = None
    R: float = 0.5
    dr_coeffs: Sequence[float] | Callable[[int], float] | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.R < 1.0:
            raise AdmissibilityError("R must lie in (0, 1)")
        if self.J is not None and not 0 <= self.J <= J_MAX:
            raise AdmissibilityError(f"J must lie in [0, {J_MAX}]")

    def coeffs(self, J: int) -> NDArray[np.float64]:
        return _coeff_array(self.r_coeffs, J)

    def dcoeffs(self, J: int) -> NDArray[np.float64]:
        if self.dr_coeffs is None:
            return np.zeros(J + 1)
        return _coeff_array(self.dr_coeffs, J)

    @property
    def finite_order(self) -> int | None:
        if callable(self.r_coeffs):
            return None
        return len(self.r_coeffs) - 1


def _coeff_array(src, J: int) -> NDArray[np.float64]:
    if callable(src):
        arr = np.array([float(src(j)) for j in range(J + 1)])
    else:
        arr = np.zeros(J + 1)
        vals = np.asarray(list(src), dtype=float)[: J + 1]
        arr[: vals.size] = vals
    if not np.all(np.isfinite(arr)):
        raise AdmissibilityError("coefficients must be finite")
    return arr


def check_admissible(functional: AnalyticFunctional, theta: float, J: int) -> float:
    """Check that ``sum_j j! theta^{2j} r_j^2 / R^j`` converges.

    Returns the partial sum.  For finite sequences the sum is trivially
    finite; otherwise the ratio of the last two nonzero terms must be < 1.
    """
    r = functional.coeffs(J)
    j = np.arange(J + 1)
    logs = np.full(J + 1, -np.inf)
    nz = r != 0
    logs[nz] = (
        np.array([math.lgamma(k + 1) for k in j[nz]])
        + 2 * j[nz] * math.log(theta)
        + 2 * np.log(np.abs(r[nz]))
        - j[nz] * math.log(functional.R)
    )
    if not np.all(np.isfinite(logs[nz])):
        raise AdmissibilityError("key sum has non-finite terms")
    if functional.finite_order is None:
        idx = np.flatnonzero(nz)
        if idx.size >= 2 and logs[idx[-1]] - logs[idx[-2]] >= 0.0:
            raise AdmissibilityError(
                "key sum sum_j j! theta^(2j) r_j^2 / R^j diverges (tail ratio >= 1)"
            )
    total = float(np.sum(np.exp(logs[nz]))) if np.any(nz) else 0.0
    if not math.isfinite(total):
        raise AdmissibilityError("key sum overflows")
    return total


def choose_J(functional: AnalyticFunctional, y_max: float, theta: float) -> int:
    """Smallest ``J`` whose first omitted term is below ``TAIL_TOL`` at ``y_max``, capped at ``J_MAX``."""
    if functional.J is not None:
        return functional.J
    if functional.finite_order is not None:
        return min(functional.finite_order, J_MAX)
    r = functional.coeffs(J_MAX)
    basis = np.abs(_scaled_all(J_MAX, np.array([y_max]), theta)[:, 0])
    terms = np.abs(r) * basis
    for J in range(J_MAX):
        if np.all(terms[J + 1 : min(J + 4, J_MAX + 1)] < TAIL_TOL):
            return J
    return J_MAX


@dataclass(frozen=True)
class MomentValue:
    value: NDArray[np.float64]
    tail_bound: NDArray[np.float64]
    J: int


def analytic_moment(functional: AnalyticFunctional, y: ArrayLike, theta: float) -> MomentValue:
    """Truncated series ``sum_{j<=J} theta^j r_j He_j(y/theta)`` plus the first omitted term."""
    if theta <= 0:
        raise InputError("theta must be positive")
    y = np.asarray(y, dtype=float)
    y_max = float(np.max(np.abs(y))) if y.size else 0.0
    J = choose_J(functional, y_max, theta)
    check_admissible(functional, theta, J)
    r = functional.coeffs(J + 1)
    basis = _scaled_all(J + 1, y, theta)
    value = np.tensordot(r[: J + 1], basis[: J + 1], axes=(0, 0))
    tail = np.abs(r[J + 1] * basis[J + 1])
    return MomentValue(value, tail, J)


def moment_derivative(functional: AnalyticFunctional, y: ArrayLike, theta: float, J: int) -> NDArray[np.float64]:
    """``d g0 / d theta`` for the truncated series.

    ``d/dtheta [theta^j He_j(y/theta)] = -j (j-1) theta^{j-1} He_{j-2}(y/theta)``
    (from ``He_j' = j He_{j-1}`` and ``x He_{j-1} - He_j = (j-1) He_{j-2}``),
    plus ``dr_j/dtheta`` terms when the coefficients depend on theta.
    """
    y = np.asarray(y, dtype=float)
    r = functional.coeffs(J)
    dr = functional.dcoeffs(J)
    basis = _scaled_all(J, y, theta)
    out = np.tensordot(dr, basis, axes=(0, 0))
    for j in range(2, J + 1):
        out = out - r[j] * j * (j - 1) * theta * basis[j - 2]
    return out


@dataclass(frozen=True)
class AuxiliaryMoment:
    """Caller-supplied estimating equation for ``theta`` and its theta-derivative."""

    g1: Callable[[NDArray[np.float64], float], NDArray[np.float64]]
    dg1: Callable[[NDArray[np.float64], float], NDArray[np.float64]]


def variance_auxiliary(mu_y: float, sigma2_alpha: float) -> AuxiliaryMoment:
    """``g1 = (y - mu_Y)^2 - theta^2 - sigma_alpha^2`` with known ``sigma_alpha^2``."""
    return AuxiliaryMoment(
        g1=lambda y, th: (np.asarray(y) - mu_y) ** 2 - th * th - sigma2_alpha,
        dg1=lambda y, th: np.full(np.shape(y), -2.0 * th),
    )


@dataclass(frozen=True)
class OrthogonalMoment:
    Gamma0: float
    J: int
    theta: float
    psi0: float
    functional: AnalyticFunctional
    aux: AuxiliaryMoment
    diagnostics: tuple[str, ...] = field(default=())

    def __call__(self, y: ArrayLike, theta: float | None = None) -> NDArray[np.float64]:
        th = self.theta if theta is None else theta
        y = np.asarray(y, dtype=float)
        g0 = _series(self.functional, y, th, self.J)
        return g0 - self.psi0 - self.Gamma0 * self.aux.g1(y, th)


def _series(functional: AnalyticFunctional, y, theta: float, J: int) -> NDArray[np.float64]:
    return np.tensordot(functional.coeffs(J), _scaled_all(J, y, theta), axes=(0, 0))


def tail_diagnostic(y: ArrayLike, theta: float, R: float, cap: float = 1e300) -> float:
    """Fraction of observations where ``exp(c y^2)`` exceeds ``cap``, ``c = 2R / (theta^2 (1 + R))``."""
    y = np.asarray(y, dtype=float)
    c = 2.0 * R / (theta * theta * (1.0 + R))
    return float(np.mean(c * y * y > math.log(cap)))


def orthogonalize(
    functional: AnalyticFunctional,
    aux: AuxiliaryMoment,
    sample: ArrayLike,
    theta_hat: float,
    psi0: float,
) -> OrthogonalMoment:
    """``Gamma0 = mean(dg0/dtheta) / mean(dg1/dtheta)`` and the moment ``g0 - psi0 - Gamma0 g1``."""
    if theta_hat <= 0:
        raise InputError("theta must be positive")
    y = np.asarray(sample, dtype=float)
    J = analytic_moment(functional, y, theta_hat).J
    d1 = float(np.mean(aux.dg1(y, theta_hat)))
    if abs(d1) < RELEVANCE_TOL:
        raise RelevanceError("auxiliary moment has zero mean theta-derivative")
    d0 = float(np.mean(moment_derivative(functional, y, theta_hat, J)))
    diag = []
    frac = tail_diagnostic(y, theta_hat, functional.R)
    if frac > 0:
        diag.append(f"exp(c y^2) overflow on {frac:.3g} of the sample")
    return OrthogonalMoment(d0 / d1, J, theta_hat, psi0, functional, aux, tuple(diag))


def exp_functional(t0: float, J: int | None = None) -> AnalyticFunctional:
    """``r(alpha) = exp(t0 alpha)``, ``r_j = t0^j / j!``."""
    return AnalyticFunctional(lambda j: t0**j / math.factorial(j), J=J)


def monomial(k: int) -> AnalyticFunctional:
    r = [0.0] * (k + 1)
    r[k] = 1.0
    return AnalyticFunctional(r)
