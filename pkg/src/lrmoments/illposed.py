"""Regularized solutions of discretized first-kind equations ``K h = phi``.

The operator is represented by its collocation matrix; the three schemes
(Landweber-Fridman iteration, Tikhonov, spectral cut-off) all converge to
the minimum-norm least-squares solution as their regularization vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .linops import InputError, pseudo_inverse


@dataclass(frozen=True)
class DiscretizedOperator:
    """Collocation matrix ``K`` (``n_out x n_in``).

    ``weight_convention`` records the scaling applied to the kernel values:
    ``"column_average"`` means ``K[i, j] = k(out_i, in_j) / n_in``.
    """

    K: NDArray[np.float64]
    out_grid: NDArray[np.float64]
    in_grid: NDArray[np.float64]
    weight_convention: str = "column_average"

    def __post_init__(self) -> None:
        k = np.asarray(self.K, dtype=float)
        if k.ndim != 2:
            raise InputError("K must be a matrix")
        if not np.all(np.isfinite(k)):
            raise InputError("K has non-finite entries")
        if len(self.out_grid) != k.shape[0] or len(self.in_grid) != k.shape[1]:
            raise InputError("grid lengths do not match K")
        object.__setattr__(self, "K", k)

    @classmethod
    def from_matrix(cls, K: ArrayLike) -> "DiscretizedOperator":
        k = np.asarray(K, dtype=float)
        if k.ndim != 2:
            raise InputError("K must be a matrix")
        return cls(k, np.arange(k.shape[0]), np.arange(k.shape[1]), "none")

    @property
    def shape(self) -> tuple[int, int]:
        return self.K.shape


def collocate(kernel: Callable, out_grid: ArrayLike, in_grid: ArrayLike) -> DiscretizedOperator:
    """``K[i, j] = kernel(out_i, in_j) / n_in``.

    ``kernel`` is called once per pair, so it may accept scalars or tuples
    (e.g. bivariate output points).
    """
    out_pts = list(out_grid)
    in_pts = list(in_grid)
    if not out_pts or not in_pts:
        raise InputError("grids must be nonempty")
    n_in = len(in_pts)
    K = np.empty((len(out_pts), n_in))
    for i, zo in enumerate(out_pts):
        for j, a in enumerate(in_pts):
            v = float(kernel(zo, a))
            if not np.isfinite(v):
                raise InputError(f"kernel is not finite at out[{i}]={zo!r}, in[{j}]={a!r}")
            K[i, j] = v / n_in
    return DiscretizedOperator(K, np.asarray(out_pts), np.asarray(in_pts), "column_average")


@dataclass(frozen=True)
class LandweberFridman:
    steps: int = 1000
    c: float | None = None  # defaults to 1 / sigma_max^2

    def __post_init__(self) -> None:
        if self.steps < 0:
            raise InputError("steps must be nonnegative")
        if self.c is not None and not 0.0 < self.c:
            raise InputError("c must be positive")


@dataclass(frozen=True)
class Tikhonov:
    gamma: float | None = None  # defaults to 1e-4 sigma_max^2

    def __post_init__(self) -> None:
        if self.gamma is not None and not self.gamma > 0:
            raise InputError("gamma must be positive")


@dataclass(frozen=True)
class SpectralCutoff:
    ks: int | None = None
    threshold: float | None = None

    def __post_init__(self) -> None:
        if self.ks is not None and self.ks < 0:
            raise InputError("ks must be nonnegative")
        if self.threshold is not None and self.threshold < 0:
            raise InputError("threshold must be nonnegative")


RegularizationScheme = Union[LandweberFridman, Tikhonov, SpectralCutoff]


@dataclass(frozen=True)
class Solution:
    h: NDArray[np.float64]
    diagnostics: tuple[str, ...] = field(default=())


def _matrix(op) -> NDArray[np.float64]:
    return op.K if isinstance(op, DiscretizedOperator) else np.asarray(op, dtype=float)


def min_norm_solution(op, rhs: ArrayLike) -> NDArray[np.float64]:
    """``(K'K)^+ K' rhs``."""
    K = _matrix(op)
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != K.shape[0]:
        raise InputError("rhs length does not match the operator")
    return pseudo_inverse(K.T @ K) @ (K.T @ rhs)


def spectral_pinv(K: ArrayLike, ks: int | None = None, threshold: float | None = None):
    """SVD pseudo-inverse keeping the top ``ks`` singular values (and those above ``threshold``)."""
    K = np.asarray(K, dtype=float)
    u, s, vt = np.linalg.svd(K, full_matrices=False)
    keep = s > max(K.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    if ks is not None:
        keep[ks:] = False
    if threshold is not None:
        keep &= s >= threshold
    inv = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    return (vt.T * inv) @ u.T


def solve(op, rhs: ArrayLike, scheme: RegularizationScheme) -> Solution:
    K = _matrix(op)
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != K.shape[0]:
        raise InputError("rhs length does not match the operator")
    smax = float(np.linalg.norm(K, 2)) if K.size else 0.0
    diag: list[str] = []
    if isinstance(scheme, LandweberFridman):
        if smax == 0.0:
            return Solution(np.zeros(K.shape[1]), ("zero operator",))
        c = scheme.c if scheme.c is not None else 1.0 / smax**2
        if c * smax**2 > 1.0:
            diag.append(f"c={c:.3g} violates c*sigma_max^2 <= 1; rescaled")
            c = 1.0 / smax**2
        kt_rhs = K.T @ rhs
        ktk = K.T @ K
        h = c * kt_rhs
        for _ in range(scheme.steps):
            h = h - c * (ktk @ h) + c * kt_rhs
        return Solution(h, tuple(diag))
    if isinstance(scheme, Tikhonov):
        gamma = scheme.gamma if scheme.gamma is not None else 1e-4 * smax**2
        p = K.shape[1]
        return Solution(np.linalg.solve(gamma * np.eye(p) + K.T @ K, K.T @ rhs))
    if isinstance(scheme, SpectralCutoff):
        return Solution(spectral_pinv(K, scheme.ks, scheme.threshold) @ rhs)
    raise TypeError(f"unknown scheme {scheme!r}")


def range_projection(K: ArrayLike, ks: int | None = None) -> NDArray[np.float64]:
    """Orthogonal projector onto the span of the top-``ks`` left singular vectors of ``K``."""
    K = np.asarray(K, dtype=float)
    u, s, _ = np.linalg.svd(K, full_matrices=False)
    keep = s > max(K.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    if ks is not None:
        keep[ks:] = False
    u = u[:, keep]
    return u @ u.T
