"""Within/between projections and regularized pseudo-inverses.

Every moment in the panel modules is built from the per-unit operators

    Q = I_T - V V^+      (annihilates V alpha)
    H = V^+              (recovers alpha from V alpha)

and their second-order (Kronecker) counterparts.  The eigenvalue-truncated
pseudo-inverse is the regularized inverse used for M, B and the weighting
matrix of the score test.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

PSD_TOLERANCE = 1e-8


class InputError(ValueError):
    """Raised on malformed numeric input (non-finite entries, bad shapes)."""


def _as_finite_matrix(a: ArrayLike, name: str) -> NDArray[np.float64]:
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InputError(f"{name} must be a matrix, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} has non-finite entries")
    return arr


def pseudo_inverse(a: ArrayLike) -> NDArray[np.float64]:
    """Moore-Penrose inverse via SVD.

    Singular values below ``max(m, n) * eps * sigma_max`` are treated as zero.
    A column vector input is interpreted as an ``m x 1`` matrix.
    """
    a = _as_finite_matrix(a, "A")
    m, n = a.shape
    if a.size == 0:
        return np.zeros((n, m))
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((n, m))
    cutoff = max(m, n) * np.finfo(float).eps * s[0]
    s_inv = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    return (vt.T * s_inv) @ u.T


@dataclass(frozen=True)
class ProjectionPair:
    """Within operator ``Q`` (T x T) and between operator ``H`` (q x T)."""

    Q: NDArray[np.float64]
    H: NDArray[np.float64]

    @property
    def T(self) -> int:
        return self.Q.shape[0]

    @property
    def q(self) -> int:
        return self.H.shape[0]


def projections(V: ArrayLike) -> ProjectionPair:
    """Generalized within/between operators for one unit's ``T x q`` matrix V."""
    v = _as_finite_matrix(V, "V")
    h = pseudo_inverse(v)
    q_mat = np.eye(v.shape[0]) - v @ h
    # symmetrize: V V^+ is an orthogonal projector, rounding breaks symmetry
    q_mat = 0.5 * (q_mat + q_mat.T)
    return ProjectionPair(Q=q_mat, H=h)


def batch_projections(V: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Vectorized :func:`projections` over an ``n x T x q`` stack.

    Returns ``(Q, H)`` with shapes ``n x T x T`` and ``n x q x T``.
    """
    v = np.asarray(V, dtype=float)
    if v.ndim != 3:
        raise InputError("V stack must have shape (n, T, q)")
    if not np.all(np.isfinite(v)):
        raise InputError("V has non-finite entries")
    n, t, _ = v.shape
    h = np.linalg.pinv(v, rcond=max(v.shape[1:]) * np.finfo(float).eps)
    q_mat = np.eye(t)[None, :, :] - v @ h
    q_mat = 0.5 * (q_mat + np.swapaxes(q_mat, 1, 2))
    return q_mat, h


@dataclass(frozen=True)
class SecondOrderProjections:
    """``QQ = I - (I-Q) kron (I-Q)`` and ``HH = H kron H``."""

    QQ: NDArray[np.float64]
    HH: NDArray[np.float64]


def second_order(P: ProjectionPair) -> SecondOrderProjections:
    t = P.T
    p_v = np.eye(t) - P.Q
    return SecondOrderProjections(
        QQ=np.eye(t * t) - np.kron(p_v, p_v),
        HH=np.kron(P.H, P.H),
    )


def batch_second_order(
    Q: NDArray[np.float64], H: NDArray[np.float64]
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Stacked version of :func:`second_order` (``n x T^2 x T^2``, ``n x q^2 x T^2``)."""
    n, t, _ = Q.shape
    q = H.shape[1]
    p_v = np.eye(t)[None] - Q
    kron_p = np.einsum("nab,ncd->nacbd", p_v, p_v).reshape(n, t * t, t * t)
    qq = np.eye(t * t)[None] - kron_p
    hh = np.einsum("nab,ncd->nacbd", H, H).reshape(n, q * q, t * t)
    return qq, hh


@dataclass(frozen=True)
class TruncatedPseudoInverse:
    """Eigendecomposition of a symmetric PSD matrix with hard-thresholded spectrum.

    Attributes
    ----------
    eigenvalues:
        Nonincreasing eigenvalues of the (symmetrized, clamped) source matrix.
    eigenvectors:
        Orthonormal columns matching ``eigenvalues``.
    threshold:
        Eigenvalues strictly below this level are zeroed.
    rank:
        Number of retained eigenvalues.
    pinv:
        ``U diag(1/lambda_i for retained i) U'``.
    diagnostics:
        Human-readable notes (negative eigenvalues clamped, etc.).
    """

    eigenvalues: NDArray[np.float64]
    eigenvectors: NDArray[np.float64]
    threshold: float
    rank: int
    pinv: NDArray[np.float64]
    diagnostics: tuple[str, ...] = field(default=())

    @property
    def truncated(self) -> NDArray[np.float64]:
        """The thresholded matrix ``U Lambda(nu) U'`` itself."""
        lam = np.where(self._kept, self.eigenvalues, 0.0)
        return (self.eigenvectors * lam) @ self.eigenvectors.T

    @property
    def _kept(self) -> NDArray[np.bool_]:
        kept = np.zeros(self.eigenvalues.shape, dtype=bool)
        kept[: self.rank] = True
        return kept


def truncated_psd_pinv(M: ArrayLike, nu: float) -> TruncatedPseudoInverse:
    """Spectral hard-threshold pseudo-inverse of a symmetric PSD matrix.

    Eigenvalues ``>= nu`` are inverted, the rest set to zero.  With ``nu = 0``
    exact zeros (and eigenvalues at rounding level, i.e. below
    ``k * eps * lambda_max``) are still discarded so the result matches
    :func:`pseudo_inverse` on PSD input.
    """
    m = _as_finite_matrix(M, "M")
    if m.shape[0] != m.shape[1]:
        raise InputError(f"M must be square, got {m.shape}")
    if nu < 0:
        raise InputError("threshold nu must be nonnegative")
    k = m.shape[0]
    diagnostics: list[str] = []
    asym = np.max(np.abs(m - m.T)) if k else 0.0
    scale = max(1.0, float(np.max(np.abs(m)))) if k else 1.0
    if asym > PSD_TOLERANCE * scale:
        diagnostics.append(f"input asymmetric by {asym:.3g}; symmetrized")
    m = 0.5 * (m + m.T)
    if k == 0:
        return TruncatedPseudoInverse(
            np.zeros(0), np.zeros((0, 0)), float(nu), 0, np.zeros((0, 0)), ()
        )
    lam, u = np.linalg.eigh(m)
    order = np.argsort(lam)[::-1]
    lam, u = lam[order], u[:, order]
    if lam[-1] < -PSD_TOLERANCE * scale:
        diagnostics.append(
            f"matrix not PSD: min eigenvalue {lam[-1]:.3g}; negative part clamped"
        )
    lam = np.where(lam < 0.0, 0.0, lam)
    floor = k * np.finfo(float).eps * max(lam[0], 0.0)
    keep = (lam >= nu) & (lam > floor)
    rank = int(np.count_nonzero(keep))
    inv = np.zeros_like(lam)
    inv[keep] = 1.0 / lam[keep]
    pinv = (u * inv) @ u.T
    return TruncatedPseudoInverse(
        eigenvalues=lam,
        eigenvectors=u,
        threshold=float(nu),
        rank=rank,
        pinv=0.5 * (pinv + pinv.T),
        diagnostics=tuple(diagnostics),
    )


def truncated_svd_pinv(A: ArrayLike, nu: float) -> tuple[NDArray[np.float64], int]:
    """Pseudo-inverse of a rectangular matrix keeping singular values ``>= nu``.

    Returns ``(pinv, rank)``.  Singular values at rounding level are always
    dropped, so ``nu = 0`` reproduces :func:`pseudo_inverse`.
    """
    a = _as_finite_matrix(A, "A")
    if nu < 0:
        raise InputError("threshold nu must be nonnegative")
    m, n = a.shape
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((n, m)), 0
    keep = (s >= nu) & (s > max(m, n) * np.finfo(float).eps * s[0])
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (vt.T * inv) @ u.T, int(np.count_nonzero(keep))
