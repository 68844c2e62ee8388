"""Locally robust moments for the high-dimensional random coefficient panel

    Y_i = W_i beta_0 + V_i alpha_i + eps_i,   E[eps_i | alpha_i, W_i, V_i] = 0.

Three targets are supported:

* ``BetaCombination``: ``psi = C1' beta_0``
* ``AlphaMean``: ``psi = E[C2' alpha]``
* ``AlphaQuadratic``: ``psi = E[alpha' Omega alpha]`` under ``vec(Sigma) = S2 omega``

Nuisance builders take a training subsample (and optional probability
weights, used by the enumeration oracles) and return the fold-specific
plug-ins.  Moment evaluators are vectorized over units and return an
``n x k`` array.  Every moment is affine in ``psi``:
``g_i(psi) = a_i - B_i psi``; :func:`moment_parts` exposes ``(a_i, B_i)``.

Sign conventions: the correction matrices are chosen so that the
expectation of each moment has zero derivative in beta.  For the mean
target this is ``Gamma = C2' S1 M^+`` paired with ``(C2'H - Gamma W'Q)``; for
the quadratic target ``Gamma_beta = -L M^+`` with ``L`` as defined in
:func:`nuisance_variance`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import lasso_panel
from .linops import (
    InputError,
    TruncatedPseudoInverse,
    batch_projections,
    batch_second_order,
    pseudo_inverse,
    truncated_psd_pinv,
    truncated_svd_pinv,
)

FULL_RANK_TOL = 1e-8
SUPPORT_TOL = 1e-8


@dataclass
class PanelDataset:
    """Balanced panel: ``Y`` (n x T), ``W`` (n x T x p), ``V`` (n x T x q)."""

    Y: NDArray[np.float64]
    W: NDArray[np.float64]
    V: NDArray[np.float64]
    unit_ids: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        self.Y = np.asarray(self.Y, dtype=float)
        self.W = np.asarray(self.W, dtype=float)
        self.V = np.asarray(self.V, dtype=float)
        if self.W.ndim == 2:
            self.W = self.W[:, :, None]
        if self.V.ndim == 2:
            self.V = self.V[:, :, None]
        if self.Y.ndim != 2:
            raise InputError(f"Y must be n x T, got shape {self.Y.shape}")
        n, t = self.Y.shape
        if self.W.shape[:2] != (n, t) or self.V.shape[:2] != (n, t):
            raise InputError(
                f"inconsistent shapes Y{self.Y.shape} W{self.W.shape} V{self.V.shape}"
            )
        for name in ("Y", "W", "V"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise InputError(f"{name} has non-finite entries")
        if self.unit_ids is not None and len(self.unit_ids) != n:
            raise InputError("unit_ids length differs from the number of units")

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def T(self) -> int:
        return self.Y.shape[1]

    @property
    def p(self) -> int:
        return self.W.shape[2]

    @property
    def q(self) -> int:
        return self.V.shape[2]

    @cached_property
    def projections(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Stacked ``(Q_i, H_i)``."""
        return batch_projections(self.V)

    @property
    def Q(self) -> NDArray[np.float64]:
        return self.projections[0]

    @property
    def H(self) -> NDArray[np.float64]:
        return self.projections[1]

    @cached_property
    def second_order(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        return batch_second_order(self.Q, self.H)

    def subset(self, idx: ArrayLike) -> "PanelDataset":
        idx = np.asarray(idx, dtype=int)
        ids = None if self.unit_ids is None else tuple(self.unit_ids[i] for i in idx)
        out = PanelDataset(self.Y[idx], self.W[idx], self.V[idx], ids)
        if "projections" in self.__dict__:
            q, h = self.projections
            out.__dict__["projections"] = (q[idx], h[idx])
        return out

    def order_condition_violations(self) -> NDArray[np.int64]:
        """Units with ``rank(V_i) >= T`` (no within variation left)."""
        ranks = np.linalg.matrix_rank(self.V)
        return np.flatnonzero(np.atleast_1d(ranks) >= self.T)


# -- targets -----------------------------------------------------------------


def _check_full_column_rank(c: NDArray[np.float64], name: str) -> None:
    s = np.linalg.svd(c, compute_uv=False)
    if s.size == 0 or s[-1] <= FULL_RANK_TOL or c.shape[1] > c.shape[0]:
        raise InputError(f"{name} must have full column rank")


@dataclass(frozen=True)
class BetaCombination:
    C1: NDArray[np.float64]

    def __post_init__(self) -> None:
        c = np.asarray(self.C1, dtype=float)
        object.__setattr__(self, "C1", c[:, None] if c.ndim == 1 else c)
        _check_full_column_rank(self.C1, "C1")

    @property
    def k(self) -> int:
        return self.C1.shape[1]

    @cached_property
    def H_C1(self) -> NDArray[np.float64]:
        return self.C1 @ np.linalg.inv(self.C1.T @ self.C1)

    @cached_property
    def Q_C1(self) -> NDArray[np.float64]:
        return np.eye(self.C1.shape[0]) - self.H_C1 @ self.C1.T


@dataclass(frozen=True)
class AlphaMean:
    C2: NDArray[np.float64]

    def __post_init__(self) -> None:
        c = np.asarray(self.C2, dtype=float)
        object.__setattr__(self, "C2", c[:, None] if c.ndim == 1 else c)
        if np.any(c):
            _check_full_column_rank(self.C2, "C2")

    @property
    def k(self) -> int:
        return self.C2.shape[1]


@dataclass(frozen=True)
class AlphaQuadratic:
    Omega: NDArray[np.float64]
    S2: NDArray[np.float64]

    def __post_init__(self) -> None:
        om = np.atleast_2d(np.asarray(self.Omega, dtype=float))
        s2 = np.asarray(self.S2, dtype=float)
        if s2.ndim == 1:
            s2 = s2[:, None]
        if om.shape[0] != om.shape[1] or np.max(np.abs(om - om.T), initial=0.0) > 1e-12:
            raise InputError("Omega must be a symmetric square matrix")
        object.__setattr__(self, "Omega", om)
        object.__setattr__(self, "S2", s2)

    @property
    def k(self) -> int:
        return 1

    @property
    def vec_omega(self) -> NDArray[np.float64]:
        return self.Omega.reshape(-1, order="F")


Target = Union[BetaCombination, AlphaMean, AlphaQuadratic]


def s2_iid(T: int) -> NDArray[np.float64]:
    """Selection matrix for ``Sigma = sigma^2 I_T`` (``m = 1``)."""
    return np.eye(T).reshape(-1, 1, order="F")


def s2_nonstationary(T: int) -> NDArray[np.float64]:
    """Selection matrix for ``Sigma = diag(a + b (t - 1))`` (``m = 2``)."""
    return np.column_stack(
        [np.eye(T).reshape(-1, order="F"), np.diag(np.arange(T, dtype=float)).reshape(-1, order="F")]
    )


# -- nuisances ---------------------------------------------------------------


@dataclass(frozen=True)
class NuisanceEstimates:
    """Fold-specific plug-ins.  Fields not used by a target stay ``None``."""

    beta: NDArray[np.float64]
    M_pinv: TruncatedPseudoInverse
    rho2: NDArray[np.float64] | None = None
    S1: NDArray[np.float64] | None = None
    Gamma: NDArray[np.float64] | None = None
    omega: NDArray[np.float64] | None = None
    Gamma_omega: NDArray[np.float64] | None = None
    Gamma_beta: NDArray[np.float64] | None = None
    fold_id: int | None = None
    lasso: lasso_panel.LassoFit | None = None
    diagnostics: tuple[str, ...] = field(default=())


def default_nu_M(n: int, T: int, p: int) -> float:
    return math.sqrt(math.log(min(p, n * T)) / n)


def default_nu_B(n: int, T: int) -> float:
    return math.sqrt(math.log(T * T) / n)


def _weights(n: int, weights: ArrayLike | None) -> NDArray[np.float64]:
    if weights is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,) or np.any(w < 0):
        raise InputError("weights must be a nonnegative length-n vector")
    return w / w.sum()


def _wtq(data: PanelDataset) -> NDArray[np.float64]:
    """Stacked ``W_i' Q_i`` (n x p x T)."""
    return np.einsum("itp,its->ips", data.W, data.Q)


def _common(
    train: PanelDataset,
    config: lasso_panel.LassoConfig,
    nu_M: float | None,
    weights: ArrayLike | None,
    beta: ArrayLike | None,
):
    if train.n == 0:
        raise InputError("training sample is empty")
    w = _weights(train.n, weights)
    wtq = _wtq(train)
    m_check = np.einsum("i,ips,isr->pr", w, wtq, train.W)
    if nu_M is None:
        nu_M = default_nu_M(train.n, train.T, train.p)
    m_pinv = truncated_psd_pinv(m_check, nu_M)
    diagnostics = list(m_pinv.diagnostics)
    if m_pinv.rank == 0:
        diagnostics.append("M has rank 0: no within variation in W")
    fit = None
    if beta is None:
        y_t = np.einsum("its,is->it", train.Q, train.Y)
        w_t = np.einsum("its,isp->itp", train.Q, train.W)
        fit = lasso_panel.fit(y_t, w_t, config)
        beta = fit.beta
        diagnostics.extend(fit.diagnostics)
        if not fit.converged:
            diagnostics.append("lasso did not converge")
    return w, np.asarray(beta, dtype=float), m_pinv, fit, diagnostics


def nuisance_beta(
    train: PanelDataset,
    target: BetaCombination,
    config: lasso_panel.LassoConfig = lasso_panel.LassoConfig(),
    nu_M: float | None = None,
    *,
    weights: ArrayLike | None = None,
    beta: ArrayLike | None = None,
    fold_id: int | None = None,
) -> NuisanceEstimates:
    """``M = mean(W'QW)``, its truncated inverse, Lasso ``beta`` and ``rho2 = C1' M^+``.

    Passing ``beta`` skips the Lasso (used by population oracles).
    """
    _, b, m_pinv, fit, diag = _common(train, config, nu_M, weights, beta)
    return NuisanceEstimates(
        beta=b,
        M_pinv=m_pinv,
        rho2=target.C1.T @ m_pinv.pinv,
        fold_id=fold_id,
        lasso=fit,
        diagnostics=tuple(diag),
    )


def nuisance_alpha(
    train: PanelDataset,
    target: AlphaMean,
    config: lasso_panel.LassoConfig = lasso_panel.LassoConfig(),
    nu_M: float | None = None,
    *,
    weights: ArrayLike | None = None,
    beta: ArrayLike | None = None,
    fold_id: int | None = None,
) -> NuisanceEstimates:
    """``S1 = mean(HW)`` and ``Gamma = C2' S1 M^+`` plus the Lasso ``beta``."""
    w, b, m_pinv, fit, diag = _common(train, config, nu_M, weights, beta)
    s1 = np.einsum("i,iqt,itp->qp", w, train.H, train.W)
    return NuisanceEstimates(
        beta=b,
        M_pinv=m_pinv,
        S1=s1,
        Gamma=target.C2.T @ s1 @ m_pinv.pinv,
        fold_id=fold_id,
        lasso=fit,
        diagnostics=tuple(diag),
    )


def _kron_terms(data: PanelDataset, u: NDArray[np.float64]):
    """``u kron u`` (n x T^2) and ``(W kron u) + (u kron W)`` (n x T^2 x p)."""
    n, t = u.shape
    uu = np.einsum("ia,ib->iab", u, u).reshape(n, t * t)
    wu = np.einsum("iap,ib->iabp", data.W, u).reshape(n, t * t, data.p)
    uw = np.einsum("ia,ibp->iabp", u, data.W).reshape(n, t * t, data.p)
    return uu, wu + uw


def nuisance_variance(
    train: PanelDataset,
    target: AlphaQuadratic,
    config: lasso_panel.LassoConfig = lasso_panel.LassoConfig(),
    nu_M: float | None = None,
    nu_B: float | None = None,
    *,
    weights: ArrayLike | None = None,
    beta: ArrayLike | None = None,
    omega: ArrayLike | None = None,
    fold_id: int | None = None,
) -> NuisanceEstimates:
    """Plug-ins for the quadratic target.

    ``omega`` solves the least-squares version of ``E[QQ (u kron u - S2 omega)] = 0``;
    ``A = vec(Omega)' mean(HH S2)``, ``B = mean(QQ S2)``, ``Gamma_omega = A B^+``
    (B thresholded at ``nu_B``), ``L = -mean((vec(Omega)'HH - Gamma_omega QQ)
    ((W kron u) + (u kron W)))`` and ``Gamma_beta = -L M^+``.
    """
    w, b, m_pinv, fit, diag = _common(train, config, nu_M, weights, beta)
    t = train.T
    s2 = target.S2
    if s2.shape[0] != t * t:
        raise InputError(f"S2 must have T^2 = {t * t} rows, got {s2.shape[0]}")
    if target.Omega.shape[0] != train.q:
        raise InputError(f"Omega must be {train.q} x {train.q}")
    qq, hh = train.second_order
    u = train.Y - np.einsum("itp,p->it", train.W, b)
    uu, wu = _kron_terms(train, u)

    qq_s2 = np.einsum("iab,bm->iam", qq, s2)
    b_mat = np.einsum("i,iam->am", w, qq_s2)
    if omega is None:
        omega = pseudo_inverse(b_mat) @ np.einsum("i,iab,ib->a", w, qq, uu)
    omega = np.asarray(omega, dtype=float).reshape(-1)

    vo = target.vec_omega
    a_mat = vo @ np.einsum("i,iab,bm->am", w, hh, s2)
    if nu_B is None:
        nu_B = default_nu_B(train.n, t)
    b_pinv, b_rank = truncated_svd_pinv(b_mat, nu_B)
    if b_rank < s2.shape[1]:
        diag.append(f"B rank {b_rank} below m = {s2.shape[1]} at threshold {nu_B:.3g}")
    gamma_omega = (a_mat @ b_pinv).reshape(1, t * t)

    proj = vo[None, None, :] @ hh - gamma_omega[None] @ qq  # n x 1 x T^2
    l_mat = -np.einsum("i,iza,iap->zp", w, proj, wu)
    gamma_beta = -l_mat @ m_pinv.pinv
    return NuisanceEstimates(
        beta=b,
        M_pinv=m_pinv,
        omega=omega,
        Gamma_omega=gamma_omega,
        Gamma_beta=gamma_beta,
        fold_id=fold_id,
        lasso=fit,
        diagnostics=tuple(diag),
    )


def build_nuisance(
    train: PanelDataset,
    target: Target,
    config: lasso_panel.LassoConfig = lasso_panel.LassoConfig(),
    nu_M: float | None = None,
    nu_B: float | None = None,
    **kwargs,
) -> NuisanceEstimates:
    if isinstance(target, BetaCombination):
        return nuisance_beta(train, target, config, nu_M, **kwargs)
    if isinstance(target, AlphaMean):
        return nuisance_alpha(train, target, config, nu_M, **kwargs)
    if isinstance(target, AlphaQuadratic):
        return nuisance_variance(train, target, config, nu_M, nu_B, **kwargs)
    raise TypeError(f"unknown target {target!r}")


# -- moments -----------------------------------------------------------------


def moment_parts(
    data: PanelDataset, nuisance: NuisanceEstimates, target: Target
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Return ``(a, B)`` with ``g_i(psi) = a_i - B_i psi``.

    ``a`` is ``n x k``; ``B`` is ``n x k x k``.
    """
    b = nuisance.beta
    if b.shape != (data.p,):
        raise InputError(f"beta has shape {b.shape}, expected ({data.p},)")
    n = data.n
    wtq = _wtq(data)
    if isinstance(target, BetaCombination):
        if target.C1.shape[0] != data.p:
            raise InputError("C1 row count must equal p")
        rho2 = nuisance.rho2
        resid = data.Y - np.einsum("itp,p->it", data.W, target.Q_C1 @ b)
        a = np.einsum("kp,ips,is->ik", rho2, wtq, resid)
        slope = np.einsum("kp,ips,isr,rj->ikj", rho2, wtq, data.W, target.H_C1)
        return a, slope
    eye = np.broadcast_to(np.eye(target.k), (n, target.k, target.k))
    u = data.Y - np.einsum("itp,p->it", data.W, b)
    if isinstance(target, AlphaMean):
        if target.C2.shape[0] != data.q:
            raise InputError("C2 row count must equal q")
        lhs = np.einsum("qk,iqt->ikt", target.C2, data.H) - np.einsum(
            "kp,ipt->ikt", nuisance.Gamma, wtq
        )
        return np.einsum("ikt,it->ik", lhs, u), eye
    if isinstance(target, AlphaQuadratic):
        qq, hh = data.second_order
        uu, _ = _kron_terms(data, u)
        u_hat = uu - target.S2 @ nuisance.omega
        proj = target.vec_omega @ hh - np.einsum("za,iab->ib", nuisance.Gamma_omega, qq)
        a = np.einsum("ia,ia->i", proj, u_hat) - np.einsum(
            "zp,ipt,it->i", nuisance.Gamma_beta, wtq, u
        )
        return a[:, None], eye
    raise TypeError(f"unknown target {target!r}")


def _evaluate(data, nuisance, target, psi0) -> NDArray[np.float64]:
    a, slope = moment_parts(data, nuisance, target)
    psi0 = np.broadcast_to(np.asarray(psi0, dtype=float).reshape(-1), (a.shape[1],))
    return a - np.einsum("ikj,j->ik", slope, psi0)


def moment_beta(data: PanelDataset, nuisance: NuisanceEstimates, target: BetaCombination, psi0):
    """``rho2 W'Q (Y - W H_C1 psi0 - W Q_C1 beta)`` per unit."""
    return _evaluate(data, nuisance, target, psi0)


def moment_alpha(data: PanelDataset, nuisance: NuisanceEstimates, target: AlphaMean, psi0):
    """``(C2'H - Gamma W'Q)(Y - W beta) - psi0`` per unit."""
    return _evaluate(data, nuisance, target, psi0)


def moment_variance(data: PanelDataset, nuisance: NuisanceEstimates, target: AlphaQuadratic, psi0):
    """``(vec(Omega)'HH - Gamma_omega QQ) U - Gamma_beta W'Q u - psi0`` per unit."""
    return _evaluate(data, nuisance, target, psi0)


def evaluate_moment(data, nuisance, target, psi0) -> NDArray[np.float64]:
    return _evaluate(data, nuisance, target, psi0)


def alpha_support_violations(data: PanelDataset, target: AlphaMean) -> NDArray[np.int64]:
    """Units where ``C2' H_i V_i != C2'`` (mean of ``C2' alpha`` not identified there)."""
    hv = np.einsum("qk,iqt,itr->ikr", target.C2, data.H, data.V)
    err = np.max(np.abs(hv - target.C2.T[None]), axis=(1, 2))
    return np.flatnonzero(err > SUPPORT_TOL)


def chamberlain_alpha_moment(data: PanelDataset, beta, C2, psi0) -> NDArray[np.float64]:
    """Non-orthogonal ``C2' H (Y - W beta) - psi0``, kept as a contrast."""
    u = data.Y - np.einsum("itp,p->it", data.W, np.asarray(beta, dtype=float))
    c2 = np.asarray(C2, dtype=float)
    c2 = c2[:, None] if c2.ndim == 1 else c2
    return np.einsum("qk,iqt,it->ik", c2, data.H, u) - np.asarray(psi0, dtype=float)


# -- cross-fitted point estimates ---------------------------------------------


def _train_indices(folds, ell: int) -> NDArray[np.int64]:
    assignment = np.asarray(folds.assignment)
    if folds.L == 1:
        return np.arange(assignment.size)
    return np.flatnonzero(assignment != ell)


def plugin_psi(
    data: PanelDataset,
    folds,
    target: Target,
    config: lasso_panel.LassoConfig = lasso_panel.LassoConfig(),
    nu_M: float | None = None,
    nu_B: float | None = None,
    nuisances: list[NuisanceEstimates] | None = None,
):
    """Cross-fitted plug-in estimate and per-observation moments at it.

    For each fold the training complement gives the nuisances and
    ``psi_l = mean_train(a_i)`` (``rho2 mean(W'QY)`` for the beta target).
    ``psi_hat`` is the average over folds.  Returns
    ``(psi_hat, per_fold_psi, per_obs)`` where ``per_obs[i]`` is the moment of
    unit ``i`` evaluated with its own fold's nuisance at that fold's ``psi_l``.
    """
    assignment = np.asarray(folds.assignment)
    if nuisances is None:
        nuisances = fit_fold_nuisances(data, folds, target, config, nu_M, nu_B)
    per_fold = []
    per_obs = np.zeros((data.n, target.k))
    for ell in range(folds.L):
        train = data.subset(_train_indices(folds, ell))
        nuis = nuisances[ell]
        if isinstance(target, BetaCombination):
            r_beta = np.einsum("ips,is->p", _wtq(train), train.Y) / train.n
            psi_l = nuis.rho2 @ r_beta
        else:
            a, _ = moment_parts(train, nuis, target)
            psi_l = a.mean(axis=0)
        per_fold.append(psi_l)
        test_idx = np.flatnonzero(assignment == ell)
        if test_idx.size:
            per_obs[test_idx] = _evaluate(data.subset(test_idx), nuis, target, psi_l)
    per_fold_arr = np.array(per_fold)
    return per_fold_arr.mean(axis=0), per_fold_arr, per_obs


def estimate_psi_beta(
    data: PanelDataset,
    folds,
    target: BetaCombination,
    config: lasso_panel.LassoConfig = lasso_panel.LassoConfig(),
    nu_M: float | None = None,
):
    """Debiased ``psi_hat = mean_l rho2_l R_beta_l`` with ``R_beta = mean_train(W'QY)``."""
    psi, per_fold, _ = plugin_psi(data, folds, target, config, nu_M)
    return {"psi_hat": psi, "per_fold": per_fold}


def fit_fold_nuisances(
    data: PanelDataset,
    folds,
    target: Target,
    config: lasso_panel.LassoConfig = lasso_panel.LassoConfig(),
    nu_M: float | None = None,
    nu_B: float | None = None,
) -> list[NuisanceEstimates]:
    out = []
    assignment = np.asarray(folds.assignment)
    for ell in range(folds.L):
        if folds.L > 1 and not np.any(assignment == ell):
            raise InputError(f"fold {ell} is empty")
        train = data.subset(_train_indices(folds, ell))
        out.append(build_nuisance(train, target, config, nu_M, nu_B, fold_id=ell))
    return out


def with_nuisance(nuisance: NuisanceEstimates, **changes) -> NuisanceEstimates:
    """Copy of ``nuisance`` with some fields replaced (perturbation studies)."""
    return replace(nuisance, **changes)
