"""Normal and chi-square distribution helpers used by tuning and testing."""

from __future__ import annotations

import numpy as np
from scipy import special


def normal_cdf(x):
    return special.ndtr(x)


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF (Cephes ``ndtri``, ~1e-15 relative accuracy)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"normal quantile needs 0 < p < 1, got {p}")
    return float(special.ndtri(p))


def chi2_sf(x: float, d: int) -> float:
    """Survival function of chi-square with ``d`` degrees of freedom.

    Evaluated as the regularized upper incomplete gamma ``Q(d/2, x/2)``.
    """
    if d < 1:
        raise ValueError("chi-square needs d >= 1")
    if x <= 0.0:
        return 1.0
    return float(special.gammaincc(0.5 * d, 0.5 * x))


def chi2_quantile(zeta: float, d: int, tol: float = 1e-12) -> float:
    """Upper ``zeta`` critical value: the ``1 - zeta`` quantile of chi2(d).

    Bracketed bisection on :func:`chi2_sf`; the bracket is grown until it
    contains the root.
    """
    if not 0.0 < zeta < 1.0:
        raise ValueError(f"zeta must be in (0, 1), got {zeta}")
    if d < 1:
        raise ValueError("chi-square needs d >= 1")
    lo, hi = 0.0, max(1.0, 2.0 * d)
    while chi2_sf(hi, d) > zeta:
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if chi2_sf(mid, d) > zeta:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def binomial_se(rate: float, reps: int) -> float:
    if reps <= 0:
        return float("nan")
    return float(np.sqrt(rate * (1.0 - rate) / reps))
