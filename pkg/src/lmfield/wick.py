"""Exact finite-``n`` variances of quadratic forms through the Isserlis formula."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from lmfield.covariance import CovarianceTable, covariance_table
from lmfield.errors import ParameterError, ResourceError
from lmfield.forms import QuadraticFormSpec
from lmfield.models import Kind, SpectralModel

__all__ = ["wick_variance_qn", "wick_variance_rhat", "overlap_counts", "MAX_WORK"]

MAX_WORK = 400_000_000  # lag-grid cells times support pairs


def overlap_counts(n: int, m: int, mp: int) -> np.ndarray:
    """``#{j : j, j+m in [1,n], j+u, j+u+mp in [1,n]}`` for ``u = -(n-1)..(n-1)``."""
    lo1, hi1 = max(1, 1 - m), min(n, n - m)
    lo2, hi2 = max(1, 1 - mp), min(n, n - mp)
    u = np.arange(-(n - 1), n)
    lo = np.maximum(lo1, lo2 - u)
    hi = np.minimum(hi1, hi2 - u)
    return np.clip(hi - lo + 1, 0, None).astype(float)


def _table_for(model: SpectralModel, radius: int, table: CovarianceTable | None) -> CovarianceTable:
    if table is not None:
        if table.dimension != model.dimension or table.radius < radius:
            raise ParameterError(f"covariance table must cover radius {radius}")
        return table
    return covariance_table(model, radius)


def _shifted(values: np.ndarray, R: int, n: int, shift: np.ndarray) -> np.ndarray:
    """``r(u + shift)`` on the lag grid ``u in {-(n-1)..n-1}^d``."""
    sl = tuple(slice(R + s - (n - 1), R + s + n) for s in shift)
    return values[sl]


def wick_variance_qn(
    model: SpectralModel,
    spec: QuadraticFormSpec,
    n: int,
    table: CovarianceTable | None = None,
) -> float:
    """Exact ``Var(Q_n)`` for a Gaussian field.

    Writing ``Q_n = n^-d sum_m g_m S_m`` with ``S_m = sum_j X_(j+m) X_j``,

    ``Cov(S_m, S_m') = sum_u C(u; m, m') [r(u) r(u + m' - m) + r(u - m) r(u + m')]``

    where ``C`` counts the index pairs ``(j, j+u)`` admissible for both lags;
    it factorises over axes, so each pair of support points costs one pass
    over the ``(2n-1)^d`` lag grid.

    Parameters
    ----------
    model : SpectralModel
    spec : QuadraticFormSpec
    n : int
        Window side.
    table : CovarianceTable, optional
        Covariances covering radius ``n - 1 + 2 * spec.radius``; computed
        when omitted.  Passing the exact covariance of a discretised sampler
        gives the variance of that sampler's statistic.
    """
    d = model.dimension
    if spec.dimension != d:
        raise ParameterError("model and form dimensions differ")
    if n < 1:
        raise ParameterError("n must be >= 1")
    keep = np.all(np.abs(spec.lags) < n, axis=1)
    lags, w = spec.lags[keep], spec.weights[keep]
    if lags.shape[0] == 0:
        return 0.0
    work = lags.shape[0] ** 2 * (2 * n - 1) ** d
    if work > MAX_WORK:
        raise ResourceError(f"Wick sum needs {work:.3g} operations, above the bound {MAX_WORK:.3g}")
    rad = int(np.max(np.abs(lags)))
    R = n - 1 + 2 * rad
    tab = _table_for(model, R, table)
    vals, TR = tab.values, tab.radius
    total = 0.0
    for a in range(lags.shape[0]):
        m = lags[a]
        for b in range(a, lags.shape[0]):
            mp = lags[b]
            count = overlap_counts(n, int(m[0]), int(mp[0]))
            for k in range(1, d):
                count = np.multiply.outer(count, overlap_counts(n, int(m[k]), int(mp[k])))
            term = _shifted(vals, TR, n, np.zeros(d, int)) * _shifted(vals, TR, n, mp - m)
            term = term + _shifted(vals, TR, n, -m) * _shifted(vals, TR, n, mp)
            c = float(np.sum(count * term))
            total += (1.0 if a == b else 2.0) * w[a] * w[b] * c
    return total / float(n) ** (2 * d)


def wick_variance_rhat(
    model: SpectralModel,
    h: int | Iterable[int],
    n: int,
    table: CovarianceTable | None = None,
) -> float:
    """Exact ``Var(r_hat(h))`` for ``r_hat(h) = n^-d sum_(i in A_n) X_i X_(i+h)``.

    ``Var = n^-2d sum_u prod_k (n - |u_k|) [r(u)^2 + r(u+h) r(u-h)]``.
    """
    d = model.dimension
    lag = np.atleast_1d(np.asarray(h, dtype=int))
    if lag.size != d:
        raise ParameterError("lag length must equal the dimension")
    if n < 1:
        raise ParameterError("n must be >= 1")
    work = (2 * n - 1) ** d
    if work > MAX_WORK:
        raise ResourceError(f"Wick sum needs {work:.3g} operations, above the bound {MAX_WORK:.3g}")
    R = n - 1 + int(np.max(np.abs(lag)))
    if model.kind is Kind.ONE_DIRECTION and table is None and d == 2:
        return _rhat_one_direction(model, lag, n)
    tab = _table_for(model, R, table)
    vals, TR = tab.values, tab.radius
    base = (n - np.abs(np.arange(-(n - 1), n))).astype(float)
    count = base
    for _ in range(1, d):
        count = np.multiply.outer(count, base)
    zero = np.zeros(d, int)
    r0 = _shifted(vals, TR, n, zero)
    term = r0 * r0 + _shifted(vals, TR, n, lag) * _shifted(vals, TR, n, -lag)
    return float(np.sum(count * term)) / float(n) ** (2 * d)


def _rhat_one_direction(model: SpectralModel, lag: np.ndarray, n: int) -> float:
    """Sparse evaluation for one-direction models with integer slope.

    With integer ``p`` the covariance vanishes off the line ``u2 = p u1``, so
    only ``O(n)`` lag cells contribute; non-integer slopes fall back to the
    dense sum.
    """
    p = model.slope_p
    if p != int(p):
        R = n - 1 + int(np.max(np.abs(lag)))
        tab = covariance_table(model, R)
        return wick_variance_rhat(model, lag, n, table=tab)
    p = int(p)
    h1, h2 = (int(v) for v in lag)
    base = covariance_table(model.ftilde, max(n - 1 + abs(h1), 1))

    def rt(k: np.ndarray) -> np.ndarray:
        return base.values[k + base.radius]

    u1 = np.arange(-(n - 1), n)
    c1 = (n - np.abs(u1)).astype(float)
    # first term: r(u)^2 is nonzero only for u2 = p u1
    u2 = p * u1
    ok = np.abs(u2) <= n - 1
    first = np.sum(c1[ok] * (n - np.abs(u2[ok])) * rt(u1[ok]) ** 2)
    # second term: r(u+h) r(u-h) needs u2 + h2 = p(u1 + h1) and u2 - h2 = p(u1 - h1)
    second = 0.0
    if h2 == p * h1:
        u2 = p * u1
        ok = np.abs(u2) <= n - 1
        second = np.sum(c1[ok] * (n - np.abs(u2[ok])) * rt(u1[ok] + h1) * rt(u1[ok] - h1))
    return float(first + second) / float(n) ** 4
