"""Quadratic forms, empirical covariances and periodograms of lattice fields."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

import numpy as np

from lmfield.covariance import CovarianceTable, covariance_table
from lmfield.errors import ContractError, ParameterError
from lmfield.models import SpectralModel
from lmfield.simulate import FieldSample

__all__ = [
    "QuadraticFormSpec",
    "lag_spec",
    "quadratic_form",
    "quadratic_form_fft",
    "lag_products",
    "expected_q",
    "empirical_cov",
    "empirical_cov_centered",
    "periodogram",
]


@dataclass(frozen=True)
class QuadraticFormSpec:
    """Finite-support weights ``g_j`` defining ``Q_n = n^-d sum g_(i-j) X_i X_j``.

    Parameters
    ----------
    dimension : int
    lags : array of shape (K, d)
        Support points ``j``.
    weights : array of shape (K,)
        Real weights ``g_j``; ``g_(-j) = g_j`` is required so the symbol
        ``g(t) = (2 pi)^-d sum_j g_j exp(-i<j,t>)`` is conjugate symmetric.
    beta : float
        Homogeneity degree ``2 beta`` of the symbol's singular part. A finite
        support gives a bounded symbol, so ``beta = 0`` unless a caller
        attaches a homogeneous part explicitly.
    l2_zero : float or None
        ``L2(0)``; defaults to ``g(0)`` when ``beta = 0``.
    g_tilde : callable or None
        Homogeneous part of the symbol on ``R^d``; ``None`` means ``1``.
    """

    dimension: int
    lags: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    beta: float = 0.0
    l2_zero: float | None = None
    g_tilde: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        lags = np.asarray(self.lags, dtype=int).reshape(-1, self.dimension)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if lags.shape[0] != w.size:
            raise ParameterError("lags and weights must have equal length")
        if w.size == 0:
            raise ParameterError("a quadratic form needs at least one weight")
        # merge duplicates so the support is canonical
        uniq, inv = np.unique(lags, axis=0, return_inverse=True)
        acc = np.zeros(len(uniq))
        np.add.at(acc, inv.reshape(-1), w)
        table = {tuple(l): v for l, v in zip(uniq.tolist(), acc)}
        for key, val in table.items():
            neg = tuple(-k for k in key)
            if not math.isclose(table.get(neg, 0.0), val, rel_tol=1e-12, abs_tol=1e-15):
                raise ParameterError("weights must satisfy g_(-j) = g_j")
        uniq.setflags(write=False)
        acc.setflags(write=False)
        object.__setattr__(self, "lags", uniq)
        object.__setattr__(self, "weights", acc)
        if self.l2_zero is None and self.beta == 0.0:
            object.__setattr__(self, "l2_zero", self.symbol_at_zero)

    @property
    def radius(self) -> int:
        return int(np.max(np.abs(self.lags)))

    @property
    def symbol_at_zero(self) -> float:
        return float(np.sum(self.weights)) / (2.0 * math.pi) ** self.dimension

    def symbol(self, t: np.ndarray) -> np.ndarray:
        """``g(t)`` at points ``t`` of shape ``(..., d)`` (or ``(...,)`` for d = 1)."""
        t = np.asarray(t, dtype=float)
        if self.dimension == 1:
            t = t[..., None]
        phase = t @ self.lags.T.astype(float)
        return (np.cos(phase) @ self.weights) / (2.0 * math.pi) ** self.dimension

    def homogeneous(self, t: np.ndarray) -> np.ndarray:
        """``g_tilde(t)``; identically 1 unless a homogeneous part was attached."""
        t = np.asarray(t, dtype=float)
        shape = t.shape if self.dimension == 1 else t.shape[:-1]
        if self.g_tilde is None:
            return np.ones(shape)
        return np.asarray(self.g_tilde(t), dtype=float)

    def scaled(self, c: float) -> QuadraticFormSpec:
        l2 = None if self.l2_zero is None else c * self.l2_zero
        return QuadraticFormSpec(self.dimension, self.lags, c * self.weights, self.beta, l2, self.g_tilde)

    def to_dict(self) -> dict[str, Any]:
        support = [[l.tolist() if self.dimension > 1 else int(l[0]), float(w)] for l, w in zip(self.lags, self.weights)]
        return {"dimension": self.dimension, "support": support, "beta": self.beta, "l2_zero": self.l2_zero}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> QuadraticFormSpec:
        try:
            d = int(data["dimension"])
            lags = [np.atleast_1d(j).tolist() for j, _ in data["support"]]
            weights = [float(g) for _, g in data["support"]]
            return cls(d, np.array(lags, dtype=int).reshape(-1, d), np.array(weights), float(data.get("beta", 0.0)), data.get("l2_zero"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParameterError(f"malformed quadratic form description: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> QuadraticFormSpec:
        return cls.from_dict(json.loads(text))


def lag_spec(h: int | Iterable[int], dimension: int | None = None) -> QuadraticFormSpec:
    """Symmetric weights ``(delta_h + delta_(-h)) / 2``; ``g = delta_0`` at ``h = 0``."""
    lag = np.atleast_1d(np.asarray(h, dtype=int))
    d = lag.size if dimension is None else dimension
    if lag.size != d:
        raise ParameterError("lag length must equal the dimension")
    if not np.any(lag):
        return QuadraticFormSpec(d, lag.reshape(1, d), np.array([1.0]))
    return QuadraticFormSpec(d, np.stack([lag, -lag]), np.array([0.5, 0.5]))


def _check_dims(field_: FieldSample, spec: QuadraticFormSpec) -> None:
    if field_.dimension != spec.dimension:
        raise ParameterError(f"field has d = {field_.dimension} but the form has d = {spec.dimension}")


def _overlap(x: np.ndarray, m: np.ndarray) -> float:
    """``sum_{j, j+m in window} x_(j+m) x_j``."""
    n = x.shape
    a = []
    b = []
    for k, mk in enumerate(m):
        if abs(mk) >= n[k]:
            return 0.0
        a.append(slice(max(0, mk), n[k] + min(0, mk)))
        b.append(slice(max(0, -mk), n[k] - max(0, mk)))
    return float(np.sum(x[tuple(a)] * x[tuple(b)]))


def quadratic_form(field_: FieldSample, spec: QuadraticFormSpec) -> float:
    """``Q_n = n^-d sum_(i,j in A_n) g_(i-j) X_i X_j`` by lag grouping."""
    _check_dims(field_, spec)
    x = field_.window
    total = sum(w * _overlap(x, m) for m, w in zip(spec.lags, spec.weights))
    return total / field_.n**field_.dimension


def lag_products(x: np.ndarray) -> np.ndarray:
    """All sums ``S(m) = sum_(j, j+m in window) x_(j+m) x_j`` via a zero-padded FFT.

    The result has shape ``(2n-1,)^d`` with lag ``m`` at index ``m + n - 1``.
    """
    n = x.shape
    size = [2 * k for k in n]
    axes = list(range(x.ndim))
    F = np.fft.rfftn(x, s=size, axes=axes)
    corr = np.fft.irfftn(F * np.conj(F), s=size, axes=axes)
    # corr[m] = sum_j x[j+m] x[j] for m >= 0; wrap negative lags
    for ax, k in enumerate(n):
        corr = np.roll(corr, k - 1, axis=ax)
    return corr[tuple(slice(0, 2 * k - 1) for k in n)]


def quadratic_form_fft(field_: FieldSample, spec: QuadraticFormSpec) -> float:
    """Same value as :func:`quadratic_form` through one FFT autocorrelation."""
    _check_dims(field_, spec)
    x = field_.window
    n = field_.n
    inside = np.all(np.abs(spec.lags) < n, axis=1)
    if not np.any(inside):
        return 0.0
    S = lag_products(x)
    idx = tuple((spec.lags[inside] + n - 1).T)
    return float(np.dot(spec.weights[inside], S[idx])) / n**field_.dimension


def expected_q(model: SpectralModel, spec: QuadraticFormSpec, n: int, table: CovarianceTable | None = None) -> float:
    """``E[Q_n] = sum_m g_m r(m) prod_k (1 - |m_k| / n)``."""
    if model.dimension != spec.dimension:
        raise ParameterError("model and form dimensions differ")
    keep = np.all(np.abs(spec.lags) < n, axis=1)
    if not np.any(keep):
        return 0.0
    lags = spec.lags[keep]
    if table is None:
        table = covariance_table(model, int(np.max(np.abs(lags))))
    r = np.array([table(l if spec.dimension > 1 else int(l[0])) for l in lags])
    frac = np.prod(1.0 - np.abs(lags) / n, axis=1)
    return float(np.sum(spec.weights[keep] * r * frac))


def _lag(field_: FieldSample, h: int | Iterable[int]) -> np.ndarray:
    lag = np.atleast_1d(np.asarray(h, dtype=int))
    if lag.size != field_.dimension:
        raise ParameterError("lag length must equal the dimension")
    need = int(np.max(np.abs(lag)))
    if need > field_.margin:
        raise ContractError(f"lag {lag.tolist()} needs margin >= {need}, field has margin {field_.margin}")
    return lag


def _shifted_product(values: np.ndarray, m: int, n: int, lag: np.ndarray) -> np.ndarray:
    base = tuple(slice(m, m + n) for _ in lag)
    shifted = tuple(slice(m + k, m + k + n) for k in lag)
    return values[base] * values[shifted]


def empirical_cov(field_: FieldSample, h: int | Iterable[int]) -> float:
    """``r_hat(h) = n^-d sum_(i in A_n) X_i X_(i+h)``, using margin values."""
    lag = _lag(field_, h)
    prod = _shifted_product(field_.values, field_.margin, field_.n, lag)
    return float(np.sum(prod)) / field_.n**field_.dimension


def empirical_cov_centered(field_: FieldSample, h: int | Iterable[int]) -> float:
    """As :func:`empirical_cov` after subtracting the window mean everywhere."""
    lag = _lag(field_, h)
    centred = field_.values - np.mean(field_.window)
    prod = _shifted_product(centred, field_.margin, field_.n, lag)
    return float(np.sum(prod)) / field_.n**field_.dimension


def periodogram(field_: FieldSample, t: float | Iterable[float] | np.ndarray) -> float | np.ndarray:
    """``I_n(t) = (2 pi n)^-d |sum_(k in A_n) X_k exp(i<k,t>)|^2``.

    ``t`` may be a single point or an array with trailing axis ``d``.
    """
    d = field_.dimension
    t = np.asarray(t, dtype=float)
    pts = t.reshape(-1, d) if d > 1 or t.ndim else t.reshape(1, 1)
    if d == 1:
        pts = t.reshape(-1, 1)
    x = field_.window
    k = np.arange(1, field_.n + 1)
    if d == 1:
        amp = np.exp(1j * np.outer(pts[:, 0], k)) @ x
    else:
        e1 = np.exp(1j * np.outer(pts[:, 0], k))
        e2 = np.exp(1j * np.outer(pts[:, 1], k))
        amp = np.einsum("pa,ab,pb->p", e1, x, e2)
    out = np.abs(amp) ** 2 / (2.0 * math.pi * field_.n) ** d
    if (d == 1 and t.ndim == 0) or (d > 1 and t.ndim == 1):
        return float(out[0])
    return out.reshape(t.shape if d == 1 else t.shape[:-1])
