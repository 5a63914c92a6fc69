"""Covariances ``r(h) = int_E exp(i<h,x>) f(x) dx`` of catalog models."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy.special import gamma

from lmfield.errors import ParameterError, QuadratureBudgetError
from lmfield.models import Kind, SpectralModel
from lmfield.quadrature import DEFAULT_ORDER, Rule, rule_1d, rule_2d

__all__ = [
    "CovarianceTable",
    "covariance",
    "covariance_table",
    "covariance_one_direction",
    "tail_constant",
    "sinc",
]

DEFAULT_TOL = 1e-8
_CHUNK = 4_000_000  # complex entries per matrix block


@dataclass(frozen=True)
class CovarianceTable:
    """Covariances ``r(h)`` for all lags with ``|h|_inf <= radius``.

    ``values`` has shape ``(2R+1,)`` for d = 1 and ``(2R+1, 2R+1)`` for d = 2,
    with lag ``h`` stored at index ``h + R``.
    """

    dimension: int
    radius: int
    values: np.ndarray = field(repr=False)
    error: float = 0.0

    def __post_init__(self) -> None:
        want = (2 * self.radius + 1,) * self.dimension
        if self.values.shape != want:
            raise ParameterError(f"table shape {self.values.shape} does not match radius {self.radius}")
        self.values.setflags(write=False)

    def __call__(self, h: int | Iterable[int] | np.ndarray) -> float | np.ndarray:
        """Look up ``r(h)``; ``h`` may be an array of lags with trailing axis ``d``."""
        lag = np.asarray(h, dtype=int)
        if self.dimension == 1:
            if np.any(np.abs(lag) > self.radius):
                raise ParameterError(f"lag outside table radius {self.radius}")
            out = self.values[lag + self.radius]
        else:
            if lag.shape[-1:] != (self.dimension,):
                raise ParameterError(f"lag must have trailing axis of length {self.dimension}")
            if np.any(np.abs(lag) > self.radius):
                raise ParameterError(f"lag outside table radius {self.radius}")
            idx = tuple(np.moveaxis(lag + self.radius, -1, 0))
            out = self.values[idx]
        return float(out) if np.ndim(out) == 0 else out

    @property
    def r0(self) -> float:
        return float(self.values[(self.radius,) * self.dimension])

    def lags(self) -> np.ndarray:
        axis = np.arange(-self.radius, self.radius + 1)
        grids = np.meshgrid(*([axis] * self.dimension), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def to_csv(self, path: str | Path) -> None:
        names = [f"h{k + 1}" for k in range(self.dimension)] + ["r"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(names)
            for lag, val in zip(self.lags(), self.values.ravel()):
                writer.writerow([*lag.tolist(), repr(float(val))])

    @classmethod
    def from_csv(cls, path: str | Path) -> CovarianceTable:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        d = data.shape[1] - 1
        radius = int(np.max(np.abs(data[:, :d])))
        values = np.zeros((2 * radius + 1,) * d)
        idx = tuple((data[:, :d].astype(int) + radius).T)
        values[idx] = data[:, d]
        return cls(d, radius, values)


def sinc(u: float | np.ndarray) -> float | np.ndarray:
    """``sin(pi u) / (pi u)`` with value 1 at 0."""
    return np.sinc(u)


def tail_constant(alpha: float, L0: float) -> float:
    """Constant ``c`` in ``r_tilde(h) ~ c h^(-2 alpha - 1)`` for ``f_tilde = L0 |u|^(2 alpha)``.

    Parameters
    ----------
    alpha : float
        Exponent in the open interval (-1/2, 0).
    L0 : float
        Value of ``f_tilde(u) |u|^(-2 alpha)`` at ``u = 0``.
    """
    if not -0.5 < alpha < 0.0:
        raise ParameterError("tail_constant needs -1/2 < alpha < 0")
    if L0 == 0.0:
        raise ParameterError("tail_constant needs L0 != 0")
    return float(2.0 * L0 * gamma(2 * alpha + 1) * math.cos(math.pi * (2 * alpha + 1) / 2))


# ---------------------------------------------------------------- quadrature
def _rule_1d_half(model: SpectralModel, hmax: float, order: int) -> Rule:
    return rule_1d(0.0, math.pi, model.singular_points_1d(), hmax, order)


def _rule_2d_half(model: SpectralModel, hmax: float, order: int) -> Rule:
    lines, points = model.singular_set_2d()
    box = ((-math.pi, math.pi), (0.0, math.pi))
    return rule_2d(box, lines, points, (hmax, hmax), order)


def _cosine_sums(x: np.ndarray, wf: np.ndarray, lags: np.ndarray) -> np.ndarray:
    """``sum_k wf_k cos(h x_k)`` for the given lags."""
    out = np.empty(lags.size)
    step = max(1, _CHUNK // max(1, x.size))
    for s in range(0, lags.size, step):
        out[s : s + step] = np.cos(np.outer(lags[s : s + step], x)) @ wf
    return out


def _cosine_sums_all(x: np.ndarray, wf: np.ndarray, radius: int, block: int = 128) -> np.ndarray:
    """``sum_k wf_k cos(h x_k)`` for ``h = 0..radius``, by phase-shifted blocks."""
    out = np.zeros(radius + 1)
    nb = min(block, radius + 1)
    base_lags = np.arange(nb)
    chunk = max(1, _CHUNK // nb)
    for s in range(0, x.size, chunk):
        xc = x[s : s + chunk]
        base = np.exp(1j * np.outer(base_lags, xc))
        for h0 in range(0, radius + 1, nb):
            m = min(nb, radius + 1 - h0)
            v = wf[s : s + chunk] * np.exp(1j * h0 * xc)
            out[h0 : h0 + m] += (base[:m] @ v).real
    return out


def _check_lags(radius: int) -> np.ndarray:
    picks = np.unique(np.concatenate([np.arange(min(radius, 16) + 1), np.linspace(0, radius, 33).astype(int), np.arange(max(0, radius - 8), radius + 1)]))
    return picks


def _weighted_density(model: SpectralModel, rule: Rule) -> np.ndarray:
    wf = rule.weights * model.density(rule.nodes)
    if not np.all(np.isfinite(wf)):
        raise QuadratureBudgetError("a quadrature node fell on a singular set", estimate=float("nan"))
    return wf


def _table_1d(model: SpectralModel, radius: int, rule: Rule, lags: np.ndarray | None = None) -> np.ndarray:
    wf = _weighted_density(model, rule)
    if lags is not None:
        return 2.0 * _cosine_sums(rule.nodes, wf, lags)
    out = 2.0 * _cosine_sums_all(rule.nodes, wf, radius)
    return np.concatenate([out[:0:-1], out])


def _table_2d(model: SpectralModel, radius: int, rule: Rule, _lags: np.ndarray | None = None) -> np.ndarray:
    wf = _weighted_density(model, rule)
    lags = np.arange(-radius, radius + 1)
    acc = np.zeros((lags.size, lags.size), dtype=complex)
    step = max(1, _CHUNK // lags.size)
    for s in range(0, rule.size, step):
        x = rule.nodes[s : s + step]
        e1 = np.exp(1j * np.outer(x[:, 0], lags)) * wf[s : s + step, None]
        e2 = np.exp(1j * np.outer(x[:, 1], lags))
        acc += e1.T @ e2
    return 2.0 * acc.real


def _quadrature_table(model: SpectralModel, radius: int, tol: float) -> CovarianceTable:
    build, table = (
        (_rule_1d_half, _table_1d) if model.dimension == 1 else (_rule_2d_half, _table_2d)
    )
    hmax = float(max(radius, 1))
    err = float("inf")
    check = _check_lags(radius) if model.dimension == 1 else None
    for _ in range(4):
        lo = table(model, radius, build(model, hmax, DEFAULT_ORDER), check)
        hi = table(model, radius, build(model, hmax, DEFAULT_ORDER + 8), check)
        err = float(np.max(np.abs(hi - lo)))
        if err <= tol * max(1.0, float(np.max(np.abs(hi)))):
            if check is None:
                return CovarianceTable(model.dimension, radius, hi, err)
            values = table(model, radius, build(model, hmax, DEFAULT_ORDER + 8))
            return CovarianceTable(model.dimension, radius, values, err)
        hmax *= 2.0
    raise QuadratureBudgetError("covariance quadrature budget exceeded", estimate=err)


def covariance_one_direction(p: float, ftilde: SpectralModel | CovarianceTable, h: Iterable[int], tol: float = DEFAULT_TOL) -> float:
    """``sigma(h1, h2) = sinc(h2 - p h1) * sigma_tilde(h1)``.

    ``ftilde`` is the one-dimensional density (as a d = 1 model) or a
    precomputed table of its covariances ``sigma_tilde``.
    """
    h1, h2 = (int(v) for v in h)
    if isinstance(ftilde, CovarianceTable):
        st = ftilde(h1)
    else:
        if ftilde.dimension != 1:
            raise ParameterError("ftilde must be one-dimensional")
        st = covariance_table(ftilde, abs(h1), tol=tol)(h1)
    return float(sinc(h2 - p * h1) * st)


def _one_direction_table(model: SpectralModel, radius: int, tol: float) -> CovarianceTable:
    base = covariance_table(model.ftilde, int(math.ceil(radius * (1 + abs(model.slope_p)))), tol=tol)
    lags = np.arange(-radius, radius + 1)
    h1, h2 = np.meshgrid(lags, lags, indexing="ij")
    values = sinc(h2 - model.slope_p * h1) * base.values[h1 + base.radius]
    return CovarianceTable(2, radius, values, base.error)


def covariance_table(model: SpectralModel, radius: int, tol: float = DEFAULT_TOL, method: str = "auto") -> CovarianceTable:
    """Covariances for every lag in ``{-R..R}^d``.

    Parameters
    ----------
    model : SpectralModel
    radius : int
        Largest lag component ``R``.
    tol : float
        Tolerance of the quadrature, absolute while ``r(0) <= 1`` and
        relative to ``r(0)`` above.
    method : {"auto", "quadrature"}
        ``"auto"`` uses exact shortcuts (white noise, the sinc factorisation
        of one-direction models); ``"quadrature"`` always integrates.
    """
    if radius < 0:
        raise ParameterError("radius must be >= 0")
    d = model.dimension
    if d not in (1, 2):
        raise ParameterError("covariances are implemented for d in {1, 2}")
    if method not in ("auto", "quadrature"):
        raise ParameterError(f"unknown method {method!r}")
    if method == "auto":
        if model.kind is Kind.WHITE_NOISE:
            values = np.zeros((2 * radius + 1,) * d)
            values[(radius,) * d] = 1.0
            return CovarianceTable(d, radius, values)
        if model.kind is Kind.ONE_DIRECTION:
            return _one_direction_table(model, radius, tol)
    return _quadrature_table(model, radius, tol)


def covariance(model: SpectralModel, h: int | Iterable[int], tol: float = DEFAULT_TOL, method: str = "auto") -> float:
    """Covariance ``r(h)`` at one lag."""
    lag = np.atleast_1d(np.asarray(h, dtype=int))
    if lag.size != model.dimension:
        raise ParameterError(f"lag must have {model.dimension} components")
    radius = int(np.max(np.abs(lag)))
    table = covariance_table(model, radius, tol=tol, method=method)
    return float(table(lag if model.dimension > 1 else int(lag[0])))
