"""Catalog of spectral models with homogeneous singularities.

A model defines the filter ``a(x) = a_tilde(x) * L1(x)`` on ``E = [-pi, pi]^d``.
The spectral density is ``f = |a|^2`` and the field covariance is its
Fourier coefficient ``r(h) = int_E exp(i<h, x>) f(x) dx``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

import numpy as np

from lmfield.errors import ParameterError, SingularPointError
from lmfield.quadrature import SingularLine, SingularPoint

__all__ = [
    "Kind",
    "L1Factor",
    "SpectralModel",
    "isotropic",
    "product",
    "two_lines",
    "one_direction",
    "white_noise",
    "eval_filter",
    "wrap",
]


class Kind(str, Enum):
    ISOTROPIC = "Isotropic"
    PRODUCT = "Product"
    TWO_LINES = "TwoLines"
    ONE_DIRECTION = "OneDirection"
    WHITE_NOISE = "WhiteNoise"


@dataclass(frozen=True)
class L1Factor:
    """Bounded factor ``L1``: a constant, or a closure with declared ``L1(0)``.

    A closure must be vectorised over points of shape ``(..., d)`` (or
    ``(...,)`` when ``d = 1``), real, even, bounded and continuous at 0.
    """

    value: float = 1.0
    func: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.value == 0.0 or not math.isfinite(self.value):
            raise ParameterError("L1(0) must be finite and non-zero")

    @property
    def at_zero(self) -> float:
        return self.value

    @property
    def is_constant(self) -> bool:
        return self.func is None

    def __call__(self, x: np.ndarray, dimension: int) -> np.ndarray:
        shape = np.shape(x)[:-1] if dimension > 1 else np.shape(x)
        if self.func is None:
            return np.full(shape, self.value)
        return np.asarray(self.func(x), dtype=float)


def wrap(u: np.ndarray) -> np.ndarray:
    """Reduce ``u`` to ``[-pi, pi]`` modulo ``2 pi``, leaving that range untouched."""
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= math.pi, u, np.mod(u + math.pi, 2.0 * math.pi) - math.pi)


@dataclass(frozen=True)
class SpectralModel:
    """A catalog entry.

    ``alpha`` is the homogeneity degree of ``a_tilde`` for Isotropic and
    Product kinds, the pair ``(alpha_p, alpha_q)`` for TwoLines, and the
    exponent of the one-dimensional filter for OneDirection, whose density
    is ``f(x1, x2) = (2 pi)^-1 f_tilde(x1 + p x2)`` with
    ``f_tilde(u) = L1^2 |u|^(2 alpha)`` periodised.
    """

    dimension: int
    kind: Kind
    alpha: float | tuple[float, float] = 0.0
    slope_p: float | None = None
    slope_q: float | None = None
    l1: L1Factor = field(default_factory=L1Factor)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", Kind(self.kind))
        if isinstance(self.alpha, list):
            object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        d = self.dimension
        if d < 1:
            raise ParameterError("dimension must be >= 1")
        k = self.kind
        if k is Kind.TWO_LINES:
            if d != 2 or self.slope_p is None or self.slope_q is None:
                raise ParameterError("TwoLines needs d = 2 and slopes p, q")
            if self.slope_p == self.slope_q:
                raise ParameterError("TwoLines needs distinct slopes")
            if not (isinstance(self.alpha, tuple) and len(self.alpha) == 2):
                raise ParameterError("TwoLines needs alpha = (alpha_p, alpha_q)")
            ap, aq = self.alpha
            if not (ap > -0.5 and aq > -0.5):
                raise ParameterError("TwoLines density is integrable only for alpha_p, alpha_q > -1/2")
            return
        if isinstance(self.alpha, tuple):
            raise ParameterError(f"{k.value} takes a scalar alpha")
        a = float(self.alpha)
        if k is Kind.ONE_DIRECTION:
            if d != 2 or self.slope_p is None:
                raise ParameterError("OneDirection needs d = 2 and a slope p")
            if not self.l1.is_constant:
                raise ParameterError("OneDirection takes a constant L1 so f depends on x1 + p x2 only")
            if not a > -0.5:
                raise ParameterError("OneDirection density is integrable only for alpha > -1/2")
        elif k in (Kind.ISOTROPIC, Kind.PRODUCT):
            if not a > -d / 2:
                raise ParameterError(f"{k.value} density is integrable only for alpha > -d/2 = {-d / 2}")
        elif k is Kind.WHITE_NOISE and a != 0.0:
            raise ParameterError("WhiteNoise has alpha = 0")

    # ------------------------------------------------------------------ basics
    @property
    def degree(self) -> float:
        """Homogeneity degree of ``a_tilde``."""
        if self.kind is Kind.TWO_LINES:
            return float(sum(self.alpha))
        return float(self.alpha)

    @property
    def name(self) -> str:
        parts = [self.kind.value, f"d{self.dimension}"]
        if isinstance(self.alpha, tuple):
            parts.append("a" + ",".join(f"{a:g}" for a in self.alpha))
        elif self.kind is not Kind.WHITE_NOISE:
            parts.append(f"a{self.alpha:g}")
        if self.slope_p is not None:
            parts.append(f"p{self.slope_p:g}")
        if self.slope_q is not None:
            parts.append(f"q{self.slope_q:g}")
        if self.l1.value != 1.0:
            parts.append(f"L{self.l1.value:g}")
        return "-".join(parts)

    @property
    def ftilde(self) -> SpectralModel:
        """The one-dimensional density ``f_tilde`` of a OneDirection model."""
        if self.kind is not Kind.ONE_DIRECTION:
            raise ParameterError("ftilde is defined for OneDirection models only")
        return SpectralModel(1, Kind.ISOTROPIC, float(self.alpha), l1=L1Factor(self.l1.value))

    def in_l2(self) -> bool:
        """Whether ``f`` is square integrable on ``E``."""
        d = self.dimension
        if self.kind is Kind.WHITE_NOISE:
            return True
        if self.kind is Kind.TWO_LINES:
            return all(4 * a > -1 for a in self.alpha)
        if self.kind is Kind.ONE_DIRECTION:
            return 4 * self.alpha > -1
        if self.kind is Kind.PRODUCT:
            return 4 * self.alpha / d > -1
        return 4 * self.alpha > -d

    # ------------------------------------------------------------- evaluation
    def _points(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.dimension > 1 and x.shape[-1:] != (self.dimension,):
            raise ParameterError(f"points must have trailing axis of length {self.dimension}")
        return x

    def homogeneous(self, x: np.ndarray) -> np.ndarray:
        """``a_tilde(x)`` on ``R^d`` (not periodised)."""
        x = self._points(x)
        d = self.dimension
        k = self.kind
        with np.errstate(divide="ignore"):
            if k is Kind.WHITE_NOISE:
                shape = x.shape[:-1] if d > 1 else x.shape
                return np.full(shape, (2.0 * math.pi) ** (-d / 2))
            if k is Kind.ISOTROPIC:
                r = np.abs(x) if d == 1 else np.linalg.norm(x, axis=-1)
                return r**self.alpha
            if k is Kind.PRODUCT:
                if d == 1:
                    return np.abs(x) ** self.alpha
                return np.prod(np.abs(x) ** (self.alpha / d), axis=-1)
            if k is Kind.TWO_LINES:
                ap, aq = self.alpha
                u = x[..., 0] + self.slope_p * x[..., 1]
                v = x[..., 0] + self.slope_q * x[..., 1]
                return np.abs(u) ** ap * np.abs(v) ** aq
            u = x[..., 0] + self.slope_p * x[..., 1]
            return (2.0 * math.pi) ** -0.5 * np.abs(u) ** self.alpha

    def filter(self, x: np.ndarray) -> np.ndarray:
        """``a(x)`` for points of ``E``; may be ``inf`` on singular sets."""
        x = self._points(x)
        if self.kind is Kind.ONE_DIRECTION:
            u = wrap(x[..., 0] + self.slope_p * x[..., 1])
            with np.errstate(divide="ignore"):
                base = (2.0 * math.pi) ** -0.5 * np.abs(u) ** self.alpha
        else:
            base = self.homogeneous(x)
        return base * self.l1(x, self.dimension)

    def density(self, x: np.ndarray) -> np.ndarray:
        """``f(x) = |a(x)|^2``."""
        return np.abs(self.filter(x)) ** 2

    # ------------------------------------------------------ singular structure
    def singular_points_1d(self, power: float = 1.0) -> list[tuple[float, float | None]]:
        """Singular points of ``f**power`` on ``[-pi, pi]`` (d = 1)."""
        if self.dimension != 1:
            raise ParameterError("singular_points_1d needs d = 1")
        if self.kind is Kind.WHITE_NOISE or self.alpha == 0.0:
            return []
        return [(0.0, 2.0 * power * float(self.alpha))]

    def singular_set_2d(self, power: float = 1.0) -> tuple[list[SingularLine], list[SingularPoint]]:
        """Singular lines and points of ``f**power`` on ``E`` (d = 2)."""
        if self.dimension != 2:
            raise ParameterError("singular_set_2d needs d = 2")
        k = self.kind
        if k is Kind.WHITE_NOISE:
            return [], []
        if k is Kind.ISOTROPIC:
            return [], [SingularPoint((0.0, 0.0), 2.0 * power * self.alpha)]
        if k is Kind.PRODUCT:
            e = 2.0 * power * self.alpha / 2
            return [SingularLine(1.0, 0.0, 0.0, e), SingularLine(0.0, 1.0, 0.0, e)], []
        if k is Kind.TWO_LINES:
            ap, aq = self.alpha
            return [
                SingularLine(1.0, self.slope_p, 0.0, 2.0 * power * ap),
                SingularLine(1.0, self.slope_q, 0.0, 2.0 * power * aq),
            ], []
        p = float(self.slope_p)
        reach = math.pi * (1.0 + abs(p))
        jmax = int(math.floor(reach / (2.0 * math.pi) + 0.5))
        lines = [
            SingularLine(1.0, p, 2.0 * math.pi * j, 2.0 * power * self.alpha)
            for j in range(-jmax, jmax + 1)
            if abs(2.0 * math.pi * j) <= reach
        ]
        # the periodised density has kinks where x1 + p x2 = pi mod 2 pi
        kinks = [
            SingularLine(1.0, p, math.pi * (2 * j + 1), 1.0)
            for j in range(-jmax - 1, jmax + 1)
            if abs(math.pi * (2 * j + 1)) < reach
        ]
        return lines + kinks, []

    # ----------------------------------------------------------- serialisation
    def to_dict(self) -> dict[str, Any]:
        if not self.l1.is_constant:
            raise ParameterError("models with a closure L1 cannot be serialised")
        out: dict[str, Any] = {"dimension": self.dimension, "kind": self.kind.value}
        if isinstance(self.alpha, tuple):
            out["alpha_p"], out["alpha_q"] = self.alpha
        else:
            out["alpha"] = float(self.alpha)
        if self.slope_p is not None:
            out["p"] = self.slope_p
        if self.slope_q is not None:
            out["q"] = self.slope_q
        out["l1"] = {"type": "const", "value": self.l1.value}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SpectralModel:
        try:
            if "alpha_p" in data:
                alpha: float | tuple[float, float] = (float(data["alpha_p"]), float(data["alpha_q"]))
            else:
                alpha = float(data.get("alpha", 0.0))
            l1 = data.get("l1", {"type": "const", "value": 1.0})
            if l1.get("type") != "const":
                raise ParameterError("only constant L1 factors can be deserialised")
            return cls(
                dimension=int(data["dimension"]),
                kind=Kind(data["kind"]),
                alpha=alpha,
                slope_p=None if data.get("p") is None else float(data["p"]),
                slope_q=None if data.get("q") is None else float(data["q"]),
                l1=L1Factor(float(l1["value"])),
            )
        except ParameterError:
            raise
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ParameterError(f"malformed model description: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> SpectralModel:
        return cls.from_dict(json.loads(text))


def isotropic(alpha: float, dimension: int = 1, l1: float = 1.0) -> SpectralModel:
    return SpectralModel(dimension, Kind.ISOTROPIC, alpha, l1=L1Factor(l1))


def product(alpha: float, dimension: int = 2, l1: float = 1.0) -> SpectralModel:
    return SpectralModel(dimension, Kind.PRODUCT, alpha, l1=L1Factor(l1))


def two_lines(alpha_p: float, alpha_q: float, p: float, q: float, l1: float = 1.0) -> SpectralModel:
    return SpectralModel(2, Kind.TWO_LINES, (alpha_p, alpha_q), slope_p=p, slope_q=q, l1=L1Factor(l1))


def one_direction(alpha: float, p: float, l1: float = 1.0) -> SpectralModel:
    return SpectralModel(2, Kind.ONE_DIRECTION, alpha, slope_p=p, l1=L1Factor(l1))


def white_noise(dimension: int = 1) -> SpectralModel:
    return SpectralModel(dimension, Kind.WHITE_NOISE)


def eval_filter(model: SpectralModel, x: float | np.ndarray) -> complex:
    """Filter value ``a(x)`` at a single point of ``E``.

    Raises
    ------
    SingularPointError
        If the formula gives an infinite value at ``x``.
    """
    pt = np.asarray(x, dtype=float)
    if model.dimension == 1:
        pt = pt.reshape(())
    elif pt.shape != (model.dimension,):
        raise ParameterError(f"expected a point of R^{model.dimension}")
    if np.any(np.abs(pt) > math.pi):
        raise ParameterError("x must lie in E = [-pi, pi]^d")
    val = complex(model.filter(pt))
    if not math.isfinite(abs(val)):
        raise SingularPointError(f"filter of {model.name} is infinite at {pt.tolist()}")
    return val
