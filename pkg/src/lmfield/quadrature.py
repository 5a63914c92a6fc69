"""Composite Gauss rules for integrands with power-law singularities.

Rules are returned as explicit ``(nodes, weights)`` arrays so a single rule
can be reused for many oscillation frequencies at once. Panels are graded
dyadically toward singular points; when the local power exponent is known,
the innermost panel uses a Gauss-Jacobi rule that integrates the power
exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.special import roots_jacobi

from lmfield.errors import QuadratureBudgetError

__all__ = [
    "SingularPoint",
    "SingularLine",
    "Rule",
    "gauss_legendre",
    "gauss_jacobi",
    "rule_1d",
    "rule_2d",
    "integrate_1d",
]

DEFAULT_ORDER = 12
DEFAULT_DEPTH = 40
MAX_NODES = 40_000_000


@dataclass(frozen=True)
class SingularPoint:
    """A point where the integrand behaves like ``|x - location|**exponent``.

    ``exponent=None`` marks a point of reduced smoothness with unknown order
    (a kink or a nearby complex singularity).
    """

    location: tuple[float, ...]
    exponent: float | None = None


@dataclass(frozen=True)
class SingularLine:
    """The line ``c1*x1 + c2*x2 = offset`` carrying ``|c.x - offset|**exponent``."""

    c1: float
    c2: float
    offset: float
    exponent: float | None = None

    def x1_at(self, x2: float) -> float | None:
        if self.c1 == 0.0:
            return None
        return (self.offset - self.c2 * x2) / self.c1

    def x2_at(self, x1: float) -> float | None:
        if self.c2 == 0.0:
            return None
        return (self.offset - self.c1 * x1) / self.c2


@dataclass(frozen=True)
class Rule:
    """Quadrature nodes (shape ``(N,)`` or ``(N, d)``) and weights (``(N,)``)."""

    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return int(self.weights.size)

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Contract ``values`` (leading axis over nodes) with the weights."""
        return np.tensordot(self.weights, values, axes=(0, 0))


@lru_cache(maxsize=64)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=256)
def gauss_jacobi(order: int, exponent: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1] for the weight ``(1 + xi)**exponent``."""
    x, w = roots_jacobi(order, 0.0, exponent)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _panel_gl(a: float, b: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = gauss_legendre(order)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def _panel_singular(end: float, other: float, exponent: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Rule on the panel between ``end`` and ``other`` that is exact for
    ``|x - end|**exponent`` times a polynomial."""
    xi, w = gauss_jacobi(order, exponent)
    width = abs(other - end)
    sign = 1.0 if other > end else -1.0
    dist = 0.5 * width * (1.0 + xi)
    nodes = end + sign * dist
    weights = (0.5 * width) ** (exponent + 1.0) * w / dist**exponent
    return nodes, weights


def _oscillation_pieces(width: float, hmax: float) -> int:
    # one period of the fastest oscillation per panel keeps a 12-point rule
    # well inside its resolution limit
    if hmax <= 0.0:
        return 1
    return max(1, math.ceil(width * hmax / (2.0 * math.pi)))


def _uniform(a: float, b: float, hmax: float, order: int, out_x: list, out_w: list) -> None:
    pieces = _oscillation_pieces(b - a, hmax)
    edges = np.linspace(a, b, pieces + 1)
    x, w = gauss_legendre(order)
    half = 0.5 * np.diff(edges)
    nodes = edges[:-1, None] + half[:, None] * (x[None, :] + 1.0)
    out_x.append(nodes.ravel())
    out_w.append((half[:, None] * w[None, :]).ravel())


def _graded(
    end: float,
    other: float,
    exponent: float | None,
    hmax: float,
    order: int,
    depth: int,
    out_x: list,
    out_w: list,
) -> None:
    """Dyadic panels on the segment from ``end`` (singular) to ``other``."""
    width = other - end
    if width == 0.0:
        return
    if exponent is not None and exponent >= 1.0 and float(exponent).is_integer():
        levels = 0  # a kink: both sides are smooth once it is a breakpoint
    elif exponent is not None and exponent < 0.0:
        levels = depth
        if end != 0.0:
            # nodes closer than ~1e-10 |end| would lose the distance to rounding
            levels = min(levels, max(0, int(math.log2(abs(width) / (1e-5 * abs(end))))))
    else:
        levels = depth
        if end != 0.0:
            levels = min(levels, max(0, int(math.log2(abs(width) / (1e-9 * abs(end))))))
    for k in range(levels):
        lo = end + width * 0.5 ** (k + 1)
        hi = end + width * 0.5**k
        a, b = (lo, hi) if lo < hi else (hi, lo)
        _uniform(a, b, hmax, order, out_x, out_w)
    if levels == 0 and not (exponent is not None and exponent < 0.0):
        _uniform(min(end, other), max(end, other), hmax, order, out_x, out_w)
        return
    tip = end + width * 0.5**levels
    if exponent is not None and exponent < 0.0:
        x, w = _panel_singular(end, tip, exponent, order)
    else:
        x, w = _panel_gl(min(end, tip), max(end, tip), order)
    out_x.append(x)
    out_w.append(w)


def _combine(e1: float | None, e2: float | None, mode: str) -> float | None:
    # kink markers (exponent >= 1) are dominated by any true singularity
    if e1 is not None and e1 >= 1.0:
        return e2
    if e2 is not None and e2 >= 1.0:
        return e1
    if e1 is None or e2 is None:
        return None
    if mode == "min":
        return min(e1, e2)
    total = e1 + e2
    return total if total > -0.99 else None


def _merge_points(points: Sequence[tuple[float, float | None]], rel: float, mode: str) -> list[tuple[float, float | None]]:
    merged: list[tuple[float, float | None]] = []
    for loc, exp in sorted(points, key=lambda p: p[0]):
        if merged and abs(loc - merged[-1][0]) <= rel * max(abs(loc), abs(merged[-1][0])):
            merged[-1] = (merged[-1][0], _combine(merged[-1][1], exp, mode))
        else:
            merged.append((loc, exp))
    return merged


def rule_1d(
    a: float,
    b: float,
    points: Sequence[tuple[float, float | None]] = (),
    hmax: float = 0.0,
    order: int = DEFAULT_ORDER,
    depth: int = DEFAULT_DEPTH,
    combine: str = "min",
) -> Rule:
    """Composite rule on ``[a, b]`` graded toward ``points``.

    Parameters
    ----------
    a, b : float
        Interval end points, ``a < b``.
    points : sequence of (location, exponent)
        Singular points. Points outside ``[a, b]`` are ignored; points on
        the boundary are graded toward from the inside.
    hmax : float
        Largest angular frequency the rule must resolve.
    order : int
        Gauss points per panel.
    depth : int
        Number of dyadic levels toward a singular point.
    combine : {"min", "sum"}
        How exponents of coincident points combine: ``"sum"`` when they are
        factors of one product (two lines crossing the same abscissa),
        ``"min"`` when they are separate terms.
    """
    if not b > a:
        raise ValueError("rule_1d needs a < b")
    # points closer than rounding can resolve are merged; the relative test
    # keeps two singularities at +-1e-20 apart
    rel = 1e-9
    snap = rel * max(abs(a), abs(b))
    inside: list[tuple[float, float | None]] = []
    for loc, exp in points:
        if a - snap <= loc <= b + snap:
            inside.append((a if loc - a <= snap else b if b - loc <= snap else loc, exp))
        elif exp is not None and exp >= 1.0:
            continue
        # a singularity just outside the interval still spoils the nearby panel
        elif a - 0.5 * (b - a) < loc < a:
            inside.append((a, None))
        elif b < loc < b + 0.5 * (b - a):
            inside.append((b, None))
    merged = _merge_points(inside, rel, combine)
    sing: dict[float, float | None] = {}
    for loc, exp in merged:
        sing[loc] = _combine(sing[loc], exp, combine) if loc in sing else exp
    breaks = sorted({a, b, *sing.keys()})
    xs: list[np.ndarray] = []
    ws: list[np.ndarray] = []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        lo_s = lo in sing
        hi_s = hi in sing
        if lo_s and hi_s:
            mid = 0.5 * (lo + hi)
            _graded(lo, mid, sing[lo], hmax, order, depth, xs, ws)
            _graded(hi, mid, sing[hi], hmax, order, depth, xs, ws)
        elif lo_s:
            _graded(lo, hi, sing[lo], hmax, order, depth, xs, ws)
        elif hi_s:
            _graded(hi, lo, sing[hi], hmax, order, depth, xs, ws)
        else:
            _uniform(lo, hi, hmax, order, xs, ws)
    nodes = np.concatenate(xs)
    weights = np.concatenate(ws)
    if nodes.size > MAX_NODES:
        raise QuadratureBudgetError(f"rule needs {nodes.size} nodes", estimate=float("nan"))
    return Rule(nodes, weights)


def _outer_points(
    box: tuple[tuple[float, float], tuple[float, float]],
    lines: Sequence[SingularLine],
    points: Sequence[SingularPoint],
) -> list[tuple[float, float | None]]:
    (a1, b1), (a2, b2) = box
    out: list[tuple[float, float | None]] = []

    def plus_one(e: float | None) -> float | None:
        return None if e is None else e + 1.0

    for ln in lines:
        if ln.c1 == 0.0:
            out.append((ln.offset / ln.c2, ln.exponent))
            continue
        # where the singular point of the inner integral enters or leaves the box
        for edge in (a1, b1):
            x2 = ln.x2_at(edge)
            if x2 is not None:
                out.append((x2, plus_one(ln.exponent)))
    oblique = [ln for ln in lines if ln.c1 != 0.0]
    for i, l1 in enumerate(oblique):
        for l2 in oblique[i + 1 :]:
            det = l1.c1 * l2.c2 - l1.c2 * l2.c1
            if det == 0.0:
                continue
            x2 = (l1.c1 * l2.offset - l2.c1 * l1.offset) / det
            x1 = l1.x1_at(x2)
            if x1 is None or not (a1 <= x1 <= b1):
                continue
            if l1.exponent is None or l2.exponent is None:
                out.append((x2, None))
            else:
                out.append((x2, l1.exponent + l2.exponent + 1.0))
    for pt in points:
        x1, x2 = pt.location
        if a1 <= x1 <= b1:
            out.append((x2, plus_one(pt.exponent)))
    return out


def rule_2d(
    box: tuple[tuple[float, float], tuple[float, float]],
    lines: Sequence[SingularLine] = (),
    points: Sequence[SingularPoint] = (),
    hmax: tuple[float, float] = (0.0, 0.0),
    order: int = DEFAULT_ORDER,
    depth: int = DEFAULT_DEPTH,
) -> Rule:
    """Iterated rule on a rectangle with singular lines and points.

    The outer variable is ``x2``. Outer breakpoints sit at horizontal
    singular lines, line intersections, box-edge crossings and singular
    points; the inner ``x1`` rule at each outer node is graded toward the
    crossings of every non-horizontal line and toward the ``x1`` coordinate
    of each singular point.
    """
    (a1, b1), (a2, b2) = box
    h1, h2 = hmax
    shift = max([abs(ln.c2 / ln.c1) for ln in lines if ln.c1 != 0.0] + [0.0])
    outer = rule_1d(a2, b2, _outer_points(box, lines, points), h2 + shift * h1, order, depth)
    xs: list[np.ndarray] = []
    ws: list[np.ndarray] = []
    total = 0
    for x2, w2 in zip(outer.nodes, outer.weights):
        inner_pts: list[tuple[float, float | None]] = []
        for ln in lines:
            x1 = ln.x1_at(x2)
            if x1 is not None:
                inner_pts.append((x1, ln.exponent))
        for pt in points:
            inner_pts.append((pt.location[0], None))
        inner = rule_1d(a1, b1, inner_pts, h1, order, depth, combine="sum")
        xs.append(np.column_stack([inner.nodes, np.full(inner.size, x2)]))
        ws.append(inner.weights * w2)
        total += inner.size
        if total > MAX_NODES:
            raise QuadratureBudgetError(f"2-d rule exceeds {MAX_NODES} nodes", estimate=float("nan"))
    return Rule(np.concatenate(xs), np.concatenate(ws))


def integrate_1d(
    func: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    points: Sequence[tuple[float, float | None]] = (),
    hmax: float = 0.0,
    tol: float = 1e-8,
    order: int = DEFAULT_ORDER,
) -> tuple[float, float]:
    """Integrate ``func`` on ``[a, b]``; returns ``(value, error_estimate)``.

    The error estimate compares two rule orders on the same panels; the
    oscillation resolution is doubled until it drops below ``tol``.
    """
    err = float("inf")
    scale = 1.0
    for _ in range(6):
        lo = rule_1d(a, b, points, hmax * scale, order)
        hi = rule_1d(a, b, points, hmax * scale, order + 8)
        v_lo = lo.apply(func(lo.nodes))
        v_hi = hi.apply(func(hi.nodes))
        err = float(np.max(np.abs(v_hi - v_lo)))
        if err <= tol:
            return v_hi, err
        scale *= 2.0
        if hmax == 0.0:
            hmax = 2.0 * math.pi / (b - a)
    raise QuadratureBudgetError("quadrature budget exceeded", estimate=err)
