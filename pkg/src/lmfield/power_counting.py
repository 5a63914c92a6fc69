"""Power counting for products of powers of linear functionals.

For an integrand ``prod_k |L_k(u)|^(gamma_k)`` (with some factors of the form
``(1 + |L_k(u)|)^(gamma_k)``), integrability at infinity is decided by
``d_inf(W) = rank(T) - rank(W) + sum_(k not in W) gamma_k`` over the
span-closed padded subsets ``W`` of the functionals ``T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import sympy as sp

from lmfield.errors import ParameterError

__all__ = [
    "PowerCountingProblem",
    "power_counting_d_inf",
    "rank",
    "span_closed_padded_subsets",
    "two_line_problem",
    "max_d_inf",
]

MAX_FUNCTIONALS = 20


def _row(v: Iterable) -> tuple[Fraction, ...]:
    return tuple(Fraction(c) for c in v)


def _exact(v) -> sp.Expr:
    """Exact sympy value: fractions and integers verbatim, floats by their shortest decimal."""
    if isinstance(v, Fraction):
        return sp.Rational(v.numerator, v.denominator)
    if isinstance(v, float):
        return sp.Rational(repr(v))
    return sp.sympify(v)


@dataclass(frozen=True)
class PowerCountingProblem:
    """Linear functionals ``L_k`` (rows over the integration variables) and exponents ``gamma_k``.

    Exponents may be numbers or sympy expressions.
    """

    functionals: tuple[tuple[Fraction, ...], ...]
    exponents: tuple

    def __post_init__(self) -> None:
        rows = tuple(_row(r) for r in self.functionals)
        if len(rows) != len(self.exponents):
            raise ParameterError("each functional needs one exponent")
        if not rows:
            raise ParameterError("empty problem")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ParameterError("functionals must share the number of variables")
        object.__setattr__(self, "functionals", rows)
        object.__setattr__(self, "exponents", tuple(_exact(e) for e in self.exponents))
        if rank(rows) > width:
            raise ParameterError("rank exceeds the number of variables")

    @property
    def size(self) -> int:
        return len(self.functionals)

    @property
    def variables(self) -> int:
        return len(self.functionals[0])

    def substitute(self, values: dict) -> PowerCountingProblem:
        return PowerCountingProblem(self.functionals, tuple(e.subs(values) for e in self.exponents))


def rank(rows: Sequence[Sequence[Fraction]]) -> int:
    """Exact rank over the rationals."""
    if not rows:
        return 0
    return int(sp.Matrix([[sp.Rational(c.numerator, c.denominator) for c in r] for r in rows]).rank())


def power_counting_d_inf(problem: PowerCountingProblem, subset: Iterable[int]):
    """``rank(T) - rank(W) + sum_(k not in W) gamma_k`` for ``W`` given by 0-based indices.

    Raises
    ------
    IndexError
        If ``W`` is not a subset of ``T``.
    """
    W = sorted(set(int(k) for k in subset))
    for k in W:
        if not 0 <= k < problem.size:
            raise IndexError(f"functional index {k} is not in T (size {problem.size})")
    inW = set(W)
    rT = rank(problem.functionals)
    rW = rank([problem.functionals[k] for k in W])
    rest = sum((problem.exponents[k] for k in range(problem.size) if k not in inW), sp.Integer(0))
    return sp.expand(rT - rW + rest)


# ------------------------------------------------------------ enumeration
def _integer_row(v: Sequence[Fraction]) -> list[int]:
    den = 1
    for c in v:
        den = den * c.denominator // math.gcd(den, c.denominator)
    return [int(c * den) for c in v]


def _normalise(w: list[int]) -> list[int]:
    g = 0
    for c in w:
        g = math.gcd(g, c)
    return [c // g for c in w] if g > 1 else w


class _Span:
    """Echelon basis of integer vectors; exact and faster than rational rows."""

    def __init__(self, rows: Iterable[Sequence[Fraction]] = ()) -> None:
        self.pivots: list[tuple[int, list[int]]] = []
        for r in rows:
            self.add(r)

    def copy(self) -> _Span:
        out = _Span()
        out.pivots = list(self.pivots)
        return out

    def reduce(self, v: Sequence[Fraction] | list[int]) -> list[int]:
        w = _integer_row(v) if v and isinstance(v[0], Fraction) else list(v)
        for col, row in self.pivots:
            c = w[col]
            if c:
                p = row[col]
                w = [p * a - c * b for a, b in zip(w, row)]
        return w

    def add(self, v: Sequence[Fraction]) -> bool:
        w = self.reduce(v)
        for col, c in enumerate(w):
            if c:
                self.pivots.append((col, _normalise(w)))
                return True
        return False

    def contains(self, v: Sequence[Fraction]) -> bool:
        return not any(self.reduce(v))

    @property
    def rank(self) -> int:
        return len(self.pivots)


def _padded(rows: Sequence[tuple[Fraction, ...]], W: frozenset[int]) -> bool:
    for k in W:
        others = _Span(rows[j] for j in W if j != k)
        if not others.contains(rows[k]):
            return False
    return True


def _extend(residuals: tuple[tuple[int, ...], ...], k: int) -> tuple[tuple[int, ...], ...]:
    """Residuals of every functional modulo the span enlarged by functional ``k``."""
    piv = residuals[k]
    col = next(i for i, c in enumerate(piv) if c)
    p = piv[col]
    out = []
    for r in residuals:
        c = r[col]
        out.append(tuple(_normalise([p * a - c * b for a, b in zip(r, piv)])) if c else r)
    return tuple(out)


def span_closed_padded_subsets(problem: PowerCountingProblem) -> list[frozenset[int]]:
    """All ``W`` with ``span(W) & T = W`` in which every member depends on the others.

    The empty set is included (it is vacuously padded). Each flat carries the
    residuals of all functionals modulo its span, so a flat is extended by one
    elimination step per functional; functionals landing in an already
    generated cover are skipped.
    """
    if problem.size > MAX_FUNCTIONALS:
        raise ParameterError(f"enumeration is limited to |T| <= {MAX_FUNCTIONALS}")
    rows = problem.functionals
    res0 = tuple(tuple(_integer_row(r)) for r in rows)

    def closure(res: tuple[tuple[int, ...], ...]) -> frozenset[int]:
        return frozenset(j for j, r in enumerate(res) if not any(r))

    start = closure(res0)
    seen = {start}
    frontier = [(start, res0)]
    while frontier:
        nxt = []
        for F, res in frontier:
            remaining = set(range(problem.size)) - F
            while remaining:
                k = min(remaining)
                ext = _extend(res, k)
                G = closure(ext)
                remaining -= G
                if G not in seen:
                    seen.add(G)
                    nxt.append((G, ext))
        frontier = nxt
    return sorted((W for W in seen if _padded(rows, W)), key=lambda W: (len(W), sorted(W)))


def max_d_inf(problem: PowerCountingProblem, values: dict) -> tuple[object, frozenset[int]]:
    """Largest ``d_inf(W)`` over padded flats other than ``T``, at numeric parameter values."""
    sub = problem.substitute(values)
    full = frozenset(range(problem.size))
    best = None
    for W in span_closed_padded_subsets(sub):
        if W == full:
            continue
        v = power_counting_d_inf(sub, W)
        if best is None or v > best[0]:
            best = (v, W)
    if best is None:
        raise ParameterError("no proper padded flat")
    return best


def two_line_problem(p=None, q=None, alpha_p=None, alpha_q=None, beta=None) -> PowerCountingProblem:
    """The (H) integral for ``a~ = |x1 + p x2|^(alpha_p) |x1 + q x2|^(alpha_q)`` in d = 2.

    Variables are ``u = (x1, x2, y1, y2, t1, t2, s1, s2)``. The sixteen
    functionals are, in order: ``x1+p x2, x1+q x2, y1+p y2, y1+q y2`` with
    exponents ``2 alpha_p, 2 alpha_q, 2 alpha_p, 2 alpha_q``; ``t1, t2, s1, s2``
    with exponent ``beta``; then ``x_k+t_k, y_k-t_k, x_k+s_k, y_k-s_k`` for
    ``k = 1, 2`` with exponent ``-1``. Omitted parameters become symbols.
    """
    ap = sp.Symbol("alpha_p") if alpha_p is None else _exact(alpha_p)
    aq = sp.Symbol("alpha_q") if alpha_q is None else _exact(alpha_q)
    b = sp.Symbol("beta") if beta is None else _exact(beta)
    pv = Fraction(2) if p is None else Fraction(p)
    qv = Fraction(-1) if q is None else Fraction(q)
    if pv == qv:
        raise ParameterError("slopes must differ")

    def e(i: int) -> list[Fraction]:
        v = [Fraction(0)] * 8
        v[i] = Fraction(1)
        return v

    def add(*terms: tuple[int, Fraction]) -> tuple[Fraction, ...]:
        v = [Fraction(0)] * 8
        for i, c in terms:
            v[i] += c
        return tuple(v)

    x1, x2, y1, y2, t1, t2, s1, s2 = range(8)
    rows = [
        add((x1, 1), (x2, pv)),
        add((x1, 1), (x2, qv)),
        add((y1, 1), (y2, pv)),
        add((y1, 1), (y2, qv)),
        tuple(e(t1)),
        tuple(e(t2)),
        tuple(e(s1)),
        tuple(e(s2)),
    ]
    exps = [2 * ap, 2 * aq, 2 * ap, 2 * aq, b, b, b, b]
    for xk, yk, tk, sk in ((x1, y1, t1, s1), (x2, y2, t2, s2)):
        rows += [
            add((xk, 1), (tk, 1)),
            add((yk, 1), (tk, -1)),
            add((xk, 1), (sk, 1)),
            add((yk, 1), (sk, -1)),
        ]
        exps += [-1, -1, -1, -1]
    return PowerCountingProblem(tuple(rows), tuple(exps))
