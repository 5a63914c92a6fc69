from __future__ import annotations

import random
from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from lmfield.errors import ParameterError
from lmfield.power_counting import (
    PowerCountingProblem,
    max_d_inf,
    power_counting_d_inf,
    rank,
    span_closed_padded_subsets,
    two_line_problem,
)

CROSS = range(8, 16)  # x_k + t_k, y_k - t_k, x_k + s_k, y_k - s_k


def test_symbolic_value_on_the_cross_terms():
    prob = two_line_problem()
    ap, aq, b = sp.symbols("alpha_p alpha_q beta")
    assert sp.simplify(power_counting_d_inf(prob, CROSS) - (8 - 6 + 4 * ap + 4 * aq + 4 * b)) == 0


def test_numeric_example():
    prob = two_line_problem(alpha_p=Fraction(-3, 10), alpha_q=Fraction(-3, 10), beta=0)
    assert power_counting_d_inf(prob, CROSS) == sp.Rational(-2, 5)


def test_full_set_gives_zero():
    prob = two_line_problem(alpha_p=Fraction(-1, 5), alpha_q=Fraction(-1, 4), beta=Fraction(1, 7))
    assert power_counting_d_inf(prob, range(16)) == 0


def test_index_outside_t():
    with pytest.raises(IndexError):
        power_counting_d_inf(two_line_problem(), [3, 16])


def test_ten_random_rational_triples():
    rnd = random.Random(2024)
    prob = two_line_problem()
    for _ in range(10):
        ap, aq, b = (Fraction(rnd.randint(-49, 49), rnd.randint(50, 97)) for _ in range(3))
        sub = prob.substitute({sp.Symbol("alpha_p"): sp.Rational(ap.numerator, ap.denominator),
                               sp.Symbol("alpha_q"): sp.Rational(aq.numerator, aq.denominator),
                               sp.Symbol("beta"): sp.Rational(b.numerator, b.denominator)})
        got = power_counting_d_inf(sub, CROSS)
        want = 2 + 4 * ap + 4 * aq + 4 * b
        assert got == sp.Rational(want.numerator, want.denominator)


@given(
    st.fractions(min_value=-1, max_value=1, max_denominator=60),
    st.fractions(min_value=-1, max_value=1, max_denominator=60),
    st.fractions(min_value=-1, max_value=1, max_denominator=60),
    st.sampled_from([Fraction(2), Fraction(3), Fraction(1, 2), Fraction(-2)]),
)
def test_cross_terms_for_any_slopes(ap, aq, b, p):
    prob = two_line_problem(p=p, q=-1, alpha_p=ap, alpha_q=aq, beta=b)
    want = 2 + 4 * ap + 4 * aq + 4 * b
    assert power_counting_d_inf(prob, CROSS) == sp.Rational(want.numerator, want.denominator)


def test_rank_is_exact():
    rows = [(Fraction(1), Fraction(1, 3)), (Fraction(3), Fraction(1))]
    assert rank(rows) == 1
    assert rank(two_line_problem().functionals) == 8


def test_flats_are_span_closed_and_padded():
    prob = two_line_problem()
    flats = span_closed_padded_subsets(prob)
    assert frozenset(CROSS) in flats
    assert frozenset(range(16)) in flats
    assert frozenset() in flats
    rows = prob.functionals
    for W in flats[:40]:
        rW = rank([rows[k] for k in W])
        for j in set(range(16)) - W:
            assert rank([rows[k] for k in W] + [rows[j]]) == rW + 1


def test_another_flat_can_dominate():
    # {L1, L3} plus the cross terms: 1 + 4 alpha_q + 4 beta, non-negative here although the lemma region holds
    prob = two_line_problem(alpha_p=Fraction(-9, 20), alpha_q=Fraction(-1, 10), beta=0)
    W = frozenset([0, 2, *CROSS])
    assert W in span_closed_padded_subsets(prob)
    assert power_counting_d_inf(prob, W) == sp.Rational(3, 5)
    best, _ = max_d_inf(prob, {})
    assert best >= sp.Rational(3, 5)


def test_problem_validation():
    with pytest.raises(ParameterError):
        PowerCountingProblem(((1, 0),), (1, 2))
    with pytest.raises(ParameterError):
        two_line_problem(p=1, q=1)


def test_values_stay_rational():
    prob = two_line_problem(alpha_p=Fraction(1), alpha_q=Fraction(-37, 43), beta=Fraction(7, 22))
    got = power_counting_d_inf(prob, CROSS)
    assert got.is_Rational and got == sp.Rational(1812, 473)
    assert two_line_problem(alpha_p=-0.3, alpha_q=-0.3, beta=0.0).exponents[0] == sp.Rational(-3, 5)
