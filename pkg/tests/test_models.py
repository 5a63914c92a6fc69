from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lmfield.errors import ParameterError, SingularPointError
from lmfield.models import (
    Kind,
    SpectralModel,
    eval_filter,
    isotropic,
    one_direction,
    product,
    two_lines,
    white_noise,
    wrap,
)


def test_white_noise_filter_is_flat():
    assert eval_filter(white_noise(1), 1.0) == pytest.approx((2 * math.pi) ** -0.5)
    assert eval_filter(white_noise(2), np.array([0.3, -2.0])) == pytest.approx(1 / (2 * math.pi))


def test_isotropic_power():
    assert abs(eval_filter(isotropic(-0.3), 0.5)) == pytest.approx(0.5**-0.3, rel=1e-14)
    assert abs(eval_filter(isotropic(-0.3), 0.5)) == pytest.approx(1.2311, abs=5e-5)


def test_two_lines_is_a_product_of_line_powers():
    # (0.3 + 0.1)^(-1/4) (0.3 - 0.1)^(-1/4)
    value = abs(eval_filter(two_lines(-0.25, -0.25, 1, -1), np.array([0.3, 0.1])))
    assert value == pytest.approx(0.08**-0.25, rel=1e-14)


@pytest.mark.parametrize(
    "model, point",
    [
        (isotropic(-0.3), 0.0),
        (isotropic(-0.2, 2), np.array([0.0, 0.0])),
        (two_lines(-0.2, -0.1, 2, -1), np.array([-0.4, 0.2])),
        (one_direction(-0.35, 1), np.array([0.5, -0.5])),
    ],
)
def test_infinite_filter_signals_singular_point(model, point):
    with pytest.raises(SingularPointError):
        eval_filter(model, point)


def test_finite_value_on_singular_set_is_returned():
    assert eval_filter(isotropic(0.3), 0.0) == 0.0


@pytest.mark.parametrize(
    "factory",
    [lambda: isotropic(-0.6), lambda: isotropic(-1.0, 2), lambda: two_lines(-0.5, 0.1, 1, -1), lambda: one_direction(-0.5, 1)],
)
def test_non_integrable_densities_are_refused(factory):
    with pytest.raises(ParameterError):
        factory()


def test_two_lines_needs_distinct_slopes():
    with pytest.raises(ParameterError):
        two_lines(-0.1, -0.1, 1, 1)


@given(
    alpha=st.floats(-0.45, 0.5),
    c=st.floats(0.05, 20.0),
    x=st.floats(0.01, 3.0),
    y=st.floats(-3.0, 3.0),
)
def test_homogeneity(alpha, c, x, y):
    for model in (isotropic(alpha, 2), product(alpha, 2)):
        pt = np.array([x, y])
        if model.kind is Kind.PRODUCT and y == 0.0:
            continue
        lhs = model.homogeneous(c * pt)
        rhs = c ** model.degree * model.homogeneous(pt)
        assert lhs == pytest.approx(rhs, rel=1e-10)


@given(st.floats(-50.0, 50.0))
def test_wrap_lands_in_fundamental_interval(u):
    w = float(wrap(np.array(u)))
    assert -math.pi <= w <= math.pi
    assert math.cos(w) == pytest.approx(math.cos(u), abs=1e-9)


def test_one_direction_depends_on_the_line_variable_only():
    m = one_direction(-0.3, 2)
    a = m.density(np.array([0.7, 0.2]))
    b = m.density(np.array([0.7 + 2 * 0.5, 0.2 - 0.5]))
    assert a == pytest.approx(b, rel=1e-12)
    assert m.ftilde.kind is Kind.ISOTROPIC and m.ftilde.dimension == 1


@pytest.mark.parametrize(
    "model, in_l2",
    [
        (isotropic(-0.2), True),
        (isotropic(-0.3), False),
        (isotropic(-0.45, 2), True),
        (one_direction(-0.35, 1), False),
        (two_lines(-0.2, -0.2, 1, -1), True),
        (white_noise(2), True),
    ],
)
def test_square_integrability(model, in_l2):
    assert model.in_l2() is in_l2


@pytest.mark.parametrize(
    "model",
    [isotropic(-0.3), product(-0.4, 2), two_lines(-0.3, -0.1, 2, -1), one_direction(-0.35, 1.5), white_noise(2), isotropic(-0.1, 1, l1=2.0)],
)
def test_model_json_round_trip(model):
    back = SpectralModel.from_json(model.to_json())
    assert back == model
    assert back.name == model.name


def test_malformed_model_description():
    with pytest.raises(ParameterError):
        SpectralModel.from_dict({"kind": "Isotropic"})
