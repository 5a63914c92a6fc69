from __future__ import annotations

import math

import numpy as np
import pytest

from lmfield.covariance import covariance_table
from lmfield.errors import ResourceError
from lmfield.forms import QuadraticFormSpec, lag_spec, quadratic_form_fft
from lmfield.models import isotropic, one_direction, product, white_noise
from lmfield.rng import RngStream
from lmfield.simulate import ExactSampler, FieldSample
from lmfield.wick import overlap_counts, wick_variance_qn, wick_variance_rhat


def brute_variance(model, spec, n):
    d = model.dimension
    sites = np.array(np.meshgrid(*[np.arange(n)] * d, indexing="ij")).reshape(d, -1).T
    tab = covariance_table(model, 2 * n)
    diff = sites[:, None, :] - sites[None, :, :]
    C = tab(diff) if d > 1 else tab(diff[..., 0])
    G = np.zeros_like(C)
    for lag, w in zip(spec.lags, spec.weights):
        G += w * np.all(diff == lag, axis=-1)
    return 2 * np.trace(G @ C @ G @ C) / n ** (2 * d)


@pytest.mark.parametrize("d, n", [(1, 1), (1, 7), (1, 64), (2, 5)])
def test_white_noise_variance(d, n):
    assert wick_variance_qn(white_noise(d), lag_spec((0,) * d), n) == pytest.approx(2 / n**d, rel=1e-12)


@pytest.mark.parametrize(
    "model, spec, n",
    [
        (isotropic(-0.3), QuadraticFormSpec(1, np.array([[0], [1], [-1], [3], [-3]]), np.array([1.0, 0.4, 0.4, -0.2, -0.2])), 9),
        (product(-0.4, 2), QuadraticFormSpec(2, np.array([[0, 0], [1, -1], [-1, 1]]), np.array([1.0, 0.5, 0.5])), 4),
    ],
)
def test_against_trace_formula(model, spec, n):
    assert wick_variance_qn(model, spec, n) == pytest.approx(brute_variance(model, spec, n), rel=1e-10)


def test_scaling_is_quadratic():
    m, spec = isotropic(-0.3), lag_spec(2)
    assert wick_variance_qn(m, spec.scaled(3.0), 20) == pytest.approx(9 * wick_variance_qn(m, spec, 20), rel=1e-12)


@pytest.mark.parametrize("h", [0, 1, 4])
def test_rhat_variance_by_trace(h):
    model, n = isotropic(-0.3), 12
    tab = covariance_table(model, n + h + 2)
    i = np.arange(n)
    A = i[:, None] - i[None, :]
    v = sum(
        (tab(a) * tab(b) + tab(a + h) * tab(b - h)) for a, b in [(A, A)]
    )
    assert wick_variance_rhat(model, h, n) == pytest.approx(float(np.sum(v)) / n**2, rel=1e-12)


def test_one_direction_sparse_path_matches_dense():
    m = one_direction(-0.35, 1)
    n, h = 20, (1, 0)
    tab = covariance_table(m, n + 2)
    assert wick_variance_rhat(m, h, n) == pytest.approx(wick_variance_rhat(m, h, n, table=tab), rel=1e-10)


def test_overlap_counts_brute_force():
    n = 6
    for m in range(-3, 4):
        for mp in range(-3, 4):
            counts = overlap_counts(n, m, mp)
            for k, u in enumerate(range(-(n - 1), n)):
                brute = sum(1 for j in range(1, n + 1) if 1 <= j + m <= n and 1 <= j + u <= n and 1 <= j + u + mp <= n)
                assert counts[k] == brute


def test_resource_bound():
    with pytest.raises(ResourceError):
        wick_variance_rhat(isotropic(-0.2, 2), (0, 0), 20000)


def test_monte_carlo_agreement():
    model, n = isotropic(-0.3), 16
    s = ExactSampler(model, n)
    spec = lag_spec(0)
    q = np.concatenate([
        [quadratic_form_fft(FieldSample(1, n, 0, x), spec) for x in s.sample_values([RngStream(77, r) for r in range(b, b + 2000)])]
        for b in range(0, 20000, 2000)
    ])
    c = q - q.mean()
    se = math.sqrt((np.mean(c**4) - np.mean(c**2) ** 2) / q.size)
    assert abs(q.var(ddof=1) - wick_variance_qn(model, spec, n)) < 4 * se
