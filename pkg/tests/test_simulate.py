from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lmfield.covariance import covariance
from lmfield.errors import ParameterError, ResourceError
from lmfield.forms import empirical_cov
from lmfield.models import isotropic, one_direction, product, two_lines, white_noise
from lmfield.rng import RngStream
from lmfield.simulate import (
    ExactSampler,
    FieldSample,
    SpectralSynthesizer,
    cell_masses,
    sample_mean,
    simulate_exact,
    simulate_spectral,
)


def se_mean(x):
    x = np.asarray(x)
    return x.std(ddof=1) / math.sqrt(x.size)


# ------------------------------------------------------------------- streams
def test_streams_are_reproducible_and_distinct():
    a = RngStream(5, 3).generator().standard_normal(4)
    b = RngStream(5, 3).generator().standard_normal(4)
    c = RngStream(5, 4).generator().standard_normal(4)
    d = RngStream(5, 3, counter=1).generator().standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


@given(st.integers(0, 2**64 - 1), st.integers(0, 2**32))
def test_stream_identity_round_trips(seed, index):
    s = RngStream(seed).for_replicate(index)
    assert (s.seed, s.index, s.counter) == (seed, index, 0)
    assert s.advance().counter == 1


def test_stream_rejects_negative_seed():
    with pytest.raises(ValueError):
        RngStream(-1)


# ------------------------------------------------------------- spectral path
def test_cell_masses_sum_to_variance():
    for model in (isotropic(-0.3), isotropic(-0.2, 2), two_lines(-0.2, -0.15, 2, -1), one_direction(-0.3, 1)):
        N = 64
        total = float(np.sum(cell_masses(model, N)))
        assert total == pytest.approx(covariance(model, (0,) * model.dimension), rel=1e-6)


def test_white_noise_site_variance():
    vals = [simulate_spectral(white_noise(1), 64, 0, 1, RngStream(11, r)).window for r in range(500)]
    v = np.concatenate(vals)
    se = math.sqrt((np.mean(v**4) - np.mean(v**2) ** 2) / v.size)
    assert abs(np.mean(v**2) - 1.0) < 4 * se


def test_spectral_lag_one_covariance():
    model = isotropic(-0.3)
    synth = SpectralSynthesizer(model, 512, 1, 4)
    est = np.array([empirical_cov(synth.sample(RngStream(3, r)), 1) for r in range(500)])
    bias = abs(synth.discrete_covariance(1)[2] - covariance(model, 1))
    assert abs(est.mean() - covariance(model, 1)) < 4 * se_mean(est) + bias


def test_sample_is_bit_identical_across_threads():
    model = product(-0.3, 2)
    synth = SpectralSynthesizer(model, 24, 2, 2)
    serial = [synth.sample(RngStream(9, r)).values for r in range(8)]
    with ThreadPoolExecutor(4) as pool:
        parallel = list(pool.map(lambda r: synth.sample(RngStream(9, r)).values, range(8)))
    for a, b in zip(serial, parallel):
        assert a.tobytes() == b.tobytes()


def test_bias_at_zero_vanishes_with_cell_weights():
    model = isotropic(-0.3)
    for k in (1, 2, 4, 8):
        r0 = SpectralSynthesizer(model, 64, 0, k).discrete_covariance(0)[0]
        assert r0 == pytest.approx(covariance(model, 0), rel=1e-7)


def test_midpoint_bias_decays_with_oversampling():
    model = isotropic(-0.3)
    errs = [abs(SpectralSynthesizer(model, 64, 0, k, weights="midpoint").discrete_covariance(0)[0] - covariance(model, 0)) for k in (1, 2, 4, 8)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_spectral_resource_bound():
    with pytest.raises(ResourceError):
        SpectralSynthesizer(isotropic(-0.2, 2), 8192, 0, 8)


def test_field_export(tmp_path):
    fld = simulate_spectral(isotropic(-0.2, 2), 6, 1, 2, RngStream(1))
    fld.to_binary(tmp_path / "f.bin")
    back = FieldSample.from_binary(tmp_path / "f.bin")
    assert np.array_equal(back.values, fld.values)
    assert back.metadata["method"] == "spectral"
    fld.to_csv(tmp_path / "f.csv")
    rows = (tmp_path / "f.csv").read_text().splitlines()
    assert rows[0] == "i1,i2,value" and len(rows) == 1 + 8 * 8
    assert rows[1].startswith("0,0,")
    assert float(rows[1].split(",")[2]) == fld.values[0, 0]


# ---------------------------------------------------------------- exact path
def test_exact_single_site():
    draws = np.array([simulate_exact(isotropic(-0.3), 1, 0, RngStream(4, r)).values[0] for r in range(2000)])
    r0 = covariance(isotropic(-0.3), 0)
    se = r0 * math.sqrt(2 / draws.size)
    assert abs(np.var(draws) - r0) < 4 * se


def test_exact_white_noise_is_identity_covariance():
    s = ExactSampler(white_noise(1), 16)
    assert np.allclose(s.covariance, np.eye(16), atol=1e-12)


def test_exact_sampler_size_bound():
    with pytest.raises(ResourceError):
        ExactSampler(isotropic(-0.2, 2), 64, 1)


def test_exact_stationarity():
    model = isotropic(-0.3)
    s = ExactSampler(model, 32)
    X = s.sample_values([RngStream(21, r) for r in range(2000)])
    for h in range(4):
        prod = np.mean(X[:, : 32 - h] * X[:, h:], axis=1)
        assert abs(prod.mean() - covariance(model, h)) < 4 * se_mean(prod)


def test_exact_vs_spectral_moments():
    model = isotropic(-0.3)
    ex = ExactSampler(model, 32, 1)
    sp = SpectralSynthesizer(model, 32, 1, 8)
    a = ex.sample_values([RngStream(1, r) for r in range(2000)])
    b = np.stack([sp.sample(RngStream(2, r)).values for r in range(2000)])
    for stat in (lambda x: x[:, 1:33].mean(axis=1), lambda x: (x[:, 1:33] ** 2).mean(axis=1), lambda x: (x[:, 1:33] * x[:, 2:34]).mean(axis=1)):
        u, v = stat(a), stat(b)
        joint = math.sqrt(se_mean(u) ** 2 + se_mean(v) ** 2)
        assert abs(u.mean() - v.mean()) < 4 * joint


# ---------------------------------------------------------------- sample mean
@pytest.mark.parametrize(
    "values, n, m, expected",
    [
        (np.ones(5), 5, 0, 1.0),
        (np.array([1.0, 2.0, 3.0, 4.0]), 4, 0, 2.5),
        (np.array([100.0, 1.0, 2.0, 3.0, 4.0, -100.0]), 4, 1, 2.5),
    ],
)
def test_sample_mean_examples(values, n, m, expected):
    assert sample_mean(FieldSample(1, n, m, values)) == expected


def test_sample_mean_is_centred():
    means = [sample_mean(simulate_spectral(isotropic(-0.2), 128, 0, 4, RngStream(6, r))) for r in range(2000)]
    assert abs(np.mean(means)) < 4 * se_mean(means)


def test_field_shape_is_checked():
    with pytest.raises(ParameterError):
        FieldSample(1, 4, 1, np.zeros(4))
