from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lmfield.errors import AdmissibilityError, ConfigError, ParameterError
from lmfield.forms import QuadraticFormSpec, lag_spec
from lmfield.harness import (
    KAPPA_DRIFT,
    ExperimentConfig,
    admissible_exponents,
    estimate_scaling_exponent,
    moment_summary,
    normality_diagnostics,
    run_experiment,
)
from lmfield.limits import sample_double_ito
from lmfield.models import isotropic, one_direction, two_lines, white_noise
from lmfield.rng import RngStream
from lmfield.wick import wick_variance_rhat


def wn_config(**kw) -> ExperimentConfig:
    base = dict(model=white_noise(1), ladder=(16, 32, 64), replicates=200, nu=0.5, lag=(0,), seed=11)
    base.update(kw)
    return ExperimentConfig(**base)


# ------------------------------------------------------------------ config
@pytest.mark.parametrize(
    "kw, match",
    [
        (dict(lag=None), "exactly one"),
        (dict(spec=lag_spec(0, 1)), "exactly one"),
        (dict(ladder=(32, 16)), "strictly increasing"),
        (dict(ladder=(16, 16, 32)), "strictly increasing"),
        (dict(ladder=()), "empty"),
        (dict(replicates=99), "at least 100"),
        (dict(lag=(2,), margin=1), "smaller than the lag"),
        (dict(sampler="exact", ladder=(5000,)), "exact sampler"),
        (dict(sampler="mcmc"), "unknown sampler"),
        (dict(lag=(0, 0)), "components"),
        (dict(seed=-1), "unsigned"),
    ],
)
def test_config_invariants(kw, match):
    with pytest.raises(ConfigError, match=match):
        wn_config(**kw)


def test_config_round_trip_and_hash():
    cfg = wn_config(threads=3, outputs="somewhere")
    again = ExperimentConfig.from_json(json.dumps(cfg.to_dict()))
    assert again == cfg
    assert again.digest() == wn_config().digest()
    assert wn_config(seed=12).digest() != cfg.digest()


def test_config_rejects_unknown_keys():
    data = wn_config().to_dict()
    data["replicas"] = 100
    with pytest.raises(ConfigError, match="unknown config keys"):
        ExperimentConfig.from_dict(data)


def test_spec_config_round_trip():
    spec = QuadraticFormSpec.from_dict({"dimension": 1, "support": [[0, 1.0], [1, 0.5], [-1, 0.5]]})
    cfg = ExperimentConfig(white_noise(1), (16, 32, 64), 100, 0.5, spec=spec)
    assert ExperimentConfig.from_dict(cfg.to_dict()).canonical_json() == cfg.canonical_json()


# ------------------------------------------------------------ determinism
def test_same_config_gives_identical_reports():
    a, b = run_experiment(wn_config()), run_experiment(wn_config())
    assert a.to_json() == b.to_json()
    assert a.samples_csv() == b.samples_csv()


def test_reports_do_not_depend_on_thread_count():
    model = isotropic(-0.2)
    one = run_experiment(wn_config(model=model, threads=1))
    three = run_experiment(wn_config(model=model, threads=3))
    assert one.to_json() == three.to_json()
    assert one.samples_csv() == three.samples_csv()


def test_exact_sampler_thread_independence():
    cfg = dict(model=isotropic(-0.3), ladder=(8, 12, 16), replicates=300, nu=0.4, sampler="exact")
    assert run_experiment(wn_config(**cfg, threads=1)).to_json() == run_experiment(wn_config(**cfg, threads=2)).to_json()


def test_written_files(tmp_path):
    rep = run_experiment(wn_config(outputs=str(tmp_path)))
    assert sorted(p.name for p in tmp_path.iterdir()) == ["ladder.csv", "report.json", "samples.csv"]
    data = json.loads((tmp_path / "report.json").read_text())
    assert data["provenance"]["config_sha256"] == rep.config.digest()
    assert data["complete"] and data["regime"] == "gaussian"
    ladder = (tmp_path / "ladder.csv").read_text().splitlines()
    assert len(ladder) == 4 and ladder[0].startswith("n,replicates,mean")
    samples = (tmp_path / "samples.csv").read_text().splitlines()
    assert len(samples) == 1 + 3 * 200


# ------------------------------------------------------- standard errors
def test_variance_se_shrinks_by_root_two():
    small = run_experiment(wn_config(ladder=(32, 64, 128), replicates=1000, kappa_check=False))
    big = run_experiment(wn_config(ladder=(32, 64, 128), replicates=2000, kappa_check=False))
    for n in (32, 64, 128):
        ratio = big.point(n).variance_se / small.point(n).variance_se
        assert ratio == pytest.approx(1 / math.sqrt(2), rel=0.2)


def test_white_noise_variance_is_two():
    rep = run_experiment(wn_config(ladder=(256, 512, 1024), replicates=2000))
    p = rep.point(1024)
    assert abs(p.variance - 2.0) <= 4 * p.variance_se
    assert rep.references["variance"] == pytest.approx(2.0)
    assert rep.wick_slope == pytest.approx(-1.0, abs=1e-9)
    assert rep.kappa_stable and rep.acceptance_ready


@given(st.lists(st.floats(-50, 50, allow_nan=False), min_size=4, max_size=60).filter(lambda v: np.ptp(v) > 1e-3))
def test_moment_summary_is_affine_invariant(values):
    a = moment_summary(values)
    b = moment_summary([3.0 * v + 7.0 for v in values])
    assert b["mean"] == pytest.approx(3 * a["mean"] + 7, rel=1e-9, abs=1e-9)
    assert b["variance"] == pytest.approx(9 * a["variance"], rel=1e-9)
    assert b["skewness"] == pytest.approx(a["skewness"], rel=1e-6, abs=1e-8)
    assert b["excess_kurtosis"] == pytest.approx(a["excess_kurtosis"], rel=1e-6, abs=1e-8)


def test_moment_summary_does_not_depend_on_order():
    z = np.random.default_rng(5).standard_normal(3001) * 1e3 + 1e6
    a = moment_summary(z)
    b = moment_summary(z[::-1].copy())
    assert a == b


def test_moment_ses_positive():
    s = moment_summary(np.random.default_rng(0).standard_normal(400))
    assert all(s[k] > 0 for k in ("mean_se", "variance_se", "skewness_se", "kurtosis_se"))


# -------------------------------------------------------- scaling exponent
def test_exact_power_law_has_zero_width():
    slope, half = estimate_scaling_exponent([(n, n**-1.6) for n in (512, 1024, 2048)])
    assert slope == pytest.approx(-1.6, abs=1e-12)
    assert half == pytest.approx(0.0, abs=1e-9)


def test_intercept_absorbs_constant():
    slope, _ = estimate_scaling_exponent([(n, 3.0 / n) for n in (16, 32, 64, 128)])
    assert slope == pytest.approx(-1.0, abs=1e-12)


def test_wick_variance_scaling_long_memory():
    ladder = [2**k for k in range(9, 14)]
    slope, half = estimate_scaling_exponent([(n, wick_variance_rhat(isotropic(-0.35), 0, n)) for n in ladder])
    assert abs(slope - (-0.6)) <= 0.1
    assert half < 0.1


@pytest.mark.parametrize("pairs", [[(1, 1.0), (2, 0.5)], [(1, 1.0), (2, 0.0), (4, 1.0)], [(0, 1.0), (2, 1.0), (4, 1.0)]])
def test_scaling_exponent_rejects_bad_input(pairs):
    with pytest.raises(ParameterError):
        estimate_scaling_exponent(pairs)


# -------------------------------------------------------------- normality
def test_normal_draws_look_normal():
    z = np.random.default_rng(1).standard_normal(100_000)
    d = normality_diagnostics(z)
    assert abs(d.skewness) <= 4 * d.skewness_se
    assert abs(d.excess_kurtosis) <= 4 * d.kurtosis_se
    assert d.ks_distance < 0.01


def test_chi_square_kurtosis():
    x = np.random.default_rng(2).standard_normal(100_000)
    d = normality_diagnostics((x**2 - 1) / math.sqrt(2))
    assert abs(d.excess_kurtosis - 12.0) <= 4 * d.kurtosis_se
    assert abs(d.skewness - math.sqrt(8)) <= 4 * d.skewness_se


@pytest.mark.filterwarnings("ignore::lmfield.limits.TruncationWarning")
def test_double_ito_draws_are_leptokurtic():
    est = sample_double_ito(isotropic(-0.35), count=10_000, rng=RngStream(4))
    d = normality_diagnostics(est.samples)
    assert d.excess_kurtosis - 4 * d.kurtosis_se >= 0.5


def test_normality_needs_enough_samples():
    with pytest.raises(ParameterError, match="500"):
        normality_diagnostics(np.arange(499.0))


def test_normality_rejects_constant_sample():
    with pytest.raises(ParameterError, match="zero variance"):
        normality_diagnostics(np.ones(1000))


# ------------------------------------------------------------ guard rails
def test_non_central_region_refuses_root_n():
    with pytest.raises(AdmissibilityError, match=r"alpha \+ beta < -d/4"):
        run_experiment(wn_config(model=isotropic(-0.35), nu=0.5))


def test_gaussian_region_refuses_non_central_rate():
    with pytest.raises(AdmissibilityError, match=r"nu = d \+ 2 alpha \+ 2 beta"):
        run_experiment(wn_config(model=isotropic(-0.1), nu=0.8))


def test_undeclared_rate_is_refused():
    with pytest.raises(AdmissibilityError, match="matches no regime"):
        run_experiment(wn_config(nu=0.75))


def test_one_direction_needs_transverse_lag():
    cfg = dict(model=one_direction(-0.35, 1), ladder=(8, 16, 32), lag=(1, 1), nu=0.8)
    with pytest.raises(AdmissibilityError, match="h2 != p h1"):
        run_experiment(wn_config(**cfg))


@pytest.mark.parametrize(
    "model, lag, expected",
    [
        (white_noise(2), (0, 0), {"gaussian": 1.0}),
        (isotropic(-0.1), (0,), {"gaussian": 0.5}),
        (isotropic(-0.35), (0,), {"non_central": 0.3}),
        (one_direction(-0.35, 1), (1, 0), {"one_direction": 0.8}),
        (one_direction(-0.2, 2), (1, 0), {"gaussian": 1.0}),
        (two_lines(-0.3, -0.3, 1, -1), (0, 0), {"non_central": 2 - 1.2}),
    ],
)
def test_admissible_exponents(model, lag, expected):
    got = admissible_exponents(model, lag_spec(lag, model.dimension), lag)
    assert got.keys() == expected.keys()
    for k, v in expected.items():
        assert got[k] == pytest.approx(v)


def test_refusal_happens_before_simulation(tmp_path):
    with pytest.raises(AdmissibilityError):
        run_experiment(wn_config(model=isotropic(-0.35), nu=0.5, outputs=str(tmp_path / "out")))
    assert not (tmp_path / "out").exists()


# ------------------------------------------------------ internal consistency
@pytest.mark.parametrize("model, lag", [(isotropic(-0.3), (0,)), (isotropic(-0.1), (1,))])
def test_exact_sampler_matches_wick(model, lag):
    nu = admissible_exponents(model, lag_spec(lag, 1), lag)
    cfg = wn_config(model=model, lag=lag, nu=next(iter(nu.values())), sampler="exact", ladder=(8, 12, 16), replicates=2000)
    rep = run_experiment(cfg)
    for p in rep.points:
        assert p.sampler_variance is None and p.kappa_drift is None
        assert abs(p.wick_z) <= 4
    assert rep.kappa_stable is None and rep.acceptance_ready


def test_spectral_sampler_records_kappa_drift():
    rep = run_experiment(wn_config(model=isotropic(-0.35), nu=0.3, ladder=(64, 128, 256), replicates=400))
    assert rep.regime == "non_central"
    assert all(p.kappa_drift is not None for p in rep.points)
    assert rep.kappa_stable == all(p.kappa_drift <= KAPPA_DRIFT for p in rep.points)
    for p in rep.points:
        assert abs(p.wick_z) <= 4
    assert rep.references["source"] == "double_ito_second_moment"


def test_resource_failure_yields_partial_report():
    cfg = dict(model=white_noise(2), lag=(1, 0), nu=1.0, ladder=(8, 16, 5000), replicates=100)
    rep = run_experiment(wn_config(**cfg))
    assert not rep.complete and not rep.acceptance_ready
    assert [p.n for p in rep.points] == [8, 16]
    assert "n = 5000" in rep.message
    assert rep.slope is None
    assert json.loads(rep.to_json())["complete"] is False
