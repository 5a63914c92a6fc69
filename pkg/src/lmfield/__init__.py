"""Quadratic forms of long-memory Gaussian random fields."""

from __future__ import annotations

from lmfield.condition_h import HVerdict, Verdict, check_condition_h
from lmfield.covariance import CovarianceTable, covariance_one_direction, covariance_table
from lmfield.errors import LmFieldError
from lmfield.forms import QuadraticFormSpec, empirical_cov, expected_q, lag_spec, periodogram, quadratic_form
from lmfield.harness import ExperimentConfig, ExperimentReport, estimate_scaling_exponent, run_experiment
from lmfield.limits import clt_variance, sample_double_ito, sigma2_one_direction
from lmfield.models import SpectralModel, isotropic, one_direction, product, two_lines, white_noise
from lmfield.rng import RngStream
from lmfield.simulate import FieldSample, simulate_exact, simulate_spectral
from lmfield.wick import wick_variance_qn, wick_variance_rhat

__version__ = "0.1.0"

__all__ = [
    "CovarianceTable",
    "ExperimentConfig",
    "ExperimentReport",
    "FieldSample",
    "HVerdict",
    "LmFieldError",
    "QuadraticFormSpec",
    "RngStream",
    "SpectralModel",
    "Verdict",
    "check_condition_h",
    "clt_variance",
    "covariance_one_direction",
    "covariance_table",
    "empirical_cov",
    "estimate_scaling_exponent",
    "expected_q",
    "isotropic",
    "lag_spec",
    "one_direction",
    "periodogram",
    "product",
    "quadratic_form",
    "run_experiment",
    "sample_double_ito",
    "sigma2_one_direction",
    "simulate_exact",
    "simulate_spectral",
    "two_lines",
    "white_noise",
    "wick_variance_qn",
    "wick_variance_rhat",
]
