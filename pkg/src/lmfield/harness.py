"""Replicated Monte Carlo experiments over a ladder of window sizes.

A run simulates ``replicates`` independent fields at every ladder point,
normalises the centred statistic by ``n^nu`` and summarises it. The declared
exponent ``nu`` is checked against the regime of the model before any
simulation starts.
"""

from __future__ import annotations

import hashlib
import json
import math
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import scipy
from scipy import stats

from lmfield.condition_h import check_condition_h
from lmfield.covariance import CovarianceTable, covariance
from lmfield.errors import (
    AdmissibilityError,
    ConfigError,
    DivergenceError,
    LmFieldError,
    ParameterError,
    QuadratureBudgetError,
    ResourceError,
)
from lmfield.forms import QuadraticFormSpec, empirical_cov, expected_q, lag_spec, quadratic_form_fft
from lmfield.limits import clt_variance, double_ito_grid, sigma2_one_direction
from lmfield.models import Kind, SpectralModel
from lmfield.rng import RngStream
from lmfield.simulate import MAX_EXACT_SITES, ExactSampler, FieldSample, SpectralSynthesizer
from lmfield.wick import wick_variance_qn, wick_variance_rhat

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "LadderPoint",
    "NormalityDiagnostics",
    "run_experiment",
    "estimate_scaling_exponent",
    "normality_diagnostics",
    "moment_summary",
    "admissible_exponents",
    "KAPPA_DRIFT",
    "MIN_REPLICATES",
]

VERSION = "0.1.0"
MIN_REPLICATES = 100
MIN_NORMALITY_SAMPLES = 500
KAPPA_DRIFT = 0.05
_NU_TOL = 1e-9
_EXACT_BATCH = 256


# --------------------------------------------------------------------- config
@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines an experiment.

    Exactly one of ``lag`` (statistic ``r_hat(h) - r(h)``) and ``spec``
    (statistic ``Q_n - E Q_n``) is set. ``threads`` and ``outputs`` affect
    speed and file placement only and are excluded from the config hash.
    """

    model: SpectralModel
    ladder: tuple[int, ...]
    replicates: int
    nu: float
    lag: tuple[int, ...] | None = None
    spec: QuadraticFormSpec | None = None
    margin: int | None = None
    oversample: int = 4
    sampler: str = "spectral"
    seed: int = 0
    outputs: str | None = None
    threads: int = 1
    kappa_check: bool = True
    references: bool = True
    keep_samples: bool = True

    def __post_init__(self) -> None:
        d = self.model.dimension
        object.__setattr__(self, "ladder", tuple(int(n) for n in self.ladder))
        if (self.lag is None) == (self.spec is None):
            raise ConfigError("set exactly one of 'lag' and 'spec'")
        if self.lag is not None:
            lag = tuple(int(v) for v in np.atleast_1d(self.lag))
            if len(lag) != d:
                raise ConfigError(f"lag must have {d} components")
            object.__setattr__(self, "lag", lag)
        if self.spec is not None and self.spec.dimension != d:
            raise ConfigError("model and form dimensions differ")
        if not self.ladder:
            raise ConfigError("the ladder is empty")
        if self.ladder[0] < 1 or any(b <= a for a, b in zip(self.ladder, self.ladder[1:])):
            raise ConfigError("the ladder must be strictly increasing positive integers")
        if self.replicates < MIN_REPLICATES:
            raise ConfigError(f"variance claims need at least {MIN_REPLICATES} replicates, got {self.replicates}")
        if self.sampler not in ("spectral", "exact"):
            raise ConfigError(f"unknown sampler {self.sampler!r}")
        if self.oversample < 1:
            raise ConfigError("oversample must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if not math.isfinite(self.nu):
            raise ConfigError("nu must be finite")
        m = self.effective_margin
        if self.margin is not None and self.margin < 0:
            raise ConfigError("margin must be >= 0")
        if self.lag is not None and m < max(abs(v) for v in self.lag):
            raise ConfigError(f"margin {m} is smaller than the lag {self.lag}")
        if self.sampler == "exact":
            side = self.ladder[-1] + 2 * m
            if side**d > MAX_EXACT_SITES:
                raise ConfigError(f"the exact sampler needs (n + 2m)^d <= {MAX_EXACT_SITES}, got {side**d}")

    @property
    def effective_margin(self) -> int:
        if self.margin is not None:
            return int(self.margin)
        return max(abs(v) for v in self.lag) if self.lag is not None else 0

    @property
    def form(self) -> QuadraticFormSpec:
        """The quadratic form behind the statistic."""
        return lag_spec(self.lag, self.model.dimension) if self.lag is not None else self.spec

    def to_dict(self, include_runtime: bool = True) -> dict[str, Any]:
        out: dict[str, Any] = {
            "model": self.model.to_dict(),
            "ladder": list(self.ladder),
            "replicates": self.replicates,
            "nu": self.nu,
            "lag": None if self.lag is None else list(self.lag),
            "spec": None if self.spec is None else self.spec.to_dict(),
            "margin": self.margin,
            "oversample": self.oversample,
            "sampler": self.sampler,
            "seed": self.seed,
            "kappa_check": self.kappa_check,
            "references": self.references,
            "keep_samples": self.keep_samples,
        }
        if include_runtime:
            out["outputs"] = self.outputs
            out["threads"] = self.threads
        return out

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(include_runtime=False), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentConfig:
        known = {
            "model", "ladder", "replicates", "nu", "lag", "spec", "margin", "oversample",
            "sampler", "seed", "outputs", "threads", "kappa_check", "references", "keep_samples",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            model = SpectralModel.from_dict(data["model"])
            spec = None if data.get("spec") is None else QuadraticFormSpec.from_dict(data["spec"])
            lag = data.get("lag")
            return cls(
                model=model,
                ladder=tuple(data["ladder"]),
                replicates=int(data["replicates"]),
                nu=float(data["nu"]),
                lag=None if lag is None else tuple(np.atleast_1d(lag).tolist()),
                spec=spec,
                margin=None if data.get("margin") is None else int(data["margin"]),
                oversample=int(data.get("oversample", 4)),
                sampler=str(data.get("sampler", "spectral")),
                seed=int(data.get("seed", 0)),
                outputs=data.get("outputs"),
                threads=int(data.get("threads", 1)),
                kappa_check=bool(data.get("kappa_check", True)),
                references=bool(data.get("references", True)),
                keep_samples=bool(data.get("keep_samples", True)),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid experiment config: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> ExperimentConfig:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        return cls.from_json(Path(path).read_text())


# ------------------------------------------------------------------ statistics
@dataclass(frozen=True)
class NormalityDiagnostics:
    count: int
    skewness: float
    skewness_se: float
    excess_kurtosis: float
    kurtosis_se: float
    ks_distance: float


def _fsum_mean(x: np.ndarray) -> float:
    return math.fsum(x.tolist()) / x.size


def moment_summary(samples: Iterable[float]) -> dict[str, float]:
    """Mean, variance, skewness and excess kurtosis with plug-in standard errors.

    The skewness and kurtosis errors use the empirical influence functions of
    the moment ratios, which reduce to ``sqrt(6/N)`` and ``sqrt(24/N)`` for
    Gaussian data. Sums are compensated, so the result does not depend on how
    the samples were produced.
    """
    z = np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples, dtype=float).ravel()
    N = z.size
    if N < 4:
        raise ParameterError("need at least 4 samples")
    mu = _fsum_mean(z)
    c = z - mu
    m2 = _fsum_mean(c**2)
    if not m2 > 0.0:
        raise ParameterError("degenerate sample: zero variance")
    m3 = _fsum_mean(c**3)
    m4 = _fsum_mean(c**4)
    var = m2 * N / (N - 1)
    g1 = m3 / m2**1.5
    g2 = m4 / m2**2 - 3.0
    if_var = c**2 - m2
    if_skew = (c**3 - m3 - 3.0 * m2 * c) / m2**1.5 - 1.5 * g1 * (c**2 - m2) / m2
    if_kurt = (c**4 - m4 - 4.0 * m3 * c) / m2**2 - 2.0 * (m4 / m2**2) * (c**2 - m2) / m2

    def se(infl: np.ndarray) -> float:
        return math.sqrt(_fsum_mean(infl**2) / N)

    return {
        "count": N,
        "mean": mu,
        "mean_se": math.sqrt(var / N),
        "variance": var,
        "variance_se": se(if_var),
        "skewness": g1,
        "skewness_se": se(if_skew),
        "excess_kurtosis": g2,
        "kurtosis_se": se(if_kurt),
    }


def normality_diagnostics(samples: Iterable[float]) -> NormalityDiagnostics:
    """Skewness, excess kurtosis and the KS distance to the fitted normal.

    Raises
    ------
    ParameterError
        Fewer than 500 samples, or zero variance.
    """
    z = np.asarray(samples, dtype=float).ravel()
    if z.size < MIN_NORMALITY_SAMPLES:
        raise ParameterError(f"normality diagnostics need at least {MIN_NORMALITY_SAMPLES} samples")
    m = moment_summary(z)
    ks = stats.kstest(z, "norm", args=(m["mean"], math.sqrt(m["variance"]))).statistic
    return NormalityDiagnostics(
        z.size, m["skewness"], m["skewness_se"], m["excess_kurtosis"], m["kurtosis_se"], float(ks)
    )


def estimate_scaling_exponent(pairs: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Slope of ``log Var`` against ``log n`` with its 95 % half-width.

    Ordinary least squares; the half-width is ``t_(0.975, k-2)`` times the
    residual-based standard error of the slope.
    """
    pts = [(float(n), float(v)) for n, v in pairs]
    if len(pts) < 3:
        raise ParameterError("a scaling fit needs at least 3 ladder points")
    if any(n <= 0 or v <= 0 for n, v in pts):
        raise ParameterError("ladder sizes and variances must be positive")
    x = np.log([n for n, _ in pts])
    y = np.log([v for _, v in pts])
    fit = stats.linregress(x, y)
    half = float(stats.t.ppf(0.975, len(pts) - 2) * fit.stderr)
    return float(fit.slope), half


# --------------------------------------------------------------------- regimes
def _same(a: float, b: float) -> bool:
    return abs(a - b) <= _NU_TOL


def admissible_exponents(model: SpectralModel, form: QuadraticFormSpec, lag: Sequence[int] | None = None) -> dict[str, float]:
    """The normalisations that apply to this model and statistic, keyed by regime.

    Raises
    ------
    AdmissibilityError
        When no regime applies; the message names the failing inequality.
    """
    return _regimes(model, form, lag)[0]


def _regimes(model: SpectralModel, form: QuadraticFormSpec, lag: Sequence[int] | None) -> tuple[dict[str, float], str | None]:
    d = model.dimension
    beta = float(form.beta)
    if model.kind is Kind.WHITE_NOISE:
        return {"gaussian": d / 2}, None
    if model.kind is Kind.ONE_DIRECTION:
        a = float(model.alpha)
        out: dict[str, float] = {}
        if model.in_l2():
            out["gaussian"] = d / 2
        elif -0.5 < a < -0.25 and beta == 0.0:
            if lag is None:
                raise AdmissibilityError("the one-direction Gaussian limit is established for r_hat(h) only")
            p = float(model.slope_p)
            if lag[1] == p * lag[0]:
                raise AdmissibilityError(f"the one-direction limit needs h2 != p h1 (h = {tuple(lag)}, p = {p:g})")
            out["one_direction"] = (4 * a + 3) / 2
        if not out:
            raise AdmissibilityError(f"no limit regime for one-direction alpha = {a:g}: need 4 alpha > -1 or -1/2 < alpha < -1/4")
        return out, None
    verdict = check_condition_h(model, form)
    if verdict.holds:
        return {"non_central": d + 2 * model.degree + 2 * beta}, verdict.reason
    return {"gaussian": d / 2}, verdict.reason


def _route(config: ExperimentConfig) -> str:
    """Regime of the declared ``nu``; refuses mismatches with the violated inequality."""
    model, form = config.model, config.form
    d = model.dimension
    allowed, reason = _regimes(model, form, config.lag)
    for regime, nu in allowed.items():
        if _same(config.nu, nu):
            if regime == "gaussian" and model.kind not in (Kind.WHITE_NOISE, Kind.ONE_DIRECTION):
                _require_finite_clt(model, form)
            return regime
    beta = float(form.beta)
    if "non_central" in allowed and _same(config.nu, d / 2):
        raise AdmissibilityError(
            f"alpha + beta < -d/4 ({model.degree:g} + {beta:g} < -{d}/4): the limit is non-central; "
            f"nu = d/2 is refused, use nu = d + 2 alpha + 2 beta = {allowed['non_central']:g} ({reason})"
        )
    if "gaussian" in allowed and model.kind not in (Kind.WHITE_NOISE, Kind.ONE_DIRECTION):
        nc = d + 2 * model.degree + 2 * beta
        if _same(config.nu, nc):
            raise AdmissibilityError(
                f"condition (H) is not established, so nu = d + 2 alpha + 2 beta = {nc:g} is refused: {reason}"
            )
    wanted = ", ".join(f"{k} nu = {v:g}" for k, v in allowed.items())
    raise AdmissibilityError(f"declared nu = {config.nu:g} matches no regime of this model ({wanted})")


def _require_finite_clt(model: SpectralModel, form: QuadraticFormSpec) -> None:
    if form.beta == 0.0 and not model.in_l2():
        raise AdmissibilityError(
            f"f is not square integrable (4 alpha > -d fails for alpha = {model.degree:g}), so nu = d/2 is refused"
        )


# ----------------------------------------------------------------------- report
@dataclass(frozen=True)
class LadderPoint:
    """Monte Carlo summary at one window size.

    ``mean`` .. ``kurtosis_se`` describe the normalised statistic; ``raw_*``
    the unnormalised one. ``wick_variance`` is the exact variance of the raw
    statistic under the target model and ``sampler_variance`` under the
    sampler's own discretised covariance.
    """

    n: int
    replicates: int
    mean: float
    mean_se: float
    variance: float
    variance_se: float
    skewness: float
    skewness_se: float
    excess_kurtosis: float
    kurtosis_se: float
    ks_distance: float | None
    raw_variance: float
    raw_variance_se: float
    wick_variance: float | None = None
    sampler_variance: float | None = None
    sampler_variance_refined: float | None = None
    kappa_drift: float | None = None

    @property
    def wick_z(self) -> float | None:
        """``(raw_variance - reference) / SE`` against the sampler's exact variance."""
        ref = self.sampler_variance if self.sampler_variance is not None else self.wick_variance
        if ref is None:
            return None
        return (self.raw_variance - ref) / self.raw_variance_se


CSV_COLUMNS = (
    "n", "replicates", "mean", "mean_se", "variance", "variance_se", "skewness", "skewness_se",
    "excess_kurtosis", "kurtosis_se", "ks_distance", "raw_variance", "raw_variance_se",
    "wick_variance", "sampler_variance", "sampler_variance_refined", "kappa_drift",
)


def _fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    regime: str
    points: tuple[LadderPoint, ...]
    slope: float | None
    slope_half_width: float | None
    wick_slope: float | None
    wick_slope_half_width: float | None
    references: dict[str, Any]
    complete: bool
    kappa_stable: bool | None
    message: str = ""
    provenance: dict[str, Any] = field(default_factory=dict)
    samples: dict[int, np.ndarray] = field(default_factory=dict, repr=False, compare=False)

    @property
    def acceptance_ready(self) -> bool:
        """Complete and, for spectral runs, stable under doubling of the oversampling."""
        return self.complete and self.kappa_stable is not False

    def point(self, n: int) -> LadderPoint:
        for p in self.points:
            if p.n == n:
                return p
        raise KeyError(n)

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.config.to_dict(include_runtime=False),
            "regime": self.regime,
            "points": [asdict(p) for p in self.points],
            "slope": self.slope,
            "slope_half_width": self.slope_half_width,
            "wick_slope": self.wick_slope,
            "wick_slope_half_width": self.wick_slope_half_width,
            "references": self.references,
            "complete": self.complete,
            "kappa_stable": self.kappa_stable,
            "acceptance_ready": self.acceptance_ready,
            "message": self.message,
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        lines = [",".join(CSV_COLUMNS)]
        for p in self.points:
            row = asdict(p)
            lines.append(",".join(_fmt(row[c]) for c in CSV_COLUMNS))
        return "\n".join(lines) + "\n"

    def samples_csv(self) -> str:
        """Normalised statistics, one row per replicate and ladder point."""
        cfg = self.config
        name = f"r_hat{tuple(cfg.lag)}" if cfg.lag is not None else "Q_n"
        name = f"n^{cfg.nu:g}*({name}-mean)".replace(",", ";")
        lines = ["replicate,n,statistic,value"]
        for n in sorted(self.samples):
            lines.extend(f"{r},{n},{name},{float(v)!r}" for r, v in enumerate(self.samples[n]))
        return "\n".join(lines) + "\n"

    def write(self, directory: str | Path) -> list[Path]:
        """Write ``report.json``, ``ladder.csv`` and, if kept, ``samples.csv``."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        files = [out / "report.json", out / "ladder.csv"]
        files[0].write_text(self.to_json())
        files[1].write_text(self.to_csv())
        if self.samples:
            files.append(out / "samples.csv")
            files[2].write_text(self.samples_csv())
        return files


# ----------------------------------------------------------------------- engine
def _statistic(config: ExperimentConfig, fld: FieldSample) -> float:
    if config.lag is not None:
        return empirical_cov(fld, config.lag)
    return quadratic_form_fft(fld, config.spec)


def _centre(config: ExperimentConfig, n: int) -> float:
    if config.lag is not None:
        return covariance(config.model, config.lag)
    return expected_q(config.model, config.spec, n)


def _replicate_values(config: ExperimentConfig, n: int, rung: int) -> np.ndarray:
    """Raw statistics for every replicate at one ladder point, in replicate order."""
    model, m = config.model, config.effective_margin
    R = config.replicates
    streams = [RngStream(config.seed, r, rung) for r in range(R)]
    if config.sampler == "exact":
        sampler = ExactSampler(model, n, m)
        chunks = [streams[i : i + _EXACT_BATCH] for i in range(0, R, _EXACT_BATCH)]

        def run_chunk(chunk: list[RngStream]) -> list[float]:
            vals = sampler.sample_values(chunk)
            return [_statistic(config, FieldSample(model.dimension, n, m, v)) for v in vals]

    else:
        synth = SpectralSynthesizer(model, n, m, config.oversample)
        size = max(1, R // (4 * config.threads))
        chunks = [streams[i : i + size] for i in range(0, R, size)]

        def run_chunk(chunk: list[RngStream]) -> list[float]:
            return [_statistic(config, synth.sample(s)) for s in chunk]

    if config.threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            parts = list(pool.map(run_chunk, chunks))
    else:
        parts = [run_chunk(c) for c in chunks]
    return np.array([v for part in parts for v in part], dtype=float)


def _exact_variance(config: ExperimentConfig, n: int, table: CovarianceTable | None = None) -> float:
    if config.lag is not None:
        return wick_variance_rhat(config.model, config.lag, n, table=table)
    return wick_variance_qn(config.model, config.spec, n, table=table)


def _sampler_table(config: ExperimentConfig, n: int, oversample: int) -> CovarianceTable:
    radius = n - 1 + (max(abs(v) for v in config.lag) if config.lag is not None else 2 * config.spec.radius)
    synth = SpectralSynthesizer(config.model, n, config.effective_margin, oversample)
    return CovarianceTable(config.model.dimension, radius, synth.discrete_covariance(radius))


def _maybe(fn, *args):
    try:
        return fn(*args)
    except (ResourceError, QuadratureBudgetError, MemoryError):
        return None


def _references(config: ExperimentConfig, regime: str) -> dict[str, Any]:
    model, form = config.model, config.form
    out: dict[str, Any] = {"regime": regime, "oversample": config.oversample if config.sampler == "spectral" else None}
    if not config.references:
        return out
    try:
        if regime == "gaussian":
            out["variance"] = clt_variance(model, form)
            out["source"] = "clt_variance"
        elif regime == "non_central":
            grid = double_ito_grid(model, form)
            out["variance"] = grid.second_moment()
            out["tail_bound"] = grid.tail_bound(model)
            out["source"] = "double_ito_second_moment"
            out["grid"] = [grid.resolution, grid.radius]
        elif regime == "one_direction":
            p = float(model.slope_p)
            if p == int(p) and p >= 1:
                const = sigma2_one_direction(float(model.alpha), int(p), model.l1.value**2, tuple(config.lag))
                out["variance"] = const.value
                out["spread"] = const.spread
                out["flagged"] = const.flagged
                out["source"] = "sigma2_one_direction"
            else:
                out["note"] = "no reference for non-integer slopes"
    except (ParameterError, ResourceError, QuadratureBudgetError, DivergenceError) as exc:
        out["note"] = f"reference unavailable: {exc}"
    return out


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Run the ladder and summarise.

    Raises
    ------
    AdmissibilityError
        Before any simulation, when ``nu`` does not match the model's regime.

    A resource failure part-way returns the finished ladder points with
    ``complete = False``.
    """
    regime = _route(config)
    nu = config.nu
    points: list[LadderPoint] = []
    kept: dict[int, np.ndarray] = {}
    message = ""
    complete = True
    for rung, n in enumerate(config.ladder):
        try:
            raw = _replicate_values(config, n, rung) - _centre(config, n)
        except (ResourceError, QuadratureBudgetError, MemoryError) as exc:
            complete = False
            message = f"stopped at n = {n}: {exc}"
            break
        z = raw * float(n) ** nu
        s = moment_summary(z)
        rs = moment_summary(raw)
        ks = None
        if z.size >= MIN_NORMALITY_SAMPLES:
            ks = normality_diagnostics(z).ks_distance
        wick = _maybe(_exact_variance, config, n)
        samp = samp2 = drift = None
        if config.sampler == "spectral":
            tab = _maybe(_sampler_table, config, n, config.oversample)
            samp = None if tab is None else _maybe(_exact_variance, config, n, tab)
            if config.kappa_check:
                tab2 = _maybe(_sampler_table, config, n, 2 * config.oversample)
                samp2 = None if tab2 is None else _maybe(_exact_variance, config, n, tab2)
                if samp is not None and samp2 is not None and samp2 > 0:
                    drift = abs(samp - samp2) / samp2
        points.append(
            LadderPoint(
                n, s["count"], s["mean"], s["mean_se"], s["variance"], s["variance_se"], s["skewness"],
                s["skewness_se"], s["excess_kurtosis"], s["kurtosis_se"], ks, rs["variance"], rs["variance_se"],
                wick, samp, samp2, drift,
            )
        )
        if config.keep_samples:
            kept[n] = z
    slope = half = wslope = whalf = None
    if len(points) >= 3:
        slope, half = estimate_scaling_exponent([(p.n, p.raw_variance) for p in points])
        if all(p.wick_variance is not None and p.wick_variance > 0 for p in points):
            wslope, whalf = estimate_scaling_exponent([(p.n, p.wick_variance) for p in points])
    kappa_stable = None
    if config.sampler == "spectral" and config.kappa_check:
        drifts = [p.kappa_drift for p in points]
        kappa_stable = bool(drifts) and all(d is not None and d <= KAPPA_DRIFT for d in drifts)
    provenance = {
        "config_sha256": config.digest(),
        "seed": config.seed,
        "streams": "replicate r at ladder position k uses (seed, r, k)",
        "lmfield": VERSION,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }
    report = ExperimentReport(
        config, regime, tuple(points), slope, half, wslope, whalf, _references(config, regime),
        complete, kappa_stable, message, provenance, kept,
    )
    if config.outputs:
        report.write(config.outputs)
    return report


def describe_error(exc: BaseException) -> str:
    name = type(exc).__name__ if isinstance(exc, LmFieldError) else "error"
    return f"{name}: {exc}"
