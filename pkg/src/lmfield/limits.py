"""Limiting laws of normalised quadratic forms.

Gaussian limits are described by their variance; the non-central limit
``Z = L1(0)^2 L2(0) int int a~(x) a~(y) K(x, y) dW(x) dW(y)`` is sampled on a
truncated Hermitian frequency grid.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable

import numpy as np

from lmfield.errors import AdmissibilityError, DivergenceError, ParameterError, ResourceError
from lmfield.forms import QuadraticFormSpec, lag_spec
from lmfield.kernels import kernel_H
from lmfield.models import Kind, SpectralModel
from lmfield.quadrature import SingularLine, SingularPoint, rule_1d, rule_2d
from lmfield.rng import RngStream
from lmfield.simulate import _masses_1d, _masses_2d_generic
from lmfield.wick import wick_variance_rhat

__all__ = [
    "LimitLawEstimate",
    "OneDirectionConstant",
    "clt_variance",
    "fourier_coeff_fsq",
    "double_ito_grid",
    "DoubleItoGrid",
    "sample_double_ito",
    "sigma2_one_direction",
    "TruncationWarning",
    "BLOCK",
]

BLOCK = 2000  # samples per RNG block; the partition depends only on the count
DEFAULTS = {1: (512, 200.0), 2: (128, 50.0)}
MAX_DENSE = 4096


class TruncationWarning(UserWarning):
    """The frequency box leaves a non-negligible part of the kernel norm outside."""


@dataclass(frozen=True)
class LimitLawEstimate:
    """A Gaussian variance or a sample set of a double Wiener-Ito integral.

    ``kind`` is ``"gaussian"`` (``value`` is the variance) or ``"double_ito"``
    (``value`` is the grid second moment ``E[Z^2]`` and ``samples`` holds draws).
    """

    kind: str
    value: float
    samples: np.ndarray | None = field(default=None, repr=False)
    resolution: int | None = None
    radius: float | None = None
    tail_bound: float | None = None
    uncertainty: float | None = None
    metadata: dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def second_moment(self) -> float:
        return self.value

    def sample_mean(self) -> float:
        return float(np.mean(self._draws()))

    def sample_variance(self) -> float:
        return float(np.var(self._draws(), ddof=1))

    def variance_standard_error(self) -> float:
        """Plug-in standard error of the sample variance, ``sqrt((m4 - m2^2) / N)``."""
        z = self._draws()
        c = z - z.mean()
        m2 = np.mean(c**2)
        m4 = np.mean(c**4)
        return float(math.sqrt(max(m4 - m2**2, 0.0) / z.size))

    def mean_standard_error(self) -> float:
        z = self._draws()
        return float(np.std(z, ddof=1) / math.sqrt(z.size))

    def _draws(self) -> np.ndarray:
        if self.samples is None or self.samples.size < 2:
            raise ParameterError("estimate carries no samples")
        return self.samples

    def to_json(self) -> str:
        meta = {
            "kind": self.kind,
            "value": self.value,
            "resolution": self.resolution,
            "radius": self.radius,
            "tail_bound": self.tail_bound,
            "uncertainty": self.uncertainty,
            "count": 0 if self.samples is None else int(self.samples.size),
            **self.metadata,
        }
        return json.dumps(meta, sort_keys=True, indent=2)

    def to_csv(self, path: str | Path) -> None:
        """Write ``sample,value`` rows plus a JSON sidecar ``<path>.json``."""
        with open(path, "w") as fh:
            fh.write("sample,value\n")
            if self.samples is not None:
                for i, v in enumerate(self.samples):
                    fh.write(f"{i},{float(v)!r}\n")
        Path(str(path) + ".json").write_text(self.to_json())


# ------------------------------------------------------------- Gaussian limit
def _local_integrability(model: SpectralModel, power: float) -> None:
    """Raise if ``f**power`` has a non-integrable singularity."""
    if model.dimension == 1:
        sing = [(e, 1) for _, e in model.singular_points_1d(power) if e is not None]
    else:
        lines, points = model.singular_set_2d(power)
        sing = [(ln.exponent, 1) for ln in lines] + [(pt.exponent, 2) for pt in points]
    for e, codim in sing:
        if e is not None and e <= -codim:
            raise DivergenceError(f"f^{power:g} has a singularity of order {e:g} in codimension {codim}; the integral diverges")


def _fsq_integral(model: SpectralModel, weight: Callable[[np.ndarray], np.ndarray], hmax: float, tol: float) -> float:
    """``int_E f^2 weight`` for an even weight, on half of ``E`` by symmetry."""
    _local_integrability(model, 2.0)
    hmax = max(hmax, 1.0)
    values = []
    for order in (12, 20):
        if model.dimension == 1:
            rule = rule_1d(0.0, math.pi, model.singular_points_1d(2.0), hmax, order)
        elif model.dimension == 2:
            lines, points = model.singular_set_2d(2.0)
            rule = rule_2d(((-math.pi, math.pi), (0.0, math.pi)), lines, points, (hmax, hmax), order)
        else:
            raise ParameterError("implemented for d in {1, 2}")
        vals = model.density(rule.nodes) ** 2 * weight(rule.nodes)
        if not np.all(np.isfinite(vals)):
            raise DivergenceError("f^2 is not finite at a quadrature node")
        values.append(2.0 * float(rule.apply(vals)))
    err = abs(values[1] - values[0])
    if err > tol * max(1.0, abs(values[1])):
        raise DivergenceError(f"quadrature of f^2 does not stabilise (change {err:.3g})")
    return values[1]


def clt_variance(model: SpectralModel, spec: QuadraticFormSpec, tol: float = 1e-8) -> float:
    """``2 (2 pi)^(3d) int_E f^2 g^2``, the variance of the Gaussian limit of ``n^(d/2)(Q_n - E Q_n)``.

    Raises
    ------
    DivergenceError
        If ``f^2 g^2`` is not integrable (the form is not in the CLT regime).
    """
    if spec.dimension != model.dimension:
        raise ParameterError("model and form dimensions differ")
    d = model.dimension

    def weight(x: np.ndarray) -> np.ndarray:
        return spec.symbol(x) ** 2

    integral = _fsq_integral(model, weight, 2.0 * spec.radius, tol)
    return 2.0 * (2.0 * math.pi) ** (3 * d) * integral


def fourier_coeff_fsq(model: SpectralModel, h: int | Iterable[int], tol: float = 1e-8) -> float:
    """``int_E exp(i<2h, x>) f^2(x) dx``, the ``2h`` Fourier coefficient of ``f^2``."""
    lag = np.atleast_1d(np.asarray(h, dtype=float))
    if lag.size != model.dimension:
        raise ParameterError("lag length must equal the dimension")

    def weight(x: np.ndarray) -> np.ndarray:
        if model.dimension == 1:
            return np.cos(2.0 * lag[0] * x)
        return np.cos(2.0 * (x @ lag))

    return _fsq_integral(model, weight, 2.0 * float(np.max(np.abs(lag))), tol)


# -------------------------------------------------------------- double Ito
def _g_tilde(spec: QuadraticFormSpec) -> Callable[[np.ndarray], np.ndarray]:
    if spec.g_tilde is not None:
        return spec.g_tilde
    b = spec.beta

    def power(t: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.abs(t) ** (2.0 * b)

    return power


def _homogeneous_masses(model: SpectralModel, edges: np.ndarray) -> np.ndarray:
    """Cell integrals of ``|a~|^2`` over the frequency box."""
    d = model.dimension
    k = model.kind
    if k is Kind.ONE_DIRECTION:
        raise ParameterError("one-direction models have a Gaussian limit; no double Ito law is sampled")
    if k is Kind.WHITE_NOISE:
        c = (2.0 * math.pi) ** (-d)
        w = np.diff(edges)
        return c * (np.multiply.outer(w, w) if d == 2 else w)

    def dens(x: np.ndarray) -> np.ndarray:
        return np.abs(model.homogeneous(x)) ** 2

    a = float(model.degree)
    if d == 1:
        return _masses_1d(dens, edges, [(0.0, 2.0 * a)])
    if d != 2:
        raise ParameterError("double Ito sampling is implemented for d in {1, 2}")
    if k is Kind.PRODUCT:
        m1 = _masses_1d(lambda x: np.abs(x) ** a, edges, [(0.0, a)])
        return np.multiply.outer(m1, m1)
    if k is Kind.ISOTROPIC:
        return _masses_2d_generic(dens, edges, [], [SingularPoint((0.0, 0.0), 2.0 * a)])
    ap, aq = model.alpha
    lines = [SingularLine(1.0, model.slope_p, 0.0, 2.0 * ap), SingularLine(1.0, model.slope_q, 0.0, 2.0 * aq)]
    return _masses_2d_generic(dens, edges, lines, [])


def _check_admissible(model: SpectralModel, spec: QuadraticFormSpec) -> None:
    from lmfield.condition_h import Verdict, check_condition_h

    verdict = check_condition_h(model, spec, numeric=False)
    if verdict.kind is not Verdict.HOLDS_BY_LEMMA:
        raise AdmissibilityError(f"condition (H) is not established for this pair: {verdict.reason}")


@dataclass(frozen=True)
class DoubleItoGrid:
    """Discretisation of the double integral on ``M^d`` cells of ``[-R, R]^d``."""

    dimension: int
    resolution: int
    radius: float
    nodes: np.ndarray = field(repr=False)
    masses: np.ndarray = field(repr=False)
    scale: float
    path: str
    kernel_matrix: np.ndarray | None = field(default=None, repr=False)
    hankel: np.ndarray | None = field(default=None, repr=False)

    @property
    def spacing(self) -> float:
        return 2.0 * self.radius / self.resolution

    def second_moment(self) -> float:
        """``2 sum_(k,l) |B_kl|^2`` with ``B_kl = scale sqrt(m_k m_l) K(x_k, x_l)`` (symmetric kernel)."""
        if self.path == "fft":
            conv = _self_convolution(self.masses.astype(complex), self.dimension).real
            return float(2.0 * self.scale**2 * np.sum(np.abs(self.hankel) ** 2 * conv))
        m = self.masses.ravel()
        K = self.kernel_matrix
        Ks = 0.5 * (K + K.T)
        return float(2.0 * self.scale**2 * np.einsum("k,l,kl->", m, m, np.abs(Ks) ** 2))

    def trace(self) -> float:
        """``sum_k m_k K(x_k, -x_k)``, the Ito correction."""
        if self.path == "fft":
            centre = (self.resolution - 1,) * self.dimension
            return float(np.sum(self.masses) * self.hankel[centre].real)
        K = self.kernel_matrix
        M = self.resolution
        mirror = np.arange(M)[::-1]
        return float(np.sum(self.masses * K[np.arange(M), mirror]).real)

    def noise(self, gen: np.random.Generator, count: int) -> np.ndarray:
        shape = (count,) + (self.resolution,) * self.dimension
        g = (gen.standard_normal(shape) + 1j * gen.standard_normal(shape)) / math.sqrt(2.0)
        flip = (slice(None),) + (slice(None, None, -1),) * self.dimension
        return (g + np.conj(g[flip])) / math.sqrt(2.0)

    def evaluate(self, xi: np.ndarray) -> np.ndarray:
        """``Z`` for a batch of Hermitian unit-variance noise arrays ``xi``."""
        A = np.sqrt(self.masses) * xi
        tr = self.trace()
        if self.path == "fft":
            conv = _self_convolution(A, self.dimension)
            axes = tuple(range(1, self.dimension + 1))
            z = np.sum(conv * self.hankel, axis=axes)
        else:
            z = np.einsum("bk,kl,bl->b", A, self.kernel_matrix, A)
        if np.max(np.abs(z.imag), initial=0.0) > 1e-6 * max(1.0, float(np.max(np.abs(z.real), initial=0.0))):
            raise ArithmeticError("double integral lost its Hermitian symmetry")
        return self.scale * (z.real - tr)

    def tail_bound(self, model: SpectralModel) -> float:
        """Approximate ``E[Z^2]`` mass outside the box: ``4 c^2 (2 pi)^(3d) int_(|x|>R) |a~|^4``."""
        a = float(model.degree)
        d = self.dimension
        e = 4.0 * a + d
        if e >= 0:
            return float("inf")
        R = self.radius
        if d == 1:
            outside = 2.0 * R**e / (-e)
        else:
            # radial estimate: the region outside the square lies in |x| > R
            outside = 2.0 * math.pi * R**e / (-e)
        return 4.0 * self.scale**2 * (2.0 * math.pi) ** (3 * d) * outside


def _self_convolution(A: np.ndarray, d: int) -> np.ndarray:
    """Linear self-convolution over the last ``d`` axes (``2M - 1`` points per axis)."""
    M = A.shape[-1]
    axes = tuple(range(A.ndim - d, A.ndim))
    F = np.fft.fftn(A, s=(2 * M,) * d, axes=axes)
    conv = np.fft.ifftn(F * F, axes=axes)
    return conv[(Ellipsis,) + (slice(0, 2 * M - 1),) * d]


def _k_quadrature(x: np.ndarray, g: Callable[[np.ndarray], np.ndarray], beta: float, T: float) -> np.ndarray:
    """``K(x_k, x_l) = int g(t) H(x_k + t) H(x_l - t) dt`` by panel quadrature on ``[-T, T]`` plus a tail term."""
    pts = [(0.0, 2.0 * beta)] if beta != 0.0 else []
    rule = rule_1d(-T, T, pts, hmax=2.0, order=12)
    t, w = rule.nodes, rule.weights * g(rule.nodes)
    E1 = kernel_H(x[:, None] + t[None, :], dimension=1) * w[None, :]
    E2 = kernel_H(x[None, :] - t[:, None], dimension=1)
    K = E1 @ E2
    # beyond |t| = T: H(x+t) H(y-t) ~ -(1 + e^{i(x+y)}) / t^2 after the oscillating terms average out
    cg = float(g(np.array([T]))[0]) / T ** (2.0 * beta)
    tail = cg * 2.0 * T ** (2.0 * beta - 1.0) / (1.0 - 2.0 * beta)
    K += tail * (1.0 + np.exp(1j * (x[:, None] + x[None, :])))
    return K


def double_ito_grid(
    model: SpectralModel,
    spec: QuadraticFormSpec,
    resolution: int | None = None,
    radius: float | None = None,
    kernel: str = "auto",
    check: bool = True,
) -> DoubleItoGrid:
    """Build the discretised kernel for :func:`sample_double_ito`.

    ``kernel`` is ``"closed"`` (``K = (2 pi)^d H(x + y)``, needs ``beta = 0``),
    ``"quadrature"`` (``K`` integrated over ``t``; d = 1) or ``"auto"``.
    """
    d = model.dimension
    if spec.dimension != d:
        raise ParameterError("model and form dimensions differ")
    if check:
        _check_admissible(model, spec)
    M0, R0 = DEFAULTS.get(d, (None, None))
    M = int(resolution if resolution is not None else M0)
    R = float(radius if radius is not None else R0)
    if M < 2 or M % 2:
        raise ParameterError("resolution must be an even integer >= 2 so no node sits at the origin")
    if R <= 0:
        raise ParameterError("radius must be positive")
    if kernel == "auto":
        kernel = "closed" if spec.beta == 0.0 and spec.g_tilde is None else "quadrature"
    if kernel not in ("closed", "quadrature"):
        raise ParameterError(f"unknown kernel path {kernel!r}")
    if spec.l2_zero is None:
        raise ParameterError("the form needs a declared L2(0)")
    scale = model.l1.at_zero**2 * float(spec.l2_zero)
    edges = np.linspace(-R, R, M + 1)
    nodes = 0.5 * (edges[:-1] + edges[1:])
    masses = _homogeneous_masses(model, edges)
    masses = 0.5 * (masses + masses[(slice(None, None, -1),) * d])
    if kernel == "closed":
        if spec.beta != 0.0:
            raise ParameterError("the closed-form kernel needs beta = 0")
        s = (np.arange(2 * M - 1) - (M - 1)) * (2.0 * R / M)
        if d == 1:
            hank = (2.0 * math.pi) * kernel_H(s, dimension=1)
        else:
            S1, S2 = np.meshgrid(s, s, indexing="ij")
            hank = (2.0 * math.pi) ** 2 * kernel_H(np.stack([S1, S2], axis=-1))
        return DoubleItoGrid(d, M, R, nodes, masses, scale, "fft", hankel=hank)
    if d != 1:
        raise ParameterError("the kernel quadrature path is implemented for d = 1")
    if M > MAX_DENSE:
        raise ResourceError(f"dense kernel with M = {M} exceeds {MAX_DENSE}")
    K = _k_quadrature(nodes, _g_tilde(spec), spec.beta, T=8.0 * R)
    return DoubleItoGrid(d, M, R, nodes, masses, scale, "dense", kernel_matrix=K)


def sample_double_ito(
    model: SpectralModel,
    spec: QuadraticFormSpec | None = None,
    resolution: int | None = None,
    radius: float | None = None,
    count: int = 10_000,
    rng: RngStream | None = None,
    kernel: str = "auto",
    threads: int = 1,
    tail_tolerance: float = 0.05,
    check: bool = True,
) -> LimitLawEstimate:
    """Draw from the double Wiener-Ito limit of ``n^(d + 2 alpha + 2 beta)(Q_n - E Q_n)``.

    Parameters
    ----------
    model : SpectralModel
    spec : QuadraticFormSpec, optional
        Defaults to ``g = delta_0`` (the statistic ``r_hat(0)``).
    resolution, radius : int, float
        Grid of ``M`` cells per axis over ``[-R, R]^d``; defaults
        ``(512, 200)`` for d = 1 and ``(128, 50)`` for d = 2.
    count : int
        Number of draws. Draws are generated in blocks of ``BLOCK`` with one
        RNG sub-stream per block, so results do not depend on ``threads``.
    kernel : {"auto", "closed", "quadrature"}
    tail_tolerance : float
        Relative tail bound above which a :class:`TruncationWarning` is issued.
    check : bool
        Refuse pairs for which condition (H) is not established.

    Returns
    -------
    LimitLawEstimate
        ``kind = "double_ito"`` with the grid second moment as ``value``.
    """
    spec = spec if spec is not None else lag_spec((0,) * model.dimension)
    rng = rng if rng is not None else RngStream(0)
    if count < 0:
        raise ParameterError("count must be >= 0")
    grid = double_ito_grid(model, spec, resolution, radius, kernel, check)
    second = grid.second_moment()
    tail = grid.tail_bound(model)
    if second > 0 and tail / second > tail_tolerance:
        warnings.warn(
            f"truncation at R = {grid.radius:g} leaves about {tail:.3g} of E[Z^2] (grid value {second:.4g}) outside the box",
            TruncationWarning,
            stacklevel=2,
        )
    blocks = [(b, min(BLOCK, count - b * BLOCK)) for b in range(math.ceil(count / BLOCK))]
    batch = max(1, (1 << 22) // (2 * grid.resolution) ** grid.dimension)

    def run(block: tuple[int, int]) -> np.ndarray:
        b, size = block
        gen = rng.substream(rng.counter + b).generator()
        out = np.empty(size)
        for s in range(0, size, batch):
            m = min(batch, size - s)
            out[s : s + m] = grid.evaluate(grid.noise(gen, m))
        return out

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    samples = np.concatenate(parts) if parts else np.zeros(0)
    meta = {
        "model": model.to_dict() if model.l1.is_constant else model.name,
        "spec": spec.to_dict(),
        "kernel": grid.path,
        "seed": rng.seed,
        "stream_index": rng.index,
    }
    return LimitLawEstimate("double_ito", second, samples, grid.resolution, grid.radius, tail, None, meta)


# ----------------------------------------------------- one-direction constant
@dataclass(frozen=True)
class OneDirectionConstant:
    """``sigma^2_(alpha,p)`` from the ladder ``n^(4 alpha + 3) Var(r_hat(h))``."""

    value: float
    spread: float
    flagged: bool
    ladder: tuple[int, ...]
    scaled: tuple[float, ...]
    extrapolated: tuple[float, ...]

    def as_estimate(self) -> LimitLawEstimate:
        return LimitLawEstimate(
            "gaussian",
            self.value,
            uncertainty=self.spread * abs(self.value),
            metadata={"ladder": list(self.ladder), "scaled": list(self.scaled), "flagged": self.flagged},
        )


def sigma2_one_direction(
    alpha: float,
    p: int,
    L0: float = 1.0,
    h: tuple[int, int] = (1, 0),
    ladder: Iterable[int] = (64, 128, 256, 512),
) -> OneDirectionConstant:
    """Limit of ``n^(4 alpha + 3) Var(r_hat(h))`` for the one-direction model.

    Exact Wick variances along the ladder are extrapolated by Richardson steps
    with the leading correction ``n^(4 alpha + 1)`` (finite sums of the
    covariance tail). ``spread`` is the relative range of the extrapolants;
    ``flagged`` is set when it exceeds 10 %.

    Parameters
    ----------
    alpha : float
        In ``(-1/2, -1/4)``.
    p : int
        Integer slope ``>= 1``.
    L0 : float
        ``f_tilde(u) = L0 |u|^(2 alpha)``.
    h : (int, int)
        Lag with ``h2 != p h1``.
    """
    from lmfield.models import one_direction

    if not -0.5 < alpha < -0.25:
        raise ParameterError("sigma^2 needs -1/2 < alpha < -1/4")
    if int(p) != p or p < 1:
        raise ParameterError("p must be an integer >= 1")
    h1, h2 = (int(v) for v in h)
    if h2 == p * h1:
        raise ParameterError("need h2 != p h1")
    if L0 <= 0:
        raise ParameterError("L0 must be positive")
    ns = tuple(int(n) for n in ladder)
    if len(ns) < 2 or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ParameterError("ladder must be increasing with at least two points")
    model = one_direction(alpha, p, l1=math.sqrt(L0))
    scaled = tuple(n ** (4 * alpha + 3) * wick_variance_rhat(model, (h1, h2), n) for n in ns)
    gamma = -(4 * alpha + 1)
    ext = []
    for (n0, v0), (n1, v1) in zip(zip(ns, scaled), zip(ns[1:], scaled[1:])):
        q = (n1 / n0) ** gamma
        ext.append((q * v1 - v0) / (q - 1.0))
    value = ext[-1]
    spread = (max(ext) - min(ext)) / abs(value) if len(ext) > 1 else abs(scaled[-1] - value) / abs(value)
    return OneDirectionConstant(value, spread, spread > 0.10, ns, scaled, tuple(ext))
