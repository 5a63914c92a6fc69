"""Field synthesis on lattice windows.

Two samplers are provided. The spectral sampler discretises the stochastic
integral ``X_j = int_E a(x) exp(i<j,x>) dW(x)`` on a half-cell offset
frequency grid and evaluates it with an FFT. The exact sampler factorises
the covariance matrix of the window and is used as a ground-truth oracle
on small windows.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from lmfield.covariance import covariance_table
from lmfield.errors import (
    FactorizationError,
    ParameterError,
    ResourceError,
    SingularPointError,
    SymmetryError,
)
from lmfield.models import Kind, SpectralModel, wrap
from lmfield.quadrature import gauss_legendre, rule_1d, rule_2d
from lmfield.rng import RngStream

__all__ = [
    "FieldSample",
    "SpectralSynthesizer",
    "ExactSampler",
    "simulate_spectral",
    "simulate_exact",
    "sample_mean",
    "cell_masses",
]

MAX_GRID_POINTS = 1 << 26
MAX_EXACT_SITES = 4096
IMAG_TOL = 1e-8
JITTER = 1e-10


@dataclass(frozen=True)
class FieldSample:
    """Field values on ``{1-m, ..., n+m}^d``.

    ``values[j]`` holds the site ``j + 1 - m`` along each axis, so the
    observation window ``A_n = {1..n}^d`` is ``values[m:m+n, ...]``.
    """

    dimension: int
    n: int
    margin: int
    values: np.ndarray = field(repr=False)
    metadata: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        side = self.n + 2 * self.margin
        if self.values.shape != (side,) * self.dimension:
            raise ParameterError(f"values must have shape {(side,) * self.dimension}")
        if not np.all(np.isfinite(self.values)):
            raise ParameterError("field values must be finite")
        self.values.setflags(write=False)

    @property
    def window(self) -> np.ndarray:
        """Values on ``A_n``."""
        m, n = self.margin, self.n
        return self.values[(slice(m, m + n),) * self.dimension]

    def sidecar(self) -> dict[str, Any]:
        return {"dimension": self.dimension, "n": self.n, "margin": self.margin, **self.metadata}

    def to_csv(self, path: str | Path) -> None:
        side = self.n + 2 * self.margin
        grids = np.meshgrid(*([np.arange(side) + 1 - self.margin] * self.dimension), indexing="ij")
        cols = [g.ravel() for g in grids]
        header = ",".join([f"i{k + 1}" for k in range(self.dimension)] + ["value"])
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for row in zip(*cols, self.values.ravel()):
                fh.write(",".join(str(int(v)) for v in row[:-1]) + f",{float(row[-1])!r}\n")
        Path(str(path) + ".json").write_text(json.dumps(self.sidecar(), sort_keys=True, indent=2))

    def to_binary(self, path: str | Path) -> None:
        """Little-endian float64 values in C order plus a JSON sidecar."""
        self.values.astype("<f8").tofile(path)
        Path(str(path) + ".json").write_text(json.dumps(self.sidecar(), sort_keys=True, indent=2))

    @classmethod
    def from_binary(cls, path: str | Path) -> FieldSample:
        meta = json.loads(Path(str(path) + ".json").read_text())
        d, n, m = meta.pop("dimension"), meta.pop("n"), meta.pop("margin")
        values = np.fromfile(path, dtype="<f8").reshape((n + 2 * m,) * d)
        return cls(d, n, m, values, meta)


def sample_mean(field_: FieldSample) -> float:
    """Mean over the window ``A_n`` (margins excluded)."""
    return float(np.mean(field_.window))


# ------------------------------------------------------------ cell masses
def _gl_cells_1d(func: Callable[[np.ndarray], np.ndarray], edges: np.ndarray, order: int = 12) -> np.ndarray:
    x, w = gauss_legendre(order)
    half = 0.5 * np.diff(edges)
    nodes = edges[:-1, None] + half[:, None] * (x[None, :] + 1.0)
    return half * (func(nodes) @ w)


def _masses_1d(func: Callable[[np.ndarray], np.ndarray], edges: np.ndarray, points: list[tuple[float, float | None]]) -> np.ndarray:
    """Integrals of ``func`` over consecutive cells, exact near singular points."""
    delta = edges[1] - edges[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = _gl_cells_1d(func, edges)
    for loc, _ in points:
        near = np.nonzero((edges[1:] >= loc - 1.5 * delta) & (edges[:-1] <= loc + 1.5 * delta))[0]
        for i in near:
            rule = rule_1d(edges[i], edges[i + 1], points)
            out[i] = rule.apply(func(rule.nodes))
    return out


def _power_l1(model: SpectralModel, exponent: float) -> Callable[[np.ndarray], np.ndarray]:
    c = model.l1.value**2

    def f(x: np.ndarray) -> np.ndarray:
        return c * np.abs(x) ** exponent

    return f


def _masses_one_direction(model: SpectralModel, edges: np.ndarray) -> np.ndarray:
    # integrate over x1 exactly through the antiderivative of f_tilde, then
    # over x2 with Gauss-Legendre
    a = float(model.alpha)
    p = float(model.slope_p)
    L0 = model.l1.value**2
    e = 2 * a + 1

    def F0(u: np.ndarray) -> np.ndarray:
        return L0 * np.sign(u) * np.abs(u) ** e / e

    period = 2.0 * F0(np.array(math.pi))

    def F(u: np.ndarray) -> np.ndarray:
        return F0(wrap(u)) + np.round(u / (2.0 * math.pi)) * period

    xg, wg = gauss_legendre(12)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    x2 = lo[:, None] + half[:, None] * (xg[None, :] + 1.0)  # (cells, nodes)
    out = np.empty((lo.size, lo.size))
    for i in range(lo.size):
        inner = F(hi[i] + p * x2) - F(lo[i] + p * x2)
        out[i] = half * (inner @ wg)
    return out / (2.0 * math.pi)


def _masses_2d_generic(
    density: Callable[[np.ndarray], np.ndarray],
    edges: np.ndarray,
    lines: list,
    points: list,
) -> np.ndarray:
    """Cell integrals of ``density`` on a uniform square grid with singular lines and points."""
    N = edges.size - 1
    delta = edges[1] - edges[0]
    xg, wg = gauss_legendre(6)
    centres = edges[:-1] + 0.5 * delta
    sub = centres[:, None] + 0.5 * delta * xg[None, :]  # (N, 6)
    out = np.empty((N, N))
    for i in range(N):
        pts = np.stack(np.broadcast_arrays(sub[i][:, None, None], sub[None, :, :]), axis=-1)  # (6, N, 6, 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = density(pts)
        out[i] = 0.25 * delta**2 * np.einsum("a,b,anb->n", wg, wg, vals)
    bad = np.zeros((N, N), dtype=bool)
    X1, X2 = np.meshgrid(centres, centres, indexing="ij")
    reach = delta * (1.0 + 1e-9)
    for pt in points:
        bad |= (np.abs(X1 - pt.location[0]) <= reach) & (np.abs(X2 - pt.location[1]) <= reach)
    for i, j in zip(*np.nonzero(bad)):
        box = ((edges[i], edges[i + 1]), (edges[j], edges[j + 1]))
        rule = rule_2d(box, [], points, order=8, depth=16)
        out[i, j] = rule.apply(density(rule.nodes))
    crossed = np.zeros((N, N), dtype=bool)
    for ln in lines:
        norm = math.hypot(ln.c1, ln.c2)
        crossed |= np.abs(ln.c1 * X1 + ln.c2 * X2 - ln.offset) / norm <= delta * 0.75
    crossed &= ~bad
    for i, j in zip(*np.nonzero(crossed)):
        box = ((edges[i], edges[i + 1]), (edges[j], edges[j + 1]))
        rule = rule_2d(box, lines, points, order=6, depth=8)
        out[i, j] = rule.apply(density(rule.nodes))
    return out


def cell_masses(model: SpectralModel, N: int) -> np.ndarray:
    """``int_cell f`` for the ``N^d`` cells of the uniform grid on ``E``."""
    d = model.dimension
    edges = np.linspace(-math.pi, math.pi, N + 1)
    delta = 2.0 * math.pi / N
    if model.kind is Kind.WHITE_NOISE:
        return np.full((N,) * d, (delta / (2.0 * math.pi)) ** d)
    if d == 1:
        return _masses_1d(model.density, edges, model.singular_points_1d())
    if d != 2:
        raise ParameterError("cell masses are implemented for d in {1, 2}")
    if model.kind is Kind.ONE_DIRECTION:
        out = _masses_one_direction(model, edges)
    elif model.kind is Kind.PRODUCT and model.l1.is_constant:
        e = float(model.alpha)  # f = L1^2 |x1|^alpha |x2|^alpha when d = 2
        m1 = _masses_1d(_power_l1(model, e), edges, [(0.0, e)]) / model.l1.value**2
        out = model.l1.value**2 * np.outer(m1, m1)
    else:
        out = _masses_2d_generic(model.density, edges, *model.singular_set_2d())
    # the grid is symmetric under x -> -x; enforce it exactly
    return 0.5 * (out + out[::-1, ::-1])


# ------------------------------------------------------------ spectral sampler
class SpectralSynthesizer:
    """Precomputed amplitudes for repeated spectral synthesis.

    Parameters
    ----------
    model : SpectralModel
    n, margin : int
        Window side and margin; the synthesised side is ``n + 2 margin``.
    oversample : int
        Factor ``kappa``; the grid has ``kappa (n + 2 margin)`` points per axis.
    weights : {"cell", "midpoint"}
        ``"cell"`` uses the exact mass of ``f`` over each cell, which stays
        finite when a grid point sits on a singular line. ``"midpoint"``
        uses ``f`` at the cell centre times the cell volume.
    """

    def __init__(self, model: SpectralModel, n: int, margin: int = 0, oversample: int = 4, weights: str = "cell") -> None:
        if n < 1 or margin < 0:
            raise ParameterError("need n >= 1 and margin >= 0")
        if int(oversample) != oversample or oversample < 1:
            raise ParameterError("oversample must be an integer >= 1")
        if model.dimension not in (1, 2):
            raise ParameterError("spectral synthesis is implemented for d in {1, 2}")
        self.model = model
        self.n = int(n)
        self.margin = int(margin)
        self.oversample = int(oversample)
        self.weights = weights
        side = self.n + 2 * self.margin
        N = self.oversample * side
        d = model.dimension
        if N**d > MAX_GRID_POINTS:
            raise ResourceError(f"frequency grid of {N}^{d} points exceeds the budget of {MAX_GRID_POINTS}")
        self.N = N
        self.side = side
        delta = 2.0 * math.pi / N
        if weights == "cell":
            mass = cell_masses(model, N)
        elif weights == "midpoint":
            centres = -math.pi + (np.arange(N) + 0.5) * delta
            if d == 1:
                pts = centres
            else:
                pts = np.stack(np.meshgrid(centres, centres, indexing="ij"), axis=-1)
            with np.errstate(divide="ignore"):
                dens = model.density(pts)
            if not np.all(np.isfinite(dens)):
                raise SingularPointError("a grid point lies on a singular set; use cell weights")
            mass = dens * delta**d
        else:
            raise ParameterError(f"unknown weights {weights!r}")
        # amplitude times sqrt(cell volume): E|amp * dW|^2 = mass
        self.amplitude = np.sqrt(np.maximum(mass, 0.0))
        # exp(i j x_k) = exp(i j (-pi + delta/2)) * exp(2 pi i j k / N)
        j = np.arange(side)
        self._phase = np.exp(1j * j * (-math.pi + 0.5 * delta))

    def noise(self, stream: RngStream) -> np.ndarray:
        """Hermitian complex Gaussian increments with unit cell variance."""
        gen = stream.generator()
        shape = (self.N,) * self.model.dimension
        g = (gen.standard_normal(shape) + 1j * gen.standard_normal(shape)) / math.sqrt(2.0)
        flipped = np.conj(g[(slice(None, None, -1),) * self.model.dimension])
        return (g + flipped) / math.sqrt(2.0)

    def synthesize(self, dW: np.ndarray) -> np.ndarray:
        d = self.model.dimension
        coeff = self.amplitude * dW
        full = np.fft.ifftn(coeff) * self.N**d
        vals = full[(slice(0, self.side),) * d]
        if d == 1:
            vals = vals * self._phase
        else:
            vals = vals * self._phase[:, None] * self._phase[None, :]
        rms = math.sqrt(float(np.mean(vals.real**2))) or 1.0
        resid = float(np.max(np.abs(vals.imag))) / rms
        if resid > IMAG_TOL:
            raise SymmetryError(f"imaginary residue {resid:.2e} exceeds {IMAG_TOL:g}")
        return vals.real.copy()

    def sample(self, stream: RngStream) -> FieldSample:
        values = self.synthesize(self.noise(stream))
        meta = {
            "model": self.model.name,
            "method": "spectral",
            "oversample": self.oversample,
            "weights": self.weights,
            "seed": stream.seed,
            "stream": stream.index,
            "counter": stream.counter,
        }
        return FieldSample(self.model.dimension, self.n, self.margin, values, meta)

    def discrete_covariance(self, radius: int) -> np.ndarray:
        """Covariances of the synthesised field, ``sum_k mass_k cos(<h, x_k>)``."""
        d = self.model.dimension
        mass = self.amplitude**2
        full = np.fft.ifftn(mass) * self.N**d
        lags = np.arange(-radius, radius + 1)
        delta = 2.0 * math.pi / self.N
        ph = np.exp(1j * lags * (-math.pi + 0.5 * delta))
        idx = np.mod(lags, self.N)
        if d == 1:
            return (full[idx] * ph).real
        return (full[np.ix_(idx, idx)] * ph[:, None] * ph[None, :]).real


def simulate_spectral(
    model: SpectralModel,
    n: int,
    margin: int = 0,
    oversample: int = 4,
    rng: RngStream | None = None,
    weights: str = "cell",
) -> FieldSample:
    """One spectral-synthesis realisation; see :class:`SpectralSynthesizer`."""
    rng = RngStream(0) if rng is None else rng
    return SpectralSynthesizer(model, n, margin, oversample, weights).sample(rng)


# --------------------------------------------------------------- exact sampler
class ExactSampler:
    """Dense Cholesky sampler for windows with at most 4096 sites."""

    def __init__(self, model: SpectralModel, n: int, margin: int = 0) -> None:
        if n < 1 or margin < 0:
            raise ParameterError("need n >= 1 and margin >= 0")
        d = model.dimension
        side = n + 2 * margin
        if side**d > MAX_EXACT_SITES:
            raise ResourceError(f"exact sampler needs (n + 2m)^d <= {MAX_EXACT_SITES}, got {side**d}")
        self.model = model
        self.n = n
        self.margin = margin
        self.side = side
        table = covariance_table(model, side - 1)
        axis = np.arange(side)
        if d == 1:
            cov = table.values[axis[:, None] - axis[None, :] + table.radius]
        else:
            sites = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
            diff = sites[:, None, :] - sites[None, :, :] + table.radius
            cov = table.values[diff[..., 0], diff[..., 1]]
        self.covariance = cov
        self.factor = self._cholesky(cov)

    @staticmethod
    def _cholesky(cov: np.ndarray) -> np.ndarray:
        try:
            return np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            pass
        scale = float(np.max(np.diag(cov)))
        try:
            return np.linalg.cholesky(cov + JITTER * scale * np.eye(cov.shape[0]))
        except np.linalg.LinAlgError as exc:
            raise FactorizationError("covariance matrix is not positive definite within jitter 1e-10") from exc

    def sample(self, stream: RngStream) -> FieldSample:
        z = stream.generator().standard_normal(self.factor.shape[0])
        values = (self.factor @ z).reshape((self.side,) * self.model.dimension)
        meta = {
            "model": self.model.name,
            "method": "exact",
            "seed": stream.seed,
            "stream": stream.index,
            "counter": stream.counter,
        }
        return FieldSample(self.model.dimension, self.n, self.margin, values, meta)

    def sample_values(self, streams: list[RngStream]) -> np.ndarray:
        """Raw values for several streams, shape ``(len(streams), side, ...)``."""
        z = np.stack([s.generator().standard_normal(self.factor.shape[0]) for s in streams])
        return (z @ self.factor.T).reshape((len(streams),) + (self.side,) * self.model.dimension)


def simulate_exact(model: SpectralModel, n: int, margin: int = 0, rng: RngStream | None = None) -> FieldSample:
    """One exact realisation with covariance matrix ``[r(i - j)]``."""
    rng = RngStream(0) if rng is None else rng
    return ExactSampler(model, n, margin).sample(rng)
