"""Dirichlet-type kernels ``H_n``, their limit ``H`` and the Fejér kernel."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from lmfield.errors import ParameterError

__all__ = ["kernel_H", "kernel_Hn_scaled", "fejer", "KernelPoint", "kernel_point"]


def _as_points(z: float | np.ndarray, d: int | None) -> tuple[np.ndarray, tuple[int, ...]]:
    z = np.asarray(z, dtype=float)
    if d is None:
        d = 1 if z.ndim == 0 else z.shape[-1]
    if d == 1 and (z.ndim == 0 or z.shape[-1] != 1):
        return z[..., None], z.shape
    return z, z.shape[:-1]


def _h1(z: np.ndarray) -> np.ndarray:
    # (e^{iz} - 1) / (iz); expm1 keeps full relative accuracy near 0 and the
    # two-term series avoids overflow of 1 / z for subnormal arguments
    out = np.ones(z.shape, dtype=complex)
    tiny = np.abs(z) < 1e-8
    out[tiny] = 1.0 + 0.5j * z[tiny]
    big = ~tiny
    out[big] = np.expm1(1j * z[big]) / (1j * z[big])
    return out


def kernel_H(z: float | np.ndarray, dimension: int | None = None) -> complex | np.ndarray:
    """``H(z) = prod_j (exp(i z_j) - 1) / (i z_j)`` with value 1 at ``z_j = 0``.

    ``z`` is a scalar (d = 1) or an array whose trailing axis has length d.
    Pass ``dimension=1`` to treat a 1-d array as a batch of scalars.
    """
    pts, shape = _as_points(z, dimension)
    out = np.prod(_h1(pts), axis=-1)
    return complex(out) if shape == () else out.reshape(shape)


def kernel_Hn_scaled(n: int, z: float | np.ndarray, dimension: int | None = None) -> complex | np.ndarray:
    """``n^-d H_n(z / n)`` for ``z`` in ``n E``, where ``H_n(t) = sum_(k=1..n) e^(ikt)`` per axis."""
    if n < 1:
        raise ParameterError("n must be a positive integer")
    pts, shape = _as_points(z, dimension)
    if np.any(np.abs(pts) > n * math.pi * (1 + 1e-12)):
        raise ParameterError(f"z must lie in n E = [-{n} pi, {n} pi]^d")
    w = pts / n
    # e^{iw} (e^{iz} - 1) / (n (e^{iw} - 1)) with z = n w equals e^{iw} h(z) / h(w)
    out = np.exp(1j * w) * _h1(pts) / _h1(w)
    val = np.prod(out, axis=-1)
    return complex(val) if shape == () else val.reshape(shape)


def fejer(n: int, x: float | np.ndarray) -> float | np.ndarray:
    """``F_n(x) = n^-1 |sum_(k=1..n) e^(ikx)|^2``, so ``int_(-pi)^(pi) F_n = 2 pi``."""
    if n < 1:
        raise ParameterError("n must be a positive integer")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > math.pi * (1 + 1e-12)):
        raise ParameterError("x must lie in [-pi, pi]")
    s = np.sin(0.5 * x)
    small = np.abs(s) < 1e-8
    safe = np.where(small, 1.0, s)
    out = np.where(small, float(n), np.sin(0.5 * n * x) ** 2 / (n * safe**2))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class KernelPoint:
    """Kernel values at one argument ``z``."""

    dimension: int
    z: tuple[float, ...]
    H: complex
    n: int | None = None
    Hn_scaled: complex | None = None


def kernel_point(z: float | tuple[float, ...], n: int | None = None) -> KernelPoint:
    zz = tuple(float(v) for v in np.atleast_1d(z))
    arr = np.array(zz)
    h = kernel_H(arr, dimension=len(zz)) if len(zz) > 1 else kernel_H(zz[0])
    hn = None
    if n is not None:
        hn = kernel_Hn_scaled(n, arr, dimension=len(zz)) if len(zz) > 1 else kernel_Hn_scaled(n, zz[0])
    return KernelPoint(len(zz), zz, complex(h), n, None if hn is None else complex(hn))
