"""Heat kernels for ``du/dt = Laplacian u`` on R^d and on a box with Dirichlet walls.

The box kernel is a product over axes of one-dimensional image sums,

    g_D(t, x, y) = sum_{|m| <= M} g(t, x - y + 2mL) - g(t, x + y - 2a + 2mL),

with ``g(t, z) = (4 pi t)**-1/2 exp(-z**2 / (4t))`` and ``[a, a + L]`` the axis.
Once ``t / L**2`` is large the image terms cancel down to a value many orders
below their size, so those axes switch to the sine expansion

    g_D(t, x, y) = (2/L) sum_k sin(k pi (x-a)/L) sin(k pi (y-a)/L) exp(-(k pi/L)**2 t),

which converges fast exactly there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from ._validation import check_points
from .noise import BoxDomain

__all__ = [
    "KernelSpec",
    "SpaceGrid",
    "free_kernel",
    "dirichlet_kernel",
    "kernel",
    "heat_solve_initial",
    "ConstantU0",
    "IndicatorU0",
    "SineU0",
]

IMAGE_TAIL_TOL = 1e-14
# axes with t / L**2 above this use the sine expansion; SINE_TERMS leaves a tail below exp(-36)
SPECTRAL_SWITCH = 0.25
SINE_TERMS = 12


@dataclass(frozen=True)
class KernelSpec:
    domain: BoxDomain
    mode: Literal["free", "dirichlet"] = "dirichlet"
    image_order: int = 8

    def __post_init__(self):
        if self.mode not in ("free", "dirichlet"):
            raise ValueError(f"unknown kernel mode {self.mode!r}")
        if self.mode == "dirichlet" and self.image_order < 1:
            raise ValueError("image_order must be >= 1 in dirichlet mode")

    def image_tail(self, t_max: float) -> float:
        """Bound on the relative size of the first omitted image term at ``t_max``."""
        if self.mode == "free":
            return 0.0
        gap = 2.0 * self.image_order * float(np.min(self.domain.lengths))
        return 4.0 * self.domain.d * math.exp(-(gap**2) / (4.0 * t_max))

    def check_tail(self, t_max: float) -> None:
        tail = self.image_tail(t_max)
        if tail >= IMAGE_TAIL_TOL:
            raise ValueError(
                f"image series truncated at order {self.image_order} leaves a tail "
                f"~{tail:.2e} at t={t_max}; increase image_order"
            )


@dataclass(frozen=True)
class SpaceGrid:
    """Tensor-product quadrature nodes and weights over a box."""

    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def midpoint(cls, domain: BoxDomain, resolution: int | tuple[int, ...]) -> "SpaceGrid":
        res = _per_axis(resolution, domain.d)
        axes, wts = [], []
        for lo, hi, n in zip(domain.lower, domain.upper, res):
            h = (hi - lo) / n
            axes.append(lo + h * (np.arange(n) + 0.5))
            wts.append(np.full(n, h))
        return cls._tensor(axes, wts)

    @classmethod
    def gauss_legendre(cls, domain: BoxDomain, order: int | tuple[int, ...]) -> "SpaceGrid":
        res = _per_axis(order, domain.d)
        axes, wts = [], []
        for lo, hi, n in zip(domain.lower, domain.upper, res):
            z, w = np.polynomial.legendre.leggauss(n)
            axes.append(lo + (hi - lo) * (z + 1) / 2)
            wts.append(w * (hi - lo) / 2)
        return cls._tensor(axes, wts)

    @classmethod
    def _tensor(cls, axes, wts):
        mesh = np.meshgrid(*axes, indexing="ij")
        wmesh = np.meshgrid(*wts, indexing="ij")
        nodes = np.stack([m.ravel() for m in mesh], axis=-1)
        weights = np.prod(np.stack([w.ravel() for w in wmesh], axis=-1), axis=-1)
        return cls(nodes, weights)

    @property
    def size(self) -> int:
        return len(self.weights)


def _per_axis(res, d):
    if np.isscalar(res):
        res = (int(res),) * d
    res = tuple(int(r) for r in res)
    if len(res) != d or min(res) < 1:
        raise ValueError(f"resolution must give {d} positive counts, got {res}")
    return res


def _gauss_1d(t, z):
    return np.exp(-(z * z) / (4.0 * t)) / np.sqrt(4.0 * np.pi * t)


def free_kernel(t, x):
    """Gaussian heat kernel ``(4 pi t)**(-d/2) exp(-|x|**2 / (4t))``.

    ``x`` has the spatial dimension on its last axis; ``t`` broadcasts
    against the leading axes.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    r2 = np.sum(x * x, axis=-1)
    return np.exp(-r2 / (4.0 * t)) / (4.0 * np.pi * t) ** (d / 2)


def _dirichlet_unchecked(t, x, y, spec: KernelSpec):
    t = np.asarray(t, dtype=float)[..., None, None]
    m = np.arange(-spec.image_order, spec.image_order + 1)
    lo = np.asarray(spec.domain.lower)[:, None]
    L = spec.domain.lengths[:, None]
    xa, ya = x[..., :, None], y[..., :, None]
    shift = 2.0 * m * L
    # |x - y| keeps the direct images bitwise identical under x <-> y (g is even, shifts are +-)
    g = _gauss_1d(t, np.abs(xa - ya) + shift) - _gauss_1d(t, xa + ya - 2.0 * lo + shift)
    axis_vals = np.sum(g, axis=-1)
    tau = t[..., 0] / (L[:, 0] ** 2)
    spectral = tau > SPECTRAL_SWITCH
    if np.any(spectral):
        k = np.arange(1, SINE_TERMS + 1)
        phase = np.pi * k / L
        series = np.sum(
            (2.0 / L) * np.sin(phase * (xa - lo)) * np.sin(phase * (ya - lo)) * np.exp(-(phase**2) * t),
            axis=-1,
        )
        axis_vals = np.where(spectral, series, axis_vals)
    return np.prod(axis_vals, axis=-1)


def dirichlet_kernel(t, x, y, spec: KernelSpec):
    """Dirichlet heat kernel on the box of ``spec``.

    Images for short times, the sine expansion once ``t / L**2 > SPECTRAL_SWITCH``.

    Symmetric in ``x <-> y`` and bounded above by ``free_kernel(t, x - y)``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dom = spec.domain
    if not (np.all(dom.contains(x.reshape(-1, dom.d))) and np.all(dom.contains(y.reshape(-1, dom.d)))):
        raise ValueError("dirichlet_kernel points must lie in the closed box")
    val = _dirichlet_unchecked(t, x, y, spec)
    # the kernel is nonnegative analytically; clip rounding noise near the walls
    return np.maximum(val, 0.0)


def kernel(t, x, y, spec: KernelSpec):
    """Dispatch on ``spec.mode``: free ``G(t, x - y)`` or Dirichlet ``G(t, x, y)``."""
    if spec.mode == "free":
        return free_kernel(t, np.asarray(x, float) - np.asarray(y, float))
    return dirichlet_kernel(t, x, y, spec)


def heat_solve_initial(
    u0: Callable[[np.ndarray], np.ndarray],
    t,
    x,
    spec: KernelSpec,
    grid: SpaceGrid,
    *,
    chunk: int = 1 << 22,
):
    """Quadrature approximation of ``int_D G(t, x, y) u0(y) dy``.

    ``t`` may be a scalar or 1-d array and ``x`` a point or ``(n, d)`` array;
    the result has shape ``(len(t), n)`` for array ``t`` and ``(n,)`` for scalar
    ``t``.
    """
    d = spec.domain.d
    scalar_t = np.ndim(t) == 0
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts <= 0):
        raise ValueError("t must be positive")
    X = check_points(x, d, "x")
    if spec.mode == "dirichlet" and not np.all(spec.domain.contains(X)):
        raise ValueError("evaluation points must lie in the closed box for dirichlet mode")
    u = np.asarray(u0(grid.nodes), dtype=float) * grid.weights
    out = np.empty((len(ts), len(X)))
    per_t = max(1, len(X) * grid.size * (2 * spec.image_order + 1) * d)
    step = max(1, chunk // per_t)
    for s in range(0, len(ts), step):
        tt = ts[s : s + step, None, None]
        if spec.mode == "free":
            G = free_kernel(tt, X[None, :, None, :] - grid.nodes[None, None, :, :])
        else:
            G = _dirichlet_unchecked(tt, X[None, :, None, :], grid.nodes[None, None, :, :], spec)
        out[s : s + step] = G @ u
    return out[0] if scalar_t else out


# Initial conditions with closed-form descriptions; all have sup norm <= |c| or 1.


@dataclass(frozen=True)
class ConstantU0:
    c: float = 1.0

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        return np.full(X.shape[:-1], self.c)

    @property
    def sup_norm(self) -> float:
        return abs(self.c)


@dataclass(frozen=True)
class IndicatorU0:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        return np.all((X >= self.lower) & (X <= self.upper), axis=-1).astype(float)

    @property
    def sup_norm(self) -> float:
        return 1.0


@dataclass(frozen=True)
class SineU0:
    """Product of first-mode sines ``prod_k sin(k_k pi (x_k - a_k) / L_k)``."""

    domain: BoxDomain
    modes: tuple[int, ...] | None = None

    def _modes(self):
        return np.asarray(self.modes if self.modes is not None else (1,) * self.domain.d)

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        z = (X - np.asarray(self.domain.lower)) / self.domain.lengths
        return np.prod(np.sin(np.pi * self._modes() * z), axis=-1)

    def decay_rate(self) -> float:
        """Dirichlet eigenvalue: the mode decays like ``exp(-rate * t)``."""
        return float(np.sum((np.pi * self._modes() / self.domain.lengths) ** 2))

    @property
    def sup_norm(self) -> float:
        return 1.0
