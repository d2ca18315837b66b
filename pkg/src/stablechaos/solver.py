"""Chaos-expansion terms of the heat equation driven by an atomic stable noise.

The mild solution is expanded as ``u = sum_n u_n`` with ``u_0(t, x)`` the heat
flow of the initial data and

    u_{n+1}(t, x) = int_0^t int_D G(t - s, x, y) u_n(s, y) <> L(dy) ds.

Against atoms this is a sum over index tuples ``(i_1, ..., i_n)`` of

    int_{T_n} prod_j G(s_{j+1} - s_j, x_{i_{j+1}}, x_{i_j}) y_{i_j} v(s_1, x_{i_1}) ds

with ``x_{i_{n+1}} = x`` and ``s_{n+1} = t``. The star product keeps tuples
with no adjacent repeat and is summed by dynamic programming over the last
index; the diamond product keeps pairwise-distinct tuples and is summed by a
depth-first walk over prefixes. Time integrals use the trapezoid rule on a
uniform grid with ``G(0+, x, y) = 0`` for ``x != y``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_order, check_points, check_positive
from .bounds import regime
from .chaos import (
    DEFAULT_TUPLE_BUDGET,
    DRIFT_OFF,
    PAIRWISE,
    BudgetExceededError,
    DriftChannel,
    count_tuples,
    labels_for,
)
from .kernel import ConstantU0, KernelSpec, SpaceGrid, _dirichlet_unchecked, free_kernel, heat_solve_initial
from .noise import NoiseField, StableParams, big_atom_rate

__all__ = [
    "TimeGrid",
    "Grids",
    "SeriesResult",
    "chaos_term_star",
    "chaos_term_diamond",
    "solve_series",
    "solve_series_many",
    "tilt",
    "untilt",
    "ChaosSeriesSolver",
]

ATOM_COLLISION_TOL = 1e-12


@dataclass(frozen=True)
class TimeGrid:
    t: float
    steps: int

    def __post_init__(self):
        check_positive(self.t, "t")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")

    @property
    def h(self) -> float:
        return self.t / self.steps

    @property
    def nodes(self) -> np.ndarray:
        return self.h * np.arange(self.steps + 1)


@dataclass(frozen=True)
class Grids:
    """Spatial quadrature for the heat flow of ``u0`` and the time step count."""

    space: SpaceGrid
    time_steps: int = 64

    def time(self, t: float) -> TimeGrid:
        return TimeGrid(t, self.time_steps)


@dataclass
class SeriesResult:
    mode: str
    t: float
    x: np.ndarray
    terms: np.ndarray
    partial_sums: np.ndarray = field(init=False)
    envelope_diagnostic: np.ndarray = field(init=False)
    beta: float = math.nan
    tilt_factor: float = 1.0

    def __post_init__(self):
        self.terms = np.asarray(self.terms, dtype=float)
        self.partial_sums = np.cumsum(self.terms)
        n = np.arange(len(self.terms))
        if self.beta < 1:
            a = 1 - self.beta
            with np.errstate(divide="ignore"):
                log_env = n * a * math.log(self.t) - np.where(n > 0, n * a * np.log(np.maximum(n, 1)), 0.0)
            self.envelope_diagnostic = self.terms / np.exp(log_env)
        else:
            self.envelope_diagnostic = np.full(len(self.terms), np.nan)

    @property
    def value(self) -> float:
        return float(self.partial_sums[-1])


# --------------------------------------------------------------- primitives


def _volterra(g: np.ndarray, f: np.ndarray, h: float) -> np.ndarray:
    """Trapezoid values of ``int_0^{s_k} g(s_k - s) f(s) ds`` at every grid node."""
    S1 = len(f)
    c = np.convolve(g, f)[:S1]
    out = h * (c - 0.5 * g * f[0] - 0.5 * g[0] * f)
    out[0] = 0.0
    return out


def _volterra_end(g: np.ndarray, f: np.ndarray, h: float) -> float:
    """Trapezoid value of ``int_0^t g(t - s) f(s) ds`` at the final node only."""
    S = len(f) - 1
    if S == 0:
        return 0.0
    return h * (float(np.dot(g[::-1], f)) - 0.5 * g[S] * f[0] - 0.5 * g[0] * f[S])


def _pair_kernel(spec: KernelSpec, times: np.ndarray, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """``G(times[r], P[a], Q[b])`` as an array ``(len(times), len(P), len(Q))``."""
    tt = times[:, None, None]
    if spec.mode == "free":
        return free_kernel(tt, P[None, :, None, :] - Q[None, None, :, :])
    return np.maximum(_dirichlet_unchecked(tt, P[None, :, None, :], Q[None, None, :, :], spec), 0.0)


@dataclass
class _Discretization:
    """Everything a chaos term needs that does not depend on the evaluation point."""

    tgrid: TimeGrid
    weights: np.ndarray  # signed label masses
    n_real: int
    g_labels: np.ndarray  # (S+1, L, L), zero at r=0 and on the diagonal
    v_labels: np.ndarray  # (S+1, L) heat flow of u0 at each label
    points: np.ndarray
    spec: KernelSpec


def _check_off_labels(X: np.ndarray, points: np.ndarray):
    if len(points) == 0:
        return
    dist = np.sqrt(np.sum((X[:, None, :] - points[None, :, :]) ** 2, axis=-1))
    if np.any(dist <= ATOM_COLLISION_TOL):
        raise ValueError("evaluation point coincides with an atom (or drift node) location")


def _discretize(fld, u0, t, spec, grids, drift) -> _Discretization:
    if spec.domain != fld.domain:
        raise ValueError("kernel domain differs from the noise domain")
    spec.check_tail(t)
    tg = grids.time(t)
    pts, w, n_real = labels_for(fld, drift)
    S = tg.steps
    times = tg.nodes[1:]
    L = len(w)
    g = np.zeros((S + 1, L, L))
    v = np.empty((S + 1, L))
    if L:
        g[1:] = _pair_kernel(spec, times, pts, pts)
        idx = np.arange(L)
        g[:, idx, idx] = 0.0
        v[0] = u0(pts)
        v[1:] = heat_solve_initial(u0, times, pts, spec, grids.space)
    return _Discretization(tg, w, n_real, g, v, pts, spec)


def _point_kernel(disc: _Discretization, X: np.ndarray) -> np.ndarray:
    """``G(s_r, X[p], label_a)`` as ``(S+1, P, L)``, zero at ``r = 0``."""
    S = disc.tgrid.steps
    out = np.zeros((S + 1, len(X), len(disc.weights)))
    if len(disc.weights):
        out[1:] = _pair_kernel(disc.spec, disc.tgrid.nodes[1:], X, disc.points)
    return out


def _star_terms(disc: _Discretization, X: np.ndarray, n_max: int) -> np.ndarray:
    """Orders ``1..n_max`` of the star series at each point, shape ``(P, n_max)``."""
    h = disc.tgrid.h
    y = disc.weights
    L = len(y)
    gx = _point_kernel(disc, X)
    out = np.zeros((len(X), n_max))
    W = disc.v_labels.copy()  # W_0(s, i) = v(s, x_i)
    for order in range(1, n_max + 1):
        for p in range(len(X)):
            out[p, order - 1] = sum(y[i] * _volterra_end(gx[:, p, i], W[:, i], h) for i in range(L))
        if order == n_max:
            break
        W_next = np.zeros_like(W)
        for i in range(L):
            acc = np.zeros(len(W))
            for j in range(L):
                if j != i:
                    acc += y[j] * _volterra(disc.g_labels[:, i, j], W[:, j], h)
            W_next[:, i] = acc
        W = W_next
    return out


def _diamond_terms(disc: _Discretization, X: np.ndarray, n_max: int, budget: int) -> np.ndarray:
    """Orders ``1..n_max`` of the diamond series by a walk over pairwise-distinct prefixes."""
    h = disc.tgrid.h
    y = disc.weights
    L, n_real = len(y), disc.n_real
    for n in range(1, n_max + 1):
        total = count_tuples(L, n, n_real, PAIRWISE)
        if total > budget:
            raise BudgetExceededError(
                f"{total} index tuples of order {n} over {L} labels exceed the tuple budget {budget}"
            )
    gx = _point_kernel(disc, X)
    P = len(X)
    out = np.zeros((P, n_max))
    if L == 0:
        return out

    def close(a, F, depth):
        for p in range(P):
            out[p, depth - 1] += y[a] * _volterra_end(gx[:, p, a], F, h)

    def walk(prefix_used: set, a: int, F: np.ndarray, depth: int):
        close(a, F, depth)
        if depth == n_max:
            return
        yF = y[a] * F
        for b in range(L):
            if b == a or (b < n_real and b in prefix_used):
                continue
            Fb = _volterra(disc.g_labels[:, b, a], yF, h)
            if b < n_real:
                prefix_used.add(b)
                walk(prefix_used, b, Fb, depth + 1)
                prefix_used.discard(b)
            else:
                walk(prefix_used, b, Fb, depth + 1)

    for first in range(L):
        used = {first} if first < n_real else set()
        walk(used, first, disc.v_labels[:, first], 1)
    return out


# ---------------------------------------------------------------- public API


def _heat_term(u0, t, X, spec, grids) -> np.ndarray:
    return heat_solve_initial(u0, t, X, spec, grids.space)


def _terms(fld, u0, n_max, t, X, mode, spec, grids, drift, budget):
    n_max = check_order(n_max, "N_max")
    if mode not in ("star", "diamond"):
        raise ValueError(f"mode must be 'star' or 'diamond', got {mode!r}")
    X = check_points(X, fld.domain.d, "x")
    disc = _discretize(fld, u0, t, spec, grids, drift)
    _check_off_labels(X, disc.points)
    terms = np.zeros((len(X), n_max + 1))
    terms[:, 0] = _heat_term(u0, t, X, spec, grids)
    if n_max:
        if mode == "star":
            terms[:, 1:] = _star_terms(disc, X, n_max)
        else:
            terms[:, 1:] = _diamond_terms(disc, X, n_max, budget)
    return terms


def chaos_term_star(fld, u0, n, t, x, kernel_spec, grids, drift: DriftChannel = DRIFT_OFF) -> float:
    """Order-``n`` star term at one point (tuples with no adjacent repeat)."""
    n = check_order(n)
    X = check_points(x, fld.domain.d, "x")
    if len(X) != 1:
        raise ValueError("chaos_term_star evaluates a single point")
    return float(_terms(fld, u0, n, t, X, "star", kernel_spec, grids, drift, DEFAULT_TUPLE_BUDGET)[0, n])


def chaos_term_diamond(
    fld, u0, n, t, x, kernel_spec, grids, drift: DriftChannel = DRIFT_OFF, *, budget: int = DEFAULT_TUPLE_BUDGET
) -> float:
    """Order-``n`` diamond term at one point (pairwise-distinct atom tuples)."""
    n = check_order(n)
    X = check_points(x, fld.domain.d, "x")
    if len(X) != 1:
        raise ValueError("chaos_term_diamond evaluates a single point")
    return float(_terms(fld, u0, n, t, X, "diamond", kernel_spec, grids, drift, budget)[0, n])


def _series_beta(mode: str, params: StableParams, d: int, delta: float, q: float | None) -> float:
    rep = regime(params.p, d)
    if mode == "star":
        return rep.beta(delta)
    if q is None:
        # a moment exponent strictly between p and q_max when one exists
        q = 0.5 * (max(params.p, 1.0) + rep.q_max)
    return 1 - rep.alpha(q)


def _advise(mode: str, params: StableParams, d: int):
    rep = regime(params.p, d)
    if mode == "star" and not rep.thm1_ok:
        warnings.warn(f"star series with p={params.p}, d={d} is outside the proven existence range", stacklevel=3)
    if mode == "diamond" and params.p >= 1 and not rep.thm2_ok:
        warnings.warn(f"diamond series with p={params.p}, d={d} is outside the proven existence range", stacklevel=3)


def solve_series_many(
    fld: NoiseField,
    u0: Callable,
    N_max: int,
    t: float,
    X,
    mode: Literal["star", "diamond"] = "star",
    kernel_spec: KernelSpec | None = None,
    grids: Grids | None = None,
    drift: DriftChannel = DRIFT_OFF,
    *,
    delta: float = 1e-3,
    q: float | None = None,
    budget: int = DEFAULT_TUPLE_BUDGET,
) -> list[SeriesResult]:
    """Series results at several evaluation points sharing one discretization."""
    spec = kernel_spec or KernelSpec(fld.domain)
    grids = grids or Grids(SpaceGrid.midpoint(fld.domain, 256))
    _advise(mode, fld.params, fld.domain.d)
    X = check_points(X, fld.domain.d, "x")
    terms = _terms(fld, u0, N_max, t, X, mode, spec, grids, drift, budget)
    beta = _series_beta(mode, fld.params, fld.domain.d, delta, q)
    factor = tilt(1.0, t, fld.params) if mode == "diamond" else 1.0
    return [SeriesResult(mode, float(t), x, row, beta=beta, tilt_factor=factor) for x, row in zip(X, terms)]


def solve_series(fld, u0, N_max, t, x, mode="star", kernel_spec=None, grids=None, drift=DRIFT_OFF, **kwargs) -> SeriesResult:
    """Terms ``u_0..u_{N_max}`` at a single point ``x``."""
    X = check_points(x, fld.domain.d, "x")
    if len(X) != 1:
        raise ValueError("solve_series takes one point; use solve_series_many for several")
    return solve_series_many(fld, u0, N_max, t, X, mode, kernel_spec, grids, drift, **kwargs)[0]


def tilt(u_value: float, t: float, params: StableParams) -> float:
    """Multiply by ``exp(-c'_p K**-p t)``, removing the big-atom compensator."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return math.exp(-big_atom_rate(params) * t) * u_value


def untilt(w_value: float, t: float, params: StableParams) -> float:
    """Inverse of :func:`tilt`."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return math.exp(big_atom_rate(params) * t) * w_value


class ChaosSeriesSolver(BaseEstimator):
    """Estimator-style front end: ``fit`` on a noise field, ``predict`` at points.

    ``transform(X)`` returns the per-order terms ``(n_points, n_max + 1)`` and
    ``predict(X)`` their sum. Parameters follow the usual ``get_params`` /
    ``set_params`` protocol so configurations can be cloned and compared.
    """

    def __init__(
        self,
        mode="star",
        n_max=4,
        t=0.1,
        time_steps=64,
        kernel_mode="dirichlet",
        image_order=8,
        space_resolution=256,
        u0=None,
        drift=False,
        drift_resolution=8,
        delta=1e-3,
        tuple_budget=DEFAULT_TUPLE_BUDGET,
    ):
        self.mode = mode
        self.n_max = n_max
        self.t = t
        self.time_steps = time_steps
        self.kernel_mode = kernel_mode
        self.image_order = image_order
        self.space_resolution = space_resolution
        self.u0 = u0
        self.drift = drift
        self.drift_resolution = drift_resolution
        self.delta = delta
        self.tuple_budget = tuple_budget

    def fit(self, field: NoiseField, y=None):
        if not isinstance(field, NoiseField):
            raise TypeError("fit expects a NoiseField")
        dom = field.domain
        self.field_ = field
        self.kernel_spec_ = KernelSpec(dom, self.kernel_mode, self.image_order)
        self.grids_ = Grids(SpaceGrid.midpoint(dom, self.space_resolution), self.time_steps)
        if self.drift:
            self.drift_ = DriftChannel(True, field.compensator_density, SpaceGrid.midpoint(dom, self.drift_resolution))
        else:
            self.drift_ = DRIFT_OFF
        self.u0_ = self.u0 if self.u0 is not None else ConstantU0(1.0)
        self.n_features_in_ = dom.d
        return self

    def series(self, X) -> list[SeriesResult]:
        check_is_fitted(self, "field_")
        return solve_series_many(
            self.field_, self.u0_, self.n_max, self.t, X, self.mode, self.kernel_spec_,
            self.grids_, self.drift_, delta=self.delta, budget=self.tuple_budget,
        )

    def transform(self, X) -> np.ndarray:
        return np.stack([r.terms for r in self.series(X)])

    def predict(self, X) -> np.ndarray:
        return self.transform(X).sum(axis=1)
