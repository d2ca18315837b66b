"""Batch checks of the closed-form estimates, reported as ``check_name,arguments,lhs,rhs,pass`` rows."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from . import bounds

__all__ = ["CheckRow", "CHECKS", "run_checks", "rows_to_csv"]


@dataclass(frozen=True)
class CheckRow:
    check_name: str
    arguments: str
    lhs: float
    rhs: float
    passed: bool


def _args(**kw) -> str:
    return ";".join(f"{k}={v}" for k, v in kw.items())


def _close(lhs, rhs, rtol) -> bool:
    return abs(lhs - rhs) <= rtol * abs(rhs)


# Each check yields rows; ``rtol`` only affects identities, inequalities are exact.


def _hu_identity(rtol) -> Iterator[CheckRow]:
    for beta in (0.1, 0.25, 0.5, 0.75):
        for n in range(9):
            for t in (0.5, 1.0, 2.0):
                lhs, rhs = bounds.hu_recursive(n, beta, t), bounds.hu_closed(n, beta, t)
                yield CheckRow("hu_identity", _args(n=n, beta=beta, t=t), lhs, rhs, _close(lhs, rhs, rtol))


def _simplex_volume(rtol) -> Iterator[CheckRow]:
    for n in range(9):
        for t in (0.5, 1.0, 2.0):
            lhs, rhs = bounds.hu_recursive(n, 0.0, t), t**n / math.factorial(n)
            yield CheckRow("simplex_volume", _args(n=n, t=t), lhs, rhs, _close(lhs, rhs, rtol))


def _poisson_tail(rtol) -> Iterator[CheckRow]:
    for lam in np.round(np.linspace(0.1, 10, 12), 10):
        for n0 in range(0, 21, 2):
            exact, b1, b2 = bounds.poisson_tail_bound(float(lam), n0)
            a = _args(lam=float(lam), n0=n0)
            yield CheckRow("poisson_tail_factorial", a, exact, b1, exact <= b1)
            yield CheckRow("poisson_tail_stirling", a, b1, b2, b1 <= b2)


def _gamma_lower(rtol) -> Iterator[CheckRow]:
    for x in np.round(np.arange(0.25, 50.0001, 0.25), 10):
        g, lb = bounds.gamma_lower(float(x))
        yield CheckRow("gamma_lower", _args(x=float(x)), lb, g, lb <= g)


def _gaussian_q(rtol) -> Iterator[CheckRow]:
    for d in (1, 2, 3):
        for q in (1.5, 2.0):
            for r in (0.1, 1.0, 10.0):
                lhs = bounds.gaussian_q_integral_radial(r, q, d)
                rhs = bounds.gaussian_q_integral(r, q, d)
                yield CheckRow("gaussian_q_integral", _args(r=r, q=q, d=d), lhs, rhs, _close(lhs, rhs, rtol))


def _cluster_radius(rtol) -> Iterator[CheckRow]:
    rng = np.random.default_rng(7)
    for _ in range(30):
        n, m = (int(v) for v in rng.integers(-2, 7, size=2))
        k = int(rng.integers(0, 5))
        delta = float(rng.uniform(0.01, 0.5))
        p = float(rng.uniform(0.1, 1.9))
        d = int(rng.integers(1, 4))
        lhs, rhs = bounds.cluster_radius_identity(n, m, k, delta, p, d)
        # logs of both sides: an absolute log gap is the relative gap of the values
        ok = abs(lhs - rhs) <= rtol
        yield CheckRow("cluster_radius_identity", _args(n=n, m=m, k=k, delta=round(delta, 6), p=round(p, 6), d=d), lhs, rhs, ok)


def _power_sum(rtol) -> Iterator[CheckRow]:
    rng = np.random.default_rng(11)
    for i in range(20):
        a = rng.exponential(size=int(rng.integers(1, 51))) * rng.uniform(0.01, 10)
        for q in (1.5, 2.0):
            lhs, rhs = bounds.power_sum_check(a, q)
            yield CheckRow("power_sum", _args(sample=i, length=len(a), q=q), lhs, rhs, lhs <= rhs)


def piecewise_polynomial(rng: np.random.Generator, n: int, degree: int = 3) -> Callable:
    """Random function of ``n`` unit-interval variables, polynomial on each side of a break in ``x_1``."""
    cut = rng.uniform(0.2, 0.8)
    left = rng.normal(size=(n, degree + 1))
    right = rng.normal(size=(n, degree + 1))

    def f(*xs):
        x1 = xs[0][..., 0]
        coef = np.where((x1 < cut)[..., None, None], left, right)
        out = 1.0
        for j, x in enumerate(xs):
            out = out * np.polynomial.polynomial.polyval(x[..., 0], coef[..., j, :].T, tensor=False)
        return out

    return f


def _symmetrization(rtol) -> Iterator[CheckRow]:
    rng = np.random.default_rng(13)
    for i in range(20):
        n = 2 + i % 2
        f = piecewise_polynomial(rng, n)
        for q in (1.2, 2.0):
            sym_norm, norm = bounds.symmetrization_norms(f, n, q, nodes_1d=16)
            yield CheckRow("symmetrization", _args(sample=i, n=n, q=q), sym_norm, norm, sym_norm <= norm * (1 + 1e-12))


@dataclass(frozen=True)
class _Check:
    run: Callable[[float], Iterator[CheckRow]]
    rtol: float


CHECKS: dict[str, _Check] = {
    "hu_identity": _Check(_hu_identity, 1e-6),
    "simplex_volume": _Check(_simplex_volume, 1e-12),
    "poisson_tail": _Check(_poisson_tail, 0.0),
    "gamma_lower": _Check(_gamma_lower, 0.0),
    "gaussian_q_integral": _Check(_gaussian_q, 1e-8),
    "cluster_radius_identity": _Check(_cluster_radius, 1e-12),
    "power_sum": _Check(_power_sum, 0.0),
    "symmetrization": _Check(_symmetrization, 0.0),
}


def run_checks(names=None, rtol: float | None = None) -> list[CheckRow]:
    """Run the named checks (all by default); ``rtol`` overrides every identity tolerance."""
    names = list(CHECKS) if not names else list(names)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown check(s) {unknown}; choose from {sorted(CHECKS)}")
    rows: list[CheckRow] = []
    for name in names:
        chk = CHECKS[name]
        rows.extend(chk.run(chk.rtol if rtol is None else rtol))
    return rows


def rows_to_csv(rows: list[CheckRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["check_name", "arguments", "lhs", "rhs", "pass"])
    for r in rows:
        w.writerow([r.check_name, r.arguments, format(r.lhs, ".17g"), format(r.rhs, ".17g"), "true" if r.passed else "false"])
    return buf.getvalue()
