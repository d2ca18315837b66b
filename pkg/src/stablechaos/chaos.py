"""Multiple stochastic integrals of explicit functions against an atomic noise.

Against a purely atomic measure both families reduce to finite sums over
index tuples of atoms:

* ``J_n(f) = sum_{i_j != i_{j+1}} y_{i_1} ... y_{i_n} f(x_{i_1}, ..., x_{i_n})``
  (only adjacent repeats removed);
* ``I_n(f) = n! int_{x_1^(1) < ... < x_1^(n)} f dL...dL``, which for symmetric
  ``f`` and atoms with distinct first coordinates equals the same sum over
  pairwise-distinct tuples.

With a drift channel, grid nodes enter as pseudo-atoms carrying the signed
weights ``-rho * w_q`` of the compensator. Pseudo-atoms are exempt from the
pairwise constraint but, like every label, never repeat adjacently.

Functions passed to the evaluators are vectorized: ``f(X1, ..., Xn)`` gets
``n`` arrays of shape ``(T, d)`` and returns ``T`` values.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterator, Literal

import numpy as np

from ._validation import check_order
from .kernel import SpaceGrid
from .noise import NoiseField

__all__ = [
    "TupleConstraint",
    "DriftChannel",
    "BudgetExceededError",
    "eval_Jn",
    "eval_In",
    "eval_In_ordered",
    "symmetrize",
    "labels_for",
    "iter_tuples",
    "count_tuples",
]

DEFAULT_TUPLE_BUDGET = 10**8


class BudgetExceededError(RuntimeError):
    """The number of index tuples exceeds the configured enumeration budget."""


@dataclass(frozen=True)
class TupleConstraint:
    kind: Literal["adjacent_distinct", "pairwise_distinct"]

    def __post_init__(self):
        if self.kind not in ("adjacent_distinct", "pairwise_distinct"):
            raise ValueError(f"unknown tuple constraint {self.kind!r}")


ADJACENT = TupleConstraint("adjacent_distinct")
PAIRWISE = TupleConstraint("pairwise_distinct")


@dataclass(frozen=True)
class DriftChannel:
    """Compensator of density ``rho`` discretized on ``grid``."""

    enabled: bool = False
    density: float = 0.0
    grid: SpaceGrid | None = None

    def __post_init__(self):
        if self.density < 0:
            raise ValueError("drift density must be nonnegative")
        if self.enabled and self.grid is None:
            raise ValueError("an enabled drift channel needs a grid")

    @classmethod
    def for_field(cls, fld: NoiseField, grid: SpaceGrid) -> "DriftChannel":
        return cls(enabled=fld.compensator_density > 0, density=fld.compensator_density, grid=grid)

    @property
    def weights(self) -> np.ndarray:
        if not self.enabled:
            return np.zeros(0)
        return -self.density * self.grid.weights

    @property
    def nodes(self) -> np.ndarray:
        if not self.enabled:
            return np.zeros((0, 0))
        return self.grid.nodes


DRIFT_OFF = DriftChannel()


def labels_for(fld: NoiseField, drift: DriftChannel = DRIFT_OFF):
    """Return ``(points, signed_masses, n_real)`` for atoms followed by pseudo-atoms."""
    if drift.enabled:
        if fld.params.p <= 1:
            raise ValueError("the drift channel is only defined for p > 1")
        pts = np.concatenate([fld.locations, drift.nodes], axis=0)
        w = np.concatenate([fld.masses, drift.weights])
    else:
        pts, w = fld.locations, fld.masses
    return pts, w, len(fld)


def count_tuples(n_labels: int, n: int, n_real: int, constraint: TupleConstraint) -> int:
    """Upper bound on the admitted tuples (exact without pseudo-atoms)."""
    if n == 0:
        return 1
    if constraint.kind == "pairwise_distinct" and n_labels == n_real:
        return math.perm(n_real, n)
    return n_labels * max(n_labels - 1, 0) ** (n - 1)


def iter_tuples(
    n_labels: int,
    n: int,
    n_real: int,
    constraint: TupleConstraint,
    *,
    budget: int = DEFAULT_TUPLE_BUDGET,
) -> Iterator[np.ndarray]:
    """Yield admitted index tuples as ``(T, n)`` arrays, one block per first index.

    Labels ``>= n_real`` are pseudo-atoms, exempt from the pairwise rule.
    Blocks come in increasing first index, each in lexicographic order.
    """
    check_order(n)
    total = count_tuples(n_labels, n, n_real, constraint)
    if total > budget:
        raise BudgetExceededError(
            f"{total} index tuples of order {n} over {n_labels} labels exceed the "
            f"tuple budget {budget}"
        )
    if n == 0 or n_labels == 0:
        return
    labels = np.arange(n_labels)
    pairwise = constraint.kind == "pairwise_distinct"
    for first in range(n_labels):
        block = np.array([[first]])
        for _ in range(n - 1):
            ext = np.concatenate(
                [np.repeat(block, n_labels, axis=0), np.tile(labels, len(block))[:, None]],
                axis=1,
            )
            new = ext[:, -1]
            ok = new != ext[:, -2]
            if pairwise:
                real_new = new < n_real
                clash = np.any(ext[:, :-1] == new[:, None], axis=1)
                ok &= ~(real_new & clash)
            block = ext[ok]
            if not len(block):
                break
        if len(block) and block.shape[1] == n:
            yield block


def _eval_tuples(fld, f, n, drift, constraint, budget):
    n = check_order(n)
    if n == 0:
        return float(f())
    pts, w, n_real = labels_for(fld, drift)
    total = 0.0
    for block in iter_tuples(len(w), n, n_real, constraint, budget=budget):
        vals = np.asarray(f(*[pts[block[:, j]] for j in range(n)]), dtype=float)
        total += float(np.sum(np.prod(w[block], axis=1) * vals))
    return total


def eval_Jn(
    fld: NoiseField,
    f: Callable,
    n: int,
    drift: DriftChannel = DRIFT_OFF,
    *,
    budget: int = DEFAULT_TUPLE_BUDGET,
) -> float:
    """Order-``n`` integral over tuples with no adjacent index equal."""
    return _eval_tuples(fld, f, n, drift, ADJACENT, budget)


def eval_In(
    fld: NoiseField,
    f: Callable,
    n: int,
    drift: DriftChannel = DRIFT_OFF,
    *,
    budget: int = DEFAULT_TUPLE_BUDGET,
) -> float:
    """Order-``n`` integral over pairwise-distinct atom tuples; ``f`` must be symmetric."""
    x1 = fld.locations[:, 0]
    if len(np.unique(x1)) != len(x1):
        raise ValueError("atoms must have pairwise distinct first coordinates")
    return _eval_tuples(fld, f, n, drift, PAIRWISE, budget)


def eval_In_ordered(fld: NoiseField, f: Callable, n: int) -> float:
    """Slow reference for ``I_n``: ``n!`` times ``sym f`` over first-coordinate-ordered atoms.

    Drift is not supported here; this literal form is kept to cross-check
    :func:`eval_In`.
    """
    n = check_order(n)
    if n == 0:
        return float(f())
    order = np.argsort(fld.locations[:, 0], kind="stable")
    pts, w = fld.locations[order], fld.masses[order]
    sym = symmetrize(f, n)
    total = 0.0
    for combo in itertools.combinations(range(len(w)), n):
        idx = np.asarray(combo)
        val = sym(*[pts[idx[j]][None, :] for j in range(n)])
        total += float(np.prod(w[idx]) * np.asarray(val).ravel()[0])
    return math.factorial(n) * total


def symmetrize(f: Callable, n: int) -> Callable:
    """Average ``f`` over all ``n!`` permutations of its arguments."""
    if n < 1:
        raise ValueError("symmetrize needs n >= 1")
    if n > 8:
        warnings.warn(f"symmetrizing over {math.factorial(n)} permutations", RuntimeWarning, stacklevel=2)
    perms = list(itertools.permutations(range(n)))

    def sym(*args):
        acc = 0.0
        for perm in perms:
            acc = acc + np.asarray(f(*[args[k] for k in perm]), dtype=float)
        return acc / len(perms)

    return sym
