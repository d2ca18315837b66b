"""Truncated one-sided p-stable noise realized as a cloud of Poisson atoms.

Atoms ``(x_i, y_i)`` form a Poisson random measure on ``D x (eps, K]`` with
intensity ``dx * c_p * y**-(p+1) dy``. The noise acts on sets as
``L(A) = sum_{x_i in A} y_i``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ._validation import check_positive

__all__ = [
    "StableParams",
    "BoxDomain",
    "Atom",
    "NoiseField",
    "total_intensity",
    "sample_field",
    "classify_type",
    "truncate_large",
    "compensator_density",
    "big_atom_rate",
    "discarded_mass",
    "scale_atom",
    "field_to_csv",
    "field_from_csv",
]


@dataclass(frozen=True)
class StableParams:
    """Stability index ``p``, Levy constant ``c_p`` and the mass band ``(eps, K]``."""

    p: float
    c_p: float = 1.0
    eps: float = 0.25
    K: float = 4.0

    def __post_init__(self):
        if not (0.0 < self.p < 2.0):
            raise ValueError(f"p must lie in (0, 2), got {self.p}")
        if self.p == 1.0:
            raise ValueError(
                "p = 1 is excluded: the compensation at p = 1 needs a separate "
                "large-jump truncation that is not implemented"
            )
        check_positive(self.c_p, "c_p")
        check_positive(self.eps, "eps")
        check_positive(self.K, "K")
        if self.eps > self.K:
            raise ValueError(f"eps must not exceed K (eps={self.eps}, K={self.K})")

    @property
    def N(self) -> int:
        """Exponent with ``K = 2**N``; raises if ``K`` is not a power of two."""
        N = round(math.log2(self.K))
        if 2.0**N != self.K:
            raise ValueError(f"K={self.K} is not a power of two")
        return N


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box ``prod_k [lower_k, upper_k]``."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) == 0 or len(lo) != len(hi):
            raise ValueError("lower and upper must be nonempty and of equal length")
        if any(not (a < b) for a, b in zip(lo, hi)):
            raise ValueError(f"need lower < upper on every axis, got {lo}, {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, d: int = 1) -> "BoxDomain":
        return cls((0.0,) * d, (1.0,) * d)

    @property
    def d(self) -> int:
        return len(self.lower)

    @property
    def lengths(self) -> np.ndarray:
        return np.asarray(self.upper) - np.asarray(self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def contains(self, X, closed: bool = True) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        if closed:
            return np.all((X >= lo) & (X <= hi), axis=-1)
        return np.all((X > lo) & (X < hi), axis=-1)


@dataclass(frozen=True)
class Atom:
    location: tuple[float, ...]
    mass: float
    type_index: int


@dataclass(frozen=True)
class NoiseField:
    """A realized truncated noise: atoms plus an optional compensating drift.

    Atoms are stored by decreasing mass (ties broken by first coordinate);
    ``locations`` and ``masses`` are read-only array views of the same data.
    """

    params: StableParams
    domain: BoxDomain
    atoms: tuple[Atom, ...] = ()
    compensator_density: float = 0.0
    seed: int | None = None
    locations: np.ndarray = field(init=False, repr=False, compare=False)
    masses: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        atoms = tuple(self.atoms)
        object.__setattr__(self, "atoms", atoms)
        d = self.domain.d
        locs = np.array([a.location for a in atoms], dtype=float).reshape(len(atoms), d)
        masses = np.array([a.mass for a in atoms], dtype=float)
        for a in atoms:
            if not (self.params.eps < a.mass <= self.params.K):
                raise ValueError(f"atom mass {a.mass} outside (eps, K]")
            if classify_type(a.mass) != a.type_index:
                raise ValueError(f"atom type_index {a.type_index} inconsistent with mass {a.mass}")
        if len(atoms) and not np.all(self.domain.contains(locs, closed=False)):
            raise ValueError("atom locations must lie strictly inside the domain")
        if len(np.unique(locs[:, 0])) != len(atoms):
            raise ValueError("atom first coordinates must be pairwise distinct")
        if self.compensator_density < 0:
            raise ValueError("compensator_density must be nonnegative")
        locs.setflags(write=False)
        masses.setflags(write=False)
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "masses", masses)

    def __len__(self) -> int:
        return len(self.atoms)

    @property
    def type_indices(self) -> np.ndarray:
        return np.array([a.type_index for a in self.atoms], dtype=int)

    @classmethod
    def from_arrays(cls, params, domain, locations, masses, *, sort=True, **kwargs):
        """Build a field from raw arrays, computing type indices."""
        locations = np.asarray(locations, dtype=float).reshape(-1, domain.d)
        masses = np.asarray(masses, dtype=float).ravel()
        if len(locations) != len(masses):
            raise ValueError("locations and masses differ in length")
        if sort:
            order = np.lexsort((locations[:, 0], -masses)) if len(masses) else np.arange(0)
            locations, masses = locations[order], masses[order]
        atoms = tuple(
            Atom(tuple(float(c) for c in x), float(y), classify_type(float(y)))
            for x, y in zip(locations, masses)
        )
        return cls(params, domain, atoms, **kwargs)


def classify_type(mass: float) -> int:
    """Dyadic type ``n`` with ``2**-(n+1) < mass <= 2**-n``."""
    if not mass > 0:
        raise ValueError(f"mass must be positive, got {mass}")
    m, e = math.frexp(mass)  # mass = m * 2**e, 0.5 <= m < 1
    if m == 0.5:
        return 1 - e
    return -e


def total_intensity(params: StableParams, domain: BoxDomain) -> float:
    """Expected number of atoms with mass in ``(eps, K]`` inside the domain."""
    p = params.p
    return domain.volume * params.c_p * (params.eps**-p - params.K**-p) / p


def compensator_density(params: StableParams) -> float:
    """Mean atom mass per unit volume, ``int_eps^K y nu(dy)``; requires ``p > 1``."""
    p = params.p
    if p <= 1:
        raise ValueError(f"small-atom compensation requires p > 1, got p={p}")
    return params.c_p * (params.eps ** (1 - p) - params.K ** (1 - p)) / (p - 1)


def big_atom_rate(params: StableParams) -> float:
    """Rate ``c'_p K**-p`` of atoms above ``K``, with ``c'_p = c_p / p``."""
    return params.c_p / params.p * params.K**-params.p


def discarded_mass(params: StableParams, domain: BoxDomain) -> float:
    """Expected total mass of the atoms below ``eps`` dropped by the cutoff (p < 1).

    Returns ``inf`` for ``p > 1``, where the small atoms have infinite mass and
    must be compensated instead.
    """
    p = params.p
    if p > 1:
        return math.inf
    return domain.volume * params.c_p * params.eps ** (1 - p) / (1 - p)


def _inverse_cdf_masses(params: StableParams, u: np.ndarray) -> np.ndarray:
    p = params.p
    a, b = params.eps**-p, params.K**-p
    y = (a - u * (a - b)) ** (-1.0 / p)
    # u -> 1 reaches K up to rounding
    return np.clip(y, np.nextafter(params.eps, np.inf), params.K)


def sample_field(
    params: StableParams,
    domain: BoxDomain,
    seed: int,
    *,
    compensate: bool = False,
) -> NoiseField:
    """Draw one realization of the truncated noise.

    The atom count is Poisson with mean :func:`total_intensity`; locations are
    uniform on the box and masses follow the truncated power law by inverse
    CDF. Collisions of first coordinates are resampled. With
    ``compensate=True`` (``p > 1`` only) the field carries the drift density
    from :func:`compensator_density`.
    """
    if compensate and params.p <= 1:
        raise ValueError("compensation is only defined for p > 1")
    rng = np.random.default_rng(seed)
    lo, span = np.asarray(domain.lower), domain.lengths
    count = int(rng.poisson(total_intensity(params, domain)))
    locs = lo + span * rng.random((count, domain.d))
    # open box: redraw the (measure zero) boundary hits
    while count and not np.all(domain.contains(locs, closed=False)):
        bad = ~domain.contains(locs, closed=False)
        locs[bad] = lo + span * rng.random((int(bad.sum()), domain.d))
    while count and len(np.unique(locs[:, 0])) != count:
        _, first = np.unique(locs[:, 0], return_index=True)
        dup = np.setdiff1d(np.arange(count), first)
        locs[dup] = lo + span * rng.random((len(dup), domain.d))
    masses = _inverse_cdf_masses(params, rng.random(count))
    rho = compensator_density(params) if compensate else 0.0
    return NoiseField.from_arrays(
        params, domain, locs, masses, compensator_density=rho, seed=int(seed)
    )


def truncate_large(fld: NoiseField, K_new: float) -> NoiseField:
    """Delete every atom heavier than ``K_new``."""
    if not K_new > fld.params.eps:
        raise ValueError(f"K_new must exceed eps={fld.params.eps}")
    kept = tuple(a for a in fld.atoms if a.mass <= K_new)
    if len(kept) == len(fld.atoms):
        return fld
    return replace(fld, atoms=kept)


def scale_atom(fld: NoiseField, i: int, z: float) -> NoiseField:
    """Multiply the mass of atom ``i`` by ``z`` in ``[1, 2)``.

    Atom positions in the stored order are preserved so that indices stay
    meaningful across repeated scalings. The scaled mass must stay in
    ``(eps, K]``.
    """
    if not (0 <= i < len(fld.atoms)):
        raise IndexError(f"atom index {i} out of range for {len(fld.atoms)} atoms")
    if not (1.0 <= z < 2.0):
        raise ValueError(f"z must lie in [1, 2), got {z}")
    old = fld.atoms[i]
    mass = old.mass * z
    if mass > fld.params.K:
        raise ValueError(f"scaled mass {mass} exceeds K={fld.params.K}")
    atoms = list(fld.atoms)
    atoms[i] = Atom(old.location, mass, classify_type(mass))
    return replace(fld, atoms=tuple(atoms))


def with_masses(fld: NoiseField, masses: Sequence[float]) -> NoiseField:
    """Same locations, new masses (stored order kept)."""
    if len(masses) != len(fld.atoms):
        raise ValueError("masses must match the atom count")
    atoms = tuple(
        Atom(a.location, float(y), classify_type(float(y))) for a, y in zip(fld.atoms, masses)
    )
    return replace(fld, atoms=atoms)


def field_to_csv(fld: NoiseField, extra: dict | None = None) -> str:
    """Serialize atoms as CSV; ``extra`` prepends constant columns (e.g. replicate)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    extra = extra or {}
    d = fld.domain.d
    header = list(extra) + ["atom_index"] + [f"x_{k + 1}" for k in range(d)]
    w.writerow(header + ["mass", "type_index"])
    for idx, a in enumerate(fld.atoms):
        row = [str(v) for v in extra.values()] + [str(idx)]
        row += [format(c, ".17g") for c in a.location]
        w.writerow(row + [format(a.mass, ".17g"), str(a.type_index)])
    return buf.getvalue()


def field_from_csv(text: str, params: StableParams, domain: BoxDomain, **kwargs) -> NoiseField:
    rows = list(csv.DictReader(io.StringIO(text)))
    d = domain.d
    locs = [[float(r[f"x_{k + 1}"]) for k in range(d)] for r in rows]
    masses = [float(r["mass"]) for r in rows]
    fld = NoiseField.from_arrays(params, domain, locs, masses, sort=False, **kwargs)
    stored = [int(r["type_index"]) for r in rows]
    if stored != list(fld.type_indices):
        raise ValueError("type_index column inconsistent with masses")
    return fld
