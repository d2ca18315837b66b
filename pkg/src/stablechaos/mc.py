"""Replicated sampling experiments with reproducible per-replicate seeds."""

from __future__ import annotations

import json
import logging
import math
import shutil
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .bounds import detect_cluster_event
from .chaos import DEFAULT_TUPLE_BUDGET, DRIFT_OFF, DriftChannel
from .kernel import ConstantU0, KernelSpec, SpaceGrid
from .noise import BoxDomain, NoiseField, StableParams, field_to_csv, sample_field
from .solver import Grids, solve_series_many

__all__ = [
    "ExperimentConfig",
    "MomentEstimate",
    "mix_seed",
    "replicate_seeds",
    "estimate_moment",
    "estimate_moments",
    "cluster_probability",
    "run_experiment",
    "SEED_MIXER",
]

log = logging.getLogger(__name__)

SPEC_VERSION = "1.0"
SEED_MIXER = "splitmix64(master_seed + (index + 1) * 0x9E3779B97F4A7C15)"
_MASK = (1 << 64) - 1


def mix_seed(master_seed: int, index: int) -> int:
    """SplitMix64 finalizer applied to ``master_seed + (index + 1) * golden``."""
    z = (master_seed + (index + 1) * 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def replicate_seeds(master_seed: int, R: int) -> list[int]:
    return [mix_seed(master_seed, r) for r in range(R)]


@dataclass(frozen=True)
class ClusterSettings:
    deltas: tuple[float, ...] = ()
    n_range: tuple[int, ...] = ()
    m_range: tuple[int, ...] = ()
    k_range: tuple[int, ...] = ()


@dataclass(frozen=True)
class ExperimentConfig:
    params: StableParams
    domain: BoxDomain
    points: np.ndarray
    t: float = 0.1
    mode: str = "star"
    n_max: int = 4
    time_steps: int = 32
    kernel_mode: str = "dirichlet"
    image_order: int = 8
    space_resolution: int = 128
    u0: Callable = field(default_factory=ConstantU0)
    drift_enabled: bool = False
    drift_resolution: int = 8
    tuple_budget: int = DEFAULT_TUPLE_BUDGET
    q: float = 1.0
    replicates: int = 100
    master_seed: int = 0
    cluster: ClusterSettings = ClusterSettings()

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[1] != self.domain.d:
            raise ValueError("evaluation points do not match the domain dimension")
        object.__setattr__(self, "points", pts)
        if self.q < 1:
            raise ValueError(f"q must be >= 1, got {self.q}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.mode not in ("star", "diamond"):
            raise ValueError(f"mode must be 'star' or 'diamond', got {self.mode!r}")
        if self.drift_enabled and self.params.p <= 1:
            raise ValueError("drift_enabled requires p > 1")

    @property
    def kernel_spec(self) -> KernelSpec:
        return KernelSpec(self.domain, self.kernel_mode, self.image_order)

    @property
    def grids(self) -> Grids:
        return Grids(SpaceGrid.midpoint(self.domain, self.space_resolution), self.time_steps)

    def drift_for(self, fld: NoiseField) -> DriftChannel:
        if not self.drift_enabled:
            return DRIFT_OFF
        return DriftChannel(True, fld.compensator_density, SpaceGrid.midpoint(self.domain, self.drift_resolution))


@dataclass(frozen=True)
class MomentEstimate:
    n: int
    q: float
    mean: float
    std_error: float
    replicates: int
    point_index: int = 0


@dataclass
class _Replicate:
    index: int
    seed: int
    field: NoiseField | None
    terms: np.ndarray | None  # (P, n_max + 1)
    error: str | None = None


def _sample(config: ExperimentConfig, seed: int) -> NoiseField:
    return sample_field(config.params, config.domain, seed, compensate=config.drift_enabled)


def _run_replicate(config: ExperimentConfig, r: int, seed: int) -> _Replicate:
    """Sample and solve one replicate; a failed attempt is retried once with a fresh seed."""
    err = None
    for attempt, s in enumerate((seed, mix_seed(seed, 0))):
        fld = _sample(config, s)
        try:
            res = solve_series_many(
                fld, config.u0, config.n_max, config.t, config.points, config.mode,
                config.kernel_spec, config.grids, config.drift_for(fld), budget=config.tuple_budget,
            )
        except ValueError as exc:
            err = str(exc)
            log.debug("replicate %d attempt %d failed: %s", r, attempt, exc)
            continue
        return _Replicate(r, s, fld, np.stack([x.terms for x in res]))
    return _Replicate(r, seed, None, None, err)


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _replicates(config: ExperimentConfig, threads: int = 1) -> list[_Replicate]:
    seeds = replicate_seeds(config.master_seed, config.replicates)
    return _map(lambda r: _run_replicate(config, r, seeds[r]), range(config.replicates), threads)


def _moments_from(reps: list[_Replicate], orders, q, n_points) -> list[MomentEstimate]:
    ok = [r.terms for r in reps if r.terms is not None]
    out = []
    for p in range(n_points):
        for n in orders:
            vals = np.array([abs(t[p, n]) ** q for t in ok])
            R = len(vals)
            mean = float(np.mean(vals)) if R else math.nan
            # constant samples (e.g. the deterministic order 0) get an exact zero
            spread = R > 1 and np.ptp(vals) > 0
            se = float(np.std(vals, ddof=1) / math.sqrt(R)) if spread else 0.0
            out.append(MomentEstimate(int(n), float(q), mean, se, R, p))
    return out


def estimate_moments(config: ExperimentConfig, orders: Sequence[int] | None = None, q: float | None = None, *, threads: int = 1):
    """Moment estimates ``E|u_n(t, x)|**q`` for every order and evaluation point."""
    orders = list(range(config.n_max + 1)) if orders is None else list(orders)
    if max(orders, default=0) > config.n_max:
        raise ValueError("requested order exceeds n_max")
    q = config.q if q is None else q
    if q < 1:
        raise ValueError("q must be >= 1")
    reps = _replicates(config, threads)
    return _moments_from(reps, orders, q, len(config.points))


def estimate_moment(config: ExperimentConfig, n: int, q: float | None = None, *, point: int = 0, threads: int = 1) -> MomentEstimate:
    ests = estimate_moments(config, [n], q, threads=threads)
    return next(e for e in ests if e.point_index == point)


def cluster_probability(
    config: ExperimentConfig,
    delta: float,
    ranges: tuple[Sequence[int], Sequence[int], Sequence[int]],
    *,
    threads: int = 1,
) -> tuple[float, float]:
    """Fraction of sampled fields showing a dense cluster, with its binomial standard error."""
    n_range, m_range, k_range = (list(r) for r in ranges)
    if not (n_range and m_range and k_range):
        return 0.0, 0.0
    seeds = replicate_seeds(config.master_seed, config.replicates)
    hits = _map(
        lambda s: detect_cluster_event(_sample(config, s), delta, n_range, m_range, k_range),
        seeds,
        threads,
    )
    R = len(hits)
    phat = sum(hits) / R
    return phat, math.sqrt(phat * (1 - phat) / R)


# ---------------------------------------------------------------- file output


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _series_csv(config: ExperimentConfig, reps: list[_Replicate]) -> str:
    d = config.domain.d
    lines = [",".join(["replicate", "mode", "n", "t"] + [f"x_{k + 1}" for k in range(d)] + ["term_value", "partial_sum"])]
    for rep in reps:
        if rep.terms is None:
            continue
        empty = len(rep.field) == 0 and not config.drift_enabled
        for p, x in enumerate(config.points):
            sums = np.cumsum(rep.terms[p])
            for n in range(config.n_max + 1):
                if n > 0 and empty:
                    break  # structurally zero orders
                row = [str(rep.index), config.mode, str(n), _fmt(config.t)] + [_fmt(c) for c in x]
                lines.append(",".join(row + [_fmt(rep.terms[p, n]), _fmt(sums[n])]))
    return "\n".join(lines) + "\n"


def _fields_csv(config: ExperimentConfig, reps: list[_Replicate]) -> str:
    d = config.domain.d
    header = ",".join(["replicate", "atom_index"] + [f"x_{k + 1}" for k in range(d)] + ["mass", "type_index"])
    body = []
    for rep in reps:
        if rep.field is not None:
            body.extend(field_to_csv(rep.field, {"replicate": rep.index}).splitlines()[1:])
    return "\n".join([header] + body) + "\n"


def _moments_csv(ests: list[MomentEstimate]) -> str:
    lines = ["point_index,n,q,mean,std_error,replicates"]
    for e in ests:
        lines.append(f"{e.point_index},{e.n},{_fmt(e.q)},{_fmt(e.mean)},{_fmt(e.std_error)},{e.replicates}")
    return "\n".join(lines) + "\n"


def run_experiment(config: ExperimentConfig, out_dir, *, threads: int = 1, config_echo: dict | None = None, verify_csv: str | None = None) -> dict[str, Path]:
    """Run all replicates and write the CSV set plus ``manifest.json`` into ``out_dir``.

    Files are staged in a temporary directory and moved into place only when
    every write succeeded, so a failure leaves no partial outputs.
    """
    from .verify import run_checks, rows_to_csv

    out_dir = Path(out_dir)
    reps = _replicates(config, threads)
    ests = _moments_from(reps, range(config.n_max + 1), config.q, len(config.points))
    files = {
        "fields.csv": _fields_csv(config, reps),
        "series.csv": _series_csv(config, reps),
        "moments.csv": _moments_csv(ests),
        "verify.csv": verify_csv if verify_csv is not None else rows_to_csv(run_checks()),
    }
    cl = config.cluster
    if cl.deltas:
        lines = ["delta,estimate,std_error,replicates"]
        for delta in cl.deltas:
            est, se = cluster_probability(config, delta, (cl.n_range, cl.m_range, cl.k_range), threads=threads)
            lines.append(f"{_fmt(delta)},{_fmt(est)},{_fmt(se)},{config.replicates}")
        files["cluster.csv"] = "\n".join(lines) + "\n"
    failures = [r.index for r in reps if r.terms is None]
    manifest = {
        "spec_version": SPEC_VERSION,
        "config": config_echo,
        "master_seed": config.master_seed,
        "seed_mixer": SEED_MIXER,
        "replicate_seeds": [r.seed for r in reps],
        "row_counts": {name: text.count("\n") - 1 for name, text in files.items()},
        "failure_count": len(failures),
        "failed_replicates": failures,
    }
    files["manifest.json"] = json.dumps(manifest, indent=2, sort_keys=True) + "\n"

    out_dir.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=out_dir))
    written: list[Path] = []
    try:
        for name, text in files.items():
            (staging / name).write_text(text)
        for name in files:
            target = out_dir / name
            shutil.move(str(staging / name), target)
            written.append(target)
    except OSError:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    return {name: out_dir / name for name in files}
