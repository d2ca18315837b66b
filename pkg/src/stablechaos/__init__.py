"""Chaos-series solutions of the heat equation driven by truncated one-sided stable noise."""

from .bounds import RegimeReport, hu_closed, hu_recursive, regime
from .chaos import BudgetExceededError, DriftChannel, TupleConstraint, eval_In, eval_Jn
from .kernel import ConstantU0, IndicatorU0, KernelSpec, SineU0, SpaceGrid, dirichlet_kernel, free_kernel, kernel
from .mc import ExperimentConfig, MomentEstimate, cluster_probability, estimate_moment, estimate_moments, run_experiment
from .noise import BoxDomain, NoiseField, StableParams, sample_field, total_intensity
from .solver import ChaosSeriesSolver, Grids, SeriesResult, TimeGrid, solve_series, solve_series_many

__all__ = [
    "BoxDomain",
    "BudgetExceededError",
    "ChaosSeriesSolver",
    "ConstantU0",
    "DriftChannel",
    "ExperimentConfig",
    "Grids",
    "IndicatorU0",
    "KernelSpec",
    "MomentEstimate",
    "NoiseField",
    "RegimeReport",
    "SeriesResult",
    "SineU0",
    "SpaceGrid",
    "StableParams",
    "TimeGrid",
    "TupleConstraint",
    "cluster_probability",
    "dirichlet_kernel",
    "estimate_moment",
    "estimate_moments",
    "eval_In",
    "eval_Jn",
    "free_kernel",
    "hu_closed",
    "hu_recursive",
    "kernel",
    "regime",
    "run_experiment",
    "sample_field",
    "solve_series",
    "solve_series_many",
    "total_intensity",
]
