"""Command-line front end: ``stablechaos {sample,kernel-eval,solve,verify,mc}``.

Experiments are described by a JSON document; flags only pick the
subcommand, the config file, the output directory and the worker count.
Exit codes: 0 success, 1 runtime or check failure, 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import jsonschema
import numpy as np

from .chaos import DRIFT_OFF, DriftChannel
from .kernel import ConstantU0, IndicatorU0, KernelSpec, SineU0, SpaceGrid, kernel
from .mc import ClusterSettings, ExperimentConfig, run_experiment
from .noise import BoxDomain, StableParams, field_to_csv, sample_field
from .solver import Grids, solve_series_many
from .verify import CHECKS, rows_to_csv, run_checks

log = logging.getLogger("stablechaos")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int_pos = {"type": "integer", "minimum": 1}
_point = {"type": "array", "items": _num, "minItems": 1}
_int_pair = {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


CONFIG_SCHEMA = _obj(
    {
        "noise": _obj(
            {
                "p": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 2},
                "c_p": _pos,
                "eps": _pos,
                "K": _pos,
                "seed": {"type": "integer", "minimum": 0},
            },
            required=["p"],
        ),
        "domain": _obj(
            {
                "d": _int_pos,
                "bounds": {"type": "array", "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}, "minItems": 1},
            },
            required=["d"],
        ),
        "kernel": _obj(
            {
                "mode": {"enum": ["free", "dirichlet"]},
                "image_order": _int_pos,
                "space_grid_resolution": _int_pos,
            }
        ),
        "solver": _obj(
            {
                "mode": {"enum": ["star", "diamond"]},
                "N_max": {"type": "integer", "minimum": 0},
                "t": _pos,
                "time_steps": _int_pos,
                "points": {"type": "array", "items": _point, "minItems": 1},
                "drift_enabled": {"type": "boolean"},
                "drift_resolution": _int_pos,
                "u0": {
                    "oneOf": [
                        {"type": "string", "pattern": r"^(sine|constant(:[-+0-9.eE]+)?)$"},
                        _obj({"indicator": {"type": "array", "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}, "minItems": 1}}, ["indicator"]),
                    ]
                },
                "tuple_budget": _int_pos,
            }
        ),
        "mc": _obj(
            {
                "q": {"type": "number", "minimum": 1, "maximum": 2},
                "replicates": _int_pos,
                "master_seed": {"type": "integer", "minimum": 0},
                "cluster": _obj(
                    {
                        "deltas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}},
                        "n_range": _int_pair,
                        "m_range": _int_pair,
                        "k_max": {"type": "integer", "minimum": 0},
                    }
                ),
            }
        ),
        "kernel_eval": _obj(
            {
                "times": {"type": "array", "items": _pos, "minItems": 1},
                "pairs": {"type": "array", "items": {"type": "array", "items": _point, "minItems": 2, "maxItems": 2}, "minItems": 1},
            },
            required=["times", "pairs"],
        ),
        "output": _obj({"directory": {"type": "string"}}),
    },
    required=["noise", "domain"],
)


class ConfigError(ValueError):
    """Raised for any configuration problem; maps to exit code 2."""


def _fmt(v) -> str:
    return format(float(v), ".17g")


# ---------------------------------------------------------------- config


def load_config(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from exc
    return doc


def _params(doc) -> StableParams:
    nz = doc["noise"]
    return StableParams(nz["p"], nz.get("c_p", 1.0), nz.get("eps", 0.25), nz.get("K", 4.0))


def _domain(doc) -> BoxDomain:
    dm = doc["domain"]
    bounds = dm.get("bounds", [[0.0, 1.0]] * dm["d"])
    if len(bounds) != dm["d"]:
        raise ConfigError(f"domain.bounds has {len(bounds)} axes, d={dm['d']}")
    return BoxDomain(tuple(b[0] for b in bounds), tuple(b[1] for b in bounds))


def _u0(spec, domain: BoxDomain):
    if spec is None or spec == "constant":
        return ConstantU0(1.0)
    if isinstance(spec, dict):
        box = spec["indicator"]
        if len(box) != domain.d:
            raise ConfigError("indicator u0 must give one interval per axis")
        return IndicatorU0(tuple(b[0] for b in box), tuple(b[1] for b in box))
    if spec == "sine":
        return SineU0(domain)
    return ConstantU0(float(spec.split(":", 1)[1]))


class _Built:
    """Typed objects assembled from a validated config document."""

    def __init__(self, doc: dict):
        self.doc = doc
        self.params = _params(doc)
        self.domain = _domain(doc)
        self.seed = doc["noise"].get("seed", 0)
        kn = doc.get("kernel", {})
        self.kernel_spec = KernelSpec(self.domain, kn.get("mode", "dirichlet"), kn.get("image_order", 8))
        self.space_resolution = kn.get("space_grid_resolution", 128)
        sv = doc.get("solver", {})
        self.mode = sv.get("mode", "star")
        self.n_max = sv.get("N_max", 4)
        self.t = sv.get("t", 0.1)
        self.time_steps = sv.get("time_steps", 32)
        center = [(a + b) / 2 for a, b in zip(self.domain.lower, self.domain.upper)]
        self.points = np.asarray(sv.get("points", [center]), dtype=float)
        if self.points.shape[1] != self.domain.d:
            raise ConfigError("solver.points must have d coordinates each")
        if self.kernel_spec.mode == "dirichlet" and not np.all(self.domain.contains(self.points)):
            raise ConfigError("solver.points must lie in the domain for dirichlet mode")
        self.drift_enabled = sv.get("drift_enabled", False)
        if self.drift_enabled and self.params.p <= 1:
            raise ConfigError("solver.drift_enabled requires p > 1")
        self.drift_resolution = sv.get("drift_resolution", 8)
        self.u0 = _u0(sv.get("u0"), self.domain)
        self.tuple_budget = sv.get("tuple_budget", 10**8)
        self.kernel_spec.check_tail(self.t)
        out = doc.get("output", {}).get("directory")
        self.out_dir = Path(out) if out else None

    def grids(self) -> Grids:
        return Grids(SpaceGrid.midpoint(self.domain, self.space_resolution), self.time_steps)

    def experiment(self) -> ExperimentConfig:
        mc = self.doc.get("mc", {})
        cl = mc.get("cluster", {})
        n_lo, n_hi = cl.get("n_range", [0, -1])
        m_lo, m_hi = cl.get("m_range", [0, -1])
        cluster = ClusterSettings(
            tuple(cl.get("deltas", ())),
            tuple(range(n_lo, n_hi + 1)),
            tuple(range(m_lo, m_hi + 1)),
            tuple(range(cl.get("k_max", -1) + 1)),
        )
        return ExperimentConfig(
            self.params, self.domain, self.points, t=self.t, mode=self.mode, n_max=self.n_max,
            time_steps=self.time_steps, kernel_mode=self.kernel_spec.mode,
            image_order=self.kernel_spec.image_order, space_resolution=self.space_resolution,
            u0=self.u0, drift_enabled=self.drift_enabled, drift_resolution=self.drift_resolution,
            tuple_budget=self.tuple_budget, q=mc.get("q", 1.0), replicates=mc.get("replicates", 100),
            master_seed=mc.get("master_seed", self.seed), cluster=cluster,
        )


def build(doc: dict) -> _Built:
    try:
        return _Built(doc)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------- subcommands


def _out_dir(args, built: _Built | None) -> Path:
    if args.out:
        return Path(args.out)
    if built is not None and built.out_dir is not None:
        return built.out_dir
    return Path(".")


def _write(directory: Path, name: str, text: str) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / name
    try:
        path.write_text(text)
    except OSError:
        path.unlink(missing_ok=True)
        raise
    return path


def cmd_sample(args, built: _Built) -> int:
    fld = sample_field(built.params, built.domain, built.seed, compensate=built.drift_enabled)
    path = _write(_out_dir(args, built), "fields.csv", field_to_csv(fld))
    log.info("wrote %d atoms to %s", len(fld), path)
    return EXIT_OK


def cmd_kernel_eval(args, built: _Built) -> int:
    ke = built.doc.get("kernel_eval")
    if ke is None:
        raise ConfigError("kernel-eval needs a kernel_eval section with times and pairs")
    d = built.domain.d
    header = ["t"] + [f"x_{k + 1}" for k in range(d)] + [f"y_{k + 1}" for k in range(d)] + ["value"]
    lines = [",".join(header)]
    for x, y in ke["pairs"]:
        if len(x) != d or len(y) != d:
            raise ConfigError("kernel_eval pairs must have d coordinates each")
        for t in ke["times"]:
            try:
                val = float(kernel(t, np.asarray(x, float), np.asarray(y, float), built.kernel_spec))
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            lines.append(",".join([_fmt(t)] + [_fmt(v) for v in x] + [_fmt(v) for v in y] + [_fmt(val)]))
    _write(_out_dir(args, built), "kernel.csv", "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_solve(args, built: _Built) -> int:
    fld = sample_field(built.params, built.domain, built.seed, compensate=built.drift_enabled)
    drift = DRIFT_OFF
    if built.drift_enabled:
        drift = DriftChannel(True, fld.compensator_density, SpaceGrid.midpoint(built.domain, built.drift_resolution))
    results = solve_series_many(
        fld, built.u0, built.n_max, built.t, built.points, built.mode,
        built.kernel_spec, built.grids(), drift, budget=built.tuple_budget,
    )
    d = built.domain.d
    lines = [",".join(["mode", "n", "t"] + [f"x_{k + 1}" for k in range(d)] + ["term_value", "partial_sum"])]
    empty = len(fld) == 0 and not built.drift_enabled
    for res in results:
        sums = res.partial_sums
        for n, term in enumerate(res.terms):
            if n > 0 and empty:
                break  # structurally zero orders
            row = [res.mode, str(n), _fmt(res.t)] + [_fmt(c) for c in res.x]
            lines.append(",".join(row + [_fmt(term), _fmt(sums[n])]))
    _write(_out_dir(args, built), "series.csv", "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_verify(args, built: _Built | None) -> int:
    rows = run_checks(args.check, args.rtol)
    _write(_out_dir(args, built), "verify.csv", rows_to_csv(rows))
    failed = [r for r in rows if not r.passed]
    for r in failed[:20]:
        log.error("check failed: %s %s lhs=%r rhs=%r", r.check_name, r.arguments, r.lhs, r.rhs)
    if failed:
        log.error("%d of %d checks failed", len(failed), len(rows))
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_mc(args, built: _Built) -> int:
    try:
        config = built.experiment()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    files = run_experiment(config, _out_dir(args, built), threads=args.threads, config_echo=built.doc)
    manifest = json.loads(files["manifest.json"].read_text())
    if manifest["failure_count"]:
        log.warning("%d replicates failed", manifest["failure_count"])
    return EXIT_OK


COMMANDS = {
    "sample": cmd_sample,
    "kernel-eval": cmd_kernel_eval,
    "solve": cmd_solve,
    "verify": cmd_verify,
    "mc": cmd_mc,
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stablechaos", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, required=name != "verify")
        p.add_argument("--out", type=Path, help="output directory (overrides output.directory)")
        p.add_argument("--threads", type=int, default=1)
        if name == "verify":
            p.add_argument("--check", action="append", choices=sorted(CHECKS), help="run only this check (repeatable)")
            p.add_argument("--rtol", type=float, help="override the tolerance of every identity check")
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s: %(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.command == "verify" and args.rtol is not None and args.rtol < 0:
            raise ConfigError("--rtol must be nonnegative")
        built = build(load_config(args.config)) if args.config is not None else None
        return COMMANDS[args.command](args, built)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except Exception as exc:  # runtime failures map to exit 1
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
