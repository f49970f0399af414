"""Command-line front end: convergence ladders, extrapolation and diagnostics.

Runs are described by a JSON file::

    {
      "vertices": [[0, 0], [1, 0], [1, 1], [0, 1]],
      "n": 8,
      "levels": 3,
      "grading": "auto:4",
      "methods": ["iterated_galerkin", "iterated_modified"],
      "problem": {"manufactured": "smooth"}
    }

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__, harness
from .errors import ConfigError, CornerBIEError, GeometryError, ParseError, PointPlacement, ValidationError
from .geometry import build_polygon, default_partition, make_partition
from .mesh import GradedMeshSpec, recommend_grading
from .quadrature import gauss_rule

ALL_METHODS = harness.METHODS + ("extrapolated",)
DIAGNOSTIC_NAMES = ("T(I-P)u", "T(I-P)T(I-P)u")


@dataclass
class RunConfig:
    vertices: list
    n: list
    methods: list
    problem: dict
    partition: list | None = None
    grading: str | list = "auto:4"
    levels: int = 3
    extrapolation_p: list = field(default_factory=lambda: [2])
    extrapolation_method: str = "iterated_modified"
    quadrature_order: int = 10
    oracle_tol: float = 1e-12
    output_dir: str | None = None
    parallelism: int = 1
    seed: int = 0


_FIELDS = set(RunConfig.__dataclass_fields__)


def fmt(x) -> str:
    """Twelve significant digits in scientific notation; blank for missing values."""
    if x is None:
        return ""
    return f"{float(x):.11e}"


def parse_config(path) -> RunConfig:
    """Read and validate a JSON run configuration, filling in defaults."""
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ParseError(f"{path}: top level must be a JSON object")
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> RunConfig:
    unknown = sorted(set(raw) - _FIELDS)
    if unknown:
        raise ValidationError(unknown[0], "unknown field")
    for name in ("vertices", "n", "methods", "problem"):
        if name not in raw:
            raise ValidationError(name, "required field is missing")

    verts = raw["vertices"]
    if not isinstance(verts, list) or len(verts) < 3 or not all(_is_pair(v) for v in verts):
        raise ValidationError("vertices", "expected a list of at least three [x, y] pairs")
    r = len(verts)

    n = raw["n"]
    if isinstance(n, int) and not isinstance(n, bool):
        n = [n] * r
    if not isinstance(n, list) or len(n) != r or not all(isinstance(k, int) and not isinstance(k, bool) for k in n):
        raise ValidationError("n", f"expected an integer or a list of {r} integers")
    if any(k < 1 for k in n):
        raise ValidationError("n", "segment counts n_j must be at least 1")

    methods = raw["methods"]
    if not isinstance(methods, list) or not methods:
        raise ValidationError("methods", "expected a nonempty list")
    bad = [m for m in methods if m not in ALL_METHODS]
    if bad:
        raise ValidationError("methods", f"unknown method {bad[0]!r}; choose from {', '.join(ALL_METHODS)}")

    grading = raw.get("grading", "auto:4")
    if isinstance(grading, str):
        if grading not in ("auto:2", "auto:4"):
            raise ValidationError("grading", "expected 'auto:2', 'auto:4' or a list of exponents")
    elif isinstance(grading, list):
        if len(grading) != r or not all(_is_number(q) for q in grading):
            raise ValidationError("grading", f"expected {r} grading exponents, one per corner")
        if any(q < 1 for q in grading):
            raise ValidationError("grading", "grading exponents q_j must satisfy q_j >= 1")
    else:
        raise ValidationError("grading", "expected 'auto:2', 'auto:4' or a list of exponents")

    levels = raw.get("levels", 3)
    if not isinstance(levels, int) or isinstance(levels, bool) or levels < 1:
        raise ValidationError("levels", "expected an integer >= 1")

    p = raw.get("extrapolation_p", [2])
    p = [p] if isinstance(p, int) and not isinstance(p, bool) else p
    if not isinstance(p, list) or not p or any(k not in (2, 4) for k in p):
        raise ValidationError("extrapolation_p", "expected 2, 4 or a list of them")

    ex_method = raw.get("extrapolation_method", "iterated_modified")
    if ex_method not in harness.ITERATED:
        raise ValidationError("extrapolation_method", "expected iterated_galerkin or iterated_modified")

    order = raw.get("quadrature_order", 10)
    if not isinstance(order, int) or isinstance(order, bool) or not 1 <= order <= 32:
        raise ValidationError("quadrature_order", "expected an integer in 1..32")

    tol = raw.get("oracle_tol", 1e-12)
    if not _is_number(tol) or not 0 < tol < 1:
        raise ValidationError("oracle_tol", "expected a number in (0, 1)")

    par = raw.get("parallelism", 1)
    if not isinstance(par, int) or isinstance(par, bool) or par < 1:
        raise ValidationError("parallelism", "expected an integer >= 1")

    partition = raw.get("partition")
    if partition is not None and (not isinstance(partition, list) or len(partition) != r):
        raise ValidationError("partition", f"expected {r} arclengths")

    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ValidationError("seed", "expected an integer")

    out = raw.get("output_dir")
    if out is not None and not isinstance(out, str):
        raise ValidationError("output_dir", "expected a path string")

    return RunConfig(
        vertices=[[float(a), float(b)] for a, b in verts],
        n=list(n),
        methods=list(methods),
        problem=_validate_problem(raw["problem"]),
        partition=None if partition is None else [float(g) for g in partition],
        grading=grading if isinstance(grading, str) else [float(q) for q in grading],
        levels=levels,
        extrapolation_p=list(p),
        extrapolation_method=ex_method,
        quadrature_order=order,
        oracle_tol=float(tol),
        output_dir=out,
        parallelism=par,
        seed=seed,
    )


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _is_pair(v) -> bool:
    return isinstance(v, list) and len(v) == 2 and all(_is_number(c) for c in v)


def _validate_problem(prob) -> dict:
    if not isinstance(prob, dict) or len(prob) != 1:
        raise ValidationError("problem", "expected {'manufactured': profile} or {'harmonic': {...}}")
    if "manufactured" in prob:
        if prob["manufactured"] not in harness.PROFILES:
            raise ValidationError("problem", f"unknown profile {prob['manufactured']!r}")
        return {"manufactured": prob["manufactured"]}
    if "harmonic" in prob:
        h = prob["harmonic"]
        if not isinstance(h, dict) or not _is_pair(h.get("x_ext")):
            raise ValidationError("problem", "harmonic problems need x_ext as [x, y]")
        cps = h.get("checkpoints")
        if not isinstance(cps, list) or not cps or not all(_is_pair(c) for c in cps):
            raise ValidationError("problem", "harmonic problems need a nonempty checkpoints list")
        return {"harmonic": {"x_ext": [float(c) for c in h["x_ext"]], "checkpoints": [[float(a), float(b)] for a, b in cps]}}
    raise ValidationError("problem", "expected 'manufactured' or 'harmonic'")


# ---------------------------------------------------------------------------
# setup
# ---------------------------------------------------------------------------


@dataclass
class Setup:
    config: RunConfig
    problem: harness.Problem
    specs: list
    rule: object


def build_setup(cfg: RunConfig) -> Setup:
    """Turn a validated config into geometry, problem and mesh specs."""
    try:
        poly = build_polygon(cfg.vertices)
    except GeometryError as exc:
        raise ValidationError("vertices", str(exc)) from None
    try:
        partition = default_partition(poly) if cfg.partition is None else make_partition(poly, cfg.partition)
    except GeometryError as exc:
        raise ValidationError("partition", str(exc)) from None
    q = recommend_grading(poly, int(cfg.grading[-1])) if isinstance(cfg.grading, str) else cfg.grading
    if "manufactured" in cfg.problem:
        problem = harness.make_manufactured(poly, cfg.problem["manufactured"], partition, tol=cfg.oracle_tol)
    else:
        h = cfg.problem["harmonic"]
        try:
            problem = harness.make_harmonic(poly, h["x_ext"], h["checkpoints"], partition)
        except PointPlacement as exc:
            raise ValidationError("problem", str(exc)) from None
    specs = [GradedMeshSpec(tuple(cfg.n), tuple(q))]
    for _ in range(cfg.levels - 1):
        specs.append(specs[-1].doubled())
    return Setup(cfg, problem, specs, gauss_rule(cfg.quadrature_order))


def _n_spec(spec: GradedMeshSpec) -> str:
    return ";".join(str(k) for k in spec.n)


def _metadata(setup: Setup, command: str) -> dict:
    poly = setup.problem.polygon
    return {
        "artifact_version": __version__,
        "command": command,
        "config": asdict(setup.config),
        "polygon": {
            "vertices": poly.vertices.tolist(),
            "corner_params": poly.corner_params.tolist(),
        },
        "partition": list(setup.problem.partition.gamma),
        "q": list(setup.specs[0].q),
        "quadrature_order": setup.config.quadrature_order,
        "oracle_tol": setup.config.oracle_tol,
        "seed": setup.config.seed,
        "backend": os.environ.get("CORNER_BIE_BACKEND", "numba"),
    }


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _eocs(errors: list[float]) -> list[float | None]:
    out: list[float | None] = [None]
    for a, b in zip(errors[:-1], errors[1:]):
        out.append(math.log2(a / b) if a > 0 and b > 0 else None)
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_convergence(cfg: RunConfig, out: Path) -> int:
    setup = build_setup(cfg)
    t0 = time.perf_counter()
    plain = [m for m in cfg.methods if m in harness.METHODS]
    rows: list[harness.ReportRow] = []
    if plain:
        report = harness.convergence_ladder(setup.problem, setup.specs[0], cfg.levels, plain, setup.rule, cfg.parallelism)
        rows.extend(report.rows)
    if "extrapolated" in cfg.methods:
        p = cfg.extrapolation_p[0]
        for level, spec in enumerate(setup.specs):
            runs = harness.extrapolation_runs(setup.problem, spec, cfg.extrapolation_method, setup.rule, cfg.parallelism)
            ex = harness.combine(runs, p)
            rows.append(
                harness.ReportRow(level, spec.n, max(spec.h), runs[0].panels, "extrapolated", ex.sup_error)
            )
        harness._fill_eoc(rows)
    order = {m: k for k, m in enumerate(cfg.methods)}
    rows.sort(key=lambda r: (r.level, order[r.method]))
    table = [
        [str(r.level), ";".join(map(str, r.n)), fmt(r.h_max), str(r.panels), r.method, fmt(r.sup_error), fmt(r.eoc)]
        for r in rows
    ]
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "convergence.csv", ["level", "n_spec", "h_max", "panels", "method", "sup_error", "eoc"], table)
    meta = _metadata(setup, "convergence")
    meta["rows"] = [asdict(r) for r in rows]
    meta["wall_time"] = time.perf_counter() - t0
    _write_json(out / "report.json", meta)
    return 0


def cmd_extrapolate(cfg: RunConfig, out: Path) -> int:
    setup = build_setup(cfg)
    t0 = time.perf_counter()
    method = cfg.extrapolation_method
    per_level = [
        harness.extrapolation_runs(setup.problem, spec, method, setup.rule, cfg.parallelism) for spec in setup.specs
    ]
    table, records = [], []
    for p in cfg.extrapolation_p:
        combos = [harness.combine(runs, p) for runs in per_level]
        base_err = [c.base.sup_error for c in combos]
        ex_err = [c.sup_error for c in combos]
        base_eoc, ex_eoc = _eocs(base_err), _eocs(ex_err)
        for level, (spec, c) in enumerate(zip(setup.specs, combos)):
            fine, coarse = c.coefficients
            table.append(
                [
                    str(level),
                    _n_spec(spec),
                    fmt(max(spec.h)),
                    method,
                    str(p),
                    str(fine),
                    str(coarse),
                    fmt(base_err[level]),
                    fmt(ex_err[level]),
                    fmt(base_eoc[level]),
                    fmt(ex_eoc[level]),
                ]
            )
            records.append(
                {
                    "level": level,
                    "n": list(spec.n),
                    "p": p,
                    "c_fine": str(fine),
                    "c_base": str(coarse),
                    "base_error": base_err[level],
                    "extrapolated_error": ex_err[level],
                    "refined_errors": [run.sup_error for run in c.refined],
                }
            )
    header = [
        "level",
        "n_spec",
        "h_max",
        "method",
        "p",
        "c_fine",
        "c_base",
        "base_error",
        "extrapolated_error",
        "base_eoc",
        "extrapolated_eoc",
    ]
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "extrapolation.csv", header, table)
    meta = _metadata(setup, "extrapolate")
    meta["rows"] = records
    meta["wall_time"] = time.perf_counter() - t0
    _write_json(out / "report.json", meta)
    return 0


def cmd_diagnostics(cfg: RunConfig, out: Path) -> int:
    if "manufactured" not in cfg.problem:
        raise ValidationError("problem", "diagnostics require manufactured u_exact")
    setup = build_setup(cfg)
    t0 = time.perf_counter()
    rows = harness.operator_diagnostics(setup.problem, setup.specs, setup.rule, cfg.parallelism)
    table = []
    for name, value, rate in ((DIAGNOSTIC_NAMES[0], "first", "eoc_first"), (DIAGNOSTIC_NAMES[1], "second", "eoc_second")):
        for r in rows:
            table.append(
                [
                    str(r.level),
                    ";".join(map(str, r.n)),
                    fmt(r.h_max),
                    str(r.panels),
                    name,
                    fmt(getattr(r, value)),
                    fmt(getattr(r, rate)),
                ]
            )
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "diagnostics.csv", ["level", "n_spec", "h_max", "panels", "diagnostic", "value", "eoc"], table)
    meta = _metadata(setup, "diagnostics")
    meta["rows"] = [asdict(r) for r in rows]
    meta["wall_time"] = time.perf_counter() - t0
    _write_json(out / "report.json", meta)
    return 0


COMMANDS = {"convergence": cmd_convergence, "extrapolate": cmd_extrapolate, "diagnostics": cmd_diagnostics}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="corner-bie", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("convergence", "run every method over a ladder of uniformly doubled meshes"),
        ("extrapolate", "multi-parameter Richardson extrapolation over r + 1 solves per level"),
        ("diagnostics", "decay of T(I-P)u and T(I-P)T(I-P)u for a manufactured density"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=None, help="output directory (overrides output_dir)")
        p.add_argument("--parallelism", type=int, default=None, help="max concurrent solves")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        if args.parallelism is not None:
            if args.parallelism < 1:
                raise ValidationError("parallelism", "expected an integer >= 1")
            cfg.parallelism = args.parallelism
        out = args.out or cfg.output_dir
        if out is None:
            raise ValidationError("output_dir", "give --out or output_dir in the config")
        return COMMANDS[args.command](cfg, Path(out))
    except ConfigError as exc:
        print(f"corner-bie: configuration error: {exc}", file=sys.stderr)
        return 1
    except (CornerBIEError, ArithmeticError, ValueError) as exc:
        print(f"corner-bie: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
