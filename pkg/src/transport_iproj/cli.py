"""Command-line front end.

Marginals are given inline (``--p "1/2,1/2"``), tables as CSV files whose
cells may be decimals or ``a/b`` rationals.  Output is a JSON report (or a
short text summary) on stdout.  Exit status 0 means success, 2 means the
requested I-projection does not exist, 1 means bad input or a failed run;
failures print one JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (
    Distribution,
    JointTable,
    ModeError,
    Polytope,
    SupportPattern,
    TransportError,
    ValidationError,
    marginals,
)
from .oracle import fw_minimize
from .polytope import (
    combinatorially_equivalent,
    enumerate_vertices,
    face_lattice,
    fh_lower,
    fh_upper,
    geometrically_equivalent,
    is_generic,
)
from .projection import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    UndefinedProjectionError,
    certify_pythagorean,
    continuity_probe,
    project,
    roundtrip,
)

EXIT_OK, EXIT_ERROR, EXIT_UNDEFINED = 0, 1, 2
COMMANDS = ("vertices", "fh", "project", "equivalent", "faces", "roundtrip", "certify", "probe")
EXACT_ONLY = {"vertices", "fh", "equivalent", "faces"}

_TOKEN = re.compile(r"^[+-]?(\d+(/\d+)?|\d*\.\d+([eE][+-]?\d+)?|\d+\.?\d*[eE][+-]?\d+|\d+\.)$")


class UsageError(TransportError):
    pass


def _parse_token(token: str) -> tuple[Fraction, bool]:
    """Return the exact value of a literal and whether it was written as a
    rational (integer or ``a/b``)."""
    if not _TOKEN.match(token):
        raise ValidationError(f"malformed number {token!r}")
    try:
        value = Fraction(token)
    except (ValueError, ZeroDivisionError):
        raise ValidationError(f"malformed number {token!r}") from None
    return value, not re.search(r"[.eE]", token)


def _build(values: list[tuple[Fraction, bool]], exact: bool) -> tuple[list, bool]:
    mode = exact or all(r for _, r in values)
    return [v if mode else float(v) for v, _ in values], mode


def parse_distribution(text: str, exact: bool = False) -> Distribution:
    """Comma- or whitespace-separated masses.  Rational-only input is exact;
    any decimal switches to float mode unless ``exact`` forces decimal
    expansion."""
    tokens = [t for t in re.split(r"[,\s]+", text.strip()) if t]
    if not tokens:
        raise ValidationError("empty distribution")
    masses, mode = _build([_parse_token(t) for t in tokens], exact)
    return Distribution(masses, exact=mode)


def _read_rows(text: str) -> list[list[str]]:
    rows = [[c.strip() for c in r] for r in csv.reader(io.StringIO(text))]
    rows = [r for r in rows if any(r)]
    if not rows:
        raise ValidationError("empty table")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValidationError("ragged table: rows have different lengths")
    return rows


def parse_table(text: str, exact: bool = False) -> JointTable:
    """Rectangular CSV of decimals or ``a/b`` rationals."""
    rows = _read_rows(text)
    parsed = [[_parse_token(c) for c in r] for r in rows]
    flat, mode = _build([v for r in parsed for v in r], exact)
    m = len(rows[0])
    return JointTable([flat[i * m:(i + 1) * m] for i in range(len(rows))], exact=mode)


def parse_matrix(text: str) -> np.ndarray:
    """Rectangular CSV of signed numbers, no probability checks."""
    rows = _read_rows(text)
    return np.array([[float(_parse_token(c)[0]) for c in r] for r in rows], dtype=float)


def format_scalar(v) -> str:
    if isinstance(v, Fraction):
        return str(v)
    return repr(float(v))


def serialize_table(t: JointTable) -> str:
    return "".join(",".join(format_scalar(v) for v in r) + "\n" for r in t.entries)


def _jsonable(x):
    if isinstance(x, JointTable):
        return [[format_scalar(v) if x.exact else float(v) for v in r] for r in x.entries]
    if isinstance(x, Distribution):
        return [format_scalar(v) if x.exact else float(v) for v in x.masses]
    if isinstance(x, SupportPattern):
        return x.to_list()
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


@dataclass
class RunConfig:
    command: str
    source: str | None = None
    direction: str | None = None
    p: str | None = None
    q: str | None = None
    p2: str | None = None
    q2: str | None = None
    exact: bool = False
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    samples: int = 100
    seed: int = 0
    steps: int = 20
    gap_tol: float = 1e-8
    format: str = "json"
    timing: bool = False
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS and self.command != "oracle":
            raise UsageError(f"unknown command {self.command!r}")
        if not self.tol > 0:
            raise UsageError("--tol must be positive")
        if self.format not in ("json", "text"):
            raise UsageError("--format must be json or text")


def _need(value, flag: str):
    if value is None:
        raise UsageError(f"missing required option {flag}")
    return value


def _polytope(cfg: RunConfig, p: str | None, q: str | None, pflag: str, qflag: str) -> Polytope:
    pd = parse_distribution(_need(p, pflag), cfg.exact)
    qd = parse_distribution(_need(q, qflag), cfg.exact)
    c = Polytope(pd, qd)
    if cfg.command in EXACT_ONLY and not c.exact:
        raise ModeError(f"{cfg.command} needs exact marginals; use a/b literals or pass --exact")
    return c


def _source(cfg: RunConfig) -> JointTable:
    return parse_table(Path(_need(cfg.source, "--source")).read_text(encoding="utf-8"), cfg.exact)


def _report(cfg: RunConfig, inputs: dict, mode: str, result=None, undefined=False,
            marginal=None, pythagorean=None, iterations=None) -> dict:
    out = {
        "command": cfg.command,
        "inputs": inputs,
        "mode": mode,
        "residuals": {"marginal": marginal, "pythagorean": pythagorean},
        "iterations": iterations,
        "seed": cfg.seed,
    }
    if undefined:
        out["undefined"] = True
    else:
        out["result"] = result
    return out


def _mode(*objs) -> str:
    return "exact" if all(o.exact for o in objs) else "float"


def _vertex_list(vertices) -> list:
    return [{"support": v.support, "table": v.table} for v in vertices]


def _execute(cfg: RunConfig) -> tuple[dict, int]:
    cmd = cfg.command
    if cmd in ("vertices", "fh", "faces"):
        c = _polytope(cfg, cfg.p, cfg.q, "--p", "--q")
        inputs = {"p": c.row_marginal, "q": c.col_marginal}
        if cmd == "vertices":
            vs = enumerate_vertices(c)
            result = {"count": len(vs), "generic": is_generic(c), "vertices": _vertex_list(vs)}
        elif cmd == "fh":
            up, lo = fh_upper(c), fh_lower(c)
            result = {"upper": {"support": up.support, "table": up.table},
                      "lower": {"support": lo.support, "table": lo.table}}
        else:
            lat = face_lattice(c)
            result = {"f_vector": list(lat.f_vector()),
                      "faces": [{"dimension": f.dimension,
                                 "vertices": sorted(f.vertex_indices),
                                 "support": f.support} for f in lat.faces]}
        return _report(cfg, inputs, "exact", result), EXIT_OK

    if cmd == "equivalent":
        c1 = _polytope(cfg, cfg.p, cfg.q, "--p", "--q")
        c2 = _polytope(cfg, cfg.p2, cfg.q2, "--p2", "--q2")
        eq = geometrically_equivalent(c1, c2)
        result = {"geometrically_equivalent": eq.equivalent,
                  "witness": eq.witness, "witness_side": eq.side}
        if cfg.extra.get("lattice"):
            result["combinatorially_equivalent"] = combinatorially_equivalent(
                face_lattice(c1), face_lattice(c2))
        inputs = {"p1": c1.row_marginal, "q1": c1.col_marginal,
                  "p2": c2.row_marginal, "q2": c2.col_marginal}
        return _report(cfg, inputs, "exact", result), EXIT_OK

    source = _source(cfg)
    if cmd == "roundtrip":
        c1 = Polytope(*marginals(source))
    target = _polytope(cfg, cfg.p, cfg.q, "--target-p", "--target-q")
    inputs = {"source": source, "target_p": target.row_marginal, "target_q": target.col_marginal}
    mode = _mode(source, target)

    if cmd == "project":
        r = project(source, target, cfg.tol, cfg.max_iter)
        if not r.defined:
            return _report(cfg, inputs, mode, undefined=True, iterations=0), EXIT_UNDEFINED
        result = {"table": r.result, "divergence": r.divergence_value}
        return _report(cfg, inputs, mode, result, marginal=r.marginal_residual,
                       iterations=r.iterations), EXIT_OK

    if cmd == "certify":
        r = project(source, target, cfg.tol, cfg.max_iter)
        if not r.defined:
            return _report(cfg, inputs, mode, undefined=True, iterations=0), EXIT_UNDEFINED
        res = certify_pythagorean(source, r, target, cfg.samples, np.random.default_rng(cfg.seed))
        inputs["samples"] = cfg.samples
        result = {"table": r.result, "divergence": r.divergence_value}
        return _report(cfg, inputs, mode, result, marginal=r.marginal_residual,
                       pythagorean=res, iterations=r.iterations), EXIT_OK

    if cmd == "roundtrip":
        try:
            err = roundtrip(source, c1, target, cfg.tol, cfg.max_iter)
        except UndefinedProjectionError as exc:
            out = _report(cfg, inputs, mode, undefined=True)
            out["reason"] = str(exc)
            return out, EXIT_UNDEFINED
        return _report(cfg, inputs, mode, {"l1_error": err}), EXIT_OK

    if cmd == "probe":
        d = parse_matrix(Path(_need(cfg.direction, "--direction")).read_text(encoding="utf-8"))
        inputs["direction"] = d.tolist()
        inputs["steps"] = cfg.steps
        try:
            profile = continuity_probe(source, d, target, cfg.steps, cfg.tol, cfg.max_iter)
        except UndefinedProjectionError as exc:
            out = _report(cfg, inputs, mode, undefined=True)
            out["reason"] = str(exc)
            return out, EXIT_UNDEFINED
        steps = [{"h": 2.0 ** -k, "l1": e} for k, e in enumerate(profile, start=1)]
        return _report(cfg, inputs, mode, {"profile": steps}), EXIT_OK

    # oracle (hidden debugging command)
    try:
        o = fw_minimize(source, target, cfg.gap_tol, cfg.max_iter)
    except UndefinedProjectionError:
        return _report(cfg, inputs, mode, undefined=True), EXIT_UNDEFINED
    result = {"table": o.table, "objective": o.objective, "duality_gap": o.duality_gap}
    return _report(cfg, inputs, mode, result, iterations=o.iterations), EXIT_OK


def _text(report: dict) -> str:
    lines = [f"command: {report['command']}  mode: {report['mode']}"]
    if report.get("undefined"):
        lines.append("result: undefined (no table of the target fits inside the source support)")
        if "reason" in report:
            lines.append(f"reason: {report['reason']}")
        return "\n".join(lines) + "\n"
    result = report["result"]
    for key, value in result.items():
        if isinstance(value, list) and value and isinstance(value[0], list):
            lines.append(f"{key}:")
            lines.extend("  " + "  ".join(str(x) for x in row) for row in value)
        elif isinstance(value, list) and value and isinstance(value[0], dict):
            lines.append(f"{key}: {len(value)} entries")
            lines.extend("  " + json.dumps(v, sort_keys=True) for v in value)
        else:
            lines.append(f"{key}: {json.dumps(value, sort_keys=True)}")
    res = report["residuals"]
    if res["marginal"] is not None:
        lines.append(f"marginal residual: {res['marginal']}")
    if res["pythagorean"] is not None:
        lines.append(f"pythagorean residual: {res['pythagorean']}")
    if report["iterations"] is not None:
        lines.append(f"iterations: {report['iterations']}")
    return "\n".join(lines) + "\n"


def run(cfg: RunConfig, out=None) -> int:
    """Execute one command, write its report, and return the exit code."""
    out = out or sys.stdout
    start = time.perf_counter()
    report, code = _execute(cfg)
    report = _jsonable(report)
    if cfg.timing:
        report["timing"] = {"seconds": time.perf_counter() - start}
    if cfg.format == "json":
        out.write(json.dumps(report, sort_keys=True) + "\n")
    else:
        out.write(_text(report))
    return code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--exact", action="store_true", help="read decimals as exact rationals")
    sp.add_argument("--format", choices=("json", "text"), default="json")
    sp.add_argument("--timing", action="store_true", help="add wall-clock timing to the report")
    sp.add_argument("--seed", type=int, default=0)


def _projection_opts(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--source", required=True, help="CSV file holding the source table")
    sp.add_argument("--target-p", dest="p", required=True)
    sp.add_argument("--target-q", dest="q", required=True)
    sp.add_argument("--tol", type=float, default=DEFAULT_TOL)
    sp.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="transport-iproj",
                     description="Transportation polytopes and I-projections between them.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")
    sub.required = True

    for name, help_ in (("vertices", "enumerate vertices of C(P,Q)"),
                        ("fh", "Frechet-Hoeffding upper and lower bounds"),
                        ("faces", "face lattice of C(P,Q)")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--p", "--target-p", dest="p", required=True)
        sp.add_argument("--q", "--target-q", dest="q", required=True)
        _common(sp)

    sp = sub.add_parser("equivalent", help="geometric equivalence of two polytopes")
    sp.add_argument("--p", "--p1", dest="p", required=True)
    sp.add_argument("--q", "--q1", dest="q", required=True)
    sp.add_argument("--p2", required=True)
    sp.add_argument("--q2", required=True)
    sp.add_argument("--lattice", action="store_true", help="also compare face lattices")
    _common(sp)

    sp = sub.add_parser("project", help="I-projection of a table onto C(P,Q)")
    _projection_opts(sp)
    _common(sp)

    sp = sub.add_parser("roundtrip", help="project onto C(P,Q) and back onto the source polytope")
    _projection_opts(sp)
    _common(sp)

    sp = sub.add_parser("certify", help="check the Pythagorean identity at random tables")
    _projection_opts(sp)
    sp.add_argument("--samples", type=int, default=100)
    _common(sp)

    sp = sub.add_parser("probe", help="continuity profile along a direction")
    _projection_opts(sp)
    sp.add_argument("--direction", required=True, help="CSV file holding the direction")
    sp.add_argument("--steps", type=int, default=20)
    _common(sp)

    sp = sub.add_parser("oracle")  # debugging aid, deliberately undocumented
    _projection_opts(sp)
    sp.add_argument("--gap-tol", type=float, default=1e-8)
    _common(sp)
    return parser


def config_from_args(argv: Sequence[str]) -> RunConfig:
    ns = vars(build_parser().parse_args(list(argv)))
    extra = {"lattice": ns.pop("lattice", False)}
    known = {f for f in RunConfig.__dataclass_fields__}
    return RunConfig(**{k: v for k, v in ns.items() if k in known}, extra=extra)


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        return run(config_from_args(argv))
    except (TransportError, OSError, ValueError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)},
                                    sort_keys=True) + "\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
