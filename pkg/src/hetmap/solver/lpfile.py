"""Plain LP text files and "name value" solution listings for external solvers."""

from __future__ import annotations

import io
import math
import os
from pathlib import Path
from typing import IO, Union

from ..milp import BINARY, CONTINUOUS, MilpModel
from .bnb import FEASIBLE, INFEASIBLE, Solution

TERMS_PER_LINE = 6
VIOLATION_TOL = 1e-6

Target = Union[str, os.PathLike, IO[str]]


class LPParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _num(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def _linear(model: MilpModel, coeffs: dict[int, float]) -> list[str]:
    out = []
    for v, c in sorted(coeffs.items()):
        sign = "-" if c < 0 else "+"
        out.append(f"{sign} {_num(abs(c))} {model.variables[v].name}")
    if not out:
        out.append(f"+ 0 {model.variables[0].name}" if model.variables else "0")
    return out


def _wrapped(head: str, terms: list[str], tail: str = "") -> list[str]:
    lines = []
    for k in range(0, len(terms), TERMS_PER_LINE):
        chunk = " ".join(terms[k:k + TERMS_PER_LINE])
        lines.append((head if k == 0 else "   ") + chunk)
    lines[-1] += tail
    return lines


def write_lp(model: MilpModel) -> str:
    sense_txt = {"<=": "<=", ">=": ">=", "=": "="}
    lines = ["\\ hetmap model", "Minimize"]
    lines += _wrapped(" obj: ", _linear(model, model.objective))
    lines.append("Subject To")
    for con in model.constraints:
        lines += _wrapped(f" {con.name}: ", _linear(model, con.coeffs),
                          f" {sense_txt[con.sense]} {_num(con.rhs)}")
    lines.append("Bounds")
    # every variable gets a line so a reader recovers the variable order
    for v in model.variables:
        if v.lb == 0.0 and math.isinf(v.ub):
            lines.append(f" {v.name} >= 0")
        elif math.isinf(v.lb) and math.isinf(v.ub):
            lines.append(f" {v.name} free")
        else:
            lines.append(f" {_num(v.lb)} <= {v.name} <= {_num(v.ub)}")
    binaries = [v.name for v in model.variables if v.kind == BINARY]
    if binaries:
        lines.append("Binaries")
        for k in range(0, len(binaries), 8):
            lines.append(" " + " ".join(binaries[k:k + 8]))
    lines.append("End")
    return "\n".join(lines) + "\n"


def export_lp(model: MilpModel, destination: Target) -> None:
    text = write_lp(model)
    if hasattr(destination, "write"):
        destination.write(text)  # type: ignore[union-attr]
    else:
        Path(destination).write_text(text)


def _read_text(source: Target) -> str:
    if hasattr(source, "read"):
        return source.read()  # type: ignore[union-attr]
    return Path(source).read_text()


# -- parsing -------------------------------------------------------------------


def _parse_expr(tokens: list[str], lineno: int) -> dict[str, float]:
    coeffs: dict[str, float] = {}
    sign, coef = 1.0, None
    for tok in tokens:
        if tok in ("+", "-"):
            sign = -1.0 if tok == "-" else 1.0
            continue
        try:
            coef = float(tok)
            continue
        except ValueError:
            pass
        c = sign * (1.0 if coef is None else coef)
        coeffs[tok] = coeffs.get(tok, 0.0) + c
        sign, coef = 1.0, None
    if coef is not None and coef != 0.0:
        raise LPParseError(lineno, "constant terms are not supported")
    return coeffs


def read_lp(source: Target) -> MilpModel:
    """Parse files written by :func:`export_lp` (a subset of the LP format)."""
    text = _read_text(source)
    model = MilpModel()
    section = None
    rows: list[tuple[int, str, list[str]]] = []
    objective: list[str] = []
    bounds: list[tuple[int, str]] = []
    binaries: list[str] = []
    current: tuple[int, str, list[str]] | None = None
    headers = {"minimize": "obj", "subject to": "rows", "bounds": "bounds",
               "binaries": "bin", "binary": "bin", "end": "end"}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = line.lower()
        if key in headers:
            section = headers[key]
            current = None
            continue
        if section == "obj":
            if ":" in line and not objective:
                line = line.split(":", 1)[1]
            objective += line.split()
        elif section == "rows":
            if ":" in line:
                name, rest = line.split(":", 1)
                current = (lineno, name.strip(), rest.split())
                rows.append(current)
            elif current is not None:
                current[2].extend(line.split())
            else:
                raise LPParseError(lineno, "constraint without a name")
        elif section == "bounds":
            bounds.append((lineno, line))
        elif section == "bin":
            binaries += line.split()
        elif section == "end":
            raise LPParseError(lineno, "text after End")
        else:
            raise LPParseError(lineno, f"unexpected text {line!r}")
    if section != "end":
        raise LPParseError(len(text.splitlines()), "missing End")

    # variables in order of first appearance: bounds then binaries keep ids stable
    names: dict[str, int] = {}

    def var(name: str, kind: str = CONTINUOUS) -> int:
        if name not in names:
            names[name] = model.add_var(name, kind, 0.0, 1.0 if kind == BINARY else math.inf)
        return names[name]

    binset = set(binaries)
    declared: list[tuple[int, str, float, float]] = []
    for lineno, line in bounds:
        toks = line.split()
        try:
            if len(toks) == 2 and toks[1] == "free":
                declared.append((lineno, toks[0], -math.inf, math.inf))
            elif len(toks) == 3 and toks[1] == ">=":
                declared.append((lineno, toks[0], float(toks[2]), math.inf))
            elif len(toks) == 5 and toks[1] == toks[3] == "<=":
                declared.append((lineno, toks[2], float(toks[0]), float(toks[4])))
            else:
                raise ValueError
        except ValueError:
            raise LPParseError(lineno, f"cannot read bound {line!r}") from None
    order = _appearance_order(objective, rows, declared, binaries)
    for name in order:
        var(name, BINARY if name in binset else CONTINUOUS)
    for _, name, lb, ub in declared:
        v = model.variables[names[name]]
        v.lb, v.ub = lb, ub
    model.objective = {names[n]: c for n, c in _parse_expr(objective, 0).items()}
    for lineno, name, toks in rows:
        op = next((k for k, t in enumerate(toks) if t in ("<=", ">=", "=", "=<", "=>")), None)
        if op is None or op != len(toks) - 2:
            raise LPParseError(lineno, f"row {name} lacks a sense and right-hand side")
        try:
            rhs = float(toks[-1])
        except ValueError:
            raise LPParseError(lineno, f"bad right-hand side {toks[-1]!r}") from None
        sense = {"=<": "<=", "=>": ">="}.get(toks[op], toks[op])
        coeffs = {names[n]: c for n, c in _parse_expr(toks[:op], lineno).items()}
        model.add_constraint(name, coeffs, sense, rhs)
    return model


def _appearance_order(objective, rows, declared, binaries) -> list[str]:
    seen: dict[str, None] = {}

    def scan(tokens):
        for tok in tokens:
            if tok in ("+", "-", "<=", ">=", "=", "=<", "=>"):
                continue
            try:
                float(tok)
            except ValueError:
                seen.setdefault(tok, None)

    for _, name, _, _ in declared:
        seen.setdefault(name, None)
    for b in binaries:
        seen.setdefault(b, None)
    scan(objective)
    for _, _, toks in rows:
        scan(toks)
    return list(seen)


# -- solutions -------------------------------------------------------------------


def write_solution(model: MilpModel, values: dict[int, float], destination: Target,
                   objective: float | None = None) -> None:
    buf = io.StringIO()
    if objective is not None:
        buf.write(f"# Objective value = {_num(objective)}\n")
    for v in model.variables:
        buf.write(f"{v.name} {_num(values.get(v.id, 0.0))}\n")
    if hasattr(destination, "write"):
        destination.write(buf.getvalue())  # type: ignore[union-attr]
    else:
        Path(destination).write_text(buf.getvalue())


def import_solution(source: Target, model: MilpModel) -> Solution:
    """Read "name value" pairs (missing variables are 0) and check the point.

    A point violating a bound, an integrality requirement or a row by more
    than 1e-6 gives an Infeasible solution whose stats name the offender.
    """
    text = _read_text(source)
    by_name = {v.name: v.id for v in model.variables}
    values = {v.id: 0.0 for v in model.variables}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.replace("=", " ").split()
        if len(toks) != 2:
            raise LPParseError(lineno, f"expected 'name value', got {raw.strip()!r}")
        name, val = toks
        if name not in by_name:
            raise LPParseError(lineno, f"unknown variable {name!r}")
        try:
            values[by_name[name]] = float(val)
        except ValueError:
            raise LPParseError(lineno, f"bad value {val!r} for {name}") from None

    obj = model.objective_value(values)
    stats: dict = {"nodes": 0, "wall_time": 0.0}
    for v in model.variables:
        x = values[v.id]
        if x < v.lb - VIOLATION_TOL or x > v.ub + VIOLATION_TOL:
            stats["violated"] = v.name
            return Solution(INFEASIBLE, obj, -math.inf, values, stats)
        if v.kind == BINARY and min(abs(x), abs(x - 1.0)) > VIOLATION_TOL:
            stats["violated"] = v.name
            return Solution(INFEASIBLE, obj, -math.inf, values, stats)
    worst, row = model.max_violation(values)
    if worst > VIOLATION_TOL:
        stats["violated"] = row
        return Solution(INFEASIBLE, obj, -math.inf, values, stats)
    return Solution(FEASIBLE, obj, -math.inf, values, stats)
