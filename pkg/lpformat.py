"""
LP-format text for external solvers.

export_lp_text renders a LinearProgramSpec through templates/lp/model.lp in
the CPLEX LP dialect (objective, Subject To, Bounds, Binaries, End) with
17 significant digits. parse_lp_text reads the same subset back.
"""

from __future__ import annotations

import re

import numpy as np
from jinja2 import Environment, FileSystemLoader
from scipy import sparse

import config
from backend import EQ, GE, INF, LE, MAXIMIZE, MINIMIZE, LinearProgramSpec
from errors import SchemaError

_TERMS_PER_LINE = 6

_env = Environment(loader=FileSystemLoader(config.TEMPLATE_DIR), trim_blocks=True, lstrip_blocks=True)


def lpnum(value: float) -> str:
    """Format a number for LP text: 17 significant digits, explicit infinities."""
    value = float(value)
    if value == INF:
        return "+inf"
    if value == -INF:
        return "-inf"
    return format(value, ".17g")


_env.filters["lpnum"] = lpnum

_NAME_BAD = re.compile(r"[^A-Za-z0-9_.]")


def _safe_names(names: list[str]) -> list[str]:
    seen: set[str] = set()
    out = []
    for raw in names:
        name = _NAME_BAD.sub("_", raw) or "v"
        if name[0].isdigit() or name[0] == ".":
            name = "_" + name
        base, k = name, 1
        while name in seen:
            name = f"{base}_{k}"
            k += 1
        seen.add(name)
        out.append(name)
    return out


def _expression(columns, values, names: list[str]) -> str:
    pieces = []
    for j, v in zip(columns, values):
        if v == 0.0:
            continue
        body = f"{lpnum(abs(v))} {names[j]}"
        if not pieces:
            pieces.append(body if v > 0 else f"- {body}")
        else:
            pieces.append(f"{'+' if v > 0 else '-'} {body}")
    if not pieces:
        return f"0 {names[0]}" if names else "0"
    lines = [" ".join(pieces[i:i + _TERMS_PER_LINE]) for i in range(0, len(pieces), _TERMS_PER_LINE)]
    return "\n   ".join(lines)


def export_lp_text(spec: LinearProgramSpec, title: str = "drlp model") -> str:
    names = _safe_names(spec.variable_names())
    row_names = _safe_names(spec.constraint_names())
    matrix = spec.matrix.sorted_indices()
    rows = []
    for i in range(spec.n_rows):
        start, end = matrix.indptr[i], matrix.indptr[i + 1]
        rows.append({
            "name": row_names[i],
            "expression": _expression(matrix.indices[start:end], matrix.data[start:end], names),
            "sense": spec.senses[i],
            "rhs": spec.rhs[i],
        })
    bounds = []
    for name, lo, hi in zip(names, spec.lower, spec.upper):
        if lo == -INF and hi == INF:
            bounds.append(f"{name} free")
        else:
            bounds.append(f"{lpnum(lo)} <= {name} <= {lpnum(hi)}")
    nonzero = np.flatnonzero(spec.objective)
    text = _env.get_template("lp/model.lp").render(
        title=title,
        maximize=spec.sense == MAXIMIZE,
        n_vars=spec.n_vars,
        n_rows=spec.n_rows,
        objective=_expression(nonzero, spec.objective[nonzero], names),
        rows=rows,
        bounds=bounds,
        binaries=[names[j] for j in np.flatnonzero(spec.binary)],
    )
    return text + "\n"


# --- Import ---

_TOKEN = re.compile(
    r"""
    (?P<op><=|>=|=<|=>|<|>|=)
  | (?P<num>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|[+-]?inf(?:inity)?\b)
  | (?P<sign>[+-])
  | (?P<colon>:)
  | (?P<name>[A-Za-z_][\w.\[\]]*)
  | (?P<space>\s+)
  | (?P<bad>.)
    """,
    re.VERBOSE | re.IGNORECASE,
)

_SENSES = {"<": LE, "<=": LE, "=<": LE, ">": GE, ">=": GE, "=>": GE, "=": EQ}

_SECTIONS = {
    "minimize": "objective", "minimum": "objective", "min": "objective",
    "maximize": "objective", "maximum": "objective", "max": "objective",
    "subject to": "constraints", "such that": "constraints", "st": "constraints", "s.t.": "constraints",
    "bounds": "bounds", "bound": "bounds",
    "binaries": "binaries", "binary": "binaries", "bin": "binaries",
}


def _tokens(text: str, where: str) -> list[tuple[str, str]]:
    out = []
    for match in _TOKEN.finditer(text):
        kind = match.lastgroup
        if kind == "space":
            continue
        if kind == "bad":
            raise SchemaError(f"{where}: unexpected character '{match.group()}'")
        out.append((kind, match.group()))
    return out


def _terms(tokens, i: int, where: str):
    terms = []
    sign, coef = 1.0, None
    while i < len(tokens):
        kind, text = tokens[i]
        if kind == "op":
            break
        if kind == "sign":
            sign = -sign if text == "-" else sign
        elif kind == "num":
            coef = float(text)
        elif kind == "name":
            terms.append((text, sign * (1.0 if coef is None else coef)))
            sign, coef = 1.0, None
        else:
            raise SchemaError(f"{where}: unexpected '{text}'")
        i += 1
    if coef is not None:
        raise SchemaError(f"{where}: dangling constant {coef}")
    return terms, i


def _signed_number(tokens, i: int, where: str) -> tuple[float, int]:
    sign = 1.0
    while i < len(tokens) and tokens[i][0] == "sign":
        sign = -sign if tokens[i][1] == "-" else sign
        i += 1
    if i >= len(tokens) or tokens[i][0] != "num":
        raise SchemaError(f"{where}: expected a number")
    return sign * float(tokens[i][1]), i + 1


def _parse_bound(tokens, bounds: dict, where: str) -> None:
    if len(tokens) == 2 and tokens[0][0] == "name" and tokens[1][1].lower() == "free":
        bounds[tokens[0][1]] = (-INF, INF)
        return
    items = []
    i = 0
    while i < len(tokens):
        kind, text = tokens[i]
        if kind in ("sign", "num"):
            value, i = _signed_number(tokens, i, where)
            items.append(("num", value))
        else:
            items.append((kind, text))
            i += 1
    kinds = [k for k, _ in items]
    if kinds == ["num", "op", "name", "op", "num"]:
        bounds[items[2][1]] = (items[0][1], items[4][1])
        return
    if kinds in (["name", "op", "num"], ["num", "op", "name"]):
        flipped = kinds[0] == "num"
        name = items[2][1] if flipped else items[0][1]
        value = items[0][1] if flipped else items[2][1]
        sense = _SENSES[items[1][1]]
        if flipped and sense != EQ:
            sense = GE if sense == LE else LE
        lo, hi = bounds.get(name, (0.0, INF))
        if sense == LE:
            hi = value
        elif sense == GE:
            lo = value
        else:
            lo = hi = value
        bounds[name] = (lo, hi)
        return
    raise SchemaError(f"{where}: unrecognized bound")


def parse_lp_text(text: str) -> LinearProgramSpec:
    """Read an LP-format document (the subset written by export_lp_text)."""
    sense = MINIMIZE
    section = None
    chunks: dict[str, list[tuple[int, str]]] = {"objective": [], "constraints": [], "bounds": [], "binaries": []}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = line.lower()
        if key in _SECTIONS:
            section = _SECTIONS[key]
            if section == "objective":
                sense = MAXIMIZE if key.startswith("max") else MINIMIZE
            continue
        if key in ("general", "generals", "gen"):
            raise SchemaError(f"line {lineno}: general integer variables are not supported")
        if key == "end":
            break
        if section is None:
            raise SchemaError(f"line {lineno}: text before the objective section")
        chunks[section].append((lineno, line))

    order: list[str] = []

    def seen(name: str) -> None:
        if name not in index_of:
            index_of[name] = len(order)
            order.append(name)

    index_of: dict[str, int] = {}

    objective_tokens = _tokens(" ".join(line for _, line in chunks["objective"]), "objective")
    if len(objective_tokens) >= 2 and objective_tokens[0][0] == "name" and objective_tokens[1][0] == "colon":
        objective_tokens = objective_tokens[2:]
    objective_terms, end = _terms(objective_tokens, 0, "objective")
    if end != len(objective_tokens):
        raise SchemaError("objective: unexpected relational operator")

    rows = []
    tokens = _tokens(" ".join(line for _, line in chunks["constraints"]), "constraints")
    i = 0
    while i < len(tokens):
        name = None
        if tokens[i][0] == "name" and i + 1 < len(tokens) and tokens[i + 1][0] == "colon":
            name = tokens[i][1]
            i += 2
        where = f"constraint {name or len(rows)}"
        terms, i = _terms(tokens, i, where)
        if i >= len(tokens):
            raise SchemaError(f"{where}: missing relational operator")
        op = _SENSES[tokens[i][1]]
        rhs, i = _signed_number(tokens, i + 1, where)
        rows.append((name or f"c{len(rows)}", terms, op, rhs))

    bounds: dict[str, tuple[float, float]] = {}
    for lineno, line in chunks["bounds"]:
        where = f"line {lineno}"
        _parse_bound(_tokens(line, where), bounds, where)
    binaries = [name for _, line in chunks["binaries"] for name in line.split()]

    for name in bounds:
        seen(name)
    for name, _ in objective_terms:
        seen(name)
    for _, terms, _, _ in rows:
        for name, _ in terms:
            seen(name)
    for name in binaries:
        seen(name)

    n = len(order)
    objective = np.zeros(n)
    for name, coef in objective_terms:
        objective[index_of[name]] += coef
    r_idx, c_idx, vals = [], [], []
    for r, (_, terms, _, _) in enumerate(rows):
        for name, coef in terms:
            r_idx.append(r)
            c_idx.append(index_of[name])
            vals.append(coef)
    matrix = sparse.coo_matrix((vals, (r_idx, c_idx)), shape=(len(rows), n)).tocsr()
    binary = np.zeros(n, dtype=bool)
    binary[[index_of[name] for name in binaries]] = True
    lower = np.zeros(n)
    upper = np.full(n, INF)
    upper[binary] = 1.0
    for name, (lo, hi) in bounds.items():
        lower[index_of[name]], upper[index_of[name]] = lo, hi

    return LinearProgramSpec(
        objective=objective,
        matrix=matrix,
        senses=tuple(op for _, _, op, _ in rows),
        rhs=np.array([rhs for _, _, _, rhs in rows], dtype=float),
        lower=lower,
        upper=upper,
        binary=binary,
        sense=sense,
        names=tuple(order),
        row_names=tuple(name for name, _, _, _ in rows),
    )
