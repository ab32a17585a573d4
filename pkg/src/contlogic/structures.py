"""Continuous vocabularies and finitely-presented metric structures.

A signature declares real-valued predicate symbols (each with an arity, a
modulus, and a bound interval) and point-valued function symbols (arity and
modulus).  The binary distance symbol ``d`` is always present with modulus
r0+r1 and bound [0,1].  Structures are finite point sets with exact rational
distance matrices and total predicate/function tables.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Mapping, Sequence

from .numerics import (
    Interval,
    Modulus,
    NumericsError,
    UNIT,
    eval_modulus,
    format_rational,
    parse_modulus,
    rat,
    sum_of_coordinates,
)

DISTANCE = "d"

_RESERVED = {"sup", "inf", "supN", "infN", "max", "min", "tminus", "abs", "dOmega"}
_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class SignatureError(ValueError):
    pass


class StructureFormatError(ValueError):
    """Raised on malformed structure documents; message carries the field path."""


def _check_symbol_name(name: str):
    if not _NAME_RE.match(name):
        raise SignatureError(f"bad symbol name {name!r}")
    if name in _RESERVED:
        raise SignatureError(f"symbol name {name!r} is a reserved keyword")
    if re.fullmatch(r"x\d+", name):
        raise SignatureError(f"symbol name {name!r} collides with variable syntax")


@dataclass(frozen=True)
class PredicateSymbol:
    name: str
    arity: int
    modulus: Modulus
    bound: Interval

    def __post_init__(self):
        _check_symbol_name(self.name)
        if self.arity < 0:
            raise SignatureError(f"negative arity for {self.name}")
        object.__setattr__(self, "modulus", self.modulus.with_arity(max(self.arity, self.modulus.arity)))
        if self.modulus.arity != self.arity:
            raise SignatureError(
                f"predicate {self.name}: modulus arity {self.modulus.arity} != {self.arity}"
            )


@dataclass(frozen=True)
class FunctionSymbol:
    name: str
    arity: int
    modulus: Modulus

    def __post_init__(self):
        _check_symbol_name(self.name)
        if self.arity < 0:
            raise SignatureError(f"negative arity for {self.name}")
        object.__setattr__(self, "modulus", self.modulus.with_arity(max(self.arity, self.modulus.arity)))
        if self.modulus.arity != self.arity:
            raise SignatureError(
                f"function {self.name}: modulus arity {self.modulus.arity} != {self.arity}"
            )


def distance_symbol() -> PredicateSymbol:
    return PredicateSymbol(DISTANCE, 2, parse_modulus("r0+r1", 2), UNIT)


class Signature:
    """Symbol table; the distance predicate is always injected first."""

    def __init__(
        self,
        predicates: Sequence[PredicateSymbol] = (),
        functions: Sequence[FunctionSymbol] = (),
    ):
        self.predicates: dict[str, PredicateSymbol] = {}
        self.functions: dict[str, FunctionSymbol] = {}
        d = distance_symbol()
        self.predicates[d.name] = d
        for p in predicates:
            if p.name == DISTANCE:
                if p.arity != 2 or p.bound != UNIT:
                    raise SignatureError("the distance symbol is fixed: arity 2, bound [0,1]")
                continue
            if p.name in self.predicates or p.name in self.functions:
                raise SignatureError(f"duplicate symbol {p.name!r}")
            self.predicates[p.name] = p
        for f in functions:
            if f.name in self.predicates or f.name in self.functions:
                raise SignatureError(f"duplicate symbol {f.name!r}")
            self.functions[f.name] = f

    @property
    def relational(self) -> bool:
        return not self.functions

    def predicate(self, name: str) -> PredicateSymbol:
        if name not in self.predicates:
            raise SignatureError(f"unknown predicate {name!r}")
        return self.predicates[name]

    def function(self, name: str) -> FunctionSymbol:
        if name not in self.functions:
            raise SignatureError(f"unknown function {name!r}")
        return self.functions[name]

    def __eq__(self, other):
        return (
            isinstance(other, Signature)
            and self.predicates == other.predicates
            and self.functions == other.functions
        )

    def __repr__(self):
        preds = ",".join(self.predicates)
        funcs = ",".join(self.functions)
        return f"Signature(predicates=[{preds}], functions=[{funcs}])"


class MetricStructure:
    """Finite metric structure: points, distances, predicate and function tables.

    Tables are total maps from index tuples; the distance predicate reads the
    matrix directly and has no separate table.  Instances are immutable by
    convention after construction.
    """

    def __init__(
        self,
        signature: Signature,
        points: Sequence[str],
        dist: Sequence[Sequence[Fraction]],
        pred_tables: Mapping[str, Mapping[tuple, Fraction]] | None = None,
        func_tables: Mapping[str, Mapping[tuple, int]] | None = None,
        name: str = "",
    ):
        self.signature = signature
        self.points = list(points)
        if len(set(self.points)) != len(self.points):
            raise StructureFormatError("duplicate point names")
        n = len(self.points)
        self.dist = [[rat(v) for v in row] for row in dist]
        if len(self.dist) != n or any(len(row) != n for row in self.dist):
            raise StructureFormatError("distance matrix shape does not match points")
        self.pred_tables = {
            name_: {tuple(k): rat(v) for k, v in table.items()}
            for name_, table in (pred_tables or {}).items()
        }
        self.func_tables = {
            name_: {tuple(k): int(v) for k, v in table.items()}
            for name_, table in (func_tables or {}).items()
        }
        self.name = name
        self._check_tables_total()

    def _check_tables_total(self):
        n = len(self.points)
        for p in self.signature.predicates.values():
            if p.name == DISTANCE:
                continue
            table = self.pred_tables.get(p.name)
            if table is None:
                raise StructureFormatError(f"missing table for predicate {p.name}")
            expected = set(product(range(n), repeat=p.arity))
            if set(table) != expected:
                raise StructureFormatError(f"table for {p.name} is not total")
        for f in self.signature.functions.values():
            table = self.func_tables.get(f.name)
            if table is None:
                raise StructureFormatError(f"missing table for function {f.name}")
            expected = set(product(range(n), repeat=f.arity))
            if set(table) != expected:
                raise StructureFormatError(f"table for {f.name} is not total")
            for v in table.values():
                if not 0 <= v < n:
                    raise StructureFormatError(f"function {f.name} maps outside the domain")
        extra_p = set(self.pred_tables) - set(self.signature.predicates)
        extra_f = set(self.func_tables) - set(self.signature.functions)
        if extra_p or extra_f:
            raise StructureFormatError(f"tables for undeclared symbols: {extra_p | extra_f}")

    def size(self) -> int:
        return len(self.points)

    def d(self, i: int, j: int) -> Fraction:
        return self.dist[i][j]

    def pred_value(self, name: str, args: tuple) -> Fraction:
        if name == DISTANCE:
            return self.dist[args[0]][args[1]]
        return self.pred_tables[name][args]

    def func_value(self, name: str, args: tuple) -> int:
        return self.func_tables[name][args]

    def point_index(self, name: str) -> int:
        try:
            return self.points.index(name)
        except ValueError:
            raise StructureFormatError(f"unknown point {name!r}") from None

    def __repr__(self):
        label = self.name or f"{len(self.points)}pt"
        return f"MetricStructure({label}, sig={list(self.signature.predicates)})"


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate_structure(s: MetricStructure) -> list[str]:
    """Full axiom check; returns one message per violation (empty when valid).

    Each message names the failed axiom, the witnessing tuples, and both
    sides of the failed inequality.
    """
    out: list[str] = []
    pts = s.points
    n = len(pts)
    for i in range(n):
        if s.dist[i][i] != 0:
            out.append(f"metric: d({pts[i]},{pts[i]}) = {format_rational(s.dist[i][i])} != 0")
    for i in range(n):
        for j in range(n):
            v = s.dist[i][j]
            if not UNIT.contains(v):
                out.append(f"metric: d({pts[i]},{pts[j]}) = {format_rational(v)} outside [0,1]")
            if i != j and v <= 0:
                out.append(f"metric: d({pts[i]},{pts[j]}) = {format_rational(v)} not positive")
            if s.dist[i][j] != s.dist[j][i]:
                out.append(
                    f"metric: distance not symmetric at ({pts[i]},{pts[j]}): "
                    f"{format_rational(s.dist[i][j])} != {format_rational(s.dist[j][i])}"
                )
    for i in range(n):
        for j in range(n):
            for k in range(n):
                lhs = s.dist[i][k]
                rhs = s.dist[i][j] + s.dist[j][k]
                if lhs > rhs:
                    out.append(
                        f"metric: triangle fails at ({pts[i]},{pts[j]},{pts[k]}): "
                        f"{format_rational(lhs)} > {format_rational(rhs)}"
                    )
    for p in s.signature.predicates.values():
        if p.name == DISTANCE:
            continue
        table = s.pred_tables[p.name]
        for args, value in table.items():
            if not p.bound.contains(value):
                names = ",".join(pts[a] for a in args)
                out.append(
                    f"bound: {p.name}({names}) = {format_rational(value)} outside {p.bound}"
                )
        for a in product(range(n), repeat=p.arity):
            for b in product(range(n), repeat=p.arity):
                gap = abs(table[a] - table[b])
                allowed = eval_modulus(p.modulus, [s.dist[x][y] for x, y in zip(a, b)])
                if gap > allowed:
                    na = ",".join(pts[x] for x in a)
                    nb = ",".join(pts[x] for x in b)
                    out.append(
                        f"modulus: |{p.name}({na})-{p.name}({nb})| = {format_rational(gap)}"
                        f" > {p.name}-modulus value {format_rational(allowed)}"
                    )
    for f in s.signature.functions.values():
        table = s.func_tables[f.name]
        for a in product(range(n), repeat=f.arity):
            for b in product(range(n), repeat=f.arity):
                gap = s.dist[table[a]][table[b]]
                allowed = eval_modulus(f.modulus, [s.dist[x][y] for x, y in zip(a, b)])
                if gap > allowed:
                    na = ",".join(pts[x] for x in a)
                    nb = ",".join(pts[x] for x in b)
                    out.append(
                        f"modulus: d({f.name}({na}),{f.name}({nb})) = {format_rational(gap)}"
                        f" > {f.name}-modulus value {format_rational(allowed)}"
                    )
    return out


# ---------------------------------------------------------------------------
# Document format (JSON)
# ---------------------------------------------------------------------------


def _rat_to_doc(q: Fraction):
    q = rat(q)
    return q.numerator if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _rat_from_doc(value, where: str) -> Fraction:
    if isinstance(value, bool):
        raise StructureFormatError(f"{where}: boolean is not a rational")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return rat(value)
        except NumericsError as exc:
            raise StructureFormatError(f"{where}: {exc}") from None
    raise StructureFormatError(f"{where}: expected \"p/q\" string or integer, got {value!r}")


_TUPLE_KEY = re.compile(r"^\(\s*([^()]*)\s*\)$")


def _tuple_key_parse(key: str, arity: int, points: Sequence[str], where: str) -> tuple:
    m = _TUPLE_KEY.match(key)
    if not m:
        raise StructureFormatError(f"{where}: bad tuple key {key!r}")
    parts = [p.strip() for p in m.group(1).split(",")] if m.group(1).strip() else []
    if len(parts) != arity:
        raise StructureFormatError(f"{where}: key {key!r} has {len(parts)} entries, need {arity}")
    out = []
    for p in parts:
        if p not in points:
            raise StructureFormatError(f"{where}: unknown point {p!r} in key {key!r}")
        out.append(points.index(p))
    return tuple(out)


def _tuple_key_format(args: tuple, points: Sequence[str]) -> str:
    return "(" + ",".join(points[a] for a in args) + ")"


def save_structure(s: MetricStructure) -> dict:
    """Canonical JSON-ready document; rationals round-trip bit-exact."""
    doc: dict = {
        "signature": {
            "predicates": [
                {
                    "name": p.name,
                    "arity": p.arity,
                    "modulus": p.modulus.to_text(),
                    "bound": [_rat_to_doc(p.bound.lo), _rat_to_doc(p.bound.hi)],
                }
                for p in s.signature.predicates.values()
                if p.name != DISTANCE
            ],
            "functions": [
                {"name": f.name, "arity": f.arity, "modulus": f.modulus.to_text()}
                for f in s.signature.functions.values()
            ],
        },
        "points": list(s.points),
        "distance": [[_rat_to_doc(v) for v in row] for row in s.dist],
        "predicates": {
            name: {
                _tuple_key_format(args, s.points): _rat_to_doc(v)
                for args, v in sorted(table.items())
            }
            for name, table in sorted(s.pred_tables.items())
        },
        "functions": {
            name: {
                _tuple_key_format(args, s.points): s.points[v]
                for args, v in sorted(table.items())
            }
            for name, table in sorted(s.func_tables.items())
        },
    }
    if s.name:
        doc["name"] = s.name
    return doc


def load_structure(doc) -> tuple[MetricStructure, list[str]]:
    """Parse a structure document.

    Returns the raw structure together with its validation report; callers
    that require validity must check the report themselves.  Malformed
    documents raise StructureFormatError naming the offending field.
    """
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise StructureFormatError(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise StructureFormatError("structure document must be a JSON object")
    sigdoc = doc.get("signature", {})
    preds = []
    for i, p in enumerate(sigdoc.get("predicates", [])):
        where = f"signature.predicates[{i}]"
        try:
            bound = Interval(
                _rat_from_doc(p["bound"][0], where),
                _rat_from_doc(p["bound"][1], where),
            )
            preds.append(
                PredicateSymbol(p["name"], int(p["arity"]), parse_modulus(p["modulus"], int(p["arity"])), bound)
            )
        except (KeyError, IndexError, TypeError) as exc:
            raise StructureFormatError(f"{where}: missing or bad field ({exc})") from None
        except (NumericsError, SignatureError) as exc:
            raise StructureFormatError(f"{where}: {exc}") from None
    funcs = []
    for i, f in enumerate(sigdoc.get("functions", [])):
        where = f"signature.functions[{i}]"
        try:
            funcs.append(
                FunctionSymbol(f["name"], int(f["arity"]), parse_modulus(f["modulus"], int(f["arity"])))
            )
        except (KeyError, TypeError) as exc:
            raise StructureFormatError(f"{where}: missing or bad field ({exc})") from None
        except (NumericsError, SignatureError) as exc:
            raise StructureFormatError(f"{where}: {exc}") from None
    try:
        signature = Signature(preds, funcs)
    except SignatureError as exc:
        raise StructureFormatError(f"signature: {exc}") from None

    points = doc.get("points")
    if not isinstance(points, list) or not points or not all(isinstance(p, str) for p in points):
        raise StructureFormatError("points: expected a nonempty list of names")
    distdoc = doc.get("distance")
    if not isinstance(distdoc, list) or len(distdoc) != len(points):
        raise StructureFormatError("distance: expected a square matrix matching points")
    dist = []
    for i, row in enumerate(distdoc):
        if not isinstance(row, list) or len(row) != len(points):
            raise StructureFormatError(f"distance[{i}]: row length mismatch")
        dist.append([_rat_from_doc(v, f"distance[{i}][{j}]") for j, v in enumerate(row)])

    pred_tables = {}
    for name, table in (doc.get("predicates") or {}).items():
        sym = signature.predicates.get(name)
        if sym is None:
            raise StructureFormatError(f"predicates.{name}: undeclared predicate")
        parsed = {}
        for key, v in table.items():
            args = _tuple_key_parse(key, sym.arity, points, f"predicates.{name}")
            parsed[args] = _rat_from_doc(v, f"predicates.{name}.{key}")
        pred_tables[name] = parsed
    func_tables = {}
    for name, table in (doc.get("functions") or {}).items():
        sym = signature.functions.get(name)
        if sym is None:
            raise StructureFormatError(f"functions.{name}: undeclared function")
        parsed = {}
        for key, v in table.items():
            args = _tuple_key_parse(key, sym.arity, points, f"functions.{name}")
            if not isinstance(v, str) or v not in points:
                raise StructureFormatError(f"functions.{name}.{key}: unknown point {v!r}")
            parsed[args] = points.index(v)
        func_tables[name] = parsed

    structure = MetricStructure(
        signature, points, dist, pred_tables, func_tables, name=doc.get("name", "")
    )
    return structure, validate_structure(structure)


def load_structure_file(path) -> tuple[MetricStructure, list[str]]:
    with open(path, "r", encoding="utf-8") as fh:
        return load_structure(fh.read())


def save_structure_file(s: MetricStructure, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(save_structure(s), fh, indent=2, sort_keys=False)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Classical structures via the discrete metric
# ---------------------------------------------------------------------------


@dataclass
class DiscreteEncoding:
    """Classical finite first-order structure with {0,1}-valued relations."""

    points: list[str]
    relations: dict[str, dict[tuple, int]] = field(default_factory=dict)
    functions: dict[str, dict[tuple, int]] = field(default_factory=dict)
    name: str = ""


def encode_discrete(classical: DiscreteEncoding) -> MetricStructure:
    """Discrete-metric encoding: relation values copied (0 plays true), moduli
    set to sum-of-coordinates, distance 1 between distinct points."""
    n = len(classical.points)
    preds = []
    pred_tables = {}
    for name, table in classical.relations.items():
        arities = {len(k) for k in table}
        if len(arities) != 1:
            raise StructureFormatError(f"relation {name}: inconsistent arities")
        arity = arities.pop()
        for args, v in table.items():
            if v not in (0, 1):
                raise StructureFormatError(
                    f"relation {name}{args}: value {v!r} is not in {{0,1}}"
                )
        preds.append(PredicateSymbol(name, arity, sum_of_coordinates(arity), UNIT))
        pred_tables[name] = {tuple(k): Fraction(v) for k, v in table.items()}
    funcs = []
    func_tables = {}
    for name, table in classical.functions.items():
        arities = {len(k) for k in table}
        if len(arities) != 1:
            raise StructureFormatError(f"function {name}: inconsistent arities")
        arity = arities.pop()
        funcs.append(FunctionSymbol(name, arity, sum_of_coordinates(arity)))
        func_tables[name] = {tuple(k): int(v) for k, v in table.items()}
    dist = [[Fraction(0) if i == j else Fraction(1) for j in range(n)] for i in range(n)]
    return MetricStructure(
        Signature(preds, funcs),
        classical.points,
        dist,
        pred_tables,
        func_tables,
        name=classical.name,
    )
