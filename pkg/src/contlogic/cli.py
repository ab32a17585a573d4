"""Command-line surface: batch analysis over structure files with
machine-readable JSON reports plus a human summary on standard output."""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from . import __version__
from .numerics import (
    NumericsError,
    eval_modulus,
    format_rational,
    parse_modulus,
    parse_rational,
    rat,
    universal_modulus,
    weak_modulus_from_doc,
)
from .structures import (
    MetricStructure,
    StructureFormatError,
    SignatureError,
    load_structure_file,
)
from .formulas import (
    FormulaError,
    infer_bound,
    infer_modulus,
    parse_formula,
    prenex,
    quant_rank,
)
from .evaluator import EvalError, Evaluator, eval_all
from .fragments import DistinguishingFamily, qf_basis, qf_fragment, type_fragment
from .baf import BafConfig, BafError, approx_iso_decide, baf_compute, extract_iso
from .orbits import (
    OrbitError,
    automorphisms,
    orbit_distance,
    orbit_of,
    orbit_partition,
    orbit_witness,
    scott_rank,
    scott_sentence,
    sentence_value,
    synthesize_orbit_formula,
)
from .types_support import (
    TypesError,
    check_support,
    condition_set_from_doc,
    find_support,
    fragment_type,
    henkin_run,
    theta,
)

DOMAIN_ERRORS = (
    NumericsError,
    StructureFormatError,
    SignatureError,
    FormulaError,
    EvalError,
    BafError,
    OrbitError,
    TypesError,
    OSError,
    json.JSONDecodeError,
)

ENV_FRAGMENT_DEPTH = "CONTLOGIC_FRAGMENT_DEPTH"


def _fragment_depth(args) -> int:
    if getattr(args, "fragment_depth", None) is not None:
        return args.fragment_depth
    return int(os.environ.get(ENV_FRAGMENT_DEPTH, "0"))


def _load(path: str) -> MetricStructure:
    structure, report = load_structure_file(path)
    if report:
        raise StructureFormatError(
            f"{path}: structure invalid: {report[0]}"
            + (f" (+{len(report) - 1} more)" if len(report) > 1 else "")
        )
    return structure


def _omega_for(args, structure: MetricStructure):
    selector = getattr(args, "omega", "universal")
    if selector == "universal":
        return universal_modulus(structure.signature)
    with open(selector, "r", encoding="utf-8") as fh:
        return weak_modulus_from_doc(json.load(fh))


def _parse_point_tuple(text: str, s: MetricStructure) -> tuple:
    if not text.strip():
        return ()
    return tuple(s.point_index(p.strip()) for p in text.split(","))


def _parse_assignment(text: str, s: MetricStructure) -> dict[int, int]:
    out = {}
    if not text.strip():
        return out
    for item in text.split(","):
        var, _, point = item.partition("=")
        var = var.strip()
        if not var.startswith("x") or not var[1:].isdigit():
            raise FormulaError(f"bad assignment entry {item!r}; use x<i>=point")
        out[int(var[1:])] = s.point_index(point.strip())
    return out


def _echo_config(args) -> dict:
    skip = {"func"}
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in skip:
            continue
        if isinstance(value, Fraction):
            value = format_rational(value)
        out[key] = value
    return out


def _emit(args, command: str, results: dict, summary: list[str]) -> int:
    report = {
        "tool": "contlogic",
        "version": __version__,
        "command": command,
        "config": _echo_config(args),
        "results": results,
    }
    for line in summary:
        print(line)
    text = json.dumps(report, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        print(f"report written to {args.out}")
    else:
        print(text)
    return 0


def _rat_str(v) -> str:
    return format_rational(v) if isinstance(v, Fraction) else str(v)


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    structure, report = load_structure_file(args.structure)
    results = {"valid": not report, "violations": report, "points": structure.points}
    summary = [
        f"{args.structure}: " + ("valid" if not report else f"{len(report)} violation(s)")
    ] + [f"  {v}" for v in report[:10]]
    return _emit(args, "validate", results, summary)


def cmd_eval(args) -> int:
    s = _load(args.structure)
    omega = _omega_for(args, s)
    phi = parse_formula(args.formula, s.signature, omega)
    assignment = _parse_assignment(args.assign or "", s)
    if args.all:
        table = eval_all(phi, s)
        results = {
            "formula": phi.to_text(),
            "table": {
                ",".join(s.points[i] for i in key): format_rational(v)
                for key, v in table.items()
            },
        }
        summary = [f"{phi.to_text()}: {len(table)} assignment(s)"]
    else:
        value = Evaluator(s).eval(phi, assignment)
        results = {"formula": phi.to_text(), "value": format_rational(value)}
        summary = [f"{phi.to_text()} = {format_rational(value)}"]
    return _emit(args, "eval", results, summary)


def cmd_prenex(args) -> int:
    s = _load(args.structure)
    omega = _omega_for(args, s)
    phi = parse_formula(args.formula, s.signature, omega)
    out = prenex(phi)
    results = {"input": phi.to_text(), "prenex": out.to_text()}
    return _emit(args, "prenex", results, [f"prenex: {out.to_text()}"])


def cmd_rank_of(args) -> int:
    s = _load(args.structure)
    omega = _omega_for(args, s)
    phi = parse_formula(args.formula, s.signature, omega)
    r = quant_rank(phi)
    results = {"formula": phi.to_text(), "kind": r.kind, "level": r.level}
    return _emit(args, "rank-of", results, [f"quantifier rank: {r}"])


def cmd_modulus(args) -> int:
    if args.expr:
        m = parse_modulus(args.expr)
        results = {"modulus": m.to_text(), "arity": m.arity}
        summary = [f"modulus: {m.to_text()} (arity {m.arity})"]
        if args.at:
            values = [parse_rational(v) for v in args.at.split(",")]
            value = eval_modulus(m.with_arity(len(values)), values)
            results["value"] = format_rational(value)
            summary.append(f"value at ({args.at}): {format_rational(value)}")
        return _emit(args, "modulus", results, summary)
    s = _load(args.structure)
    omega = _omega_for(args, s)
    phi = parse_formula(args.formula, s.signature, omega)
    results = {
        "formula": phi.to_text(),
        "modulus": infer_modulus(phi).to_text(),
        "bound": [format_rational(phi.bound.lo), format_rational(phi.bound.hi)],
    }
    return _emit(
        args,
        "modulus",
        results,
        [f"inferred modulus: {results['modulus']}", f"inferred bound: {phi.bound}"],
    )


def _baf_config(args, a: MetricStructure) -> BafConfig:
    omega = _omega_for(args, a)
    fragment = None
    depth = _fragment_depth(args)
    if depth:
        fragment = {
            n: qf_fragment(a.signature, omega, n, depth)
            for n in range(args.max_tuple_len + 1)
        }
    return BafConfig(omega, parse_rational(args.t), args.depth, args.max_tuple_len, fragment)


def cmd_baf(args) -> int:
    a, b = _load(args.a), _load(args.b)
    cfg = _baf_config(args, a)
    out = baf_compute(a, b, cfg)
    per_level = [
        {str(length): len(pairs) for length, pairs in sorted(level.items())}
        for level in out.levels
    ]
    results = {
        "root_survives": out.contains((), ()),
        "pairs_per_level": per_level,
    }
    summary = [
        f"root pair survives depth {args.depth}: {results['root_survives']}",
        f"surviving pairs per level: {per_level}",
    ]
    return _emit(args, "baf", results, summary)


def cmd_iso(args) -> int:
    a, b = _load(args.a), _load(args.b)
    cfg = _baf_config(args, a)
    verdict = approx_iso_decide(a, b, cfg)
    results = {
        "verdict": "yes-at-depth" if verdict.isomorphic else "no",
        "depth": verdict.depth,
        "t": format_rational(verdict.t),
        "engine": verdict.engine,
        "fragment_sizes": {str(k): v for k, v in verdict.fragment_sizes.items()},
    }
    summary = [f"verdict: {results['verdict']} (engine {verdict.engine})"]
    if not verdict.isomorphic:
        results["failed_at_level"] = verdict.failed_at_level
        results["extension_trace"] = verdict.extension_trace
        results["witness"] = verdict.witness.to_text()
        results["witness_values"] = [
            format_rational(verdict.witness_gap[0]),
            format_rational(verdict.witness_gap[1]),
        ]
        summary.append(
            f"witness gap: {results['witness_values'][0]} vs {results['witness_values'][1]}"
        )
    if args.extract and a.size() == b.size():
        extraction = extract_iso(a, b)
        results["extraction"] = {
            "mapping": extraction.mapping,
            "discrepancy": format_rational(extraction.discrepancy),
            "isomorphism": extraction.isomorphism,
        }
        summary.append(
            f"best bijection discrepancy: {format_rational(extraction.discrepancy)}"
        )
    return _emit(args, "iso", results, summary)


def cmd_autos(args) -> int:
    s = _load(args.structure)
    group = automorphisms(s)
    results = {
        "order": len(group),
        "permutations": [[s.points[i] for i in g] for g in group],
    }
    return _emit(args, "autos", results, [f"automorphism group order: {len(group)}"])


def cmd_orbit(args) -> int:
    s = _load(args.structure)
    omega = _omega_for(args, s)
    tup = _parse_point_tuple(args.tuple, s)
    if not tup:
        raise OrbitError("orbit needs a nonempty tuple")
    autos = automorphisms(s)
    orb = orbit_of(s, tup, autos)
    dist = orbit_distance(s, tup, omega, autos)
    family = DistinguishingFamily(s, omega)
    depth = _fragment_depth(args)
    fragment = list(family.basis(len(tup)))
    if depth:
        fragment += [
            family.formula(t, depth - 1)
            for orbit_set in orbit_partition(s, len(tup), autos)
            for t in [min(orbit_set)]
        ]
    syn = synthesize_orbit_formula(s, tup, omega, fragment, autos)
    results = {
        "orbit": sorted(",".join(s.points[i] for i in m) for m in orb),
        "distance": {
            ",".join(s.points[i] for i in k): format_rational(v) for k, v in dist.items()
        },
        "formula": syn.formula.to_text(),
        "certified": syn.certified,
        "separation_failures": [list(f) for f in syn.separation_failures],
        "delta_table": {
            format_rational(eps): (format_rational(d) if d is not None else None)
            for eps, d in syn.delta_table.items()
        },
    }
    summary = [
        f"orbit size: {len(orb)}",
        f"defining formula certified: {syn.certified}",
    ]
    return _emit(args, "orbit", results, summary)


def cmd_rank(args) -> int:
    s = _load(args.structure)
    omega = _omega_for(args, s)
    rk = scott_rank(s, omega, max_rank=args.max_rank, max_tuple_len=args.max_tuple_len)
    results = {
        "rank": rk.rank,
        "max_rank": rk.max_rank,
        "rank_certified": rk.rank_certified,
        "witness_ranks": {
            ",".join(s.points[i] for i in k): str(v) for k, v in rk.witness_ranks.items()
        },
        "log": rk.level_log,
    }
    label = rk.rank if rk.rank is not None else f"> {rk.max_rank}"
    return _emit(args, "rank", results, [f"rank estimate: {label}"])


def cmd_scott(args) -> int:
    s = _load(args.structure)
    omega = _omega_for(args, s)
    art = scott_sentence(
        s, omega, n_max=args.n_max, max_tuple_len=args.max_tuple_len, max_rank=args.max_rank
    )
    results = {
        "rank": art.rank.rank,
        "self_value": format_rational(art.self_value),
        "sentence_rank": str(art.sentence_rank),
        "rank_certified": art.rank_certified,
        "sentence": art.sentence.to_text(),
    }
    summary = [
        f"rank: {art.rank.rank}; sentence rank {art.sentence_rank} "
        f"(certified <= sup^{art.rank.rank + 1}: {art.rank_certified})",
    ]
    if args.self_check:
        ok = art.self_value == 0
        results["self_check"] = ok
        summary.append(f"S(self) = {format_rational(art.self_value)} ({'ok' if ok else 'FAIL'})")
    if args.other:
        other = _load(args.other)
        value = sentence_value(art, other)
        results["other_value"] = format_rational(value)
        summary.append(f"S({args.other}) = {format_rational(value)}")
    return _emit(args, "scott", results, summary)


def cmd_theta(args) -> int:
    s = _load(args.structure)
    omega = _omega_for(args, s)
    psi = parse_formula(args.formula, s.signature, omega)
    th = theta(psi, parse_rational(args.r), parse_rational(args.eps), omega)
    results = {"theta": th.to_text()}
    summary = [f"theta: {th.to_text()}"]
    if args.at is not None:
        tup = _parse_point_tuple(args.at, s)
        value = Evaluator(s).eval(th, dict(zip(sorted(th.free_vars), tup)))
        results["value"] = format_rational(value)
        summary.append(f"value at ({args.at}): {format_rational(value)}")
    return _emit(args, "theta", results, summary)


def _level_fragment(s, omega, family, arity, level):
    if level <= 0:
        return list(family.basis(arity))
    return type_fragment(family, arity, level)


def cmd_type(args) -> int:
    s = _load(args.structure)
    omega = _omega_for(args, s)
    tup = _parse_point_tuple(args.tuple, s)
    family = DistinguishingFamily(s, omega)
    fragment = _level_fragment(s, omega, family, len(tup), args.level)
    ptype = fragment_type(s, tup, fragment)
    results = {
        "arity": ptype.arity,
        "conditions": [
            {"formula": psi.to_text(), "value": format_rational(r)}
            for psi, r in ptype.conditions
        ],
    }
    return _emit(args, "type", results, [f"type with {len(ptype.conditions)} condition(s)"])


def cmd_support(args) -> int:
    s = _load(args.structure)
    omega = _omega_for(args, s)
    tup = _parse_point_tuple(args.tuple, s)
    family = DistinguishingFamily(s, omega)
    autos = automorphisms(s)
    level = args.level
    ptype = fragment_type(s, tup, _level_fragment(s, omega, family, len(tup), level))
    if args.predicate:
        predicate = parse_formula(args.predicate, s.signature, omega)
        report = check_support(s, ptype, predicate, omega=omega)
        results = {"supported": report.ok, "messages": report.messages}
        return _emit(args, "support", results, [f"check: {'ok' if report.ok else 'violated'}"])
    candidates = []
    for orbit_set in orbit_partition(s, len(tup), autos):
        info = orbit_witness(s, omega, min(orbit_set), max(level - 1, 0), family, autos)
        if info is not None:
            candidates.append(info.witness)
    search = find_support(s, ptype, candidates, omega, m_max=args.m_max)
    if search is None:
        results = {"found": False}
        summary = ["support search exhausted: none"]
    else:
        results = {
            "found": True,
            "certified": search.ok,
            "predicate": search.predicate.to_text(),
            "base_delta": format_rational(search.base_delta),
            "messages": search.certification.messages,
        }
        summary = [f"support found (certified: {search.ok})"]
    return _emit(args, "support", results, summary)


def cmd_henkin(args) -> int:
    oracle = _load(args.structure)
    omega = _omega_for(args, oracle)
    if args.seed:
        with open(args.seed, "r", encoding="utf-8") as fh:
            seed = condition_set_from_doc(json.load(fh), oracle.signature, omega)
    else:
        from .types_support import ConditionSet

        seed = ConditionSet([], list(oracle.points))
    assignment = {}
    if args.assign:
        for item in args.assign.split(","):
            name, _, point = item.partition("=")
            assignment[name.strip()] = oracle.point_index(point.strip())
    else:
        assignment = {name: oracle.point_index(name) for name in seed.constants
                      if name in oracle.points}
    result = henkin_run(seed, oracle, assignment, args.stages, omega)
    q = result.quotient
    results = {
        "stages": result.stages,
        "constants": result.constants,
        "classes": q.classes,
        "distance": [[format_rational(v) for v in row] for row in q.dist],
        "conditions": len(result.conditions),
        "log": result.log,
        "omit_reports": result.omit_reports,
    }
    summary = [
        f"ran {result.stages} stage(s); {len(result.constants)} constants, "
        f"{len(q.classes)} quotient class(es), {len(result.conditions)} conditions"
    ]
    return _emit(args, "henkin", results, summary)


# ---------------------------------------------------------------------------
# parser wiring
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contlogic",
        description="Workbench for continuous infinitary logic on finite metric structures",
    )
    parser.add_argument("--version", action="version", version=f"contlogic {__version__}")
    sub = parser.add_subparsers(dest="cmd", required=True)

    def common(p, structure=True):
        if structure:
            p.add_argument("--structure", required=True, help="structure JSON file")
        p.add_argument("--omega", default="universal",
                       help="'universal' or a weak-modulus JSON file")
        p.add_argument("--out", default=None, help="write the JSON report here")
        p.add_argument("--fragment-depth", type=int, default=None,
                       help=f"fragment generation depth (default ${ENV_FRAGMENT_DEPTH} or 0)")

    p = sub.add_parser("validate", help="check structure axioms")
    p.add_argument("--structure", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("eval", help="evaluate a formula")
    common(p)
    p.add_argument("--formula", required=True)
    p.add_argument("--assign", default="", help="x0=a,x1=b")
    p.add_argument("--all", action="store_true", help="tabulate all assignments")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("prenex", help="prenex normal form")
    common(p)
    p.add_argument("--formula", required=True)
    p.set_defaults(func=cmd_prenex)

    p = sub.add_parser("rank-of", help="quantifier complexity of a formula")
    common(p)
    p.add_argument("--formula", required=True)
    p.set_defaults(func=cmd_rank_of)

    p = sub.add_parser("modulus", help="inferred modulus/bound, or evaluate an expression")
    common(p)
    p.add_argument("--formula", default=None)
    p.add_argument("--expr", default=None, help="modulus expression text")
    p.add_argument("--at", default=None, help="comma-separated rationals")
    p.set_defaults(func=cmd_modulus)

    for name, handler in (("baf", cmd_baf), ("iso", cmd_iso)):
        p = sub.add_parser(name, help=f"{name} between two structures")
        p.add_argument("--a", required=True)
        p.add_argument("--b", required=True)
        p.add_argument("--t", required=True, help="tolerance p/q")
        p.add_argument("--depth", type=int, default=6)
        p.add_argument("--max-tuple-len", type=int, default=3)
        p.add_argument("--omega", default="universal")
        p.add_argument("--out", default=None)
        p.add_argument("--fragment-depth", type=int, default=None)
        if name == "iso":
            p.add_argument("--extract", action="store_true",
                           help="also run the bijection search")
        p.set_defaults(func=handler)

    p = sub.add_parser("autos", help="automorphism group")
    common(p)
    p.set_defaults(func=cmd_autos)

    p = sub.add_parser("orbit", help="orbit, distances, defining formula")
    common(p)
    p.add_argument("--tuple", required=True, help="comma-separated point names")
    p.set_defaults(func=cmd_orbit)

    p = sub.add_parser("rank", help="bounded rank estimate")
    common(p)
    p.add_argument("--max-rank", type=int, default=3)
    p.add_argument("--max-tuple-len", type=int, default=2)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("scott", help="assemble the describing sentence family")
    common(p)
    p.add_argument("--n-max", type=int, default=2)
    p.add_argument("--max-rank", type=int, default=3)
    p.add_argument("--max-tuple-len", type=int, default=2)
    p.add_argument("--self-check", action="store_true")
    p.add_argument("--other", default=None, help="evaluate on this structure too")
    p.set_defaults(func=cmd_scott)

    p = sub.add_parser("theta", help="approximate-realization formula")
    common(p)
    p.add_argument("--formula", required=True)
    p.add_argument("--r", required=True)
    p.add_argument("--eps", required=True)
    p.add_argument("--at", default=None, help="comma-separated point names")
    p.set_defaults(func=cmd_theta)

    p = sub.add_parser("type", help="fragment type of a tuple")
    common(p)
    p.add_argument("--tuple", required=True)
    p.add_argument("--level", type=int, default=0)
    p.set_defaults(func=cmd_type)

    p = sub.add_parser("support", help="supportedness search or check")
    common(p)
    p.add_argument("--tuple", required=True)
    p.add_argument("--level", type=int, default=1)
    p.add_argument("--m-max", type=int, default=6)
    p.add_argument("--predicate", default=None, help="check this predicate instead")
    p.set_defaults(func=cmd_support)

    p = sub.add_parser("henkin", help="bounded-stage model construction")
    common(p)
    p.add_argument("--seed", default=None, help="condition-set JSON file")
    p.add_argument("--stages", type=int, required=True)
    p.add_argument("--assign", default="", help="constant=point,...")
    p.set_defaults(func=cmd_henkin)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
