"""Exact formula evaluation on finite metric structures, plus audits.

Quantifiers over variables are realized as max/min over the finite point
set; countable sup/inf as max/min over the member family.  An Evaluator
memoizes subformula values keyed by the restriction of the assignment to the
subformula's free variables, which makes the heavily shared formula DAGs
produced elsewhere in the package cheap to evaluate.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import product
from typing import Mapping

from .numerics import eval_modulus, format_rational
from .formulas import (
    Atomic,
    AppTerm,
    Const,
    DOmegaAtom,
    Formula,
    Inf,
    InfN,
    MaxF,
    MinF,
    Plus,
    ScaleF,
    Sup,
    SupN,
    Term,
    VarTerm,
)
from .structures import MetricStructure

DEFAULT_CAP = 10**6


class EvalError(ValueError):
    pass


class Evaluator:
    """Evaluation context for one structure; reuse it to share the memo."""

    def __init__(self, structure: MetricStructure):
        self.structure = structure
        self._memo: dict = {}
        self._mod_memo: dict = {}
        # memo keys are object ids; pinning the objects keeps ids stable
        self._pinned: dict = {}

    def eval(self, phi: Formula, assignment: Mapping[int, int] | None = None) -> Fraction:
        assignment = dict(assignment or {})
        missing = phi.free_vars - set(assignment)
        if missing:
            names = ",".join(f"x{i}" for i in sorted(missing))
            raise EvalError(f"unassigned free variables: {names}")
        return self._eval(phi, assignment)

    def _eval(self, phi: Formula, assignment: dict[int, int]) -> Fraction:
        key = (id(phi), tuple(sorted((v, assignment[v]) for v in phi.free_vars)))
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        self._pinned[id(phi)] = phi
        value = self._eval_node(phi, assignment)
        self._memo[key] = value
        return value

    def _eval_term(self, t: Term, assignment) -> int:
        if isinstance(t, VarTerm):
            return assignment[t.index]
        assert isinstance(t, AppTerm)
        args = tuple(self._eval_term(a, assignment) for a in t.args)
        return self.structure.func_value(t.func.name, args)

    def _tuple_mod(self, modulus, dvec) -> Fraction:
        # integer key pairs: hashing Fractions is far more expensive
        key = (id(modulus), tuple((v.numerator, v.denominator) for v in dvec))
        hit = self._mod_memo.get(key)
        if hit is None:
            self._pinned[id(modulus)] = modulus
            hit = eval_modulus(modulus, dvec)
            self._mod_memo[key] = hit
        return hit

    def _eval_node(self, phi: Formula, assignment) -> Fraction:
        s = self.structure
        if isinstance(phi, Const):
            return phi.value
        if isinstance(phi, Atomic):
            args = tuple(self._eval_term(t, assignment) for t in phi.terms)
            return s.pred_value(phi.pred.name, args)
        if isinstance(phi, DOmegaAtom):
            dvec = tuple(
                s.d(assignment[a], assignment[b]) for a, b in zip(phi.xs, phi.ys)
            )
            return self._tuple_mod(phi.tuple_modulus, dvec)
        if isinstance(phi, Plus):
            return self._eval(phi.lhs, assignment) + self._eval(phi.rhs, assignment)
        if isinstance(phi, MaxF):
            return max(self._eval(phi.lhs, assignment), self._eval(phi.rhs, assignment))
        if isinstance(phi, MinF):
            return min(self._eval(phi.lhs, assignment), self._eval(phi.rhs, assignment))
        if isinstance(phi, ScaleF):
            return phi.factor * self._eval(phi.sub, assignment)
        if isinstance(phi, (Sup, Inf)):
            pick = max if isinstance(phi, Sup) else min
            inner = dict(assignment)
            best = None
            for p in range(s.size()):
                inner[phi.var] = p
                v = self._eval(phi.sub, inner)
                best = v if best is None else pick(best, v)
            if best is None:
                raise EvalError("quantifier over an empty structure")
            return best
        if isinstance(phi, (SupN, InfN)):
            pick = max if isinstance(phi, SupN) else min
            values = [self._eval(c, assignment) for c in phi.members]
            return pick(values)
        raise EvalError(f"cannot evaluate node {type(phi).__name__}")


def eval_formula(
    phi: Formula, s: MetricStructure, assignment: Mapping[int, int] | None = None
) -> Fraction:
    return Evaluator(s).eval(phi, assignment)


def eval_all(
    phi: Formula,
    s: MetricStructure,
    cap: int = DEFAULT_CAP,
    evaluator: Evaluator | None = None,
) -> dict[tuple, Fraction]:
    """Total value table over all assignments of the free variables.

    Keys are point-index tuples in increasing variable order.  Used as the
    brute-force oracle by the rest of the package; refuses to enumerate more
    than `cap` rows.
    """
    free = sorted(phi.free_vars)
    rows = s.size() ** len(free)
    if rows > cap:
        raise EvalError(f"assignment table of {rows} rows exceeds cap {cap}")
    ev = evaluator or Evaluator(s)
    out = {}
    for combo in product(range(s.size()), repeat=len(free)):
        out[combo] = ev.eval(phi, dict(zip(free, combo)))
    return out


def audit_modulus(
    phi: Formula, s: MetricStructure, evaluator: Evaluator | None = None
) -> list[str]:
    """Check the inferred bound and modulus against every assignment pair.

    Empty report iff every value lies in the inferred bound and every pair of
    assignments satisfies |phi(a) - phi(b)| <= modulus(d(a_i, b_i)).
    """
    ev = evaluator or Evaluator(s)
    free = sorted(phi.free_vars)
    table = eval_all(phi, s, evaluator=ev)
    out = []
    for combo, value in table.items():
        if not phi.bound.contains(value):
            pts = ",".join(s.points[i] for i in combo)
            out.append(
                f"bound: value {format_rational(value)} at ({pts}) outside {phi.bound}"
            )
    combos = list(table)
    pos = {v: k for k, v in enumerate(free)}
    for a in combos:
        for b in combos:
            gap = abs(table[a] - table[b])
            if gap == 0:
                continue
            dvec = tuple(
                s.d(a[pos[j]], b[pos[j]]) if j in pos else Fraction(0)
                for j in range(phi.span)
            )
            allowed = ev._tuple_mod(phi.modulus, dvec)
            if gap > allowed:
                pa = ",".join(s.points[i] for i in a)
                pb = ",".join(s.points[i] for i in b)
                out.append(
                    f"modulus: |phi({pa})-phi({pb})| = {format_rational(gap)}"
                    f" > {format_rational(allowed)}"
                )
    return out
