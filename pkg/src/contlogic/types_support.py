"""Approximate-realization formulas, fragment types, supportedness, condition
sets, and the bounded-stage oracle-guided model builder.

The support search follows the two-step recipe: locate a candidate formula
whose strict sublevel set sits inside the type's exact realizer set, assemble
the dyadically weighted smoothed components, scale the sum past the tuple
diameter, and regularize in inf mode.  On finite structures a sublevel below
the least positive tuple distance contains exact realizers only, which is
what makes the certification exact rather than asymptotic.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Mapping, Sequence

from .numerics import Interval, WeakModulus, eval_modulus, format_rational, rat
from .evaluator import Evaluator
from .formulas import (
    Atomic,
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
    VarTerm,
    const_rational,
    demorgan_dual,
    fabs,
    fscale,
    inf_fold,
    max_var_index,
    negate,
    parse_formula,
    plus_fold,
    prenex,
    regularize,
    rename_vars,
    tminus,
)
from .structures import DISTANCE, MetricStructure, Signature
from .orbits import _value_at


class TypesError(ValueError):
    pass


# ---------------------------------------------------------------------------
# The approximate-realization template
# ---------------------------------------------------------------------------


_THETA_RENAMES: dict = {}


def _shifted_body(psi: Formula) -> tuple[Formula, list[int], list[int]]:
    """psi with its free variables moved to a fresh block, cached per formula
    so repeated templates over one formula share evaluation tables."""
    key = id(psi)
    hit = _THETA_RENAMES.get(key)
    if hit is not None and hit[0] is psi:
        return hit[1], hit[2], hit[3]
    xs = sorted(psi.free_vars)
    base = max_var_index(psi) + 1
    ys = list(range(base, base + len(xs)))
    moved = rename_vars(psi, dict(zip(xs, ys)))
    _THETA_RENAMES[key] = (psi, moved, xs, ys)
    return moved, xs, ys


def theta(psi: Formula, r, eps, omega: WeakModulus) -> Formula:
    """Vanishes at a tuple iff some tuple within eps (tuple pseudo-distance)
    takes the value r under psi; the building block of supportedness."""
    r, eps = rat(r), rat(eps)
    if eps <= 0:
        raise TypesError("theta needs a positive radius")
    if not psi.free_vars:
        return fabs(Plus(psi, negate(const_rational(r))))
    moved, xs, ys = _shifted_body(psi)
    offset = fabs(Plus(moved, negate(const_rational(r))))
    dom = DOmegaAtom(omega.truncation(len(xs)), xs, ys)
    body = MaxF(tminus(dom, const_rational(eps)), offset)
    return inf_fold(ys, body)


def theta_rank_bound(psi_sup_level: int) -> int:
    """Inf-level bookkeeping for the template over a sup^k input when the
    anchored value may be irrational (metadata; rational thresholds used here
    never pay the two extra encoding quantifiers)."""
    return max(psi_sup_level + 1, 3)


# ---------------------------------------------------------------------------
# Fragment types and supportedness
# ---------------------------------------------------------------------------


@dataclass
class PartialType:
    arity: int
    conditions: list[tuple[Formula, Fraction]]

    def __post_init__(self):
        for psi, r in self.conditions:
            if not psi.free_vars <= set(range(self.arity)):
                raise TypesError(
                    f"type condition {psi.to_text()} uses variables beyond x{self.arity - 1}"
                )


def fragment_type(
    s: MetricStructure,
    tup: Sequence[int],
    fragment: Sequence[Formula],
    evaluator: Evaluator | None = None,
) -> PartialType:
    """The realized type restricted to a fragment: each formula paired with
    its exact value at the tuple."""
    tup = tuple(tup)
    ev = evaluator or Evaluator(s)
    conditions = [(psi, _value_at(ev, psi, tup)) for psi in fragment]
    return PartialType(len(tup), conditions)


@dataclass
class SupportReport:
    ok: bool
    messages: list[str]
    eps_grid: list[Fraction]


def check_support(
    s: MetricStructure,
    ptype: PartialType,
    predicate: Formula,
    eps_grid: Sequence[Fraction] | None = None,
    omega: WeakModulus | None = None,
    evaluator: Evaluator | None = None,
) -> SupportReport:
    """Verify the two supportedness conditions exactly: the predicate's
    infimum over the domain is 0, and wherever it dips below a grid epsilon,
    every type condition is approximately realized within that epsilon.
    Stops at the first violation."""
    if omega is None:
        raise TypesError("check_support needs the weak modulus for the theta template")
    ev = evaluator or Evaluator(s)
    if not predicate.free_vars <= set(range(ptype.arity)):
        return SupportReport(False, ["predicate arity exceeds the type arity"], [])
    if eps_grid is None:
        eps_grid = [Fraction(1, 2**m) for m in range(1, 7)]
    eps_grid = sorted({rat(e) for e in eps_grid}, reverse=True)
    tuples = list(product(range(s.size()), repeat=ptype.arity))
    values = {t: _value_at(ev, predicate, t) for t in tuples}
    low = min(values.values())
    if low != 0:
        return SupportReport(
            False, [f"infimum over the domain is {format_rational(low)}, not 0"], eps_grid
        )
    thetas = {}
    for eps in eps_grid:
        for t in tuples:
            if values[t] >= eps:
                continue
            for psi, r in ptype.conditions:
                key = (psi, r, eps)
                if key not in thetas:
                    thetas[key] = theta(psi, r, eps, omega)
                got = _value_at(ev, thetas[key], t)
                if got != 0:
                    return SupportReport(
                        False,
                        [
                            f"predicate < {format_rational(eps)} at {t} but the condition "
                            f"({psi.to_text()}, {format_rational(r)}) is not realized within "
                            f"{format_rational(eps)} (template value {format_rational(got)})"
                        ],
                        eps_grid,
                    )
    return SupportReport(True, [], eps_grid)


@dataclass
class SupportSearch:
    predicate: Formula
    base_formula: Formula
    base_delta: Fraction
    components: list[tuple[int, Formula, Fraction]]  # (m, smoothed component, eta_m)
    scale: Fraction
    certification: SupportReport

    @property
    def ok(self) -> bool:
        return self.certification.ok


def find_support(
    s: MetricStructure,
    ptype: PartialType,
    candidates: Sequence[Formula],
    omega: WeakModulus,
    m_max: int = 6,
    evaluator: Evaluator | None = None,
) -> SupportSearch | None:
    """Search the candidate formulas for one whose strict sublevel set sits
    inside the type's exact realizer set; assemble the weighted smoothed sum
    and its inf-mode regularization; certify.  None when the search exhausts.
    """
    ev = evaluator or Evaluator(s)
    n = ptype.arity
    if n == 0:
        raise TypesError("support search needs at least one variable")
    tuples = list(product(range(s.size()), repeat=n))
    realizers = {
        t
        for t in tuples
        if all(_value_at(ev, psi, t) == r for psi, r in ptype.conditions)
    }
    if not realizers:
        return None
    trunc = omega.truncation(n)
    gaps = [
        eval_modulus(trunc, [s.d(x, y) for x, y in zip(ta, tb)])
        for ta in tuples
        for tb in tuples
        if ta != tb
    ]
    min_gap = min((g for g in gaps if g > 0), default=Fraction(1))
    m_fine = m_max
    while Fraction(1, 2**m_fine) >= min_gap:
        m_fine += 1

    chosen = None
    for phi in candidates:
        if not phi.free_vars <= set(range(n)):
            continue
        values = {t: _value_at(ev, phi, t) for t in tuples}
        ordered = sorted(tuples, key=lambda t: values[t])
        if ordered[0] not in realizers:
            continue
        delta = None
        for t in ordered:
            if t not in realizers:
                delta = values[t]
                break
        if delta is None:
            delta = max(values.values()) + 1
        if delta <= values[ordered[0]]:
            continue
        chosen = (phi, delta, values)
        break
    if chosen is None:
        return None
    phi, delta, values = chosen

    components = []
    for m in range(1, m_fine + 1):
        eps_m = Fraction(1, 2**m)
        if delta >= eps_m:
            scaled = fscale(eps_m / delta, phi)
            vmin = (eps_m / delta) * min(values.values())
        else:
            scaled = phi
            vmin = min(values.values())
        eta = vmin
        base = max(max_var_index(phi) + 1, n)
        ys = list(range(base, base + n))
        moved = rename_vars(scaled, {v: ys[v] for v in scaled.free_vars})
        dom = DOmegaAtom(omega.truncation(n), list(range(n)), ys)
        hat = inf_fold(
            ys,
            MaxF(
                tminus(dom, const_rational(eps_m)),
                tminus(moved, const_rational(eta)),
            ),
        )
        components.append((m, hat, eta))
    pstar = plus_fold([fscale(Fraction(1, 2**m), hat) for m, hat, _ in components])
    pvalues = {t: _value_at(ev, pstar, t) for t in tuples}
    positive = [v for v in pvalues.values() if v > 0]
    diam = omega.diameter(n)
    scale = diam / min(positive) if positive else Fraction(1)
    final = regularize(fscale(scale, pstar), omega, Interval(Fraction(0), diam), "inf")
    cert = check_support(
        s,
        ptype,
        final,
        [Fraction(1, 2**m) for m in range(1, m_max + 1)],
        omega,
        ev,
    )
    return SupportSearch(final, phi, delta, components, scale, cert)


# ---------------------------------------------------------------------------
# Condition sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Condition:
    """A closed pair: formula with its sorted free variables bound to
    constants, read as "consistently below the threshold"."""

    formula: Formula
    binding: tuple[str, ...]
    threshold: Fraction

    def __post_init__(self):
        object.__setattr__(self, "threshold", rat(self.threshold))
        if len(self.binding) != len(self.formula.free_vars):
            raise TypesError(
                f"binding of {len(self.binding)} constants for "
                f"{len(self.formula.free_vars)} free variables"
            )

    def binding_map(self) -> dict[int, str]:
        return dict(zip(sorted(self.formula.free_vars), self.binding))

    def describe(self) -> str:
        if self.binding:
            names = ",".join(self.binding)
            return f"({self.formula.to_text()})[{names}] < {format_rational(self.threshold)}"
        return f"{self.formula.to_text()} < {format_rational(self.threshold)}"


@dataclass
class ConditionSet:
    conditions: list[Condition] = field(default_factory=list)
    constants: list[str] = field(default_factory=list)

    def __post_init__(self):
        pool = list(dict.fromkeys(self.constants))
        for c in self.conditions:
            for name in c.binding:
                if name not in pool:
                    pool.append(name)
        self.constants = pool


def validate_conditions(cs: ConditionSet) -> list[str]:
    """Locally decidable checks: threshold legality against the inferred
    bound, the crossing rule between a formula and its negation, and root
    decompositions (sums, scalings) that no threshold split could satisfy."""
    out = []
    for c in cs.conditions:
        lo, hi = c.formula.bound.lo, c.formula.bound.hi
        if not (lo < c.threshold <= hi):
            extra = ""
            if isinstance(c.formula, ScaleF) and c.formula.factor == 0:
                extra = " (zero scaling admits only positive thresholds below its bound)"
            out.append(
                f"{c.describe()}: threshold must lie in ({format_rational(lo)}, "
                f"{format_rational(hi)}]{extra}"
            )
    neg_floor: dict = {}
    for c in cs.conditions:
        key = (negate(c.formula).key(), c.binding)
        # value of the negated formula is < threshold, so formula > -threshold
        floor = -c.threshold
        here = (c.formula.key(), c.binding)
        if here not in neg_floor or neg_floor[here] < floor:
            neg_floor[here] = floor
    for c in cs.conditions:
        partner = (negate(c.formula).key(), c.binding)
        for other in cs.conditions:
            if (other.formula.key(), other.binding) == partner:
                if not (-other.threshold < c.threshold):
                    out.append(
                        f"{c.describe()} against {other.describe()}: "
                        f"-({format_rational(other.threshold)}) must be below "
                        f"{format_rational(c.threshold)}"
                    )
    def floor_of(f: Formula, binding: tuple) -> Fraction:
        base = f.bound.lo
        return max(base, neg_floor.get((f.key(), binding), base))

    for c in cs.conditions:
        f = c.formula
        bmap = c.binding_map()
        if isinstance(f, Plus):
            lb = _project_binding(f.lhs, bmap)
            rb = _project_binding(f.rhs, bmap)
            if c.threshold <= floor_of(f.lhs, lb) + floor_of(f.rhs, rb):
                out.append(
                    f"{c.describe()}: no threshold split can satisfy both summands"
                )
        if isinstance(f, ScaleF) and f.factor > 0:
            sb = _project_binding(f.sub, bmap)
            if c.threshold / f.factor <= floor_of(f.sub, sb):
                out.append(f"{c.describe()}: scaling admits no legal sub-threshold")
    return out


def _project_binding(f: Formula, bmap: Mapping[int, str]) -> tuple:
    return tuple(bmap[i] for i in sorted(f.free_vars))


def condition_set_to_doc(cs: ConditionSet) -> dict:
    return {
        "constants": list(cs.constants),
        "conditions": [
            {
                "formula": c.formula.to_text(),
                "binding": list(c.binding),
                "r": format_rational(c.threshold),
            }
            for c in cs.conditions
        ],
    }


def condition_set_from_doc(doc, sig: Signature, omega: WeakModulus | None = None) -> ConditionSet:
    conditions = []
    for item in doc.get("conditions", []):
        formula = parse_formula(item["formula"], sig, omega)
        conditions.append(
            Condition(formula, tuple(item.get("binding", [])), rat(item["r"]))
        )
    return ConditionSet(conditions, list(doc.get("constants", [])))


# ---------------------------------------------------------------------------
# Oracle-guided staged model construction
# ---------------------------------------------------------------------------


@dataclass
class QuotientStructure:
    classes: list[list[str]]
    dist: list[list[Fraction]]
    assignment: dict[str, int]
    predicate_values: dict[str, dict[tuple, Fraction]]

    def class_of(self, name: str) -> int:
        for i, members in enumerate(self.classes):
            if name in members:
                return i
        raise TypesError(f"unknown constant {name!r}")


@dataclass
class HenkinResult:
    stages: int
    chain: list[list[Condition]]
    constants: list[str]
    assignment: dict[str, int]
    quotient: QuotientStructure
    log: list[str]
    omit_reports: list[str]

    @property
    def conditions(self) -> list[Condition]:
        return self.chain[-1]


class _HenkinDriver:
    def __init__(self, seed, oracle, assignment, omega, omit):
        self.oracle = oracle
        self.ev = Evaluator(oracle)
        self.omega = omega
        self.omit = omit or []
        self.conds: list[Condition] = []
        self.cond_keys: set = set()
        self.constants: list[str] = []
        self.assignment: dict[str, int] = {}
        self.queue: deque = deque()
        self.queued: set = set()
        self.fresh = 0
        self.log: list[str] = []
        self.omit_reports: list[str] = []
        self.omit_done: set = set()
        for name in seed.constants:
            self._register_constant(name, assignment.get(name))
        for c in seed.conditions:
            self._add_condition(c)
            self._enqueue(c.formula, c.binding)

    # -- bookkeeping ---------------------------------------------------

    def _register_constant(self, name, point):
        if name in self.assignment:
            return
        if point is None:
            raise TypesError(f"constant {name!r} has no oracle point assigned")
        self.constants.append(name)
        self.assignment[name] = point

    def _fresh_constant(self, point) -> str:
        while True:
            name = f"h{self.fresh}"
            self.fresh += 1
            if name not in self.assignment:
                break
        self._register_constant(name, point)
        return name

    def _value(self, formula: Formula, binding: tuple) -> Fraction:
        bmap = dict(zip(sorted(formula.free_vars), binding))
        return self.ev.eval(formula, {v: self.assignment[c] for v, c in bmap.items()})

    def _add_condition(self, cond: Condition) -> bool:
        for name in cond.binding:
            if name not in self.assignment:
                raise TypesError(f"condition mentions unassigned constant {name!r}")
        value = self._value(cond.formula, cond.binding)
        if value >= cond.threshold:
            raise TypesError(
                f"condition {cond.describe()} fails in the oracle (value {value})"
            )
        key = (cond.formula.key(), cond.binding, cond.threshold)
        if key in self.cond_keys:
            return False
        self.cond_keys.add(key)
        self.conds.append(cond)
        return True

    def _enqueue(self, formula: Formula, binding: tuple):
        key = (formula.key(), binding)
        if key not in self.queued:
            self.queued.add(key)
            self.queue.append((formula, binding))

    # -- stage steps ----------------------------------------------------

    def _tighten(self, formula, binding, slack: Fraction) -> Fraction | None:
        """(P1): record a threshold within `slack` of the oracle value."""
        value = self._value(formula, binding)
        hi = formula.bound.hi
        if value >= hi:
            return None  # the value sits at the top of its bound; no legal threshold
        r = min(value + slack / 2, hi)
        if r <= value:
            return None
        self._add_condition(Condition(formula, binding, r))
        return r

    def _decompose(self, formula, binding, r, stage):
        slack = Fraction(1, 2 ** (stage + 2))
        bmap = dict(zip(sorted(formula.free_vars), binding))
        if isinstance(formula, Plus):
            v1 = self._value(formula.lhs, _project_binding(formula.lhs, bmap))
            v2 = self._value(formula.rhs, _project_binding(formula.rhs, bmap))
            gap = (r - v1 - v2) / 2
            b1 = _project_binding(formula.lhs, bmap)
            b2 = _project_binding(formula.rhs, bmap)
            self._add_condition(Condition(formula.lhs, b1, v1 + gap))
            self._add_condition(Condition(formula.rhs, b2, r - (v1 + gap)))
            self._enqueue(formula.lhs, b1)
            self._enqueue(formula.rhs, b2)
        elif isinstance(formula, ScaleF):
            sb = _project_binding(formula.sub, bmap)
            if formula.factor > 0:
                self._add_condition(Condition(formula.sub, sb, r / formula.factor))
                self._enqueue(formula.sub, sb)
            elif formula.factor == -1:
                dual = demorgan_dual(prenex(formula.sub))
                db = _project_binding(dual, bmap)
                self._add_condition(Condition(dual, db, r))
                self._enqueue(dual, db)
            elif formula.factor < 0:
                neg = negate(formula.sub)
                nb = _project_binding(neg, bmap)
                self._add_condition(Condition(neg, nb, r / abs(formula.factor)))
                self._enqueue(neg, nb)
            # zero factor: nothing to decompose
        elif isinstance(formula, InfN):
            values = [
                (self._value(m, _project_binding(m, bmap)), i)
                for i, m in enumerate(formula.members)
            ]
            _, best = min(values)
            member = formula.members[best]
            mb = _project_binding(member, bmap)
            self._add_condition(Condition(member, mb, r))
            self._enqueue(member, mb)
        elif isinstance(formula, SupN):
            for member in formula.members:
                mb = _project_binding(member, bmap)
                self._add_condition(Condition(member, mb, r))
                self._enqueue(member, mb)
        elif isinstance(formula, Inf):
            var = formula.var
            best_point = min(
                range(self.oracle.size()),
                key=lambda p: self.ev.eval(
                    formula.sub,
                    {**{v: self.assignment[c] for v, c in bmap.items()}, var: p},
                ),
            )
            name = self._fresh_constant(best_point)
            inner_map = dict(bmap)
            inner_map[var] = name
            ib = _project_binding(formula.sub, inner_map)
            self._add_condition(Condition(formula.sub, ib, r))
            self._enqueue(formula.sub, ib)
            self.log.append(f"witness {name} for {formula.to_text()}")
        elif isinstance(formula, Sup):
            var = formula.var
            for name in list(self.constants):
                inner_map = dict(bmap)
                inner_map[var] = name
                ib = _project_binding(formula.sub, inner_map)
                if self._value(formula.sub, ib) < r:
                    self._add_condition(Condition(formula.sub, ib, r))
                    self._enqueue(formula.sub, ib)
        # atoms, constants, tuple-distance atoms: nothing to decompose

    def _triangle_step(self, formula, binding, stage):
        """(C11)-flavored bookkeeping for distance sentences: combine recorded
        premises through the triangle inequality."""
        if not (isinstance(formula, Atomic) and formula.pred.name == DISTANCE):
            return
        if len(binding) != 2:
            return
        a, b = binding
        premises: dict[tuple, Fraction] = {}
        for c in self.conds:
            if isinstance(c.formula, Atomic) and c.formula.pred.name == DISTANCE:
                if len(c.binding) == 2:
                    key = c.binding
                    if key not in premises or premises[key] > c.threshold:
                        premises[key] = c.threshold
        for mid in self.constants:
            r1 = premises.get((a, mid))
            r2 = premises.get((mid, b))
            if r1 is not None and r2 is not None:
                value = self._value(formula, binding)
                q = min(r1 + r2, value + Fraction(1, 2 ** (stage + 2)))
                if value < q <= 1:
                    self._add_condition(Condition(formula, binding, q))

    def _refresh_tables(self, stage):
        """Tighten every ground atomic sentence over the known constants; keeps
        the quotient within the stage tolerance of the oracle."""
        slack = Fraction(1, 2 ** (stage + 2))
        d = self.oracle.signature.predicates[DISTANCE]
        names = list(self.constants)
        for i, a in enumerate(names):
            for b in names[i:]:
                formula = Atomic(d, [VarTerm(0), VarTerm(1)])
                value = self.oracle.d(self.assignment[a], self.assignment[b])
                if value < 1:
                    self._add_condition(Condition(formula, (a, b), min(value + slack, Fraction(1))))
        for p in self.oracle.signature.predicates.values():
            if p.name == DISTANCE or p.arity == 0:
                continue
            formula = Atomic(p, [VarTerm(i) for i in range(p.arity)])
            for combo in product(names, repeat=p.arity):
                args = tuple(self.assignment[c] for c in combo)
                value = self.oracle.pred_value(p.name, args)
                if value < p.bound.hi:
                    # binding is positional over sorted free vars, i.e. combo itself
                    self._add_condition(
                        Condition(formula, tuple(combo), min(value + slack, p.bound.hi))
                    )

    def _omit_step(self, stage):
        for idx, (ptype, m) in enumerate(self.omit):
            for combo in product(self.constants, repeat=ptype.arity):
                key = (idx, combo)
                if key in self.omit_done:
                    continue
                self.omit_done.add(key)
                points = tuple(self.assignment[c] for c in combo)
                hit = None
                for psi, r in ptype.conditions:
                    th = theta(psi, r, Fraction(1, 2**m), self.omega)
                    value = self.ev.eval(th, dict(zip(sorted(th.free_vars), points)))
                    if value > 0:
                        hit = (th, value)
                        break
                if hit is None:
                    self.omit_reports.append(
                        f"no omission witness for {combo}: the type is realized within "
                        f"2^-{m} of it everywhere"
                    )
                    continue
                th, value = hit
                neg = negate(th)
                self._add_condition(Condition(neg, tuple(combo), -value / 2))
                self.omit_reports.append(
                    f"forced condition keeping {combo} at least {format_rational(value / 2)} "
                    f"away from realizing the type"
                )

    def run(self, stages: int) -> HenkinResult:
        chain = [list(self.conds)]
        term_cursor = 0
        for stage in range(stages):
            slack = Fraction(1, 2 ** (stage + 1))
            if self.queue:
                formula, binding = self.queue.popleft()
                self.queue.append((formula, binding))
                r = self._tighten(formula, binding, slack)
                if r is not None:
                    self._decompose(formula, binding, r, stage)
                    self._triangle_step(formula, binding, stage)
            if not self.constants:
                self._fresh_constant(0)
                self.log.append("bootstrapped the first constant at oracle point 0")
            # (P3): a fresh constant near the next listed term
            term = self.constants[term_cursor % len(self.constants)]
            term_cursor += 1
            fresh = self._fresh_constant(self.assignment[term])
            d = self.oracle.signature.predicates[DISTANCE]
            self._add_condition(
                Condition(Atomic(d, [VarTerm(0), VarTerm(1)]), (fresh, term), slack)
            )
            self._refresh_tables(stage)
            if self.omega is not None:
                self._omit_step(stage)
            chain.append(list(self.conds))
        return HenkinResult(
            stages,
            chain,
            list(self.constants),
            dict(self.assignment),
            self._quotient(stages),
            self.log,
            self.omit_reports,
        )

    def _recorded_inf(self, a: str, b: str) -> Fraction:
        best = Fraction(1)
        for c in self.conds:
            if isinstance(c.formula, Atomic) and c.formula.pred.name == DISTANCE:
                if set(c.binding) == {a, b} or (a == b and c.binding == (a, b)):
                    best = min(best, c.threshold)
        return best

    def _quotient(self, stages: int) -> QuotientStructure:
        names = list(self.constants)
        threshold = Fraction(1, 2**stages)
        parent = {n: n for n in names}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                if self._recorded_inf(a, b) <= threshold:
                    parent[find(a)] = find(b)
        classes: dict[str, list[str]] = {}
        for n in names:
            classes.setdefault(find(n), []).append(n)
        ordered = [sorted(v, key=names.index) for v in classes.values()]
        ordered.sort(key=lambda v: names.index(v[0]))
        k = len(ordered)
        dist = [[Fraction(0)] * k for _ in range(k)]
        for i in range(k):
            for j in range(k):
                if i == j:
                    continue
                dist[i][j] = min(
                    self._recorded_inf(a, b) for a in ordered[i] for b in ordered[j]
                )
        preds: dict[str, dict[tuple, Fraction]] = {}
        for c in self.conds:
            if isinstance(c.formula, Atomic) and c.formula.pred.name != DISTANCE:
                table = preds.setdefault(c.formula.pred.name, {})
                key = c.binding
                if key not in table or table[key] > c.threshold:
                    table[key] = c.threshold
        return QuotientStructure(ordered, dist, dict(self.assignment), preds)


def henkin_run(
    seed: ConditionSet,
    oracle: MetricStructure,
    assignment: Mapping[str, int],
    stages: int,
    omega: WeakModulus | None = None,
    omit: Sequence[tuple[PartialType, int]] | None = None,
) -> HenkinResult:
    """Run the staged construction against a witness structure.

    Every stage tightens one listed sentence toward its oracle value, resolves
    its root decomposition with oracle-chosen witnesses, plants a fresh
    constant near the next listed term, and re-tightens all ground atomic
    sentences; the final quotient's distances sit within 2^(1-stages) of the
    oracle distances between assigned witnesses.  The optional omit hook
    forces anti-realization conditions for the supplied types where a witness
    exists and reports failure where none does.
    """
    if stages < 1:
        raise TypesError("at least one stage required")
    problems = validate_conditions(seed)
    if problems:
        raise TypesError(f"seed fails validation: {problems[0]}")
    if omit and omega is None:
        raise TypesError("the omit hook needs the weak modulus")
    driver = _HenkinDriver(seed, oracle, dict(assignment), omega, omit)
    return driver.run(stages)
