"""Generated formula fragments.

Three layers feed the rest of the package:

* quantifier-free bases: predicate atoms over variable tuples plus the tuple
  pseudo-distance atoms, screened so each member respects the ambient weak
  modulus;
* connective closures of a basis (max/min preserve weak-modulus respect);
* per-structure distinguishing families built by refinement depth: the depth-0
  formula of a tuple measures its largest basis-value discrepancy, and each
  further depth adds one round of matched one-point extensions on both sides.
  A tuple's depth-k formula vanishes exactly on the tuples its depth-k
  refinement class contains.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations, product
from typing import Callable, Sequence

from .numerics import Interval, WeakModulus, eval_modulus
from .evaluator import Evaluator
from .formulas import (
    Atomic,
    DOmegaAtom,
    Formula,
    Inf,
    InfN,
    MaxF,
    MinF,
    Sup,
    SupN,
    VarTerm,
    ZERO,
    const_rational,
    fabs,
    negate,
    Plus,
)
from .structures import MetricStructure, Signature


def atomic_formulas(sig: Signature, arity: int) -> list[Formula]:
    out = []
    for p in sig.predicates.values():
        if p.arity == 0:
            continue
        for combo in product(range(arity), repeat=p.arity):
            out.append(Atomic(p, [VarTerm(i) for i in combo]))
    return out


def domega_atoms(omega: WeakModulus, arity: int) -> list[Formula]:
    """Tuple-distance atoms over increasing index splits i_0<..<i_{k-1}<j_0<..<j_{k-1}."""
    out = []
    for k in range(1, arity // 2 + 1):
        for chosen in combinations(range(arity), 2 * k):
            xs, ys = chosen[:k], chosen[k:]
            out.append(DOmegaAtom(omega.truncation(k), xs, ys))
    return out


_SCREEN_GRID = (Fraction(0), Fraction(1, 2), Fraction(1))


def dominated_by(phi: Formula, omega: WeakModulus, samples: Sequence[tuple] | None = None) -> bool:
    """Sampled sufficient check that the inferred modulus sits below the weak
    modulus truncation at the formula's span (exact structure-level audits
    happen separately)."""
    span = phi.span
    if span == 0:
        return True
    trunc = omega.truncation(span)
    if samples is None:
        if span <= 4:
            samples = list(product(_SCREEN_GRID, repeat=span))
        else:
            samples = [tuple(Fraction((7 * i + 3 * j) % 5, 4) for j in range(span)) for i in range(64)]
    for vec in samples:
        if eval_modulus(phi.modulus, vec) > eval_modulus(trunc, vec):
            return False
    return True


def dedupe(formulas: Sequence[Formula]) -> list[Formula]:
    seen = set()
    out = []
    for f in formulas:
        t = f.to_text()
        if t not in seen:
            seen.add(t)
            out.append(f)
    return out


def qf_basis(sig: Signature, omega: WeakModulus, arity: int, screen: bool = True) -> list[Formula]:
    """Atoms plus tuple-distance atoms at the given arity, weak-modulus screened."""
    cands = atomic_formulas(sig, arity) + domega_atoms(omega, arity)
    if screen:
        cands = [f for f in cands if dominated_by(f, omega)]
    return dedupe(cands)


def qf_fragment(
    sig: Signature,
    omega: WeakModulus,
    arity: int,
    depth: int = 0,
    limit: int = 400,
) -> list[Formula]:
    """Basis closed under max/min for `depth` rounds (both preserve respect);
    deterministic order, truncated at `limit`."""
    frontier = qf_basis(sig, omega, arity)
    out = list(frontier)
    for _ in range(depth):
        new = []
        for a, b in combinations(out, 2):
            new.append(MaxF(a, b))
            new.append(MinF(a, b))
            if len(out) + len(new) >= 2 * limit:
                break
        out = dedupe(out + new)[:limit]
    return out


def supn_family(members: Sequence[Formula], bound: Interval) -> Formula:
    """Countable-sup node over a deduplicated, canonically ordered family."""
    members = sorted(dedupe(members), key=lambda f: f.to_text())
    if not members:
        return ZERO
    return SupN(members, bound=bound)


def infn_family(members: Sequence[Formula], bound: Interval) -> Formula:
    members = sorted(dedupe(members), key=lambda f: f.to_text())
    if not members:
        return ZERO
    return InfN(members, bound=bound)


def value_anchor(phi: Formula, value: Fraction) -> Formula:
    """|phi - value|: vanishes where phi takes the anchored value.

    The rational-threshold suprema around a target value have exactly this
    function as their value, and anchoring keeps the inferred modulus of phi.
    """
    return fabs(Plus(phi, negate(const_rational(value))))


def _canonical_fold(members: Sequence[Formula], fold) -> Formula:
    members = sorted(dedupe(members), key=lambda f: f.to_text())
    if not members:
        return ZERO
    out = members[0]
    for m in members[1:]:
        out = fold(out, m)
    return out


class DistinguishingFamily:
    """Per-structure tuple formulas indexed by refinement depth.

    formula(tup, k) vanishes on a tuple iff that tuple survives k rounds of
    matched one-point extensions against `tup`, starting from agreement on the
    quantifier-free basis.  Finite families fold through max/min connectives,
    which keeps the depth-k formula at k quantifier alternations in either
    prenex orientation.
    """

    def __init__(
        self,
        s: MetricStructure,
        omega: WeakModulus,
        basis_for_arity: Callable[[int], list[Formula]] | None = None,
        evaluator: Evaluator | None = None,
    ):
        self.s = s
        self.omega = omega
        self.ev = evaluator or Evaluator(s)
        self._basis_fn = basis_for_arity or (lambda n: qf_basis(s.signature, omega, n))
        self._basis: dict[int, list[Formula]] = {}
        self._memo: dict[tuple, Formula] = {}
        # equal formulas built for different tuples are interned to one
        # object, so evaluation tables are shared across appearances
        self._intern: dict[str, Formula] = {}
        self._anchors: dict[tuple, Formula] = {}

    def basis(self, arity: int) -> list[Formula]:
        if arity not in self._basis:
            self._basis[arity] = self._basis_fn(arity)
        return self._basis[arity]

    def _interned(self, phi: Formula) -> Formula:
        return self._intern.setdefault(phi.to_text(), phi)

    def _anchor(self, phi: Formula, value) -> Formula:
        key = (id(phi), value)
        if key not in self._anchors:
            self._anchors[key] = value_anchor(phi, value)
        return self._anchors[key]

    def formula(self, tup: tuple, depth: int) -> Formula:
        key = (tuple(tup), depth)
        if key in self._memo:
            return self._memo[key]
        out = self._interned(self._build(tuple(tup), depth))
        self._memo[key] = out
        return out

    def _build(self, tup: tuple, depth: int) -> Formula:
        n = len(tup)
        if depth == 0:
            assignment = dict(enumerate(tup))
            members = [
                self._anchor(phi, self.ev.eval(phi, assignment)) for phi in self.basis(n)
            ]
            return _canonical_fold(members, MaxF)
        members = [self.formula(tup, depth - 1)]
        extensions = [self.formula(tup + (c,), depth - 1) for c in range(self.s.size())]
        for ext in extensions:
            members.append(self._interned(Inf(n, ext)))
        members.append(self._interned(Sup(n, _canonical_fold(extensions, MinF))))
        return _canonical_fold(members, MaxF)

    def values(self, tup: tuple, depth: int) -> dict[tuple, Fraction]:
        """Value table of the tuple's depth formula over all same-length tuples."""
        phi = self.formula(tup, depth)
        out = {}
        for other in product(range(self.s.size()), repeat=len(tup)):
            out[other] = self.ev.eval(phi, dict(enumerate(other)))
        return out


def type_fragment(
    family: DistinguishingFamily, arity: int, level: int
) -> list[Formula]:
    """Formulas whose joint values pin a tuple's refinement class at the given
    level: the quantifier-free basis plus every tuple's depth-(level-1)
    distinguishing formula."""
    if level < 1:
        raise ValueError("type fragments start at level 1")
    out = list(family.basis(arity))
    for tup in product(range(family.s.size()), repeat=arity):
        out.append(family.formula(tup, level - 1))
    return dedupe(out)
