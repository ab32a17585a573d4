"""Automorphism groups, orbit-defining formulas, and structure-describing
sentences with a bounded rank estimate.

The inf-form orbit witnesses follow the smoothing route: scale a pin formula
whose zero set is the orbit until it clears the tuple-space diameter, then
regularize in inf mode; the result provably respects the weak modulus and,
when the pin level suffices, equals the orbit distance pointwise (verified by
exact evaluation, never assumed).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Callable, Mapping, Sequence

from .numerics import Interval, WeakModulus, eval_modulus, format_rational
from .evaluator import Evaluator
from .formulas import (
    Formula,
    Inf,
    MaxF,
    MinF,
    ONE,
    QuantRank,
    Sup,
    ZERO,
    fscale,
    quant_rank,
    rank_at_most_inf,
    rank_at_most_sup,
    regularize,
    sup_fold,
    tminus,
)
from .fragments import (
    DistinguishingFamily,
    infn_family,
    supn_family,
    value_anchor,
)
from .structures import DISTANCE, MetricStructure


class OrbitError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Automorphisms and orbits
# ---------------------------------------------------------------------------


def automorphisms(s: MetricStructure) -> list[tuple]:
    """All distance/predicate/function-preserving bijections, as image tuples.

    Backtracking over point images with unary-profile pruning (sorted distance
    row plus diagonal predicate values)."""
    n = s.size()
    sig = s.signature
    preds = [p for p in sig.predicates.values() if p.name != DISTANCE]
    funcs = list(sig.functions.values())

    def profile(i: int):
        vals = [s.pred_value(p.name, (i,) * p.arity) for p in preds if p.arity >= 1]
        return (tuple(sorted(s.dist[i])), tuple(vals))

    profiles = [profile(i) for i in range(n)]
    candidates = [
        [j for j in range(n) if profiles[j] == profiles[i]] for i in range(n)
    ]
    out: list[tuple] = []
    image = [-1] * n
    used = [False] * n

    def consistent(i: int) -> bool:
        for j in range(i + 1):
            if s.dist[i][j] != s.dist[image[i]][image[j]]:
                return False
        for p in preds:
            for combo in product(range(i + 1), repeat=p.arity):
                if i not in combo:
                    continue
                mapped = tuple(image[x] for x in combo)
                if s.pred_value(p.name, combo) != s.pred_value(p.name, mapped):
                    return False
        return True

    def functions_commute() -> bool:
        for f in funcs:
            for combo in product(range(n), repeat=f.arity):
                mapped = tuple(image[x] for x in combo)
                if image[s.func_value(f.name, combo)] != s.func_value(f.name, mapped):
                    return False
        return True

    def search(i: int):
        if i == n:
            if functions_commute():
                out.append(tuple(image))
            return
        for c in candidates[i]:
            if used[c]:
                continue
            image[i] = c
            used[c] = True
            if consistent(i):
                search(i + 1)
            used[c] = False
            image[i] = -1

    search(0)
    return out


def orbit_of(s: MetricStructure, tup: Sequence[int], autos: Sequence[tuple] | None = None) -> frozenset:
    autos = autos if autos is not None else automorphisms(s)
    tup = tuple(tup)
    return frozenset(tuple(g[i] for i in tup) for g in autos)


def orbit_partition(
    s: MetricStructure, length: int, autos: Sequence[tuple] | None = None
) -> list[frozenset]:
    """Orbits of all tuples of one length, each listed once."""
    autos = autos if autos is not None else automorphisms(s)
    seen: set = set()
    out = []
    for tup in product(range(s.size()), repeat=length):
        if tup in seen:
            continue
        orb = orbit_of(s, tup, autos)
        seen |= orb
        out.append(orb)
    return out


def orbit_distance(
    s: MetricStructure,
    tup: Sequence[int],
    omega: WeakModulus,
    autos: Sequence[tuple] | None = None,
) -> dict[tuple, Fraction]:
    """Exact tuple-pseudo-distance from every same-length tuple to the orbit."""
    tup = tuple(tup)
    n = len(tup)
    orb = orbit_of(s, tup, autos)
    trunc = omega.truncation(n)
    out = {}
    for other in product(range(s.size()), repeat=n):
        best = None
        for member in orb:
            v = eval_modulus(trunc, [s.d(a, b) for a, b in zip(other, member)])
            best = v if best is None or v < best else best
        out[other] = best
    return out


def _value_at(ev: Evaluator, phi: Formula, tup: tuple) -> Fraction:
    return ev.eval(phi, {i: tup[i] for i in phi.free_vars})


# ---------------------------------------------------------------------------
# Orbit-defining formulas (sup form) with certification
# ---------------------------------------------------------------------------


@dataclass
class OrbitSynthesis:
    tup: tuple
    formula: Formula
    separators: dict[tuple, tuple]  # non-orbit tuple -> (formula, anchor value, gap)
    separation_failures: list[tuple]
    zero_set_ok: bool
    delta_table: dict[Fraction, Fraction | None]  # eps -> realized delta (None: nothing beyond eps)
    fragment_size: int

    @property
    def certified(self) -> bool:
        ok_delta = all(d is None or d > 0 for d in self.delta_table.values())
        return not self.separation_failures and self.zero_set_ok and ok_delta


def synthesize_orbit_formula(
    s: MetricStructure,
    tup: Sequence[int],
    omega: WeakModulus,
    fragment: Sequence[Formula],
    autos: Sequence[tuple] | None = None,
    eps_exponents: Sequence[int] = range(1, 7),
    evaluator: Evaluator | None = None,
) -> OrbitSynthesis:
    """Countable sup, over tuples outside the orbit, of the maximally
    separating fragment formula anchored at its value on the base tuple.

    Ties break by fragment order and the choice is recorded.  Certification
    checks the zero set against the orbit and tabulates the realized delta for
    each epsilon in the dyadic ladder.
    """
    tup = tuple(tup)
    n = len(tup)
    ev = evaluator or Evaluator(s)
    for phi in fragment:
        if not phi.free_vars <= set(range(n)):
            raise OrbitError(f"fragment formula {phi.to_text()} has variables beyond x{n - 1}")
    orb = orbit_of(s, tup, autos)
    anchors = [_value_at(ev, phi, tup) for phi in fragment]
    separators: dict[tuple, tuple] = {}
    failures: list[tuple] = []
    children: list[Formula] = []
    for other in product(range(s.size()), repeat=n):
        if other in orb:
            continue
        best_k = None
        best_gap = Fraction(0)
        for k, phi in enumerate(fragment):
            gap = abs(_value_at(ev, phi, other) - anchors[k])
            if gap > best_gap:
                best_gap, best_k = gap, k
        if best_k is None:
            failures.append(other)
            continue
        separators[other] = (fragment[best_k], anchors[best_k], best_gap)
        children.append(value_anchor(fragment[best_k], anchors[best_k]))
    if children:
        hull = Interval(Fraction(0), max(c.bound.hi for c in children))
        psi = supn_family(children, hull)
    else:
        psi = ZERO
    dist = orbit_distance(s, tup, omega, autos)
    values = {other: _value_at(ev, psi, other) for other in dist}
    zero_set = {other for other, v in values.items() if v == 0}
    delta_table: dict[Fraction, Fraction | None] = {}
    for m in eps_exponents:
        eps = Fraction(1, 2**m)
        beyond = [values[other] for other in dist if dist[other] > eps]
        delta_table[eps] = min(beyond) if beyond else None
    return OrbitSynthesis(
        tup, psi, separators, failures, zero_set == set(orb), delta_table, len(fragment)
    )


# ---------------------------------------------------------------------------
# Inf-form witnesses and the rank estimate
# ---------------------------------------------------------------------------


@dataclass
class WitnessInfo:
    tup: tuple
    pin: Formula
    witness: Formula
    pointwise_ok: bool
    scale: Fraction


def orbit_witness(
    s: MetricStructure,
    omega: WeakModulus,
    tup: tuple,
    pin_depth: int,
    family: DistinguishingFamily,
    autos: Sequence[tuple],
) -> WitnessInfo | None:
    """Attempt an inf-form formula equal to the orbit distance pointwise.

    Returns None when the depth-`pin_depth` pin fails to vanish exactly on the
    orbit (the refinement class is still coarser than the orbit)."""
    tup = tuple(tup)
    n = len(tup)
    ev = family.ev
    pin = family.formula(tup, pin_depth)
    orb = orbit_of(s, tup, autos)
    pin_values = {
        other: _value_at(ev, pin, other) for other in product(range(s.size()), repeat=n)
    }
    if any(pin_values[m] != 0 for m in orb):
        raise OrbitError("pin does not vanish on the orbit; fragment values not invariant")
    outside = {o: v for o, v in pin_values.items() if o not in orb}
    if any(v == 0 for v in outside.values()):
        return None
    diam = omega.diameter(n)
    scale = diam / min(outside.values()) if outside else Fraction(1)
    witness = regularize(fscale(scale, pin), omega, Interval(Fraction(0), diam), "inf")
    dist = orbit_distance(s, tup, omega, autos)
    pointwise = all(_value_at(ev, witness, o) == dist[o] for o in dist)
    return WitnessInfo(tup, pin, witness, pointwise, scale)


@dataclass
class ScottRankResult:
    rank: int | None
    max_rank: int
    max_tuple_len: int
    witnesses: dict[tuple, Formula] = field(default_factory=dict)
    pins: dict[tuple, Formula] = field(default_factory=dict)
    witness_ranks: dict[tuple, QuantRank] = field(default_factory=dict)
    rank_certified: bool = False
    level_log: list[str] = field(default_factory=list)

    def witness_for(self, tup: tuple) -> Formula:
        if not tup:
            return ZERO
        return self.witnesses[tuple(tup)]


def scott_rank(
    s: MetricStructure,
    omega: WeakModulus,
    max_rank: int = 3,
    max_tuple_len: int = 2,
    family: DistinguishingFamily | None = None,
    check_witness_ranks: bool = True,
) -> ScottRankResult:
    """Least level n <= max_rank at which every tuple's orbit distance is
    matched pointwise by a generated inf^n witness (pins at depth n-1).

    The estimate can only exceed the true rank when the generated family is
    too sparse; the per-level log records what failed where.
    """
    family = family or DistinguishingFamily(s, omega)
    autos = automorphisms(s)
    result = ScottRankResult(None, max_rank, max_tuple_len)
    for level in range(1, max_rank + 1):
        witnesses: dict[tuple, Formula] = {}
        pins: dict[tuple, Formula] = {}
        ranks: dict[tuple, QuantRank] = {}
        ok = True
        for length in range(1, max_tuple_len + 1):
            for orb in orbit_partition(s, length, autos):
                rep = min(orb)
                info = orbit_witness(s, omega, rep, level - 1, family, autos)
                if info is None:
                    result.level_log.append(
                        f"level {level}: pin of {rep} vanishes outside the orbit"
                    )
                    ok = False
                    break
                if not info.pointwise_ok:
                    result.level_log.append(
                        f"level {level}: witness of {rep} misses the orbit distance"
                    )
                    ok = False
                    break
                if check_witness_ranks:
                    ranks[rep] = quant_rank(info.witness)
                for member in orb:
                    witnesses[member] = info.witness
                    pins[member] = info.pin
            if not ok:
                break
        if ok:
            result.rank = level
            result.witnesses = witnesses
            result.pins = pins
            result.witness_ranks = ranks
            result.rank_certified = all(
                rank_at_most_inf(r, level) for r in ranks.values()
            ) if check_witness_ranks else False
            result.level_log.append(f"level {level}: all orbits defined")
            return result
    return result


def orbit_predicates(rank_result: ScottRankResult) -> dict[tuple, Formula]:
    """Tuple-indexed orbit-distance predicates, the empty tuple mapping to 0."""
    out: dict[tuple, Formula] = {(): ZERO}
    out.update(rank_result.witnesses)
    return out


# ---------------------------------------------------------------------------
# Assembled structure-describing sentences
# ---------------------------------------------------------------------------


@dataclass
class ScottArtifacts:
    structure_name: str
    rank: ScottRankResult
    syntheses: dict[tuple, OrbitSynthesis]
    sentences: list[Formula]
    self_value: Fraction
    sentence_rank: QuantRank
    rank_certified: bool

    @property
    def sentence(self) -> Formula:
        return self.sentences[-1]


def scott_sentence(
    s: MetricStructure,
    omega: WeakModulus,
    n_max: int = 2,
    max_tuple_len: int = 2,
    max_rank: int = 3,
    rank_result: ScottRankResult | None = None,
    family: DistinguishingFamily | None = None,
    fragment_for_synthesis: Callable[[int], Sequence[Formula]] | None = None,
) -> ScottArtifacts:
    """Assemble the sentence family S_n whose vanishing forces a back-and-forth
    system between the described structure and any evaluating one.

    Per base tuple the matrix compares three components against the tuple's
    orbit predicate: agreement on the quantifier-free family anchored at the
    tuple's values, and the two matched-extension conditions over the orbit
    predicates of the one-point extensions.  Exact witnesses serve as every
    approximant, so the S_n family is constant in n.
    """
    family = family or DistinguishingFamily(s, omega)
    ev = family.ev
    rk = rank_result or scott_rank(
        s, omega, max_rank=max_rank, max_tuple_len=max_tuple_len, family=family
    )
    if rk.rank is None:
        raise OrbitError(
            f"orbit witnesses not found at any level <= {rk.max_rank}: {rk.level_log[-3:]}"
        )
    autos = automorphisms(s)
    syntheses: dict[tuple, OrbitSynthesis] = {}
    if fragment_for_synthesis is None:
        depth = rk.rank - 1
        fragment_for_synthesis = lambda length: list(family.basis(length)) + [
            family.formula(t, depth) for t in product(range(s.size()), repeat=length)
        ]
    parts: list[Formula] = []
    for length in range(0, max_tuple_len):
        reps = [min(orb) for orb in orbit_partition(s, length, autos)]
        basis = family.basis(length)
        for rep in reps:
            if length >= 1:
                syntheses[rep] = synthesize_orbit_formula(
                    s, rep, omega, fragment_for_synthesis(length), autos, evaluator=ev
                )
            anchors = [
                value_anchor(phi, _value_at(ev, phi, rep)) for phi in basis
            ]
            chi1 = (
                supn_family(anchors, Interval(Fraction(0), max(a.bound.hi for a in anchors)))
                if anchors
                else ZERO
            )
            extensions = [rk.witness_for(rep + (c,)) for c in range(s.size())]
            ext_bound = extensions[0].bound
            for w in extensions[1:]:
                ext_bound = ext_bound.hull(w.bound)
            chi2 = supn_family([Inf(length, w) for w in extensions], ext_bound)
            chi3 = Sup(length, infn_family(extensions, ext_bound))
            matrix = tminus(MaxF(MaxF(chi1, chi2), chi3), rk.witness_for(rep))
            parts.append(sup_fold(range(length), matrix))
    hull = parts[0].bound
    for p in parts[1:]:
        hull = hull.hull(p.bound)
    sentence = MinF(ONE, supn_family(parts, hull))
    sentences = [sentence] * max(n_max, 1)
    self_value = ev.eval(sentence)
    srank = quant_rank(sentence)
    return ScottArtifacts(
        s.name,
        rk,
        syntheses,
        sentences,
        self_value,
        srank,
        rank_at_most_sup(srank, rk.rank + 1),
    )


def sentence_value(artifacts: ScottArtifacts, other: MetricStructure) -> Fraction:
    """Evaluate the assembled sentence on another same-signature structure."""
    return Evaluator(other).eval(artifacts.sentence)
