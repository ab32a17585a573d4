"""Bounded back-and-forth sets, approximate-isomorphism decisions, and
bijection extraction on finite structures.

A pair of tuples survives level 0 when every fragment formula takes values
within the tolerance on the two sides; each further level demands matched
one-point extensions on both sides (below the tuple-length cap).  Two engines
compute survival: a direct memoized game search for arbitrary tolerances, and
a partition-refinement engine usable whenever distinct fragment values are at
least the tolerance apart, in which case tolerance-closeness is plain
equality and survival reduces to equality of refinement colors computed per
structure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations, product
from typing import Mapping, Sequence

from .numerics import Interval, WeakModulus, rat
from .evaluator import Evaluator
from .formulas import Formula, Inf, Sup
from .fragments import infn_family, qf_basis, supn_family, value_anchor
from .structures import MetricStructure

PAIR_CAP = 400_000


class BafError(ValueError):
    pass


@dataclass
class BafConfig:
    omega: WeakModulus
    t: Fraction
    depth: int
    max_tuple_len: int
    fragment: dict[int, list[Formula]] | None = None

    def __post_init__(self):
        self.t = rat(self.t)
        if self.t <= 0:
            raise BafError("tolerance t must be positive")
        if self.depth < 0 or self.max_tuple_len < 1:
            raise BafError("depth must be >= 0 and max_tuple_len >= 1")

    def fragment_for(self, sig, length: int) -> list[Formula]:
        if self.fragment is not None:
            return self.fragment.get(length, [])
        return qf_basis(sig, self.omega, length)


def _check_compatible(a: MetricStructure, b: MetricStructure):
    if a.signature.functions or b.signature.functions:
        raise BafError("function symbols present; back-and-forth needs a relational signature")
    if a.signature != b.signature:
        raise BafError("signature mismatch between the two structures")


class _Side:
    """Per-structure fragment value vectors for every tuple length."""

    def __init__(self, s: MetricStructure, cfg: BafConfig):
        self.s = s
        self.ev = Evaluator(s)
        self.cfg = cfg
        self.vectors: dict[int, dict[tuple, tuple]] = {}
        self._fragments: dict[int, list[Formula]] = {}
        self._value_set: set | None = None

    def fragment(self, length: int) -> list[Formula]:
        if length not in self._fragments:
            self._fragments[length] = self.cfg.fragment_for(self.s.signature, length)
        return self._fragments[length]

    def vector(self, tup: tuple) -> tuple:
        length = len(tup)
        table = self.vectors.setdefault(length, {})
        if tup in table:
            return table[tup]
        vec = tuple(self.ev.eval(phi, dict(enumerate(tup))) for phi in self.fragment(length))
        table[tup] = vec
        return vec

    def value_set(self, max_len: int) -> set:
        if self._value_set is None:
            out = set()
            for length in range(max_len + 1):
                for tup in product(range(self.s.size()), repeat=length):
                    out.update(self.vector(tup))
            self._value_set = out
        return self._value_set


def _level0(sa: _Side, sb: _Side, a: tuple, b: tuple, t: Fraction) -> bool:
    va, vb = sa.vector(a), sb.vector(b)
    return all(abs(x - y) < t for x, y in zip(va, vb))


def _values_gapped(sa: _Side, sb: _Side, max_len: int, t: Fraction) -> bool:
    values = sorted(sa.value_set(max_len) | sb.value_set(max_len))
    return all(y - x >= t for x, y in zip(values, values[1:]))


class _Colors:
    """Partition-refinement colors; equal colors = surviving pair when
    tolerance-closeness coincides with value equality."""

    def __init__(self, cfg: BafConfig):
        self.cfg = cfg
        self._intern: dict = {}
        self._tables: dict[tuple, dict[tuple, int]] = {}

    def _id(self, key) -> int:
        out = self._intern.get(key)
        if out is None:
            out = len(self._intern)
            self._intern[key] = out
        return out

    def color(self, side: _Side, tup: tuple, level: int) -> int:
        table = self._tables.setdefault((id(side), level), {})
        if tup in table:
            return table[tup]
        if level == 0:
            out = self._id(("v", side.vector(tup)))
        elif len(tup) >= self.cfg.max_tuple_len:
            out = self.color(side, tup, level - 1)
        else:
            base = self.color(side, tup, level - 1)
            exts = frozenset(
                self.color(side, tup + (c,), level - 1) for c in range(side.s.size())
            )
            out = self._id(("n", base, exts))
        table[tup] = out
        return out


class _GameMemo:
    """Direct memoized survival search for arbitrary tolerances."""

    def __init__(self, sa: _Side, sb: _Side, cfg: BafConfig):
        self.sa, self.sb, self.cfg = sa, sb, cfg
        self.memo: dict = {}

    def survive(self, a: tuple, b: tuple, level: int) -> bool:
        key = (a, b, level)
        if key in self.memo:
            return self.memo[key]
        out = self._compute(a, b, level)
        self.memo[key] = out
        return out

    def _compute(self, a, b, level) -> bool:
        if not _level0(self.sa, self.sb, a, b, self.cfg.t):
            return False
        if level == 0 or len(a) >= self.cfg.max_tuple_len:
            return True
        na, nb = self.sa.s.size(), self.sb.s.size()
        for c in range(na):
            if not any(self.survive(a + (c,), b + (d,), level - 1) for d in range(nb)):
                return False
        for d in range(nb):
            if not any(self.survive(a + (c,), b + (d,), level - 1) for c in range(na)):
                return False
        return True


@dataclass
class BafSet:
    """Materialized refinement: per level, per tuple length, surviving pairs."""

    t: Fraction
    depth: int
    max_tuple_len: int
    levels: list[dict[int, set]] = field(default_factory=list)

    def pairs(self, level: int | None = None, length: int | None = None):
        table = self.levels[self.depth if level is None else level]
        if length is None:
            out = set()
            for pairs in table.values():
                out |= pairs
            return out
        return set(table.get(length, set()))

    def contains(self, a: tuple, b: tuple, level: int | None = None) -> bool:
        table = self.levels[self.depth if level is None else level]
        return (tuple(a), tuple(b)) in table.get(len(a), set())


def baf_compute(a: MetricStructure, b: MetricStructure, cfg: BafConfig) -> BafSet:
    """Full depth-indexed refinement table; meant for small tuple caps."""
    _check_compatible(a, b)
    sa, sb = _Side(a, cfg), _Side(b, cfg)
    out = BafSet(cfg.t, cfg.depth, cfg.max_tuple_len)
    level0: dict[int, set] = {}
    for length in range(cfg.max_tuple_len + 1):
        count = (a.size() ** length) * (b.size() ** length)
        if count > PAIR_CAP:
            raise BafError(
                f"{count} candidate pairs at length {length}; lower max_tuple_len"
            )
        pairs = set()
        for ta in product(range(a.size()), repeat=length):
            for tb in product(range(b.size()), repeat=length):
                if _level0(sa, sb, ta, tb, cfg.t):
                    pairs.add((ta, tb))
        level0[length] = pairs
    out.levels.append(level0)
    for _ in range(cfg.depth):
        prev = out.levels[-1]
        nxt: dict[int, set] = {}
        for length, pairs in prev.items():
            keep = set()
            for ta, tb in pairs:
                if length >= cfg.max_tuple_len:
                    keep.add((ta, tb))
                    continue
                ext = prev.get(length + 1, set())
                ok = all(
                    any((ta + (c,), tb + (d,)) in ext for d in range(b.size()))
                    for c in range(a.size())
                ) and all(
                    any((ta + (c,), tb + (d,)) in ext for c in range(a.size()))
                    for d in range(b.size())
                )
                if ok:
                    keep.add((ta, tb))
            nxt[length] = keep
        out.levels.append(nxt)
    return out


@dataclass
class IsoVerdict:
    isomorphic: bool
    t: Fraction
    depth: int
    engine: str
    fragment_sizes: dict[int, int]
    witness: Formula | None = None
    witness_gap: tuple | None = None  # (value on A, value on B)
    extension_trace: list | None = None
    failed_at_level: int | None = None


class BafWorkspace:
    """Shares per-structure value vectors and refinement colors across many
    pairwise decisions with one configuration; the color interner is joint, so
    colors computed for different structures stay comparable."""

    def __init__(self, cfg: BafConfig):
        self.cfg = cfg
        self._sides: dict[int, _Side] = {}
        self._colors = _Colors(cfg)

    def side(self, s: MetricStructure) -> _Side:
        if id(s) not in self._sides:
            self._sides[id(s)] = _Side(s, self.cfg)
        return self._sides[id(s)]

    def decide(self, a: MetricStructure, b: MetricStructure) -> IsoVerdict:
        cfg = self.cfg
        _check_compatible(a, b)
        sa, sb = self.side(a), self.side(b)
        sizes = {n: len(sa.fragment(n)) for n in range(cfg.max_tuple_len + 1)}
        if _values_gapped(sa, sb, cfg.max_tuple_len, cfg.t):
            colors = self._colors
            member = lambda x, y, k: colors.color(sa, x, k) == colors.color(sb, y, k)
            engine = "partition"
        else:
            game = _GameMemo(sa, sb, cfg)
            member = game.survive
            engine = "direct"
        if member((), (), cfg.depth):
            return IsoVerdict(True, cfg.t, cfg.depth, engine, sizes)
        level = next(k for k in range(cfg.depth + 1) if not member((), (), k))
        trace: list = []
        witness = _distinguish(sa, sb, (), (), level, member, cfg, trace)
        eva, evb = sa.ev.eval(witness, {}), sb.ev.eval(witness, {})
        return IsoVerdict(
            False, cfg.t, cfg.depth, engine, sizes,
            witness=witness, witness_gap=(eva, evb),
            extension_trace=trace, failed_at_level=level,
        )


def approx_iso_decide(a: MetricStructure, b: MetricStructure, cfg: BafConfig) -> IsoVerdict:
    """Decide whether the empty pair survives the configured refinement depth.

    A "no" verdict carries the distinguishing extension sequence and an
    assembled sentence with value 0 on one side and at least t on the other.
    """
    return BafWorkspace(cfg).decide(a, b)


def _distinguish(sa, sb, a, b, level, member, cfg, trace) -> Formula:
    """Sentence separating a failed pair: value 0 at the A-tuple, >= t at the
    B-tuple.  Level-0 failures anchor a fragment formula at its A-value;
    deeper failures quantify over the unmatched extension."""
    t = cfg.t
    va, vb = sa.vector(a), sb.vector(b)
    fragment = cfg.fragment_for(sa.s.signature, len(a))
    for phi, xa, xb in zip(fragment, va, vb):
        if abs(xa - xb) >= t:
            return value_anchor(phi, xa)
    if level == 0 or len(a) >= cfg.max_tuple_len:
        raise BafError("pair is not distinguished at this level")
    n = len(a)
    for c in range(sa.s.size()):
        if not any(member(a + (c,), b + (d,), level - 1) for d in range(sb.s.size())):
            trace.append(("A", sa.s.points[c]))
            children = [
                _distinguish(sa, sb, a + (c,), b + (d,), level - 1, member, cfg, trace)
                for d in range(sb.s.size())
            ]
            hull = children[0].bound
            for ch in children[1:]:
                hull = hull.hull(ch.bound)
            return Inf(n, supn_family(children, hull))
    for d in range(sb.s.size()):
        if not any(member(a + (c,), b + (d,), level - 1) for c in range(sa.s.size())):
            trace.append(("B", sb.s.points[d]))
            children = [
                _distinguish(sa, sb, a + (c,), b + (d,), level - 1, member, cfg, trace)
                for c in range(sa.s.size())
            ]
            hull = children[0].bound
            for ch in children[1:]:
                hull = hull.hull(ch.bound)
            return Sup(n, infn_family(children, hull))
    raise BafError("pair survives every extension yet failed the level check")


# ---------------------------------------------------------------------------
# Bijection extraction
# ---------------------------------------------------------------------------


@dataclass
class IsoExtraction:
    mapping: dict[str, str]
    discrepancy: Fraction
    isomorphism: bool
    checked: int


def extract_iso(a: MetricStructure, b: MetricStructure) -> IsoExtraction:
    """Branch-and-bound over bijections minimizing the maximum discrepancy
    across distances and all predicate/function tables."""
    if a.signature != b.signature:
        raise BafError("signature mismatch between the two structures")
    if a.size() != b.size():
        raise BafError(f"size mismatch: {a.size()} vs {b.size()}")
    n = a.size()
    preds = [p for p in a.signature.predicates.values() if p.name != "d"]
    funcs = list(a.signature.functions.values())

    best_disc: Fraction | None = None
    best_map: tuple | None = None
    checked = 0

    def partial_disc(img: list[int]) -> Fraction:
        k = len(img)
        disc = Fraction(0)
        for i in range(k):
            for j in range(k):
                disc = max(disc, abs(a.d(i, j) - b.d(img[i], img[j])))
        for p in preds:
            for combo in product(range(k), repeat=p.arity):
                mapped = tuple(img[i] for i in combo)
                disc = max(disc, abs(a.pred_value(p.name, combo) - b.pred_value(p.name, mapped)))
        for f in funcs:
            for combo in product(range(k), repeat=f.arity):
                fa = a.func_value(f.name, combo)
                if fa < k:
                    mapped = tuple(img[i] for i in combo)
                    disc = max(disc, b.d(img[fa], b.func_value(f.name, mapped)))
        return disc

    def search(img: list[int], used: set):
        nonlocal best_disc, best_map, checked
        disc = partial_disc(img)
        if best_disc is not None and disc >= best_disc:
            return
        if len(img) == n:
            checked += 1
            best_disc, best_map = disc, tuple(img)
            return
        for cand in range(n):
            if cand in used:
                continue
            img.append(cand)
            used.add(cand)
            search(img, used)
            used.remove(cand)
            img.pop()

    search([], set())
    assert best_map is not None and best_disc is not None
    mapping = {a.points[i]: b.points[best_map[i]] for i in range(n)}
    return IsoExtraction(mapping, best_disc, best_disc == 0, checked)


def brute_force_isomorphic(a: MetricStructure, b: MetricStructure) -> bool:
    """Exhaustive bijection oracle (test reference, no pruning)."""
    if a.signature != b.signature or a.size() != b.size():
        return False
    n = a.size()
    preds = [p for p in a.signature.predicates.values() if p.name != "d"]
    funcs = list(a.signature.functions.values())
    for perm in permutations(range(n)):
        ok = all(
            a.d(i, j) == b.d(perm[i], perm[j]) for i in range(n) for j in range(n)
        )
        if not ok:
            continue
        for p in preds:
            for combo in product(range(n), repeat=p.arity):
                mapped = tuple(perm[i] for i in combo)
                if a.pred_value(p.name, combo) != b.pred_value(p.name, mapped):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            for f in funcs:
                for combo in product(range(n), repeat=f.arity):
                    mapped = tuple(perm[i] for i in combo)
                    if perm[a.func_value(f.name, combo)] != b.func_value(f.name, mapped):
                        ok = False
                        break
                if not ok:
                    break
        if ok:
            return True
    return False


# ---------------------------------------------------------------------------
# Membership sets from orbit-distance predicates
# ---------------------------------------------------------------------------


@dataclass
class KSetResult:
    pairs: dict[int, set]
    t: Fraction
    condition_reports: dict[str, list[str]]

    @property
    def certified(self) -> bool:
        return all(not v for v in self.condition_reports.values())


def k_set(
    s: MetricStructure,
    orbit_preds: Mapping[tuple, Formula],
    t,
    cfg: BafConfig,
) -> KSetResult:
    """Pairs whose orbit-distance predicate value is below t, certified
    against the three back-and-forth conditions on the available lengths."""
    t = rat(t)
    if t <= 0:
        raise BafError("tolerance t must be positive")
    ev = Evaluator(s)
    lengths = sorted({len(k) for k in orbit_preds})
    for length in lengths:
        for tup in product(range(s.size()), repeat=length):
            if tup not in orbit_preds:
                raise BafError(f"missing orbit predicate for tuple {tup}")
    pairs: dict[int, set] = {length: set() for length in lengths}
    for length in lengths:
        for ta in product(range(s.size()), repeat=length):
            pred = orbit_preds[ta]
            for tb in product(range(s.size()), repeat=length):
                if ev.eval(pred, dict(enumerate(tb))) < t:
                    pairs[length].add((ta, tb))
    side = _Side(s, cfg)
    reports: dict[str, list[str]] = {"values": [], "forth": [], "back": []}
    for length in lengths:
        for ta, tb in pairs[length]:
            va, vb = side.vector(ta), side.vector(tb)
            for phi, xa, xb in zip(cfg.fragment_for(s.signature, length), va, vb):
                if abs(xa - xb) >= t:
                    reports["values"].append(
                        f"pair {ta}/{tb}: fragment gap {abs(xa - xb)} >= {t} on {phi.to_text()}"
                    )
                    break
        if length + 1 in pairs:
            ext = pairs[length + 1]
            for ta, tb in pairs[length]:
                for c in range(s.size()):
                    if not any((ta + (c,), tb + (d,)) in ext for d in range(s.size())):
                        reports["forth"].append(f"pair {ta}/{tb}: extension {c} unmatched")
                        break
                for d in range(s.size()):
                    if not any((ta + (c,), tb + (d,)) in ext for c in range(s.size())):
                        reports["back"].append(f"pair {ta}/{tb}: response {d} unmatched")
                        break
    return KSetResult(pairs, t, reports)
