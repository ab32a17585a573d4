"""Exact rational scalars, bound intervals, and the modulus-of-continuity algebra.

Values are `fractions.Fraction` throughout; nothing in this package touches
floating point.  Moduli are symbolic expression trees closed under the
constructors that preserve the three modulus axioms (vanishing at zero,
monotonicity, subadditivity), so every denotable function is a genuine
modulus of continuity by construction.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

Rational = Fraction


class NumericsError(ValueError):
    pass


class _Infinity:
    """Distinguished top element absorbing under + and max."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash("_Infinity")

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return other is self

    def __gt__(self, other):
        return other is not self

    def __ge__(self, other):
        return True

    def __add__(self, other):
        return self

    __radd__ = __add__


INF = _Infinity()


def rat(value) -> Fraction:
    """Coerce an int, string, or Fraction to an exact rational."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return parse_rational(value)
    raise NumericsError(f"not an exact rational: {value!r}")


_RAT_RE = re.compile(r"^\s*(-?\d+)\s*(?:/\s*(\d+)\s*)?$")


def parse_rational(text: str) -> Fraction:
    m = _RAT_RE.match(text)
    if not m:
        raise NumericsError(f"malformed rational literal: {text!r}")
    num = int(m.group(1))
    den = int(m.group(2)) if m.group(2) else 1
    if den == 0:
        raise NumericsError(f"zero denominator: {text!r}")
    return Fraction(num, den)


def format_rational(q: Fraction) -> str:
    if not isinstance(q, Fraction):
        q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class Interval:
    """Closed rational interval [lo, hi]."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        object.__setattr__(self, "lo", rat(self.lo))
        object.__setattr__(self, "hi", rat(self.hi))
        if self.lo > self.hi:
            raise NumericsError(f"empty interval [{self.lo}, {self.hi}]")

    def contains(self, value: Fraction) -> bool:
        return self.lo <= value <= self.hi

    def covers(self, other: "Interval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def plus(self, other: "Interval") -> "Interval":
        return Interval(self.lo + other.lo, self.hi + other.hi)

    def scaled(self, q: Fraction) -> "Interval":
        q = rat(q)
        if q >= 0:
            return Interval(q * self.lo, q * self.hi)
        return Interval(q * self.hi, q * self.lo)

    def vmax(self, other: "Interval") -> "Interval":
        return Interval(max(self.lo, other.lo), max(self.hi, other.hi))

    def vmin(self, other: "Interval") -> "Interval":
        return Interval(min(self.lo, other.lo), min(self.hi, other.hi))

    def hull(self, other: "Interval") -> "Interval":
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def width(self) -> Fraction:
        return self.hi - self.lo

    def __repr__(self):
        return f"[{format_rational(self.lo)}, {format_rational(self.hi)}]"


UNIT = Interval(Fraction(0), Fraction(1))


# ---------------------------------------------------------------------------
# Modulus expression trees
# ---------------------------------------------------------------------------


class Modulus:
    """n-ary modulus expression.

    Grammar: coordinate projection r_i, nonnegative rational scaling q*m,
    sum m+m, binary max(m,m), composition m o (m_0,...,m_{k-1}), and the
    zero constant.  Every denoted function vanishes at the origin and is
    monotone and subadditive.
    """

    __slots__ = ("arity", "_key", "_hash")

    def __init__(self, arity: int):
        if arity < 0:
            raise NumericsError("negative modulus arity")
        self.arity = arity
        self._key = None
        self._hash = None

    # minimum arity forced by the projections actually used
    def min_arity(self) -> int:
        raise NotImplementedError

    def evaluate(self, values: Sequence[Fraction]) -> Fraction:
        if len(values) != self.arity:
            raise NumericsError(
                f"modulus of arity {self.arity} applied to {len(values)} values"
            )
        for v in values:
            if v < 0:
                raise NumericsError("modulus argument must be nonnegative")
        return self._eval(tuple(rat(v) for v in values))

    def _eval(self, values):
        raise NotImplementedError

    def with_arity(self, arity: int) -> "Modulus":
        if arity == self.arity:
            return self
        if arity < self.min_arity():
            raise NumericsError(
                f"cannot narrow modulus to arity {arity}; uses r{self.min_arity() - 1}"
            )
        return self._rebuild(arity)

    def _rebuild(self, arity: int) -> "Modulus":
        raise NotImplementedError

    def zero_coordinate(self, index: int) -> "Modulus":
        """Substitute the constant zero for projection r_index."""
        raise NotImplementedError

    def key(self):
        if self._key is None:
            self._key = self._make_key()
        return self._key

    def _make_key(self):
        raise NotImplementedError

    def __eq__(self, other):
        return isinstance(other, Modulus) and self.key() == other.key()

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.key())
        return self._hash

    def __repr__(self):
        return f"Modulus({self.to_text()}; arity={self.arity})"

    def to_text(self) -> str:
        return self._text(0)

    # precedence levels: 0 sum, 1 scale, 2 compose/primary
    def _text(self, level: int) -> str:
        raise NotImplementedError


class ZeroMod(Modulus):
    __slots__ = ()

    def min_arity(self):
        return 0

    def _eval(self, values):
        return Fraction(0)

    def _rebuild(self, arity):
        return ZeroMod(arity)

    def zero_coordinate(self, index):
        return self

    def _make_key(self):
        return ("0",)

    def _text(self, level):
        return "0"


class Proj(Modulus):
    __slots__ = ("index",)

    def __init__(self, index: int, arity: int):
        super().__init__(arity)
        if not 0 <= index < arity:
            raise NumericsError(f"projection r{index} out of range for arity {arity}")
        self.index = index

    def min_arity(self):
        return self.index + 1

    def _eval(self, values):
        return values[self.index]

    def _rebuild(self, arity):
        return Proj(self.index, arity)

    def zero_coordinate(self, index):
        if index == self.index:
            return ZeroMod(self.arity)
        return self

    def _make_key(self):
        return ("r", self.index)

    def _text(self, level):
        return f"r{self.index}"


class ScaleMod(Modulus):
    __slots__ = ("factor", "sub")

    def __init__(self, factor: Fraction, sub: Modulus):
        super().__init__(sub.arity)
        factor = rat(factor)
        if factor < 0:
            raise NumericsError("modulus scaling factor must be nonnegative")
        self.factor = factor
        self.sub = sub

    def min_arity(self):
        return self.sub.min_arity()

    def _eval(self, values):
        return self.factor * self.sub._eval(values)

    def _rebuild(self, arity):
        return ScaleMod(self.factor, self.sub.with_arity(arity))

    def zero_coordinate(self, index):
        return scale_mod(self.factor, self.sub.zero_coordinate(index))

    def _make_key(self):
        return ("*", self.factor, self.sub.key())

    def _text(self, level):
        inner = f"{format_rational(self.factor)}*{self.sub._text(1)}"
        return f"({inner})" if level > 1 else inner


class SumMod(Modulus):
    __slots__ = ("lhs", "rhs")

    def __init__(self, lhs: Modulus, rhs: Modulus):
        if lhs.arity != rhs.arity:
            raise NumericsError("modulus sum arity mismatch")
        super().__init__(lhs.arity)
        self.lhs = lhs
        self.rhs = rhs

    def min_arity(self):
        return max(self.lhs.min_arity(), self.rhs.min_arity())

    def _eval(self, values):
        return self.lhs._eval(values) + self.rhs._eval(values)

    def _rebuild(self, arity):
        return SumMod(self.lhs.with_arity(arity), self.rhs.with_arity(arity))

    def zero_coordinate(self, index):
        return sum_mod(self.lhs.zero_coordinate(index), self.rhs.zero_coordinate(index))

    def _make_key(self):
        return ("+", self.lhs.key(), self.rhs.key())

    def _text(self, level):
        inner = f"{self.lhs._text(0)}+{self.rhs._text(1)}"
        return f"({inner})" if level > 0 else inner


class MaxMod(Modulus):
    __slots__ = ("lhs", "rhs")

    def __init__(self, lhs: Modulus, rhs: Modulus):
        if lhs.arity != rhs.arity:
            raise NumericsError("modulus max arity mismatch")
        super().__init__(lhs.arity)
        self.lhs = lhs
        self.rhs = rhs

    def min_arity(self):
        return max(self.lhs.min_arity(), self.rhs.min_arity())

    def _eval(self, values):
        return max(self.lhs._eval(values), self.rhs._eval(values))

    def _rebuild(self, arity):
        return MaxMod(self.lhs.with_arity(arity), self.rhs.with_arity(arity))

    def zero_coordinate(self, index):
        return max_mod(self.lhs.zero_coordinate(index), self.rhs.zero_coordinate(index))

    def _make_key(self):
        return ("max", self.lhs.key(), self.rhs.key())

    def _text(self, level):
        return f"max({self.lhs._text(0)},{self.rhs._text(0)})"


class CompMod(Modulus):
    __slots__ = ("outer", "inners")

    def __init__(self, outer: Modulus, inners: Sequence[Modulus]):
        if outer.arity != len(inners):
            raise NumericsError(
                f"composition: outer arity {outer.arity} != {len(inners)} inner moduli"
            )
        if not inners:
            raise NumericsError("composition needs at least one inner modulus")
        arity = inners[0].arity
        for m in inners:
            if m.arity != arity:
                raise NumericsError("composition: inner moduli arity mismatch")
        super().__init__(arity)
        self.outer = outer
        self.inners = tuple(inners)

    def min_arity(self):
        return max(m.min_arity() for m in self.inners)

    def _eval(self, values):
        mapped = tuple(m._eval(values) for m in self.inners)
        return self.outer._eval(mapped)

    def _rebuild(self, arity):
        return CompMod(self.outer, [m.with_arity(arity) for m in self.inners])

    def zero_coordinate(self, index):
        return CompMod(self.outer, [m.zero_coordinate(index) for m in self.inners])

    def _make_key(self):
        return ("o", self.outer.key(), tuple(m.key() for m in self.inners))

    def _text(self, level):
        lhs = self.outer._text(2)
        args = ",".join(m._text(0) for m in self.inners)
        inner = f"{lhs} o ({args})"
        return f"({inner})" if level > 1 else inner


def scale_mod(factor: Fraction, sub: Modulus) -> Modulus:
    factor = rat(factor)
    if factor == 0 or isinstance(sub, ZeroMod):
        return ZeroMod(sub.arity)
    if factor == 1:
        return sub
    if isinstance(sub, ScaleMod):
        return ScaleMod(factor * sub.factor, sub.sub)
    return ScaleMod(factor, sub)


def sum_mod(lhs: Modulus, rhs: Modulus) -> Modulus:
    if isinstance(lhs, ZeroMod):
        return rhs
    if isinstance(rhs, ZeroMod):
        return lhs
    return SumMod(lhs, rhs)


def max_mod(lhs: Modulus, rhs: Modulus) -> Modulus:
    # max(0, m) = m since every modulus is nonnegative
    if isinstance(lhs, ZeroMod):
        return rhs
    if isinstance(rhs, ZeroMod):
        return lhs
    if lhs.key() == rhs.key():
        return lhs
    return MaxMod(lhs, rhs)


def comp_mod(outer: Modulus, inners: Sequence[Modulus]) -> Modulus:
    if isinstance(outer, ZeroMod):
        return ZeroMod(inners[0].arity if inners else 0)
    if isinstance(outer, Proj):
        return inners[outer.index]
    return CompMod(outer, inners)


def sum_fold(moduli: Sequence[Modulus], arity: int) -> Modulus:
    out: Modulus = ZeroMod(arity)
    for m in moduli:
        out = sum_mod(out, m.with_arity(arity))
    return out


def max_fold(moduli: Sequence[Modulus], arity: int) -> Modulus:
    out: Modulus = ZeroMod(arity)
    for m in moduli:
        out = max_mod(out, m.with_arity(arity))
    return out


def identity_mod() -> Modulus:
    return Proj(0, 1)


def sum_of_coordinates(arity: int) -> Modulus:
    if arity == 0:
        return ZeroMod(0)
    return sum_fold([Proj(i, arity) for i in range(arity)], arity)


def eval_modulus(m: Modulus, values: Sequence[Fraction]) -> Fraction:
    """Exact value of the modulus at a vector of nonnegative rationals."""
    return m.evaluate([rat(v) for v in values])


# ---------------------------------------------------------------------------
# Modulus text grammar
# ---------------------------------------------------------------------------

_MOD_TOKEN = re.compile(r"\s*(r\d+|-?\d+/\d+|-?\d+|max|o|[()*+,])")


def _tokenize_modulus(text: str) -> list[str]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _MOD_TOKEN.match(text, pos)
        if not m:
            rest = text[pos:].strip()
            if not rest:
                break
            raise NumericsError(f"bad modulus syntax near {rest[:20]!r}")
        tokens.append(m.group(1))
        pos = m.end()
    return tokens


class _ModParser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, expected=None):
        tok = self.peek()
        if tok is None:
            raise NumericsError("unexpected end of modulus expression")
        if expected is not None and tok != expected:
            raise NumericsError(f"expected {expected!r}, found {tok!r}")
        self.pos += 1
        return tok

    def parse_sum(self):
        out = self.parse_scaled()
        while self.peek() == "+":
            self.take("+")
            out = [out, self.parse_scaled(), "+"]
        return out

    def parse_scaled(self):
        tok = self.peek()
        if tok is not None and re.fullmatch(r"-?\d+(/\d+)?", tok) and tok != "0":
            # scalar only when followed by '*'; bare '0' is the zero modulus
            if self.pos + 1 < len(self.tokens) and self.tokens[self.pos + 1] == "*":
                q = parse_rational(self.take())
                self.take("*")
                return [q, self.parse_scaled(), "*"]
        return self.parse_comp()

    def parse_comp(self):
        out = self.parse_primary()
        while self.peek() == "o":
            self.take("o")
            self.take("(")
            inners = [self.parse_sum()]
            while self.peek() == ",":
                self.take(",")
                inners.append(self.parse_sum())
            self.take(")")
            out = [out, inners, "o"]
        return out

    def parse_primary(self):
        tok = self.take()
        if tok == "0":
            return ["0"]
        if tok.startswith("r") and tok[1:].isdigit():
            return ["r", int(tok[1:])]
        if tok == "max":
            self.take("(")
            lhs = self.parse_sum()
            self.take(",")
            rhs = self.parse_sum()
            self.take(")")
            return [lhs, rhs, "max"]
        if tok == "(":
            out = self.parse_sum()
            self.take(")")
            return out
        raise NumericsError(f"unexpected token {tok!r} in modulus expression")


def _sketch_min_arity(node) -> int:
    tag = node[-1]
    if node == ["0"]:
        return 0
    if node[0] == "r":
        return node[1] + 1
    if tag == "*":
        return _sketch_min_arity(node[1])
    if tag in ("+", "max"):
        return max(_sketch_min_arity(node[0]), _sketch_min_arity(node[1]))
    if tag == "o":
        return max((_sketch_min_arity(m) for m in node[1]), default=0)
    raise NumericsError("bad modulus sketch")


def _sketch_build(node, arity: int) -> Modulus:
    tag = node[-1]
    if node == ["0"]:
        return ZeroMod(arity)
    if node[0] == "r":
        return Proj(node[1], arity)
    if tag == "*":
        return scale_mod(node[0], _sketch_build(node[1], arity))
    if tag == "+":
        return sum_mod(_sketch_build(node[0], arity), _sketch_build(node[1], arity))
    if tag == "max":
        return max_mod(_sketch_build(node[0], arity), _sketch_build(node[1], arity))
    if tag == "o":
        outer_arity = len(node[1])
        outer = _sketch_build(node[0], outer_arity)
        inners = [_sketch_build(m, arity) for m in node[1]]
        return CompMod(outer, inners)
    raise NumericsError("bad modulus sketch")


def parse_modulus(text: str, arity: int | None = None) -> Modulus:
    """Parse the modulus text grammar; arity defaults to the minimal one."""
    parser = _ModParser(_tokenize_modulus(text))
    sketch = parser.parse_sum()
    if parser.peek() is not None:
        raise NumericsError(f"trailing tokens in modulus expression: {parser.peek()!r}")
    need = _sketch_min_arity(sketch)
    if arity is None:
        arity = need
    if arity < need:
        raise NumericsError(f"modulus uses r{need - 1}, arity {arity} too small")
    return _sketch_build(sketch, arity)


# ---------------------------------------------------------------------------
# Weak moduli (coherent families of truncations)
# ---------------------------------------------------------------------------


class WeakModulus:
    """Coherent family of n-ary moduli; truncation(n) yields the n-ary member."""

    def truncation(self, n: int) -> Modulus:
        raise NotImplementedError

    def diameter(self, n: int) -> Fraction:
        """Largest truncation value on the unit cube; bounds any d-vector in [0,1]."""
        if n == 0:
            return Fraction(0)
        return eval_modulus(self.truncation(n), [Fraction(1)] * n)

    def to_doc(self):
        raise NotImplementedError


class ExplicitWeakModulus(WeakModulus):
    """Weak modulus given by explicit per-arity truncations (e.g. from a file)."""

    def __init__(self, truncations: Sequence[Modulus]):
        self._truncations = {}
        for m in truncations:
            if m.arity < 1:
                raise NumericsError("explicit truncations start at arity 1")
            if m.arity in self._truncations:
                raise NumericsError(f"duplicate truncation for arity {m.arity}")
            self._truncations[m.arity] = m
        if not self._truncations:
            raise NumericsError("no truncations given")

    def truncation(self, n: int) -> Modulus:
        if n == 0:
            return ZeroMod(0)
        if n not in self._truncations:
            raise NumericsError(f"no truncation of arity {n} available")
        return self._truncations[n]

    def to_doc(self):
        items = sorted(self._truncations.items())
        return {"kind": "explicit", "truncations": [m.to_text() for _, m in items]}


class UniversalModulus(WeakModulus):
    """Weak modulus dominating every enumerated atomic formula after index shifts.

    Truncation at n is the finite sum over coordinates i < n of
    (i+1) * max over enumerated entries k <= i of the k-th entry's modulus
    evaluated on the constant vector (r_i, ..., r_i).  Even entries are the
    coordinatewise tuple-distance maxima, entry 0 is the identity, and odd
    entries run through the supplied atomic moduli.  Truncating the infinite
    sum is exact because every omitted summand sits at a zero coordinate.
    """

    def __init__(self, atomic_moduli: Sequence[Modulus]):
        if not atomic_moduli:
            raise NumericsError("universal modulus needs at least one atomic modulus")
        self._atomics = tuple(atomic_moduli)
        self._cache: dict[int, Modulus] = {}

    def _entry(self, k: int) -> Modulus | None:
        if k == 0:
            return identity_mod()
        if k % 2 == 0:
            j = k // 2
            parts = [sum_mod(Proj(i, 2 * j), Proj(j + i, 2 * j)) for i in range(j)]
            return max_fold(parts, 2 * j)
        j = (k - 1) // 2
        if j < len(self._atomics):
            return self._atomics[j]
        return None

    def truncation(self, n: int) -> Modulus:
        if n == 0:
            return ZeroMod(0)
        if n in self._cache:
            return self._cache[n]
        terms = []
        for i in range(n):
            cands = []
            for k in range(i + 1):
                entry = self._entry(k)
                if entry is None:
                    continue
                if entry.arity == 0:
                    diag: Modulus = ZeroMod(n)
                else:
                    diag = comp_mod(entry, [Proj(i, n)] * entry.arity)
                cands.append(diag)
            terms.append(scale_mod(Fraction(i + 1), max_fold(cands, n)))
        out = sum_fold(terms, n)
        self._cache[n] = out
        return out

    def to_doc(self):
        return {"kind": "universal", "atomic_moduli": [m.to_text() for m in self._atomics]}


def weak_modulus_from_doc(doc) -> WeakModulus:
    kind = doc.get("kind")
    if kind == "universal":
        return UniversalModulus([parse_modulus(t) for t in doc["atomic_moduli"]])
    if kind == "explicit":
        return ExplicitWeakModulus([parse_modulus(t) for t in doc["truncations"]])
    raise NumericsError(f"unknown weak modulus kind: {kind!r}")


def universal_modulus(signature, atomic_enumeration=None) -> UniversalModulus:
    """Universal weak modulus for a signature.

    `atomic_enumeration` lists the moduli of the atomic formulas to dominate,
    in enumeration order; by default every predicate symbol of the signature
    contributes its declared modulus (sufficient for atomic formulas applied
    to plain variables, whose constant-vector restriction agrees with the
    symbol's own).
    """
    if atomic_enumeration is None:
        preds = list(getattr(signature, "predicates").values())
        if not preds:
            raise NumericsError("signature has no atomic formulas to enumerate")
        atomic_enumeration = [p.modulus for p in preds]
    else:
        atomic_enumeration = [
            m if isinstance(m, Modulus) else getattr(m, "modulus") for m in atomic_enumeration
        ]
        if not atomic_enumeration:
            raise NumericsError("empty atomic enumeration")
    return UniversalModulus(atomic_enumeration)


# ---------------------------------------------------------------------------
# Sampled verification of the modulus axioms and family coherence
# ---------------------------------------------------------------------------


def check_modulus_axioms(m: Modulus, samples: Iterable[Sequence[Fraction]]) -> list[str]:
    """Check vanishing at zero, monotonicity, and subadditivity on sample pairs.

    The samples iterable yields vectors of nonnegative rationals of the
    modulus arity; consecutive vectors are paired up as (r, s).
    """
    problems = []
    zero = [Fraction(0)] * m.arity
    if eval_modulus(m, zero) != 0:
        problems.append("modulus does not vanish at the origin")
    vecs = [tuple(rat(v) for v in s) for s in samples]
    for i in range(0, len(vecs) - 1, 2):
        r, s = vecs[i], vecs[i + 1]
        both = tuple(a + b for a, b in zip(r, s))
        vr = eval_modulus(m, r)
        vb = eval_modulus(m, both)
        vs = eval_modulus(m, s)
        if not vr <= vb:
            problems.append(f"monotonicity fails at r={r}, s={s}: {vr} > {vb}")
        if not vb <= vr + vs:
            problems.append(f"subadditivity fails at r={r}, s={s}: {vb} > {vr} + {vs}")
    return problems


def check_coherence(
    weak: WeakModulus, max_arity: int, samples: Iterable[Sequence[Fraction]]
) -> list[str]:
    """Exact coherence of truncations: the (n+1)-ary member at (r, 0) equals
    the n-ary member at r, for every sampled r of each arity n <= max_arity."""
    problems = []
    vecs = [tuple(rat(v) for v in s) for s in samples]
    for n in range(1, max_arity):
        mn = weak.truncation(n)
        mn1 = weak.truncation(n + 1)
        for vec in vecs:
            r = (vec * n)[:n]
            lhs = eval_modulus(mn, r)
            rhs = eval_modulus(mn1, r + (Fraction(0),))
            if lhs != rhs:
                problems.append(f"coherence fails at n={n}, r={r}: {lhs} != {rhs}")
    return problems
