"""Formula term trees for real-valued infinitary logic.

Connectives are +, max, min, and rational scaling; quantifiers are sup/inf
over a variable and countable sup/inf over explicit finite families.  Every
formula carries an inferred bound interval and an inferred modulus over its
variable span, maintained by the constructors.  Tuple pseudo-distance atoms
(``dOmega``) are a dedicated quantifier-free atom kind.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .numerics import (
    Interval,
    Modulus,
    WeakModulus,
    ZeroMod,
    comp_mod,
    Proj,
    eval_modulus,
    format_rational,
    max_fold,
    rat,
    scale_mod,
    sum_mod,
    max_mod,
)
from .structures import DISTANCE, FunctionSymbol, PredicateSymbol, Signature


class FormulaError(ValueError):
    pass


def _span(free: frozenset[int]) -> int:
    return max(free) + 1 if free else 0


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------


class Term:
    __slots__ = ("free_vars",)

    def modulus_at(self, span: int) -> Modulus:
        raise NotImplementedError

    def key(self):
        raise NotImplementedError

    def __eq__(self, other):
        return isinstance(other, Term) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def to_text(self) -> str:
        raise NotImplementedError

    def __repr__(self):
        return self.to_text()


class VarTerm(Term):
    __slots__ = ("index",)

    def __init__(self, index: int):
        if index < 0:
            raise FormulaError("negative variable index")
        self.index = index
        self.free_vars = frozenset([index])

    def modulus_at(self, span: int) -> Modulus:
        return Proj(self.index, span)

    def key(self):
        return ("x", self.index)

    def to_text(self):
        return f"x{self.index}"


class AppTerm(Term):
    __slots__ = ("func", "args")

    def __init__(self, func: FunctionSymbol, args: Sequence[Term]):
        if len(args) != func.arity:
            raise FormulaError(
                f"function {func.name} expects {func.arity} arguments, got {len(args)}"
            )
        self.func = func
        self.args = tuple(args)
        self.free_vars = frozenset().union(*(t.free_vars for t in self.args)) if args else frozenset()

    def modulus_at(self, span: int) -> Modulus:
        if not self.args:
            return ZeroMod(span)
        return comp_mod(self.func.modulus, [t.modulus_at(span) for t in self.args])

    def key(self):
        return ("app", self.func.name, tuple(t.key() for t in self.args))

    def to_text(self):
        return f"{self.func.name}({','.join(t.to_text() for t in self.args)})"


# ---------------------------------------------------------------------------
# Formulas
# ---------------------------------------------------------------------------


class Formula:
    __slots__ = (
        "free_vars", "span", "bound", "_modulus", "_modulus_fn", "_key", "_hash", "_text_c"
    )

    def _finish(self, free: frozenset[int], bound: Interval, modulus_fn):
        self.free_vars = free
        self.span = _span(free)
        self.bound = bound
        self._modulus = None
        self._modulus_fn = modulus_fn
        self._key = None
        self._hash = None
        self._text_c = None

    @property
    def modulus(self) -> Modulus:
        """Inferred modulus over the variable span, computed on first use."""
        if self._modulus is None:
            self._modulus = self._modulus_fn()
            self._modulus_fn = None
        return self._modulus

    def key(self):
        if self._key is None:
            self._key = self._make_key()
        return self._key

    def _make_key(self):
        raise NotImplementedError

    def __eq__(self, other):
        return isinstance(other, Formula) and self.key() == other.key()

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.key())
        return self._hash

    def children(self) -> tuple["Formula", ...]:
        return ()

    def to_text(self) -> str:
        return self._text(0)

    # precedence levels: 0 top / bracketed, 1 sum operand, 2 scale operand;
    # nodes whose _PAREN_LEVEL is below the requested level get wrapped
    _PAREN_LEVEL = 99  # self-delimited by default

    def _text(self, level: int) -> str:
        if self._text_c is None:
            self._text_c = self._inner_text()
        if level > self._PAREN_LEVEL:
            return f"({self._text_c})"
        return self._text_c

    def _inner_text(self) -> str:
        raise NotImplementedError

    def __repr__(self):
        return self.to_text()


class Const(Formula):
    """The zero-ary formulas 0 and 1."""

    __slots__ = ("value",)

    def __init__(self, value):
        value = rat(value)
        if value not in (Fraction(0), Fraction(1)):
            raise FormulaError("only the constants 0 and 1 exist; scale 1 for others")
        self.value = value
        self._finish(frozenset(), Interval(value, value), lambda: ZeroMod(0))

    def _make_key(self):
        return ("const", self.value)

    def _inner_text(self):
        return format_rational(self.value)


ZERO = Const(0)
ONE = Const(1)


class Atomic(Formula):
    __slots__ = ("pred", "terms")

    def __init__(self, pred: PredicateSymbol, terms: Sequence[Term]):
        if len(terms) != pred.arity:
            raise FormulaError(
                f"predicate {pred.name} expects {pred.arity} arguments, got {len(terms)}"
            )
        self.pred = pred
        self.terms = tuple(terms)
        free = frozenset().union(*(t.free_vars for t in self.terms)) if terms else frozenset()
        span = _span(free)
        if self.terms:
            modulus_fn = lambda: comp_mod(pred.modulus, [t.modulus_at(span) for t in self.terms])
        else:
            modulus_fn = lambda: ZeroMod(span)
        self._finish(free, pred.bound, modulus_fn)

    def _make_key(self):
        return ("atom", self.pred.name, tuple(t.key() for t in self.terms))

    def _inner_text(self):
        return f"{self.pred.name}({','.join(t.to_text() for t in self.terms)})"


class DOmegaAtom(Formula):
    """Tuple pseudo-distance atom: a weak-modulus truncation applied to the
    coordinatewise distances d(x_i, y_i).  Treated as quantifier-free."""

    __slots__ = ("tuple_modulus", "xs", "ys")

    def __init__(self, tuple_modulus: Modulus, xs: Sequence[int], ys: Sequence[int]):
        n = tuple_modulus.arity
        if n < 1:
            raise FormulaError("dOmega needs arity at least 1")
        if len(xs) != n or len(ys) != n:
            raise FormulaError(f"dOmega arity {n} needs {n} x-variables and {n} y-variables")
        self.tuple_modulus = tuple_modulus
        self.xs = tuple(xs)
        self.ys = tuple(ys)
        if len(set(self.xs) | set(self.ys)) != 2 * n:
            raise FormulaError("dOmega variables must be pairwise distinct")
        free = frozenset(self.xs) | frozenset(self.ys)
        span = _span(free)
        modulus_fn = lambda: comp_mod(
            tuple_modulus,
            [sum_mod(Proj(a, span), Proj(b, span)) for a, b in zip(self.xs, self.ys)],
        )
        hi = eval_modulus(tuple_modulus, [Fraction(1)] * n)
        self._finish(free, Interval(Fraction(0), hi), modulus_fn)

    def _make_key(self):
        return ("domega", self.tuple_modulus.key(), self.xs, self.ys)

    def _inner_text(self):
        n = self.tuple_modulus.arity
        xs = ",".join(f"x{i}" for i in self.xs)
        ys = ",".join(f"x{i}" for i in self.ys)
        return f"dOmega({n}; {xs}; {ys})"


class Plus(Formula):
    __slots__ = ("lhs", "rhs")

    def __init__(self, lhs: Formula, rhs: Formula):
        self.lhs = lhs
        self.rhs = rhs
        free = lhs.free_vars | rhs.free_vars
        span = _span(free)
        modulus_fn = lambda: sum_mod(lhs.modulus.with_arity(span), rhs.modulus.with_arity(span))
        self._finish(free, lhs.bound.plus(rhs.bound), modulus_fn)

    def children(self):
        return (self.lhs, self.rhs)

    def _make_key(self):
        return ("+", self.lhs.key(), self.rhs.key())

    _PAREN_LEVEL = 0

    def _inner_text(self):
        # operands print at sum level: quantifiers and nested sums are
        # parenthesized, so bodies never swallow the following summand
        return f"{self.lhs._text(1)} + {self.rhs._text(1)}"


class _Lattice(Formula):
    __slots__ = ("lhs", "rhs")

    _name = "?"

    def __init__(self, lhs: Formula, rhs: Formula):
        self.lhs = lhs
        self.rhs = rhs
        free = lhs.free_vars | rhs.free_vars
        span = _span(free)
        modulus_fn = lambda: max_mod(lhs.modulus.with_arity(span), rhs.modulus.with_arity(span))
        self._finish(free, self._combine(lhs.bound, rhs.bound), modulus_fn)

    def children(self):
        return (self.lhs, self.rhs)

    def _make_key(self):
        return (self._name, self.lhs.key(), self.rhs.key())

    def _inner_text(self):
        return f"{self._name}({self.lhs._text(0)},{self.rhs._text(0)})"


class MaxF(_Lattice):
    __slots__ = ()
    _name = "max"

    @staticmethod
    def _combine(a, b):
        return a.vmax(b)


class MinF(_Lattice):
    __slots__ = ()
    _name = "min"

    @staticmethod
    def _combine(a, b):
        return a.vmin(b)


class ScaleF(Formula):
    __slots__ = ("factor", "sub")

    def __init__(self, factor, sub: Formula):
        self.factor = rat(factor)
        self.sub = sub
        factor = self.factor
        modulus_fn = lambda: scale_mod(abs(factor), sub.modulus)
        self._finish(sub.free_vars, sub.bound.scaled(self.factor), modulus_fn)

    def children(self):
        return (self.sub,)

    def _make_key(self):
        return ("scale", self.factor, self.sub.key())

    _PAREN_LEVEL = 1

    def _inner_text(self):
        return f"{format_rational(self.factor)}*{self.sub._text(2)}"


class _Quant(Formula):
    __slots__ = ("var", "sub")

    _name = "?"

    def __init__(self, var: int, sub: Formula):
        if var < 0:
            raise FormulaError("negative variable index")
        self.var = var
        self.sub = sub
        free = sub.free_vars - {var}
        span = _span(free)
        if var in sub.free_vars:
            modulus_fn = lambda: sub.modulus.zero_coordinate(var).with_arity(span)
        else:
            modulus_fn = lambda: sub.modulus.with_arity(span)
        self._finish(free, sub.bound, modulus_fn)

    def children(self):
        return (self.sub,)

    def _make_key(self):
        return (self._name, self.var, self.sub.key())

    _PAREN_LEVEL = 0

    def _inner_text(self):
        return f"{self._name} x{self.var}. {self.sub._text(0)}"


class Sup(_Quant):
    __slots__ = ()
    _name = "sup"


class Inf(_Quant):
    __slots__ = ()
    _name = "inf"


class _QuantN(Formula):
    __slots__ = ("members",)

    _name = "?"

    def __init__(self, members: Sequence[Formula], bound: Interval | None = None):
        if not members:
            raise FormulaError(f"{self._name} needs at least one member formula")
        self.members = tuple(members)
        free = frozenset().union(*(c.free_vars for c in self.members))
        span = _span(free)
        if bound is None:
            bound = self.members[0].bound
            for c in self.members[1:]:
                if c.bound != bound:
                    raise FormulaError(
                        f"{self._name}: incompatible bounds {c.bound} vs {bound}"
                    )
        else:
            for c in self.members:
                if not bound.covers(c.bound):
                    raise FormulaError(
                        f"{self._name}: member bound {c.bound} escapes shared bound {bound}"
                    )
        members = self.members
        modulus_fn = lambda: max_fold([c.modulus for c in members], span)
        self._finish(free, bound, modulus_fn)

    def children(self):
        return self.members

    def _make_key(self):
        return (self._name, tuple(c.key() for c in self.members), (self.bound.lo, self.bound.hi))

    def _inner_text(self):
        return f"{self._name}[{'; '.join(c._text(0) for c in self.members)}]"


class SupN(_QuantN):
    __slots__ = ()
    _name = "supN"


class InfN(_QuantN):
    __slots__ = ()
    _name = "infN"


QUANTIFIERS = (Sup, Inf, SupN, InfN)
SUP_LIKE = (Sup, SupN)
INF_LIKE = (Inf, InfN)


# ---------------------------------------------------------------------------
# Convenience constructors and sugar
# ---------------------------------------------------------------------------


def const_rational(q) -> Formula:
    q = rat(q)
    if q == 0:
        return ZERO
    if q == 1:
        return ONE
    return ScaleF(q, ONE)


def fscale(q, sub: Formula) -> Formula:
    q = rat(q)
    if isinstance(sub, ScaleF):
        return fscale(q * sub.factor, sub.sub)
    if q == 1:
        return sub
    return ScaleF(q, sub)


def negate(sub: Formula) -> Formula:
    return fscale(Fraction(-1), sub)


def tminus(lhs: Formula, rhs: Formula) -> Formula:
    """Truncated difference max(lhs - rhs, 0)."""
    return MaxF(Plus(lhs, negate(rhs)), ZERO)


def fabs(sub: Formula) -> Formula:
    """|sub| as max(sub,0) + (-1)*min(sub,0)."""
    return Plus(MaxF(sub, ZERO), negate(MinF(sub, ZERO)))


def clamp(sub: Formula, interval: Interval) -> Formula:
    return MinF(MaxF(sub, const_rational(interval.lo)), const_rational(interval.hi))


def sup_fold(variables: Sequence[int], body: Formula) -> Formula:
    for v in reversed(list(variables)):
        body = Sup(v, body)
    return body


def inf_fold(variables: Sequence[int], body: Formula) -> Formula:
    for v in reversed(list(variables)):
        body = Inf(v, body)
    return body


def max_fold_f(members: Sequence[Formula]) -> Formula:
    if not members:
        return ZERO
    out = members[0]
    for m in members[1:]:
        out = MaxF(out, m)
    return out


def plus_fold(members: Sequence[Formula]) -> Formula:
    if not members:
        return ZERO
    out = members[0]
    for m in members[1:]:
        out = Plus(out, m)
    return out


def tuple_distance_formula(omega: WeakModulus, n: int) -> DOmegaAtom:
    """The 2n-variable pseudo-distance between (x_0..x_{n-1}) and (x_n..x_{2n-1})."""
    if n < 1:
        raise FormulaError("tuple distance needs n >= 1")
    return DOmegaAtom(omega.truncation(n), tuple(range(n)), tuple(range(n, 2 * n)))


# ---------------------------------------------------------------------------
# Structural helpers
# ---------------------------------------------------------------------------


def walk(phi: Formula) -> Iterable[Formula]:
    """All nodes, visiting shared subtrees once."""
    seen: set = set()
    stack = [phi]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        yield node
        stack.extend(node.children())


def is_quantifier_free(phi: Formula) -> bool:
    return all(not isinstance(f, QUANTIFIERS) for f in walk(phi))


def is_prenex(phi: Formula) -> bool:
    if isinstance(phi, (Sup, Inf)):
        return is_prenex(phi.sub)
    if isinstance(phi, (SupN, InfN)):
        return all(is_prenex(c) for c in phi.members)
    return is_quantifier_free(phi)


def max_var_index(phi: Formula) -> int:
    out = -1
    for f in walk(phi):
        if isinstance(f, (Sup, Inf)):
            out = max(out, f.var)
        if f.free_vars:
            out = max(out, max(f.free_vars))
    return out


def _rename_term(t: Term, mapping: dict[int, int]) -> Term:
    if isinstance(t, VarTerm):
        return VarTerm(mapping.get(t.index, t.index))
    return AppTerm(t.func, [_rename_term(a, mapping) for a in t.args])


def rename_vars(phi: Formula, mapping: dict[int, int]) -> Formula:
    """Rename free variables; targets must be fresh (never captured)."""
    return _rename(phi, mapping, {})


def _rename(phi: Formula, mapping: dict[int, int], memo: dict) -> Formula:
    if not mapping or not (phi.free_vars & set(mapping)):
        return phi
    key = (id(phi), tuple(sorted((k, mapping[k]) for k in phi.free_vars if k in mapping)))
    if key in memo:
        return memo[key]
    if isinstance(phi, Atomic):
        out: Formula = Atomic(phi.pred, [_rename_term(t, mapping) for t in phi.terms])
    elif isinstance(phi, DOmegaAtom):
        out = DOmegaAtom(
            phi.tuple_modulus,
            [mapping.get(i, i) for i in phi.xs],
            [mapping.get(i, i) for i in phi.ys],
        )
    elif isinstance(phi, (Plus, MaxF, MinF)):
        out = type(phi)(_rename(phi.lhs, mapping, memo), _rename(phi.rhs, mapping, memo))
    elif isinstance(phi, ScaleF):
        out = ScaleF(phi.factor, _rename(phi.sub, mapping, memo))
    elif isinstance(phi, (Sup, Inf)):
        inner = {k: v for k, v in mapping.items() if k != phi.var}
        if phi.var in inner.values():
            raise FormulaError(f"renaming captures bound variable x{phi.var}")
        out = type(phi)(phi.var, _rename(phi.sub, inner, memo))
    elif isinstance(phi, (SupN, InfN)):
        out = type(phi)([_rename(c, mapping, memo) for c in phi.members], bound=phi.bound)
    else:
        out = phi
    memo[key] = out
    return out


class FreshVars:
    def __init__(self, start: int):
        self.next = start

    def take(self) -> int:
        self.next += 1
        return self.next - 1


# ---------------------------------------------------------------------------
# Prenex normal form
# ---------------------------------------------------------------------------


def _interval_combine(cls, a: Interval, b: Interval) -> Interval:
    if cls is Plus:
        return a.plus(b)
    if cls is MaxF:
        return a.vmax(b)
    return a.vmin(b)


def _hoist_binary(cls, lhs: Formula, rhs: Formula, fresh: FreshVars, current: str | None) -> Formula:
    """Hoist quantifiers out of a binary connective, extending the current
    quantifier run greedily: as long as a root of the current kind is
    available it is hoisted first, so runs are never broken up."""
    quantified = [side for side in (0, 1) if isinstance((lhs, rhs)[side], QUANTIFIERS)]
    if not quantified:
        return cls(lhs, rhs)
    wanted = SUP_LIKE if current == "sup" else INF_LIKE if current == "inf" else None
    pick = None
    if wanted is not None:
        for side in quantified:
            if isinstance((lhs, rhs)[side], wanted):
                pick = side
                break
    if pick is None:
        pick = quantified[0]
    node = (lhs, rhs)[pick]
    run = "sup" if isinstance(node, SUP_LIKE) else "inf"
    if isinstance(node, (Sup, Inf)):
        v = fresh.take()
        body = rename_vars(node.sub, {node.var: v})
        if pick == 0:
            return type(node)(v, _hoist_binary(cls, body, rhs, fresh, run))
        return type(node)(v, _hoist_binary(cls, lhs, body, fresh, run))
    combined = _interval_combine(cls, lhs.bound, rhs.bound)
    if pick == 0:
        members = [_hoist_binary(cls, c, rhs, fresh, run) for c in node.members]
    else:
        members = [_hoist_binary(cls, lhs, c, fresh, run) for c in node.members]
    return type(node)(members, bound=combined)


_SWAP = {Sup: Inf, Inf: Sup, SupN: InfN, InfN: SupN}


def _hoist_scale(q: Fraction, sub: Formula, fresh: FreshVars) -> Formula:
    if isinstance(sub, (Sup, Inf)):
        if q == 0:
            return ZERO
        kind = type(sub) if q > 0 else _SWAP[type(sub)]
        return kind(sub.var, _hoist_scale(q, sub.sub, fresh))
    if isinstance(sub, (SupN, InfN)):
        if q == 0:
            return ZERO
        kind = type(sub) if q > 0 else _SWAP[type(sub)]
        members = [_hoist_scale(q, c, fresh) for c in sub.members]
        return kind(members, bound=sub.bound.scaled(q))
    return fscale(q, sub)


def prenex(phi: Formula, prefer: str | None = None) -> Formula:
    """Equivalent formula with all quantifiers outermost over a
    quantifier-free matrix; exact evaluation equality on finite structures.

    `prefer` biases which quantifier kind is hoisted first when both operands
    of a connective are quantified ("sup" or "inf"); the results are logically
    equivalent but may differ in alternation count.  Without a preference the
    orientation with the smaller alternation count is returned, so prenexing
    never increases the quantifier rank.
    """
    if prefer is None:
        inf_first = prenex(phi, "inf")
        sup_first = prenex(phi, "sup")
        if quant_rank(sup_first).level < quant_rank(inf_first).level:
            return sup_first
        return inf_first
    fresh = FreshVars(max_var_index(phi) + 1)
    return _prenex(phi, fresh, prefer)


def _prenex(phi: Formula, fresh: FreshVars, prefer: str | None) -> Formula:
    if isinstance(phi, (Atomic, DOmegaAtom, Const)):
        return phi
    if isinstance(phi, (Sup, Inf)):
        return type(phi)(phi.var, _prenex(phi.sub, fresh, prefer))
    if isinstance(phi, (SupN, InfN)):
        return type(phi)([_prenex(c, fresh, prefer) for c in phi.members], bound=phi.bound)
    if isinstance(phi, ScaleF):
        return _hoist_scale(phi.factor, _prenex(phi.sub, fresh, prefer), fresh)
    if isinstance(phi, (Plus, MaxF, MinF)):
        return _hoist_binary(
            type(phi), _prenex(phi.lhs, fresh, prefer), _prenex(phi.rhs, fresh, prefer), fresh, prefer
        )
    raise FormulaError(f"unknown node {type(phi).__name__}")


# ---------------------------------------------------------------------------
# DeMorgan dual
# ---------------------------------------------------------------------------


def demorgan_dual(phi: Formula) -> Formula:
    """Swap sup/inf and negate the matrix; evaluates to -phi everywhere.
    Input must be prenex."""
    if not is_prenex(phi):
        raise FormulaError("demorgan dual requires a prenex formula")
    return _dual(phi)


def _dual(phi: Formula) -> Formula:
    if isinstance(phi, (Sup, Inf)):
        return _SWAP[type(phi)](phi.var, _dual(phi.sub))
    if isinstance(phi, (SupN, InfN)):
        return _SWAP[type(phi)]([_dual(c) for c in phi.members], bound=phi.bound.scaled(-1))
    return negate(phi)


# ---------------------------------------------------------------------------
# Quantifier complexity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuantRank:
    kind: str  # "qf" | "inf" | "sup" | "both"
    level: int

    def __repr__(self):
        if self.kind == "qf":
            return "qf"
        return f"{self.kind}^{self.level}"


def quant_rank(phi: Formula) -> QuantRank:
    """Minimal syntactic alternation rank.

    Computed compositionally: each node carries the least levels at which it
    is presentable in inf-leading and sup-leading form.  Connectives take the
    componentwise maximum (each class is closed under the connectives), a
    negative scaling swaps the two, and a quantifier either extends a run of
    its own kind or opens a new block over the opposite form; a formula of
    one kind counts as the other at one level higher via a trivial singleton
    family.  Every rule is an exact finite-structure equivalence realized by
    the hoisting rewrites, so the reported rank is achievable by prenexing.
    """
    inf_level, sup_level = _rank_pair(phi, {})
    if inf_level == 0 and sup_level == 0:
        return QuantRank("qf", 0)
    if inf_level < sup_level:
        return QuantRank("inf", inf_level)
    if sup_level < inf_level:
        return QuantRank("sup", sup_level)
    return QuantRank("both", inf_level)


def _rank_pair(phi: Formula, memo: dict) -> tuple[int, int]:
    key = id(phi)
    if key in memo:
        return memo[key]
    if isinstance(phi, (Atomic, DOmegaAtom, Const)):
        out = (0, 0)
    elif isinstance(phi, (Plus, MaxF, MinF)):
        a = _rank_pair(phi.lhs, memo)
        b = _rank_pair(phi.rhs, memo)
        out = (max(a[0], b[0]), max(a[1], b[1]))
    elif isinstance(phi, ScaleF):
        i, s = _rank_pair(phi.sub, memo)
        if phi.factor > 0:
            out = (i, s)
        elif phi.factor < 0:
            out = (s, i)
        else:
            out = (0, 0)
    elif isinstance(phi, (Sup, SupN)):
        if isinstance(phi, Sup):
            i, s = _rank_pair(phi.sub, memo)
        else:
            i = s = 0
            for c in phi.members:
                ci, cs = _rank_pair(c, memo)
                i, s = max(i, ci), max(s, cs)
        as_sup = min(max(s, 1), i + 1)
        out = (as_sup + 1, as_sup)
    elif isinstance(phi, (Inf, InfN)):
        if isinstance(phi, Inf):
            i, s = _rank_pair(phi.sub, memo)
        else:
            i = s = 0
            for c in phi.members:
                ci, cs = _rank_pair(c, memo)
                i, s = max(i, ci), max(s, cs)
        as_inf = min(max(i, 1), s + 1)
        out = (as_inf, as_inf + 1)
    else:
        raise FormulaError(f"unknown node {type(phi).__name__}")
    memo[key] = out
    return out


def rank_at_most_sup(r: QuantRank, level: int) -> bool:
    """Whether a formula of rank r counts as sup^level."""
    if r.kind == "qf":
        return True
    if r.kind in ("sup", "both"):
        return r.level <= level
    return r.level + 1 <= level  # an inf^k formula is sup^{k+1}


def rank_at_most_inf(r: QuantRank, level: int) -> bool:
    if r.kind == "qf":
        return True
    if r.kind in ("inf", "both"):
        return r.level <= level
    return r.level + 1 <= level


# ---------------------------------------------------------------------------
# (weak modulus, interval) regularization
# ---------------------------------------------------------------------------


def regularize(phi: Formula, omega: WeakModulus, interval: Interval, mode: str) -> Formula:
    """Smooth a formula to respect the weak modulus exactly and land in the
    interval: in inf mode the value at a tuple is the minimum over tuples y of
    clamp(phi)(y) plus the tuple pseudo-distance; sup mode subtracts it.

    Output's inferred modulus is exactly the omega truncation at the free
    arity, so the modulus audit doubles as the respect certificate.
    """
    if mode not in ("inf", "sup"):
        raise FormulaError(f"regularize mode must be 'inf' or 'sup', not {mode!r}")
    xs = sorted(phi.free_vars)
    if not xs:
        return clamp(phi, interval)
    n = len(xs)
    base = max_var_index(phi) + 1
    ys = list(range(base, base + n))
    core = clamp(rename_vars(phi, dict(zip(xs, ys))), interval)
    dom = DOmegaAtom(omega.truncation(n), xs, ys)
    if mode == "inf":
        return inf_fold(ys, Plus(core, dom))
    return sup_fold(ys, Plus(core, negate(dom)))


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_F_TOKEN = re.compile(r"\s*(-?\d+/\d+|-?\d+|[A-Za-z_][A-Za-z0-9_]*|[()\[\];,.+*])")

_KEYWORDS = {"sup", "inf", "supN", "infN", "max", "min", "tminus", "abs", "dOmega"}


def _tokenize_formula(text: str) -> list[str]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _F_TOKEN.match(text, pos)
        if not m:
            rest = text[pos:].strip()
            if not rest:
                break
            raise FormulaError(f"bad formula syntax near {rest[:25]!r}")
        tokens.append(m.group(1))
        pos = m.end()
    return tokens


_VAR_RE = re.compile(r"^x\d+$")
_RAT_TOKEN_RE = re.compile(r"^-?\d+(/\d+)?$")


class _FormulaParser:
    def __init__(self, tokens: list[str], sig: Signature, omega: WeakModulus | None):
        self.tokens = tokens
        self.sig = sig
        self.omega = omega
        self.pos = 0

    def peek(self, ahead=0):
        i = self.pos + ahead
        return self.tokens[i] if i < len(self.tokens) else None

    def take(self, expected=None):
        tok = self.peek()
        if tok is None:
            raise FormulaError("unexpected end of formula")
        if expected is not None and tok != expected:
            raise FormulaError(f"expected {expected!r}, found {tok!r}")
        self.pos += 1
        return tok

    def parse(self) -> Formula:
        out = self.parse_sum()
        if self.peek() is not None:
            raise FormulaError(f"trailing tokens after formula: {self.peek()!r}")
        return out

    def parse_sum(self) -> Formula:
        out = self.parse_item()
        while self.peek() == "+":
            self.take("+")
            out = Plus(out, self.parse_item())
        return out

    def parse_item(self) -> Formula:
        tok = self.peek()
        if tok in ("sup", "inf"):
            return self.parse_quantifier()
        if tok is not None and _RAT_TOKEN_RE.match(tok) and self.peek(1) == "*":
            q = rat(self.take())
            self.take("*")
            return ScaleF(q, self.parse_item())
        return self.parse_primary()

    def parse_quantifier(self) -> Formula:
        kind = self.take()
        var = self.take()
        if not _VAR_RE.match(var):
            raise FormulaError(f"expected a variable x<i> after {kind}, found {var!r}")
        self.take(".")
        body = self.parse_sum()
        return (Sup if kind == "sup" else Inf)(int(var[1:]), body)

    def parse_family(self, kind: str) -> Formula:
        self.take("[")
        members = [self.parse_sum()]
        while self.peek() == ";":
            self.take(";")
            members.append(self.parse_sum())
        self.take("]")
        return (SupN if kind == "supN" else InfN)(members)

    def parse_primary(self) -> Formula:
        tok = self.take()
        if tok == "0":
            return ZERO
        if tok == "1":
            return ONE
        if tok == "(":
            out = self.parse_sum()
            self.take(")")
            return out
        if tok in ("max", "min"):
            self.take("(")
            lhs = self.parse_sum()
            self.take(",")
            rhs = self.parse_sum()
            self.take(")")
            return (MaxF if tok == "max" else MinF)(lhs, rhs)
        if tok == "tminus":
            self.take("(")
            lhs = self.parse_sum()
            self.take(",")
            rhs = self.parse_sum()
            self.take(")")
            return tminus(lhs, rhs)
        if tok == "abs":
            self.take("(")
            sub = self.parse_sum()
            self.take(")")
            return fabs(sub)
        if tok in ("supN", "infN"):
            return self.parse_family(tok)
        if tok == "dOmega":
            return self.parse_domega()
        if _VAR_RE.match(tok):
            raise FormulaError(f"bare variable {tok!r} is a term, not a formula")
        if tok in self.sig.predicates:
            pred = self.sig.predicates[tok]
            return Atomic(pred, self.parse_term_args(pred.arity, tok))
        raise FormulaError(f"unknown symbol {tok!r}")

    def parse_domega(self) -> Formula:
        if self.omega is None:
            raise FormulaError("dOmega atom needs a weak modulus in scope")
        self.take("(")
        n_tok = self.take()
        if not n_tok.isdigit() or int(n_tok) < 1:
            raise FormulaError(f"dOmega arity must be a positive integer, found {n_tok!r}")
        n = int(n_tok)
        self.take(";")
        xs = self.parse_var_list()
        self.take(";")
        ys = self.parse_var_list()
        self.take(")")
        return DOmegaAtom(self.omega.truncation(n), xs, ys)

    def parse_var_list(self) -> list[int]:
        out = [self.parse_var()]
        while self.peek() == ",":
            self.take(",")
            out.append(self.parse_var())
        return out

    def parse_var(self) -> int:
        tok = self.take()
        if not _VAR_RE.match(tok):
            raise FormulaError(f"expected a variable x<i>, found {tok!r}")
        return int(tok[1:])

    def parse_term_args(self, arity: int, name: str) -> list[Term]:
        self.take("(")
        args: list[Term] = []
        if self.peek() != ")":
            args.append(self.parse_term())
            while self.peek() == ",":
                self.take(",")
                args.append(self.parse_term())
        self.take(")")
        if len(args) != arity:
            raise FormulaError(f"{name} expects {arity} arguments, got {len(args)}")
        return args

    def parse_term(self) -> Term:
        tok = self.take()
        if _VAR_RE.match(tok):
            return VarTerm(int(tok[1:]))
        if tok in self.sig.functions:
            func = self.sig.functions[tok]
            return AppTerm(func, self.parse_term_args(func.arity, tok))
        raise FormulaError(f"unknown term symbol {tok!r}")


def parse_formula(text: str, sig: Signature, omega: WeakModulus | None = None) -> Formula:
    return _FormulaParser(_tokenize_formula(text), sig, omega).parse()


def infer_bound(phi: Formula) -> Interval:
    return phi.bound


def infer_modulus(phi: Formula) -> Modulus:
    return phi.modulus
