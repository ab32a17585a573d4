from fractions import Fraction
from itertools import product

import pytest

from contlogic.numerics import Interval, parse_modulus
from contlogic.structures import (
    DiscreteEncoding,
    MetricStructure,
    PredicateSymbol,
    Signature,
    encode_discrete,
)
from contlogic.formulas import Atomic, Inf, InfN, Sup, SupN, VarTerm, parse_formula, regularize
from contlogic.evaluator import EvalError, Evaluator, audit_modulus, eval_all, eval_formula

from corpus import METRIC_OMEGA, METRIC_SIG, discrete_corpus, formula_corpus, metric_corpus

F = Fraction


def test_eval_distance_diagonal():
    s = metric_corpus()[3]
    for p in range(s.size()):
        assert eval_formula(parse_formula("d(x0,x0)", METRIC_SIG), s, {0: p}) == 0


def test_eval_inf_realizes_witness():
    phi = parse_formula("inf x1. d(x1,x0)", METRIC_SIG)
    for s in metric_corpus()[:5]:
        for p in range(s.size()):
            assert eval_formula(phi, s, {0: p}) == 0


def test_eval_sup_min_two_point_discrete():
    s = encode_discrete(DiscreteEncoding(["a", "b"]))
    sig = s.signature
    phi = parse_formula("sup x0. min(d(x0,x1), d(x0,x2))", sig)
    # exhaustive oracle over both witness slots
    value = eval_formula(phi, s, {1: 0, 2: 1})
    oracle = max(min(s.d(x, 0), s.d(x, 1)) for x in range(2))
    assert value == oracle == 0


def test_eval_unassigned_variable():
    with pytest.raises(EvalError, match="x1"):
        eval_formula(parse_formula("d(x0,x1)", METRIC_SIG), metric_corpus()[1], {0: 0})


def test_eval_results_stay_in_bounds():
    structures = metric_corpus()[:5]
    for phi in formula_corpus(METRIC_SIG, METRIC_OMEGA, count=25, seed=13):
        for s in structures:
            for combo in product(range(s.size()), repeat=3):
                v = Evaluator(s).eval(phi, dict(zip((0, 1, 2), combo)))
                assert phi.bound.contains(v)


def test_audit_atomic_on_valid_structure():
    for s in metric_corpus()[:5]:
        assert audit_modulus(parse_formula("P(x0)", METRIC_SIG), s) == []


def test_audit_catches_understated_modulus():
    # a predicate that claims to vary half as fast as it does
    lying = PredicateSymbol("L", 1, parse_modulus("1/2*r0", 1), Interval(F(0), F(1)))
    sig = Signature([lying])
    s = MetricStructure(
        sig, ["a", "b"], [[F(0), F(1)], [F(1), F(0)]], {"L": {(0,): F(0), (1,): F(1)}}
    )
    report = audit_modulus(Atomic(lying, [VarTerm(0)]), s)
    assert report and report[0].startswith("modulus:")


def test_audit_regularized_output_clean():
    s = metric_corpus()[5]
    for text in ["2*Q(x0,x1)", "P(x0) + Q(x0,x1)", "3*P(x0)"]:
        phi = parse_formula(text, METRIC_SIG)
        reg = regularize(phi, METRIC_OMEGA, phi.bound, "inf")
        assert audit_modulus(reg, s) == []


def test_eval_all_shapes():
    s = metric_corpus()[8]  # four points
    sentence = parse_formula("inf x0. P(x0)", METRIC_SIG)
    assert len(eval_all(sentence, s)) == 1
    unary = parse_formula("P(x0)", METRIC_SIG)
    assert len(eval_all(unary, metric_corpus()[4])) == 3
    binary = parse_formula("Q(x0,x1)", METRIC_SIG)
    assert len(eval_all(binary, s)) == 16


def test_eval_all_cap():
    s = metric_corpus()[8]
    binary = parse_formula("Q(x0,x1)", METRIC_SIG)
    with pytest.raises(EvalError, match="cap"):
        eval_all(binary, s, cap=4)


def test_quantifier_exchange():
    # swapping a variable quantifier with a countable one preserves values
    structures = metric_corpus()[:4]
    members = [
        parse_formula("d(x0,x1)", METRIC_SIG),
        parse_formula("min(Q(x0,x1), P(x0))", METRIC_SIG),
        parse_formula("max(P(x1), d(x0,x1))", METRIC_SIG),
    ]
    hull = members[0].bound
    for m in members[1:]:
        hull = hull.hull(m.bound)
    inf_outside = Inf(1, InfN(members, bound=hull))
    inf_inside = InfN([Inf(1, m) for m in members], bound=hull)
    sup_outside = Sup(1, SupN(members, bound=hull))
    sup_inside = SupN([Sup(1, m) for m in members], bound=hull)
    for s in structures:
        ev = Evaluator(s)
        for p in range(s.size()):
            assert ev.eval(inf_outside, {0: p}) == ev.eval(inf_inside, {0: p})
            assert ev.eval(sup_outside, {0: p}) == ev.eval(sup_inside, {0: p})


def test_discrete_encoding_matches_classical_truth():
    # 0 plays true; classical quantifiers become inf (exists) and sup (forall)
    path = encode_discrete(
        DiscreteEncoding(
            ["a", "b", "c"],
            {"E": {(i, j): 0 if {i, j} in ({0, 1}, {1, 2}) else 1
                   for i in range(3) for j in range(3)}},
        )
    )
    sig = path.signature
    exists_edge = parse_formula("inf x0. inf x1. E(x0,x1)", sig)
    assert eval_formula(exists_edge, path) == 0  # true: the graph has an edge
    exists_loop = parse_formula("inf x0. E(x0,x0)", sig)
    assert eval_formula(exists_loop, path) == 1  # false: no loops
    forall_some_neighbor = parse_formula("sup x0. inf x1. E(x0,x1)", sig)
    assert eval_formula(forall_some_neighbor, path) == 0  # every vertex has a neighbor
    complete = parse_formula("sup x0. sup x1. max(E(x0,x1), d(x0,x1))", sig)
    assert eval_formula(complete, path) == 1  # not a complete graph


def test_prenex_equality_on_discrete_structures_too():
    structures = discrete_corpus()[:4]
    sig = structures[0].signature
    from contlogic.numerics import universal_modulus
    omega = universal_modulus(sig)
    from contlogic.formulas import prenex
    for phi in formula_corpus(sig, omega, count=15, seed=21):
        pn = prenex(phi)
        for s in structures:
            ev = Evaluator(s)
            for combo in product(range(s.size()), repeat=3):
                a = dict(zip((0, 1, 2), combo))
                assert ev.eval(phi, a) == ev.eval(pn, a)
