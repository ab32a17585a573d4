import random
from fractions import Fraction

import pytest

from contlogic.numerics import (
    INF,
    Interval,
    NumericsError,
    UniversalModulus,
    check_coherence,
    check_modulus_axioms,
    eval_modulus,
    format_rational,
    parse_modulus,
    parse_rational,
    universal_modulus,
    weak_modulus_from_doc,
)

from corpus import METRIC_SIG

F = Fraction


def test_rational_parse_format_roundtrip():
    for text in ["0", "1", "-3", "2/3", "-7/5", "10/4"]:
        q = parse_rational(text)
        assert parse_rational(format_rational(q)) == q
    assert parse_rational("10/4") == F(5, 2)
    with pytest.raises(NumericsError):
        parse_rational("1.5")
    with pytest.raises(NumericsError):
        parse_rational("1/0")


def test_interval_ops():
    u = Interval(F(0), F(1))
    assert u.plus(u) == Interval(F(0), F(2))
    assert u.scaled(F(-1)) == Interval(F(-1), F(0))
    assert u.vmax(Interval(F(1, 2), F(2))) == Interval(F(1, 2), F(2))
    assert u.hull(Interval(F(-1), F(1, 2))) == Interval(F(-1), F(1))
    assert u.contains(F(1, 2)) and not u.contains(F(2))
    with pytest.raises(NumericsError):
        Interval(F(1), F(0))


def test_infinity_absorbs():
    assert INF + F(3) is INF
    assert F(3) + INF is INF
    assert max(INF, F(100)) is INF
    assert F(5) < INF and INF >= INF


def test_eval_modulus_distance_example():
    # the distance symbol's own modulus is the coordinate sum
    m = parse_modulus("r0+r1")
    assert eval_modulus(m, [F(1, 2), F(1, 3)]) == F(5, 6)


def test_eval_modulus_zero_axiom():
    for text in ["r0+r1", "max(r0, 2*r1)", "(r0+r1) o (r0, max(r0,r1))", "0"]:
        m = parse_modulus(text, 2)
        assert eval_modulus(m, [F(0), F(0)]) == 0


def test_eval_modulus_max_example():
    m = parse_modulus("max(r0, 2*r1)")
    assert eval_modulus(m, [F(3), F(1)]) == 3


def test_eval_modulus_arity_mismatch():
    m = parse_modulus("r0+r1")
    with pytest.raises(NumericsError):
        eval_modulus(m, [F(1)])
    with pytest.raises(NumericsError):
        eval_modulus(m, [F(1), F(-1)])


def test_modulus_grammar_roundtrip():
    texts = [
        "r0",
        "0",
        "r0+r1",
        "1/2*r0",
        "max(r0,r1)+2*r1",
        "(r0+r1) o (2*r0,max(r0,r1))",
        "max(r0,r1) o (r1,r0+r1)",
    ]
    for text in texts:
        m = parse_modulus(text, 2)
        again = parse_modulus(m.to_text(), 2)
        assert again == m, text


def test_modulus_grammar_errors():
    with pytest.raises(NumericsError):
        parse_modulus("r0 +")
    with pytest.raises(NumericsError):
        parse_modulus("-1*r0")  # negative scaling factor
    with pytest.raises(NumericsError):
        parse_modulus("r2", 2)  # projection out of range


def _sample_vectors(rng, arity, count):
    pool = [F(0), F(1, 4), F(1, 3), F(1, 2), F(1), F(2), F(5, 3)]
    return [tuple(rng.choice(pool) for _ in range(arity)) for _ in range(count)]


def test_modulus_axioms_on_samples():
    rng = random.Random(3)
    texts = [
        "r0+r1",
        "max(r0, 2*r1)",
        "1/3*r0 + max(r0,r1)",
        "(r0+r1) o (2*r0, max(r0,r1))",
    ]
    for text in texts:
        m = parse_modulus(text, 2)
        assert check_modulus_axioms(m, _sample_vectors(rng, 2, 40)) == []


def test_universal_modulus_truncation_one_is_identity():
    omega = universal_modulus(METRIC_SIG)
    t1 = omega.truncation(1)
    for v in [F(0), F(1, 3), F(2), F(7, 5)]:
        assert eval_modulus(t1, [v]) == v


def test_universal_modulus_vanishes_at_origin():
    omega = universal_modulus(METRIC_SIG)
    for n in range(1, 5):
        assert eval_modulus(omega.truncation(n), [F(0)] * n) == 0


def test_universal_modulus_concatenation_inequality():
    # the k+n-ary member dominates the sum of a k-ary and an n-ary evaluation
    omega = universal_modulus(METRIC_SIG)
    grid = [F(0), F(1, 2), F(1)]
    for k, n in [(1, 1), (1, 2), (2, 2)]:
        mk, mn, mkn = omega.truncation(k), omega.truncation(n), omega.truncation(k + n)
        for r in _grid(grid, k):
            for s in _grid(grid, n):
                assert eval_modulus(mk, r) + eval_modulus(mn, s) <= eval_modulus(mkn, r + s)


def _grid(values, arity):
    if arity == 0:
        return [()]
    smaller = _grid(values, arity - 1)
    return [(v,) + rest for v in values for rest in smaller]


def test_universal_modulus_coherence_exact():
    omega = universal_modulus(METRIC_SIG)
    samples = [(F(1, 2),) * 8, (F(1, 3),) * 8, (F(1), F(0), F(2), F(1, 4)) * 2]
    assert check_coherence(omega, 8, samples) == []


def test_universal_modulus_axioms_per_truncation():
    omega = universal_modulus(METRIC_SIG)
    rng = random.Random(11)
    for n in (1, 2, 3):
        assert check_modulus_axioms(omega.truncation(n), _sample_vectors(rng, n, 30)) == []


def test_weak_modulus_docs_roundtrip():
    omega = universal_modulus(METRIC_SIG)
    doc = omega.to_doc()
    again = weak_modulus_from_doc(doc)
    assert isinstance(again, UniversalModulus)
    for n in (1, 2, 3):
        assert again.truncation(n) == omega.truncation(n)
    explicit = weak_modulus_from_doc(
        {"kind": "explicit", "truncations": ["r0", "r0+r1"]}
    )
    assert eval_modulus(explicit.truncation(2), [F(1), F(2)]) == 3
    with pytest.raises(NumericsError):
        explicit.truncation(3)


def test_universal_modulus_needs_atomics():
    with pytest.raises(NumericsError):
        UniversalModulus([])
