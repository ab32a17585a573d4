from fractions import Fraction
from itertools import product

import pytest

from contlogic.numerics import universal_modulus
from contlogic.structures import DiscreteEncoding, encode_discrete
from contlogic.formulas import FunctionSymbol  # noqa: F401  (import smoke)
from contlogic.evaluator import Evaluator
from contlogic.baf import (
    BafConfig,
    BafError,
    BafWorkspace,
    approx_iso_decide,
    baf_compute,
    brute_force_isomorphic,
    extract_iso,
    k_set,
)
from contlogic.orbits import orbit_predicates, scott_rank

from corpus import discrete_corpus, discrete_structure

F = Fraction


def _pair(p_a, p_b):
    a = encode_discrete(DiscreteEncoding(["a", "b"], {"P": {(0,): p_a[0], (1,): p_a[1]}}, name="A"))
    b = encode_discrete(DiscreteEncoding(["u", "v"], {"P": {(0,): p_b[0], (1,): p_b[1]}}, name="B"))
    return a, b


def _cfg(s, t=F(1, 2), depth=4, max_len=3):
    return BafConfig(universal_modulus(s.signature), t, depth, max_len)


def test_diagonal_pairs_survive_all_depths():
    a, _ = _pair((0, 1), (0, 1))
    cfg = _cfg(a)
    bs = baf_compute(a, a, cfg)
    for length in range(cfg.max_tuple_len + 1):
        for tup in product(range(2), repeat=length):
            assert bs.contains(tup, tup)


def test_root_eliminated_at_depth_one():
    a, b = _pair((0, 0), (0, 1))
    cfg = _cfg(a, depth=1)
    bs = baf_compute(a, b, cfg)
    assert bs.contains((), (), level=0)
    assert not bs.contains((), (), level=1)


def test_isometric_relabel_survives():
    a = discrete_structure("x", 3, edges=[(0, 1), (1, 2)])
    b = discrete_structure("y", 3, edges=[(1, 2), (0, 2)])
    cfg = _cfg(a, depth=3)
    bs = baf_compute(a, b, cfg)
    assert bs.contains((), ())


def test_monotone_in_level_and_tolerance():
    a, b = _pair((0, 0), (0, 1))
    cfg = _cfg(a, t=F(3, 2), depth=3)
    bs = baf_compute(a, b, cfg)
    for level in range(cfg.depth):
        for length, pairs in bs.levels[level + 1].items():
            assert pairs <= bs.levels[level][length]
    smaller = baf_compute(a, b, _cfg(a, t=F(1, 2), depth=3))
    for level in range(4):
        for length in smaller.levels[level]:
            assert smaller.levels[level][length] <= bs.levels[level][length]


def test_baf_rejects_mismatched_signatures():
    a, _ = _pair((0, 1), (0, 1))
    other = discrete_structure("z", 2)
    with pytest.raises(BafError, match="signature"):
        baf_compute(a, other, _cfg(a))


def test_decide_identical_structures():
    a, _ = _pair((0, 1), (0, 1))
    v = approx_iso_decide(a, a, _cfg(a))
    assert v.isomorphic


def test_decide_no_with_witness_gap():
    a, b = _pair((0, 0), (0, 1))
    cfg = _cfg(a)
    v = approx_iso_decide(a, b, cfg)
    assert not v.isomorphic
    assert v.witness is not None and v.extension_trace
    ea = Evaluator(a).eval(v.witness)
    eb = Evaluator(b).eval(v.witness)
    assert (ea, eb) == v.witness_gap
    assert abs(ea - eb) >= cfg.t
    # the sentence quantifies the unmatched extension over a countable family
    assert v.witness.to_text().startswith(("inf ", "sup "))
    assert "N[" in v.witness.to_text()


def test_decide_matches_bijection_oracle_on_sample():
    sample = discrete_corpus()[:8]
    cfg = _cfg(sample[0], depth=8, max_len=4)
    ws = BafWorkspace(cfg)
    for a in sample:
        for b in sample:
            verdict = ws.decide(a, b)
            assert verdict.isomorphic == brute_force_isomorphic(a, b), (a.name, b.name)


def test_direct_engine_agrees_with_partition_engine():
    a = discrete_structure("x", 3, edges=[(0, 1)])
    b = discrete_structure("y", 3, edges=[(1, 2)])
    # a tolerance above the least value gap breaks the equality reduction
    cfg_direct = _cfg(a, t=F(3, 2), depth=4)
    v1 = approx_iso_decide(a, b, cfg_direct)
    assert v1.engine == "direct"
    cfg_part = _cfg(a, t=F(1, 2), depth=4)
    v2 = approx_iso_decide(a, b, cfg_part)
    assert v2.engine == "partition"
    assert v1.isomorphic == v2.isomorphic == True  # noqa: E712


def test_extract_identity():
    a, _ = _pair((0, 1), (0, 1))
    r = extract_iso(a, a)
    assert r.discrepancy == 0 and r.isomorphism
    assert r.mapping == {"a": "a", "b": "b"}


def test_extract_relabeled():
    a = discrete_structure("x", 3, edges=[(0, 1), (1, 2)])
    b = discrete_structure("y", 3, edges=[(1, 2), (0, 2)])
    r = extract_iso(a, b)
    assert r.discrepancy == 0 and r.isomorphism


def test_extract_best_discrepancy_one():
    a, b = _pair((0, 0), (0, 1))
    r = extract_iso(a, b)
    assert r.discrepancy == 1 and not r.isomorphism


def test_extract_size_mismatch():
    a = discrete_structure("small", 2)
    c = discrete_structure("big", 3)
    with pytest.raises(BafError, match="size"):
        extract_iso(a, c)


def test_extract_implies_root_survival():
    a = discrete_structure("x", 3, edges=[(0, 1), (1, 2)])
    b = discrete_structure("y", 3, edges=[(1, 2), (0, 2)])
    assert extract_iso(a, b).discrepancy == 0
    for t in (F(1, 4), F(1, 2), F(2)):
        cfg = _cfg(a, t=t, depth=6, max_len=3)
        assert approx_iso_decide(a, b, cfg).isomorphic


def test_k_set_contains_diagonal_for_every_tolerance():
    s = discrete_structure("kk", 3, [0, 0, 1], edges=[(0, 1)])
    omega = universal_modulus(s.signature)
    rk = scott_rank(s, omega, max_rank=3, max_tuple_len=2)
    preds = orbit_predicates(rk)
    for t in (F(1, 4), F(1, 2), F(1)):
        cfg = BafConfig(omega, t, 2, 2)
        result = k_set(s, preds, t, cfg)
        for length in result.pairs:
            for tup in product(range(s.size()), repeat=length):
                assert (tup, tup) in result.pairs[length]


def test_k_set_symmetric_membership_at_zero():
    s = discrete_structure("ks", 3, [0, 0, 1])
    omega = universal_modulus(s.signature)
    rk = scott_rank(s, omega, max_rank=3, max_tuple_len=2)
    preds = orbit_predicates(rk)
    ev = Evaluator(s)
    for length in (1, 2):
        for ta in product(range(3), repeat=length):
            for tb in product(range(3), repeat=length):
                va = ev.eval(preds[ta], dict(enumerate(tb)))
                if va == 0:
                    assert ev.eval(preds[tb], dict(enumerate(ta))) == 0


def test_k_set_fully_symmetric_structure():
    s = discrete_structure("k3", 3)
    omega = universal_modulus(s.signature)
    rk = scott_rank(s, omega, max_rank=2, max_tuple_len=2)
    preds = orbit_predicates(rk)
    cfg = BafConfig(omega, F(1, 2), 2, 2)
    result = k_set(s, preds, F(1, 2), cfg)
    # every same-length pair is in one orbit pattern class; with no predicates
    # distinguishing points the full symmetric group acts, so matching
    # equality patterns all land inside
    assert result.certified
    for length in (1, 2):
        for ta in product(range(3), repeat=length):
            for tb in product(range(3), repeat=length):
                same_pattern = [a == b for a, b in product(ta, ta)] == [
                    a == b for a, b in product(tb, tb)
                ]
                assert ((ta, tb) in result.pairs[length]) == same_pattern


def test_k_set_missing_predicate():
    s = discrete_structure("km", 2)
    omega = universal_modulus(s.signature)
    rk = scott_rank(s, omega, max_rank=2, max_tuple_len=1)
    partial = {(0,): rk.witness_for((0,))}  # table for (1,) withheld
    cfg = BafConfig(omega, F(1, 2), 1, 1)
    with pytest.raises(BafError, match="missing"):
        k_set(s, partial, F(1, 2), cfg)
