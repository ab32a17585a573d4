from fractions import Fraction
from itertools import product

import pytest

from contlogic.numerics import eval_modulus, universal_modulus
from contlogic.structures import DiscreteEncoding, encode_discrete
from contlogic.formulas import Const, quant_rank, rank_at_most_inf, rank_at_most_sup
from contlogic.evaluator import Evaluator
from contlogic.fragments import DistinguishingFamily, type_fragment
from contlogic.orbits import (
    OrbitError,
    automorphisms,
    orbit_distance,
    orbit_of,
    orbit_partition,
    orbit_witness,
    scott_rank,
    scott_sentence,
    sentence_value,
    synthesize_orbit_formula,
)

from corpus import discrete_corpus, discrete_structure

F = Fraction


def test_automorphisms_symmetric_three_points():
    s = discrete_structure("t3", 3)
    assert len(automorphisms(s)) == 6


def test_automorphisms_predicate_breaks_symmetry():
    s = discrete_structure("p01", 2, [0, 1])
    assert automorphisms(s) == [(0, 1)]


def test_automorphisms_singleton():
    s = discrete_structure("one", 1)
    assert automorphisms(s) == [(0,)]


def test_automorphisms_respect_functions():
    enc = DiscreteEncoding(
        ["a", "b", "c"],
        {},
        {"f": {(0,): 1, (1,): 0, (2,): 2}},  # swaps a,b; fixes c
    )
    s = encode_discrete(enc)
    group = automorphisms(s)
    # the 3-cycle does not commute with f; the a/b swap does
    assert (1, 0, 2) in group
    assert (1, 2, 0) not in group


def test_orbit_distance_trivial_and_single_orbit():
    s = discrete_structure("t3", 3)
    omega = universal_modulus(s.signature)
    dist = orbit_distance(s, (0,), omega)
    assert set(dist.values()) == {F(0)}


def test_orbit_distance_rigid_two_point():
    s = discrete_structure("p01", 2, [0, 1])
    omega = universal_modulus(s.signature)
    dist = orbit_distance(s, (0,), omega)
    assert dist[(0,)] == 0
    assert dist[(1,)] == eval_modulus(omega.truncation(1), [F(1)])


def test_orbit_members_share_distance_zero():
    s = discrete_structure("path", 4, edges=[(0, 1), (1, 2), (2, 3)])
    omega = universal_modulus(s.signature)
    autos = automorphisms(s)
    for orb in orbit_partition(s, 2, autos):
        rep = min(orb)
        dist = orbit_distance(s, rep, omega, autos)
        for member in orb:
            assert dist[member] == 0


def test_synthesize_trivial_orbit_is_zero():
    s = discrete_structure("t3", 3)
    omega = universal_modulus(s.signature)
    fam = DistinguishingFamily(s, omega)
    syn = synthesize_orbit_formula(s, (0,), omega, fam.basis(1))
    assert isinstance(syn.formula, Const)
    assert syn.certified


def test_synthesize_two_point_predicate():
    s = discrete_structure("p01", 2, [0, 1])
    omega = universal_modulus(s.signature)
    fam = DistinguishingFamily(s, omega)
    syn = synthesize_orbit_formula(s, (0,), omega, fam.basis(1))
    ev = Evaluator(s)
    assert syn.certified
    assert ev.eval(syn.formula, {0: 0}) == 0
    assert ev.eval(syn.formula, {0: 1}) > 0


def test_synthesize_zero_set_matches_orbits_on_sample():
    omega_cache = {}
    for s in discrete_corpus()[:10]:
        omega = omega_cache.setdefault(id(s.signature), universal_modulus(s.signature))
        fam = DistinguishingFamily(s, omega)
        autos = automorphisms(s)
        rk = scott_rank(s, omega, max_rank=3, max_tuple_len=2, family=fam,
                        check_witness_ranks=False)
        assert rk.rank is not None
        depth = rk.rank - 1
        for length in (1, 2):
            fragment = list(fam.basis(length)) + [
                fam.formula(t, depth) for t in product(range(s.size()), repeat=length)
            ]
            for orb in orbit_partition(s, length, autos):
                rep = min(orb)
                syn = synthesize_orbit_formula(s, rep, omega, fragment, autos,
                                               evaluator=fam.ev)
                assert syn.certified, (s.name, rep)
                # nonnegative everywhere, zero at the base tuple
                ev = fam.ev
                assert ev.eval(syn.formula, dict(enumerate(rep))) == 0
                for other in product(range(s.size()), repeat=length):
                    assert ev.eval(syn.formula, dict(enumerate(other))) >= 0


def test_synthesize_reports_separation_failure():
    s = discrete_structure("tri-iso", 4, edges=[(0, 1), (1, 2), (0, 2)])
    omega = universal_modulus(s.signature)
    fam = DistinguishingFamily(s, omega)
    # plain quantifier-free basis cannot split triangle points from the
    # isolated one, so synthesis must fail and name an unseparated tuple
    syn = synthesize_orbit_formula(s, (0,), omega, fam.basis(1))
    assert not syn.certified
    assert (3,) in syn.separation_failures


def test_scott_rank_symmetric_is_one():
    s = discrete_structure("t3", 3)
    omega = universal_modulus(s.signature)
    rk = scott_rank(s, omega, max_rank=3, max_tuple_len=2)
    assert rk.rank == 1 and rk.rank_certified


def test_scott_rank_two_point_predicate_is_one():
    s = discrete_structure("p01", 2, [0, 1])
    omega = universal_modulus(s.signature)
    rk = scott_rank(s, omega, max_rank=3, max_tuple_len=2)
    assert rk.rank == 1 and rk.rank_certified
    assert all(rank_at_most_inf(r, 1) for r in rk.witness_ranks.values())


def test_scott_rank_needs_level_two_for_hidden_orbits():
    s = discrete_structure("tri-iso", 4, edges=[(0, 1), (1, 2), (0, 2)])
    omega = universal_modulus(s.signature)
    rk = scott_rank(s, omega, max_rank=3, max_tuple_len=2)
    assert rk.rank == 2 and rk.rank_certified


def test_scott_rank_monotone_in_fragment_size():
    s = discrete_structure("tri-iso", 4, edges=[(0, 1), (1, 2), (0, 2)])
    omega = universal_modulus(s.signature)
    base_family = DistinguishingFamily(s, omega)
    lean = scott_rank(s, omega, max_rank=3, max_tuple_len=1, family=base_family,
                      check_witness_ranks=False)
    # enrich the basis with the depth-1 distinguishing formulas; pins then
    # separate one level earlier
    rich_family = DistinguishingFamily(
        s,
        omega,
        basis_for_arity=lambda n: list(base_family.basis(n))
        + [base_family.formula(t, 1) for t in product(range(s.size()), repeat=n)],
    )
    rich = scott_rank(s, omega, max_rank=3, max_tuple_len=1, family=rich_family,
                      check_witness_ranks=False)
    assert rich.rank <= lean.rank


def test_witness_equals_orbit_distance_pointwise():
    s = discrete_structure("path", 4, edges=[(0, 1), (1, 2), (2, 3)])
    omega = universal_modulus(s.signature)
    fam = DistinguishingFamily(s, omega)
    autos = automorphisms(s)
    rk = scott_rank(s, omega, max_rank=3, max_tuple_len=2, family=fam)
    assert rk.rank is not None
    ev = fam.ev
    for length in (1, 2):
        for orb in orbit_partition(s, length, autos):
            rep = min(orb)
            dist = orbit_distance(s, rep, omega, autos)
            w = rk.witness_for(rep)
            for other in product(range(s.size()), repeat=length):
                assert ev.eval(w, dict(enumerate(other))) == dist[other]


def test_orbit_witness_none_when_class_too_coarse():
    s = discrete_structure("tri-iso", 4, edges=[(0, 1), (1, 2), (0, 2)])
    omega = universal_modulus(s.signature)
    fam = DistinguishingFamily(s, omega)
    autos = automorphisms(s)
    assert orbit_witness(s, omega, (0,), 0, fam, autos) is None
    info = orbit_witness(s, omega, (0,), 1, fam, autos)
    assert info is not None and info.pointwise_ok


def test_scott_sentence_self_and_rank_certificate():
    for s in [
        discrete_structure("p01", 2, [0, 1]),
        discrete_structure("t3", 3),
        discrete_structure("tri-iso", 4, edges=[(0, 1), (1, 2), (0, 2)]),
    ]:
        omega = universal_modulus(s.signature)
        art = scott_sentence(s, omega, n_max=2, max_tuple_len=2)
        assert art.self_value == 0
        assert art.rank_certified, (s.name, art.sentence_rank, art.rank.rank)
        assert rank_at_most_sup(art.sentence_rank, art.rank.rank + 1)
        assert len(art.sentences) == 2


def test_scott_sentence_distinguishes_point_counts():
    two = discrete_structure("two", 2)
    three = discrete_structure("three", 3)
    omega = universal_modulus(two.signature)
    art_two = scott_sentence(two, omega, max_tuple_len=3)
    art_three = scott_sentence(three, omega, max_tuple_len=3)
    assert art_two.self_value == 0 and art_three.self_value == 0
    assert sentence_value(art_two, three) > 0
    assert sentence_value(art_three, two) > 0


def test_scott_sentence_zero_on_isometric_relabel():
    a = discrete_structure("x", 3, edges=[(0, 1), (1, 2)])
    b = discrete_structure("y", 3, edges=[(1, 2), (0, 2)])
    omega = universal_modulus(a.signature)
    art = scott_sentence(a, omega, max_tuple_len=2)
    assert art.self_value == 0
    assert sentence_value(art, b) == 0


def test_scott_sentence_propagates_synthesis_failure():
    s = discrete_structure("tri-iso", 4, edges=[(0, 1), (1, 2), (0, 2)])
    omega = universal_modulus(s.signature)
    rk = scott_rank(s, omega, max_rank=1, max_tuple_len=2)
    assert rk.rank is None
    with pytest.raises(OrbitError, match="not found"):
        scott_sentence(s, omega, max_tuple_len=2, max_rank=1)
