import json
from fractions import Fraction

import pytest

from contlogic.numerics import Interval, parse_modulus
from contlogic.structures import (
    DiscreteEncoding,
    MetricStructure,
    PredicateSymbol,
    Signature,
    SignatureError,
    StructureFormatError,
    encode_discrete,
    load_structure,
    save_structure,
    validate_structure,
)
from contlogic.baf import extract_iso, brute_force_isomorphic

from corpus import TRIANGLE_P_DOC, discrete_corpus, metric_corpus

F = Fraction


def _two_point(distance, p_values):
    sig = Signature([PredicateSymbol("P", 1, parse_modulus("r0", 1), Interval(F(0), F(1)))])
    dist = [[F(0), distance], [distance, F(0)]]
    return MetricStructure(sig, ["a", "b"], dist, {"P": {(0,): p_values[0], (1,): p_values[1]}})


def test_validate_discrete_two_point_ok():
    s = _two_point(F(1), [F(0), F(1)])
    assert validate_structure(s) == []


def test_validate_modulus_violation():
    s = _two_point(F(1, 2), [F(0), F(1)])
    report = validate_structure(s)
    assert any(v.startswith("modulus:") for v in report)
    assert any("1/2" in v for v in report)


def test_validate_singleton():
    sig = Signature([])
    s = MetricStructure(sig, ["a"], [[F(0)]])
    assert validate_structure(s) == []


def test_validate_catches_asymmetry_and_triangle():
    sig = Signature([])
    bad = MetricStructure(sig, ["a", "b"], [[F(0), F(1, 2)], [F(1), F(0)]])
    report = validate_structure(bad)
    assert any("not symmetric" in v for v in report)
    tri = MetricStructure(
        sig,
        ["a", "b", "c"],
        [[F(0), F(1), F(1, 4)], [F(1), F(0), F(1, 4)], [F(1, 4), F(1, 4), F(0)]],
    )
    assert any("triangle" in v for v in validate_structure(tri))


def test_corpus_structures_all_valid():
    for s in discrete_corpus() + metric_corpus():
        assert validate_structure(s) == [], s.name


def test_load_save_roundtrip():
    for s in discrete_corpus()[:6] + metric_corpus()[:4]:
        doc = save_structure(s)
        again, report = load_structure(doc)
        assert report == []
        assert save_structure(again) == doc
        # bit-exact through JSON text as well
        again2, _ = load_structure(json.dumps(doc))
        assert save_structure(again2) == doc


def test_load_minimal_document():
    s, report = load_structure(
        {"signature": {"predicates": [], "functions": []},
         "points": ["a"], "distance": [[0]]}
    )
    assert s.size() == 1 and report == []


def test_load_asymmetric_reports_violation():
    doc = {
        "signature": {"predicates": [], "functions": []},
        "points": ["a", "b"],
        "distance": [[0, "1/2"], [1, 0]],
    }
    s, report = load_structure(doc)
    assert s is not None
    assert any("not symmetric" in v for v in report)


def test_load_triangle_p_fixture():
    s, report = load_structure(TRIANGLE_P_DOC)
    assert s.size() == 3
    assert report == []
    assert s.pred_value("P", (1,)) == F(1, 2)


def test_load_parse_errors_name_field():
    with pytest.raises(StructureFormatError, match="distance"):
        load_structure({"signature": {}, "points": ["a"], "distance": []})
    with pytest.raises(StructureFormatError, match="predicates.P"):
        load_structure(
            {
                "signature": {"predicates": [
                    {"name": "P", "arity": 1, "modulus": "r0", "bound": [0, 1]}
                ], "functions": []},
                "points": ["a"],
                "distance": [[0]],
                "predicates": {"P": {"(zz)": 0}},
            }
        )
    with pytest.raises(StructureFormatError, match="not valid JSON"):
        load_structure("{")


def test_signature_rules():
    with pytest.raises(SignatureError):
        Signature([PredicateSymbol("sup", 1, parse_modulus("r0", 1), Interval(F(0), F(1)))])
    with pytest.raises(SignatureError):
        Signature([PredicateSymbol("x2", 1, parse_modulus("r0", 1), Interval(F(0), F(1)))])
    sig = Signature([])
    assert "d" in sig.predicates and sig.relational


def test_encode_discrete_basic():
    s = encode_discrete(DiscreteEncoding(["a", "b"]))
    assert s.d(0, 1) == 1 and s.d(0, 0) == 0
    assert validate_structure(s) == []


def test_encode_discrete_zero_is_true_convention():
    # directed 2-cycle: both arrows hold, encoded as value 0
    enc = DiscreteEncoding(
        ["a", "b"], {"E": {(0, 0): 1, (0, 1): 0, (1, 0): 0, (1, 1): 1}}
    )
    s = encode_discrete(enc)
    assert s.pred_value("E", (0, 1)) == 0
    assert s.pred_value("E", (0, 0)) == 1


def test_encode_discrete_rejects_non_binary_values():
    with pytest.raises(StructureFormatError):
        encode_discrete(DiscreteEncoding(["a"], {"R": {(0,): 2}}))


def test_encode_discrete_preserves_isomorphism():
    # classically isomorphic graphs stay isomorphic with discrepancy 0,
    # and a classically non-isomorphic pair does not
    path_a = encode_discrete(
        DiscreteEncoding(["a", "b", "c"], {"E": _graph(3, [(0, 1), (1, 2)])})
    )
    path_b = encode_discrete(
        DiscreteEncoding(["u", "v", "w"], {"E": _graph(3, [(2, 1), (0, 2)])})
    )
    assert brute_force_isomorphic(path_a, path_b)
    assert extract_iso(path_a, path_b).discrepancy == 0
    tri = encode_discrete(
        DiscreteEncoding(["a", "b", "c"], {"E": _graph(3, [(0, 1), (1, 2), (0, 2)])})
    )
    assert not brute_force_isomorphic(path_a, tri)
    assert extract_iso(path_a, tri).discrepancy > 0


def _graph(n, edges):
    table = {}
    sym = set(edges) | {(j, i) for i, j in edges}
    for i in range(n):
        for j in range(n):
            table[(i, j)] = 0 if (i, j) in sym else 1
    return table


def test_function_tables_checked():
    sig = Signature([], [])
    with pytest.raises(StructureFormatError):
        MetricStructure(sig, ["a"], [[F(0)]], pred_tables={"Q": {(0,): F(0)}})
