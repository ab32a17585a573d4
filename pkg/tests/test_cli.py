import json
from fractions import Fraction

import pytest

from contlogic.cli import main
from contlogic.structures import save_structure
from contlogic.types_support import condition_set_to_doc, ConditionSet

from corpus import discrete_structure

F = Fraction


@pytest.fixture()
def files(tmp_path):
    a = discrete_structure("A", 2, [0, 0])
    b = discrete_structure("B", 2, [0, 1])
    paths = {}
    for name, s in (("A", a), ("B", b)):
        p = tmp_path / f"{name}.json"
        p.write_text(json.dumps(save_structure(s)))
        paths[name] = str(p)
    paths["out"] = str(tmp_path / "report.json")
    paths["tmp"] = tmp_path
    return paths


def _report(paths):
    return json.loads(open(paths["out"]).read())


def test_eval_command(files, capsys):
    code = main([
        "eval", "--structure", files["A"],
        "--formula", "inf x0. d(x0,x0)", "--out", files["out"],
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "= 0" in out
    report = _report(files)
    assert report["results"]["value"] == "0"
    assert report["version"] and report["config"]["formula"]


def test_validate_command(files):
    assert main(["validate", "--structure", files["A"], "--out", files["out"]]) == 0
    assert _report(files)["results"]["valid"] is True


def test_iso_command_no_with_witness(files):
    code = main([
        "iso", "--a", files["A"], "--b", files["B"],
        "--t", "1/2", "--depth", "3", "--out", files["out"],
    ])
    assert code == 0
    r = _report(files)["results"]
    assert r["verdict"] == "no"
    assert r["witness"] and r["witness_values"][0] != r["witness_values"][1]


def test_iso_extract_flag(files):
    main([
        "iso", "--a", files["A"], "--b", files["B"], "--t", "1/2",
        "--depth", "3", "--extract", "--out", files["out"],
    ])
    r = _report(files)["results"]
    assert r["extraction"]["discrepancy"] == "1"


def test_scott_self_check(files):
    code = main([
        "scott", "--structure", files["B"], "--self-check",
        "--other", files["A"], "--out", files["out"],
    ])
    assert code == 0
    r = _report(files)["results"]
    assert r["self_value"] == "0" and r["self_check"] is True
    assert r["other_value"] != "0"


def test_prenex_and_rank_of(files):
    main([
        "prenex", "--structure", files["A"],
        "--formula", "(sup x1. d(x0,x1)) + P(x0)", "--out", files["out"],
    ])
    assert _report(files)["results"]["prenex"].startswith("sup x")
    main([
        "rank-of", "--structure", files["A"],
        "--formula", "inf x0. sup x1. d(x0,x1)", "--out", files["out"],
    ])
    r = _report(files)["results"]
    assert (r["kind"], r["level"]) == ("inf", 2)


def test_modulus_command(files):
    main(["modulus", "--structure", files["A"], "--expr", "max(r0, 2*r1)",
          "--at", "3,1", "--out", files["out"]])
    assert _report(files)["results"]["value"] == "3"
    main(["modulus", "--structure", files["A"], "--formula", "d(x0,x1)",
          "--out", files["out"]])
    assert _report(files)["results"]["bound"] == ["0", "1"]


def test_autos_orbit_rank(files):
    main(["autos", "--structure", files["A"], "--out", files["out"]])
    assert _report(files)["results"]["order"] == 2
    main(["orbit", "--structure", files["B"], "--tuple", "p0", "--out", files["out"]])
    r = _report(files)["results"]
    assert r["certified"] is True and r["orbit"] == ["p0"]
    main(["rank", "--structure", files["B"], "--out", files["out"]])
    assert _report(files)["results"]["rank"] == 1


def test_baf_command(files):
    main(["baf", "--a", files["A"], "--b", files["A"], "--t", "1/2",
          "--depth", "2", "--max-tuple-len", "2", "--out", files["out"]])
    assert _report(files)["results"]["root_survives"] is True


def test_theta_type_support(files):
    main(["theta", "--structure", files["B"], "--formula", "P(x0)",
          "--r", "0", "--eps", "1/4", "--at", "p0", "--out", files["out"]])
    assert _report(files)["results"]["value"] == "0"
    main(["type", "--structure", files["B"], "--tuple", "p0", "--out", files["out"]])
    assert _report(files)["results"]["conditions"]
    main(["support", "--structure", files["B"], "--tuple", "p0",
          "--level", "1", "--out", files["out"]])
    r = _report(files)["results"]
    assert r["found"] is True and r["certified"] is True


def test_henkin_command(files):
    seed = ConditionSet([], ["p0", "p1"])
    seed_path = files["tmp"] / "seed.json"
    seed_path.write_text(json.dumps(condition_set_to_doc(seed)))
    code = main([
        "henkin", "--structure", files["A"], "--seed", str(seed_path),
        "--stages", "6", "--out", files["out"],
    ])
    assert code == 0
    r = _report(files)["results"]
    assert r["stages"] == 6 and len(r["classes"]) == 2


def test_reports_are_deterministic(files, tmp_path):
    out2 = str(tmp_path / "second.json")
    argv = ["eval", "--structure", files["A"], "--formula", "sup x0. P(x0)"]
    main(argv + ["--out", files["out"]])
    main(argv + ["--out", out2])
    first = open(files["out"]).read().replace(files["out"], "")
    second = open(out2).read().replace(out2, "")
    assert first == second


def test_exit_codes(files, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["not-a-command"])
    assert exc.value.code == 2
    code = main(["eval", "--structure", "/nonexistent.json", "--formula", "0"])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_fragment_depth_env(files, monkeypatch):
    monkeypatch.setenv("CONTLOGIC_FRAGMENT_DEPTH", "1")
    code = main(["orbit", "--structure", files["B"], "--tuple", "p0",
                 "--out", files["out"]])
    assert code == 0
    assert _report(files)["results"]["certified"] is True
