import json
from fractions import Fraction

import pytest

from cheaptalk.cli import main
from cheaptalk.numerics import Real

from helpers import SCENARIOS
from oracles import mp_value


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv, "--json")
    return code, json.loads(out)


# ----------------------------------------------------------------- verify


def test_verify_pass(capsys):
    code, rep = run_json(capsys, "verify", SCENARIOS / "battle_of_sexes.json")
    assert code == 0 and rep["verification"]["passed"]
    assert rep["version"] == 1 and rep["command"] == "verify"


def test_verify_fail_names_worst(capsys):
    code, rep = run_json(capsys, "verify", SCENARIOS / "not_ce.json")
    assert code == 1
    worst = rep["verification"]["worst"]
    assert worst["player"] == "R1" and worst["recommended"] == "y" and worst["deviation"] == "x"
    assert worst["gain"]["dec"].startswith("0.5")


def test_verify_bayesian(capsys):
    code, _, _ = run(capsys, "verify", SCENARIOS / "bayes5.json")
    assert code == 0


@pytest.mark.parametrize("text", ["{not json", "[]", '{"actions": [["a"]]}',
                                  '{"actions": [["a","b"],["a","b"]], "payoffs": [["1","1"]]}'])
def test_malformed_file(capsys, tmp_path, text):
    path = tmp_path / "bad.json"
    path.write_text(text)
    code, _, err = run(capsys, "verify", path)
    assert code == 2 and err.startswith("error:")


def test_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "verify", tmp_path / "nope.json")
    assert code == 2 and "nope.json" in err


def test_bad_arguments_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["simulate", str(SCENARIOS / "coordination5.json"), "--trials", "0"])
    assert exc.value.code == 2


# -------------------------------------------------------------- decompose


def test_decompose_paper_alphas(capsys):
    code, rep = run_json(capsys, "decompose", SCENARIOS / "coordination5.json")
    assert code == 0 and rep["passed"]
    sec = rep["decompositions"]["target"]
    for a, text in zip(sec["alpha"], ("(2*sqrt(2) - 1)/2", "(3 - 2*sqrt(2))/2")):
        assert abs(float(Real.fromhex(a["hex"])) - float(mp_value(text))) < 1e-15
        assert a["dec"][:14] == str(mp_value(text))[:14]


def test_decompose_auto_vertices_residual(capsys):
    code, rep = run_json(capsys, "decompose", SCENARIOS / "coordination5_auto.json", "--refinements", "3")
    assert code == 0
    assert Fraction(rep["decompositions"]["target"]["residual"]["exact"]) <= Fraction(2) ** (8 - 128) * 2


def test_decompose_rational_target_exact(capsys):
    code, rep = run_json(capsys, "decompose", SCENARIOS / "battle_of_sexes.json")
    assert code == 0
    beta = rep["decompositions"]["target"]["beta_exact"]
    assert beta and all("/" in b for b in beta)


def test_decompose_bayesian(capsys):
    code, rep = run_json(capsys, "decompose", SCENARIOS / "bayes5.json")
    assert code == 0 and len(rep["decompositions"]) == 32


# --------------------------------------------------------------- simulate


def test_simulate_small_run(capsys, tmp_path):
    out = tmp_path / "r.json"
    code, text, _ = run(capsys, "simulate", SCENARIOS / "coordination5.json", "--trials", 2000, "--out", out)
    assert code == 0 and "audit: pass" in text
    rep = json.loads(out.read_text())
    assert rep["passed"] and rep["protocol"]["delivered"] == 2000


def test_simulate_single_round_stable(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(capsys, "simulate", SCENARIOS / "coordination5.json", "--trials", 1, "--out", a)
    run(capsys, "simulate", SCENARIOS / "coordination5.json", "--trials", 1, "--out", b)
    assert a.read_bytes() == b.read_bytes()
    assert len(json.loads(a.read_text())["samples"]) == 1


def test_simulate_extreme_b_surfaces_aborts(capsys):
    code, rep = run_json(capsys, "simulate", SCENARIOS / "coordination5.json", "--trials", 50,
                         "--b", 400, "--max-retries", 3)
    proto = rep["protocol"]
    assert proto["retries_exhausted"] > 0
    assert proto["delivered"] + proto["retries_exhausted"] == 50
    assert proto["retry_histogram"]["3"] == proto["retries_exhausted"]
    # exhaustion is an outcome of the protocol, not an audit failure
    assert code == 0


def test_simulate_wrong_mode(capsys):
    code, _, err = run(capsys, "simulate", SCENARIOS / "bayes5.json", "--trials", 10)
    assert code == 2 and "simulate-bayes" in err


def test_simulate_rejects_non_equilibrium(capsys):
    code, _, err = run(capsys, "simulate", SCENARIOS / "not_ce.json", "--trials", 10)
    assert code == 1 and "not a correlated equilibrium" in err


# ------------------------------------------------------------------ audit


def test_audit_round_trip(capsys, tmp_path):
    dump = tmp_path / "art.json"
    run(capsys, "simulate", SCENARIOS / "coordination5.json", "--trials", 1500, "--debug-dump", dump)
    code, rep = run_json(capsys, "audit", dump)
    assert code == 0 and rep["audit"]["passed"]


def test_audit_detects_tampering(capsys, tmp_path):
    dump = tmp_path / "art.json"
    run(capsys, "simulate", SCENARIOS / "coordination5.json", "--trials", 1500, "--debug-dump", dump)
    art = json.loads(dump.read_text())
    art["index_set"]["b"] = 0
    dump.write_text(json.dumps(art))
    code, _, _ = run(capsys, "audit", dump)
    assert code == 1


def test_audit_missing_ledger(capsys, tmp_path):
    dump = tmp_path / "art.json"
    run(capsys, "simulate", SCENARIOS / "coordination5.json", "--trials", 20, "--debug-dump", dump)
    art = json.loads(dump.read_text())
    del art["rounds"][0]["secrets"]
    dump.write_text(json.dumps(art))
    code, _, err = run(capsys, "audit", dump)
    assert code == 2 and "secrets" in err


def test_audit_not_an_artifact(capsys, tmp_path):
    path = tmp_path / "x.json"
    path.write_text("{}")
    assert run(capsys, "audit", path)[0] == 2
    assert run(capsys, "audit", tmp_path / "missing.json")[0] == 2
