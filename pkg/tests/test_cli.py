import csv
import io
import json

import pytest

from peelperc import cli


def call(*argv):
    out = io.StringIO()
    code = cli.main(list(argv), out=out)
    return code, out.getvalue()


def _csv_rows(text):
    lines = text.splitlines()
    assert lines[0].startswith("# ")
    manifest = json.loads(lines[0][2:])
    return manifest, list(csv.DictReader(lines[1:]))


def test_qtable_rows():
    code, text = call("qtable", "--max-k", "6")
    assert code == 0
    manifest, rows = _csv_rows(text)
    assert manifest["schema"] == "peelperc.qtable/v1"
    by_k = {r["k"]: r for r in rows}
    assert by_k["-1"]["q_k"] == "3/8"
    assert by_k["1"]["q_k"] == "1/9"
    assert by_k["2"]["qprime_k"] == "10/243"
    assert by_k["3"]["qprime_k"] == ""
    assert by_k["0"]["tail_q_odd"] == "1/8"


def test_bounds_k2():
    code, text = call("bounds", "--K", "2", "--tol", "1e-6")
    assert code == 0
    doc = json.loads(text)
    assert doc["p_lower_6dp"] == "0.523599" and doc["p_upper_6dp"] == "0.572542"
    assert doc["manifest"]["command"] == "bounds"
    assert doc["manifest"]["config"]["tol"] == 1e-6


@pytest.mark.parametrize("argv", [
    ["bounds", "--K", "0"],
    ["bounds", "--K", "2", "--grid", "0.1"],
    ["bracket-series", "--max-K", "30"],
    ["chain-stationary", "--K", "2", "--p", "1.5"],
    ["simulate", "--p", "0.5", "--steps", "10"],
    ["simulate", "--p", "0.5", "--steps", "100000", "--policy", "white"],
    ["nonsense"],
    [],
])
def test_usage_errors(argv):
    assert call(*argv)[0] == 2


def test_chain_stationary_exact():
    code, text = call("chain-stationary", "--K", "2", "--p", "1/2")
    assert code == 0
    doc = json.loads(text)
    pis = {s["word"]: s["pi_exact"] for s in doc["states"]}
    assert pis == {"b": "16/49", "bb": "24/49", "bo": "9/49"}
    assert doc["marginals"]["m"][1] == pytest.approx(9 / 49)
    assert doc["residual"] < 1e-12


def test_chain_stationary_float_has_no_exact():
    doc = json.loads(call("chain-stationary", "--K", "4", "--p", "0.55")[1])
    assert "pi_exact" not in doc["states"][0]
    assert sum(s["pi"] for s in doc["states"]) == pytest.approx(1.0)


def test_bracket_series_csv():
    code, text = call("bracket-series", "--max-K", "2")
    assert code == 0
    _, rows = _csv_rows(text)
    assert rows[1] == {"K": "2", "lower": "0.5235", "upper": "0.5726"}


def _strip(doc):
    doc = dict(doc)
    doc.pop("manifest")
    return doc


def test_simulate_round_trip(tmp_path):
    traj = tmp_path / "traj.csv"
    code, text = call("simulate", "--p", "0.5", "--steps", "100000", "--replicas", "2",
                      "--seed", "5", "--csv", str(traj), "--stride", "50000")
    assert code == 0
    doc = json.loads(text)
    assert doc["config"]["seed"] == 5 and doc["n_batches"] == 40
    # rerunning the embedded argv reproduces the numbers
    code2, text2 = call(*doc["manifest"]["argv"])
    assert _strip(json.loads(text2)) == _strip(doc)
    _, rows = _csv_rows(traj.read_text())
    assert [r["n"] for r in rows] == ["50000", "100000"]


def test_verify_exit_codes(monkeypatch):
    code, text = call("verify", "--moment-cutoff", "2000")
    assert code == 0
    assert text.count("PASS") == 10 and "FAIL" not in text

    real = cli.run_checks

    def broken(**kw):
        res = real(**kw)
        res[0].ok = False
        return res

    monkeypatch.setattr(cli, "run_checks", broken)
    code, text = call("verify", "--moment-cutoff", "2000")
    assert code == 1 and "FAIL" in text
