import json
import math
import subprocess
import sys

import pytest

from majorsel.cli import run


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, json.loads(out), err


def test_evaluate_three_agent(capsys, fixture_path):
    code, rep, err = call(
        capsys, "evaluate", "-i", fixture_path("three_agent_instance.json"), "-p", fixture_path("three_agent_policy.json")
    )
    assert code == 0
    assert rep["schema"] == 1
    assert rep["utilities"][2] == "8/9"
    assert "8/9" in err


def test_build_then_evaluate_bernoulli(capsys, fixture_path, tmp_path):
    out = tmp_path / "policy.json"
    code, rep, _ = call(capsys, "build", "bernoulli", "-i", fixture_path("bernoulli_03_06.json"), "-o", str(out))
    assert code == 0 and rep["policy_path"] == str(out)
    code, rep, _ = call(capsys, "evaluate", "-i", fixture_path("bernoulli_03_06.json"), "-p", str(out))
    assert rep["utilities"] == ["3/10", "21/50"]


def test_float_mode(capsys, fixture_path, tmp_path):
    out = tmp_path / "policy.json"
    call(capsys, "build", "bernoulli", "-i", fixture_path("bernoulli_03_06.json"), "-o", str(out))
    code, rep, _ = call(
        capsys, "--mode", "float", "evaluate", "-i", fixture_path("bernoulli_03_06.json"), "-p", str(out)
    )
    assert rep["mode"] == "float"
    assert rep["utilities"] == pytest.approx([0.3, 0.42])


def test_monte_carlo(capsys, fixture_path):
    args = ["evaluate", "-i", fixture_path("three_agent_instance.json"), "-p", fixture_path("three_agent_policy.json"),
            "--mc", "5000", "--seed", "4"]
    _, a, _ = call(capsys, *args)
    _, b, _ = call(capsys, *args)
    assert a == b and len(a["stderr"]) == 3


def test_lowerbound(capsys):
    code, rep, _ = call(capsys, "lowerbound", "--n", "3", "--k", "1", "--verify")
    assert code == 0
    assert rep["utilities"] == ["12/13"] * 3 and rep["verified"]
    assert rep["floor"] == pytest.approx(math.log(1 + math.log(4)) / 3)
    code, rep, _ = call(capsys, "lowerbound", "--n", "4")
    assert [b["k"] for b in rep["bounds"]] == [1, 2, 3, 4]


def test_oracle(capsys, fixture_path):
    code, rep, _ = call(capsys, "oracle", "prefix-sum", "-i", fixture_path("bernoulli_network.json"), "-k", "1")
    assert code == 0 and rep["value"] == "3/10"


def test_singlemean_build_and_audit(capsys, fixture_path, tmp_path):
    inst = fixture_path("three_agent_instance.json")
    out = tmp_path / "sm.json"
    code, rep, _ = call(capsys, "build", "singlemean", "-i", inst, "-e", "1/4", "-o", str(out))
    assert code == 0 and rep["plan"]["grid"]["K"] == 8
    code, rep, _ = call(capsys, "evaluate", "-i", inst, "-p", str(out), "--receiver", "approx:1/4")
    assert code == 0
    # the policy relies on the approximate receiver
    code, rep, _ = call(capsys, "evaluate", "-i", inst, "-p", str(out))
    assert code == 2 and "outside the eligible set" in rep["error"]


def test_audit_against_flow(capsys, fixture_path, tmp_path):
    inst = fixture_path("three_agent_instance.json")
    out = tmp_path / "fr.json"
    call(capsys, "build", "fullrev2", "-i", inst, "-o", str(out))
    code, rep, err = call(capsys, "audit", "-i", inst, "-p", str(out), "--against", "flow", "--max-alpha", "2")
    assert code == 0 and rep["ok"]
    assert "alpha" in err
    code, rep, _ = call(capsys, "audit", "-i", inst, "-p", str(out), "--against", "flow", "--max-alpha", "1/2")
    assert code == 1 and not rep["ok"]


def test_audit_against_policy(capsys, fixture_path):
    inst = fixture_path("three_agent_instance.json")
    pol = fixture_path("three_agent_policy.json")
    code, rep, _ = call(capsys, "audit", "-i", inst, "-p", pol, "--against", pol)
    assert code == 0 and rep["alpha"] == "1"


@pytest.mark.parametrize(
    "argv,needle",
    [
        (["evaluate", "-i", "missing.json", "-p", "x.json"], "no such file"),
        (["build", "singlemean", "-i", "FIX", "-e", "0"], "epsilon must be positive"),
        (["build", "bernoulli", "-i", "FIX"], "not a Bernoulli instance"),
        (["lowerbound", "--n", "3", "--k", "5"], "outside"),
        (["evaluate", "-i", "FIX", "-p", "FIX", "--receiver", "maybe"], ""),
    ],
)
def test_errors(capsys, fixture_path, argv, needle):
    argv = [fixture_path("three_agent_instance.json") if a == "FIX" else a for a in argv]
    code = run(argv)
    out, _ = capsys.readouterr()
    assert code == 2
    assert needle in json.loads(out)["error"]


def test_bad_json(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    code = run(["evaluate", "-i", str(bad), "-p", str(bad)])
    assert code == 2 and "parse failure" in capsys.readouterr().out


def test_module_entry_point(fixture_path):
    proc = subprocess.run(
        [sys.executable, "-m", "majorsel", "oracle", "prefix-sum", "-i", fixture_path("bernoulli_network.json"), "-k", "2"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["value"] == "18/25"
