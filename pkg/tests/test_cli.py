import os
import subprocess
import sys

import numpy as np
import pytest

from valdist.catalogue import CATALOGUE, examples_catalogue, get_scenario
from valdist.cli import main
from valdist.harness import column_expr, run, verify
from valdist.scenario import ScenarioError, _split, load_scenario, parse_grid

SMALL = """
[scenario]
name = small
coefficients = -1
solutions = exp(z)
grid = linear:2:6:5

[residual]

[growth]
functions = f1

[reduce]
"""


def _write(tmp_path, text, name="s.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_parse_grid_forms():
    assert np.allclose(parse_grid("linear:1:3:3"), [1, 2, 3])
    assert np.allclose(parse_grid("geom:1:2:3"), [1, 2, 4])
    assert np.allclose(parse_grid("disc:4:5:0.25", "disc"), [0.5, 1 - 2 ** -1.25])
    assert np.allclose(parse_grid("0.5, 2"), [0.5, 2])
    for bad in ("", "linear:1:2", "3, 1", "foo"):
        with pytest.raises(ValueError):
            parse_grid(bad)
    with pytest.raises(ValueError):
        parse_grid("0.5, 1.5", "disc")


def test_split_respects_parentheses():
    assert _split("ml(0.5; z); exp(z)") == ["ml(0.5; z)", "exp(z)"]
    assert _split("a, b,, c", ",") == ["a", "b", "c"]


@pytest.mark.parametrize("text,path", [
    ("[scenario]\nname = x\ncoefficients = 1\n", "scenario"),
    ("[scenario]\nname = x\ncoefficients = 1\n[dominance]\nkinds = bogus\n", "dominance.kinds"),
    ("[scenario]\nname = x\ngrid = linear:3:1:4\n[growth]\nfunctions = z\n", "scenario.grid"),
    ("[scenario]\ncoefficients = 1\n[residual]\n", "scenario.name"),
    ("[scenario]\nname = x\ncolor = red\n[residual]\n", "scenario.color"),
    ("[scenario]\nname = x\ncoefficients = exp(\n[residual]\n", "scenario.coefficients[0]"),
    ("[scenario]\nname = x\ncoefficients = 1\n[residual]\n", "residual"),
    ("[scenario]\nname = x\ncoefficients = 1; 2\n[curve]\np = 0\neta = 0.5\n", "curve.eta"),
    ("[scenario]\nname = x\n[frobnicate]\n", "frobnicate"),
])
def test_validation_reports_field_path(text, path):
    with pytest.raises(ScenarioError) as err:
        load_scenario(text)
    assert err.value.path == path


def test_empty_analysis_list_message():
    with pytest.raises(ScenarioError, match="no analyses requested"):
        load_scenario("[scenario]\nname = x\ncoefficients = 1\n")


def test_normalised_text_round_trip_and_hash():
    sc = load_scenario(SMALL)
    again = load_scenario(sc.to_ini())
    assert again.to_ini() == sc.to_ini()
    assert again.hash == sc.hash and len(sc.hash) == 16
    assert "tol = 1e-08" in sc.to_ini()
    assert sc.with_overrides(tol=1e-6).hash != sc.hash


def test_catalogue_entries():
    names = [n for n, _ in examples_catalogue()]
    assert len(names) >= 8 and "frei-ex12" in names
    for name in CATALOGUE:
        sc = get_scenario(name)
        assert sc.name == name


def test_column_expressions_are_restricted():
    table = {"r": np.array([1.0, 2.0]), "T": np.array([3.0, 4.0])}
    assert np.allclose(column_expr("T/log(r+1)^2", table), [3 / np.log(2) ** 2, 4 / np.log(3) ** 2])
    for bad in ("__import__('os')", "T.real", "[T]", "open('x')", "missing + 1"):
        with pytest.raises((ValueError, SyntaxError)):
            column_expr(bad, table)


def test_run_and_verify(tmp_path):
    out = tmp_path / "out"
    res = run(load_scenario(SMALL), str(out))
    assert res.exit_code == 0
    files = set(os.listdir(out))
    assert {"report.txt", "checks.csv", "scenario.ini", "residual.csv", "growth_f1.csv",
            "reduce.csv", "reduce_Ck.txt"} <= files
    assert (out / "growth_f1.csv").read_text().splitlines()[0] == "r,m,N,T,logM,argmax_theta"
    assert (out / "reduce_Ck.txt").read_text() == "1; 1; 1\n"
    assert "hash: " + load_scenario(SMALL).hash in res.report
    ok, msgs = verify(str(out))
    assert ok, msgs


def test_verify_detects_tampering(tmp_path):
    out = tmp_path / "out"
    run(load_scenario(SMALL), str(out))
    path = out / "residual.csv"
    lines = path.read_text().splitlines()
    head, *rows = lines
    fields = rows[3].split(",")
    fields[-1] = "0.5"
    rows[3] = ",".join(fields)
    path.write_text("\n".join([head] + rows) + "\n")
    ok, msgs = verify(str(out))
    assert not ok and any("residual" in m for m in msgs)


def test_verify_detects_edited_report(tmp_path):
    out = tmp_path / "out"
    run(load_scenario(SMALL), str(out))
    rep = out / "report.txt"
    rep.write_text(rep.read_text().replace("PASS", "FAIL", 1))
    ok, msgs = verify(str(out))
    assert not ok and "report.txt" in msgs[-1]


def test_rerun_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run(get_scenario("curve-exp-minus"), str(a))
    run(get_scenario("curve-exp-minus"), str(b))
    for name in os.listdir(a):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_hard_failure_sets_exit_code(tmp_path):
    text = """
[scenario]
name = wrong-candidate
coefficients = exp(2*z); -(2*exp(z)+1)
solutions = exp(exp(z)); z*exp(exp(z))

[residual]

[reduce]

[growth]
functions = A0
grid = 1, 2
"""
    res = run(load_scenario(text), str(tmp_path / "o"))
    assert res.exit_code == 1
    by_name = {c.name: c for c in res.checks}
    assert by_name["f1 solves the equation"].verdict == "PASS"
    assert by_name["f2 solves the equation"].verdict == "FAIL"
    # the reduction refuses a non-solution base; the growth analysis still runs
    errors = [c for c in res.checks if c.verdict == "ERROR"]
    assert len(errors) == 1 and errors[0].analysis == "reduce" and "not satisfied" in errors[0].name
    assert any(c.analysis == "growth" and c.verdict == "INFO" for c in res.checks)
    assert "exit: 1" in res.report


def test_soft_failure_keeps_exit_zero(tmp_path):
    text = SMALL + "\n[check:impossible]\nfile = growth_f1.csv\nexpr = T\nstat = max\nop = <\nthreshold = 0\n"
    res = run(load_scenario(text), str(tmp_path / "o"))
    assert res.exit_code == 0
    assert res.checks[-1].verdict == "FAIL" and not res.checks[-1].hard


def test_cli_examples_and_reduce(capsys):
    assert main(["examples"]) == 0
    out = capsys.readouterr().out
    assert "frei-ex12" in out and len(out.splitlines()) == len(CATALOGUE)
    assert main(["reduce", "-n", "2", "-p", "1"]) == 0
    assert capsys.readouterr().out == "2; 1,0; 2\n2; 0,1; 1\n"
    assert main(["examples", "--show", "qdiff-poly"]) == 0
    assert "operator = qdelta" in capsys.readouterr().out


def test_cli_run_verify(tmp_path, capsys):
    path = _write(tmp_path, SMALL)
    out = str(tmp_path / "o")
    assert main(["run", path, "--out", out, "--grid", "2, 4"]) == 0
    assert "summary:" in capsys.readouterr().out
    assert main(["verify", out]) == 0
    assert "verified" in capsys.readouterr().out
    assert "grid = 2, 4" in (tmp_path / "o" / "scenario.ini").read_text()


def test_cli_bad_scenario_exit_code(tmp_path, capsys):
    path = _write(tmp_path, "[scenario]\nname = x\ncoefficients = 1\n")
    assert main(["run", path]) == 2
    assert "no analyses requested" in capsys.readouterr().err


def test_cli_analyze(tmp_path, capsys):
    assert main(["analyze", "-f", "exp(z)", "--grid", "10, 20"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "r,m,N,T,logM,argmax_theta" and len(lines) == 3
    assert main(["analyze", "-f", "exp(z)", "--grid", "10, 20", "--values", "0, 1"]) == 0
    assert capsys.readouterr().out.startswith("a,r,ratio\n0,10,")
    assert main(["analyze", "-f", "z^3-1", "--grid", "0.5, 2", "--zeros"]) == 0
    assert capsys.readouterr().out == "r,n\n0.5,0\n2,3\n"


def test_cli_dominance_and_solve(tmp_path, capsys):
    assert main(["dominance", "frei-ex12", "--grid", "5, 10, 15"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "p,r,ratio,trimmed,selected" and len(lines) == 7
    text = """
[scenario]
name = s
coefficients = -1

[solve]
ic = 1
grid = 1, 2
"""
    path = _write(tmp_path, text)
    rays = tmp_path / "rays.csv"
    assert main(["solve", path, "--dump-rays", str(rays)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "r,m,N,T,logM,argmax_theta"
    assert float(out[2].split(",")[4]) == pytest.approx(2.0, rel=1e-8)
    body = rays.read_text().splitlines()
    assert body[0] == "theta,r,log_abs_f" and len(body) > 64


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "valdist", "reduce", "-n", "1"],
                          capture_output=True, text=True, check=True)
    assert proc.stdout == "1; 1; 1\n"
