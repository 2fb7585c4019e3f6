import json
import random
import subprocess
import sys

import pytest

from lllforge.adapters import parse_dimacs, to_dimacs
from lllforge.cli import main
from lllforge.generators import clustered_cnf


@pytest.fixture
def cnf_file(tmp_path):
    path = tmp_path / "c30.cnf"
    path.write_text(to_dimacs(clustered_cnf(30, 8, random.Random(11))))
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


@pytest.mark.parametrize("mode", ["rand", "table", "det", "par"])
def test_solve_modes(capsys, cnf_file, mode):
    code, report = run(capsys, "solve", "--mode", mode, "--eps", "1.0", cnf_file)
    assert code == 0
    assert report["mode"] == mode
    assert set(report["parameters"]) >= {"epsilon", "M", "gamma", "w_min", "D", "m", "n"}
    assert "resamples" in report["run"] and "timings" in report
    formula = parse_dimacs(cnf_file.read_text())
    values = [report["assignment"][str(v)] for v in range(1, formula.num_vars + 1)]
    assert formula.satisfied_by(values)
    if mode == "det":
        assert report["forbidden"]["phi_empty"] < 0.5 and report["forbidden"]["count"] > 0
    if mode == "par":
        assert {"k", "delta", "size"} <= set(report["space"])
        assert report["run"]["rounds"] < report["run"]["max_rounds"]


def test_out_file(capsys, cnf_file, tmp_path):
    out = tmp_path / "r.json"
    assert main(["solve", "--mode", "det", "--out", str(out), str(cnf_file)]) == 0
    assert json.loads(out.read_text())["mode"] == "det"


def test_validation_failure_exit_code(capsys, tmp_path):
    path = tmp_path / "dense.cnf"
    path.write_text("p cnf 3 4\n1 2 0\n-1 2 0\n1 -2 0\n2 3 0\n")
    code, report = run(capsys, "solve", "--mode", "det", path)
    assert code == 1
    assert report["validation"]["ok"] is False


def test_e0_boundary_epsilon(capsys, tmp_path):
    path = tmp_path / "e0.cnf"
    path.write_text("p cnf 2 1\n1 2 0\n")
    assert run(capsys, "solve", "--mode", "det", "--eps", "1", path)[0] == 0
    assert run(capsys, "solve", "--mode", "det", "--eps", "3/2", path)[0] == 1


@pytest.mark.parametrize("argv", [
    ["solve", "missing.cnf"],
    ["solve", "--mode", "fast", "x.cnf"],
    ["solve", "--eps", "-1", "x.cnf"],
])
def test_input_errors(capsys, argv):
    assert main(argv) == 2


def test_malformed_input(capsys, tmp_path):
    path = tmp_path / "bad.cnf"
    path.write_text("p cnf 2 3\n1 2 0\n")
    assert main(["solve", str(path)]) == 2


def test_enumerate_e0(capsys, tmp_path):
    path = tmp_path / "e0.cnf"
    path.write_text("p cnf 2 1\n1 2 0\n")
    code, report = run(capsys, "enumerate", "--eps", "1", "--clique-cover", "off", path)
    assert code == 0
    # the CLI sizes M from the actual split trees (|B_A| = 3), not the 2|vbl(A)| default,
    # so M = 24 and the chains run from 5 to 9 vertices under each of the 3 roots
    assert report["parameters"]["M"] == 24
    assert report["forbidden"]["count"] == 15
    assert report["forbidden"]["phi_empty_exact"] == "1023/262144"


def test_audit(capsys, cnf_file):
    code, report = run(capsys, "audit", "--seeds", "20", cnf_file)
    assert code == 0 and report["audit"]["ok"] and report["audit"]["runs"] == 20


def test_bench(capsys):
    code, report = run(capsys, "bench", "--m", "20", "--count", "2", "--modes", "det,par,rand")
    assert code == 0 and len(report["instances"]) == 2


def test_console_script(cnf_file):
    res = subprocess.run([sys.executable, "-m", "lllforge.cli", "solve", "--mode", "rand", str(cnf_file)],
                         capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["run"]["outcome"] == "success"
