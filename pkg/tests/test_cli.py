import subprocess
import sys

import pytest

from finslab.cli import dispatch
from finslab.output import read_csv

FAST = ["--set", "h=0.125", "--set", "ell_list=2, 4, 6"]


def test_rates_writes_outputs_and_passes(tmp_path, capsys):
    assert dispatch(["rates", "--out", str(tmp_path), *FAST]) == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["config.txt", "fits.txt", "solution_rate.csv", "solution_rate.gp"]
    header, rows = read_csv(tmp_path / "solution_rate.csv")
    assert header == ["ell", "err_halfcyl", "grad_lp_norm"] and len(rows) == 3
    assert "PASS" in capsys.readouterr().out


def test_rates_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert dispatch(["rates", "--out", str(out), *FAST]) == 0
    for name in ("solution_rate.csv", "fits.txt", "config.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_failing_check_exits_2_and_prints_row(tmp_path, capsys):
    args = ["rates", "--out", str(tmp_path), "--set", "norm=matq(2; 2,0; 0,1)", "--set", "p=3",
            "--set", "h=0.125", "--set", "ell_list=4, 8, 16"]
    assert dispatch(args) == 2
    assert "failing row" in capsys.readouterr().out


@pytest.mark.parametrize("args", [
    ["rates", "--config", "does/not/exist.cfg"],
    ["rates", "--set", "ell_list=8, 4, 2"],
    ["rates", "--set", "norm=qnorm(0)"],
    ["solve", "qnorm(2)"],
    ["frobnicate"],
])
def test_bad_input_exits_1(tmp_path, args):
    with pytest.raises(SystemExit) as info:
        sys.exit(dispatch([*args, "--out", str(tmp_path)]))
    assert info.value.code == 1


def test_check_norm(tmp_path, capsys):
    assert dispatch(["check-norm", "block(2; 1,1; 1,2; 1,4)", "--out", str(tmp_path)]) == 0
    header, rows = read_csv_axioms(tmp_path / "check_norm.csv")
    assert header == ["axiom", "max_violation"] and len(rows) == 5


def read_csv_axioms(path):
    lines = path.read_text().splitlines()
    return lines[0].split(","), lines[1:]


def test_solve_cross_eigen_and_picone(tmp_path):
    base = ["--out", str(tmp_path), "--set", "h=0.125", "--set", "length=2", "--set", "seeds=0"]
    assert dispatch(["solve", *base]) == 0
    assert dispatch(["cross", *base]) == 0
    assert dispatch(["eigen", *base, "--set", "tol_grad=1e-9", "--set", "tol_energy=1e-13"]) == 0
    assert dispatch(["picone", *base, "--set", "norm=qnorm(4)", "--set", "p=3"]) == 0
    for name in ("solution.csv", "trace.csv", "cross_solution.csv", "eigen.csv", "picone.csv"):
        assert (tmp_path / name).exists()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "finslab", "check-norm", "qnorm(3)",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0 and "homogeneity" in proc.stdout
