import subprocess
import sys

import pytest

from symqp.apps.bench import HEADER
from symqp.cli import EXIT_SOLVER, EXIT_USAGE, main

FIXTURES = ["xy", "friends", "ridge", "coupled", "nonneg", "box"]


def objective(text):
    for line in text.splitlines():
        if line.startswith("objective:"):
            return float(line.split(":", 1)[1])
    raise AssertionError("no objective line")


def solution(text):
    lines = text.split("solution:\n", 1)[1].splitlines()
    return [float(l.split("\t")[1]) for l in lines]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_stats_xy(capsys, models):
    code, out, _ = run(capsys, "stats", str(models / "xy.foqp"))
    assert code == 0
    head, row = out.splitlines()
    assert tuple(head.split("\t")) == HEADER
    cells = row.split("\t")
    assert cells[:4] == ["xy", "2", "4", "5"]


def test_stats_deterministic(capsys, models):
    _, a, _ = run(capsys, "stats", str(models / "friends.foqp"))
    _, b, _ = run(capsys, "stats", str(models / "friends.foqp"))
    assert a.splitlines()[1].split("\t")[:5] == b.splitlines()[1].split("\t")[:5]


@pytest.mark.parametrize("name", FIXTURES)
def test_solve_symbolic_and_ground(capsys, models, name):
    path = str(models / f"{name}.foqp")
    code, sym, _ = run(capsys, "solve", path)
    assert code == 0
    code, gr, _ = run(capsys, "solve", path, "--ground")
    assert code == 0
    assert objective(sym) == pytest.approx(objective(gr), rel=1e-4, abs=1e-6)
    code, cg, _ = run(capsys, "solve", path, "--ground", "--inner", "cg")
    assert code == 0
    assert objective(cg) == pytest.approx(objective(gr), rel=1e-4, abs=1e-6)


def test_solve_xy_solution(capsys, models, tmp_path):
    out = tmp_path / "sol.txt"
    code, stdout, _ = run(capsys, "solve", str(models / "xy.foqp"), "-o", str(out))
    assert code == 0 and stdout == ""
    text = out.read_text()
    assert objective(text) == pytest.approx(1.0, abs=1e-5)
    assert len(solution(text)) == 2


def test_missing_file(capsys):
    code, _, err = run(capsys, "solve", "/no/such/model.foqp")
    assert code == EXIT_USAGE
    assert "no such model file" in err


def test_bad_command_and_options(capsys, models):
    assert run(capsys, "frobnicate")[0] == EXIT_USAGE
    assert run(capsys)[0] == EXIT_USAGE
    assert run(capsys, "solve", str(models / "xy.foqp"), "--opt", "nonsense=1")[0] == EXIT_USAGE
    assert run(capsys, "solve", str(models / "xy.foqp"), "--opt", "tol")[0] == EXIT_USAGE
    assert run(capsys, "bench", "nope")[0] == EXIT_USAGE
    assert run(capsys, "gen-bpdn", "--n", "100")[0] == EXIT_USAGE
    assert run(capsys, "gen-mdp", "--gamma", "1.5")[0] == EXIT_USAGE


def test_syntax_error_is_usage(capsys, tmp_path):
    bad = tmp_path / "bad.foqp"
    bad.write_text("var x[1];\nminimize 3 *;\n")
    assert run(capsys, "solve", str(bad))[0] == EXIT_USAGE


def test_iteration_limit_is_solver_failure(capsys, models):
    code, out, err = run(capsys, "solve", str(models / "coupled.foqp"), "--opt", "max_iter=2")
    assert code == EXIT_SOLVER
    assert "solver failure" in err


def test_gen_mdp_then_solve(capsys, tmp_path):
    path = tmp_path / "chain.foqp"
    assert run(capsys, "gen-mdp", "--family", "chain", "--bits", "2", "-o", str(path))[0] == 0
    assert path.read_text().startswith("# chain2")
    code, out, _ = run(capsys, "solve", str(path))
    assert code == 0
    # sum of the chain values, from value iteration
    assert objective(out) == pytest.approx(34.782797, rel=1e-4)


def test_gen_bpdn_then_solve(capsys, tmp_path):
    path = tmp_path / "cs.json"
    assert run(capsys, "gen-bpdn", "--n", "64", "--m", "32", "--k", "2", "--seed", "1", "-o", str(path))[0] == 0
    code, sym, _ = run(capsys, "solve", str(path))
    assert code == 0
    assert len(solution(sym)) == 64
    code, gr, _ = run(capsys, "solve", str(path), "--ground")
    assert code == 0
    assert objective(sym) == pytest.approx(objective(gr), rel=1e-4)
    code, out, _ = run(capsys, "stats", str(path))
    assert out.splitlines()[1].split("\t")[1:4] == ["128", "0", "2048"]


def test_bench_block(capsys):
    code, out, _ = run(capsys, "bench", "block", "--steps", "2")
    assert code == 0
    assert len(out.splitlines()) == 3


def test_module_entry_point(models):
    proc = subprocess.run(
        [sys.executable, "-m", "symqp", "stats", str(models / "xy.foqp")], capture_output=True, text=True, timeout=300
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("name\t")
