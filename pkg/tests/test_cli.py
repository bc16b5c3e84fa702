import csv
import json
import subprocess
import sys

import pytest

from exchange_index import corpus
from exchange_index.cli import main
from exchange_index.economy import dump_problem


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    root = tmp_path_factory.mktemp("economies")
    out = {}
    for entry in (corpus.e1(), corpus.e2(), corpus.e2_family()[3]):
        out[entry.name] = root / f"{entry.name}.json"
        dump_problem(out[entry.name], entry.eco, entry.omega)
    (root / "broken.json").write_text("{not json")
    out["broken"] = root / "broken.json"
    return out


def run(*argv):
    return main([str(a) for a in argv])


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_scan_e1(files, tmp_path):
    assert run("scan", "--economy", files["e1"], "--out", tmp_path) == 0
    rows = read_csv(tmp_path / "equilibria.csv")
    assert len(rows) == 1 and rows[0]["index"] == "1"
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["command"] == "scan" and summary["seed"] == 0
    assert summary["inputs"]["tolerances"]["newton"] == 1e-10
    assert summary["inputs"]["economy_document"]["n"] == 2


def test_solve_and_tolerance_echo(files, tmp_path):
    assert run("solve", "--economy", files["e2"], "--out", tmp_path, "--p0", 0.9, "--tol-newton", 1e-11) == 0
    rows = read_csv(tmp_path / "equilibria.csv")
    assert rows[0]["index"] == "-1"
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["inputs"]["tolerances"]["newton"] == 1e-11


def test_delta_columns(files, tmp_path):
    assert run("delta", "--economy", files["e2"], "--out", tmp_path) == 0
    rows = read_csv(tmp_path / "equilibria.csv")
    assert [r["index"] for r in rows] == ["1", "-1", "1"]
    assert [r["sign_delta"] for r in rows] == ["1", "-1", "1"]
    assert {r["sign_match_index"] for r in rows} == {"true"}


def test_transfer_on_e2_middle(files, tmp_path):
    argv = ["transfer", "--economy", files["e2"], "--out", tmp_path, "--equilibrium-index", 1,
            "--trials", 25, "--magnitude", 1e-3, "--magnitude", 1e-4, "--seed", 9]
    assert run(*argv) == 0
    rows = read_csv(tmp_path / "transfers.csv")
    assert len(rows) == 50
    assert any(r["paradox"] == "true" for r in rows)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["findings"]["found"] is True and summary["seed"] == 9


def test_dynamics_tsv(files, tmp_path):
    assert run("dynamics", "--economy", files["e2"], "--out", tmp_path, "--p0", 0.5) == 0
    lines = (tmp_path / "trajectory.tsv").read_text().splitlines()
    assert lines[0] == "time\tp_1\tz_inf"
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["findings"]["status"] == "converged"
    assert summary["findings"]["classification"] == "stable"


@pytest.mark.parametrize("command", ["scan", "transfer", "dynamics"])
def test_outputs_are_byte_identical(files, tmp_path, command):
    extra = ["--trials", 10] if command == "transfer" else []
    for name in ("a", "b"):
        assert run(command, "--economy", files["e2"], "--out", tmp_path / name, *extra) == 0
    for path in (tmp_path / "a").iterdir():
        other = (tmp_path / "b" / path.name).read_bytes()
        if path.name == "summary.json":
            other = other.replace(b"/b", b"/a")
        assert path.read_bytes() == other


@pytest.mark.parametrize(
    "argv",
    [
        ["scan", "--economy", "missing.json"],
        ["scan"],
        ["scan", "--economy", "BROKEN"],
        ["scan", "--economy", "E1", "--trials", "many"],
        ["scan", "--economy", "E1", "--tol-newton", "0"],
        ["transfer", "--economy", "E1", "--equilibrium-index", "3"],
        ["solve", "--economy", "E1", "--p0", "1", "2"],
        ["frobnicate"],
    ],
)
def test_validation_failures_exit_1(files, tmp_path, capsys, argv):
    argv = [{"BROKEN": str(files["broken"]), "E1": str(files["e1"])}.get(a, a) for a in argv]
    with pytest.raises(SystemExit) as info:
        sys.exit(main(argv + ["--out", str(tmp_path)] if argv[0] != "frobnicate" else argv))
    assert info.value.code == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["exit_code"] == 1 and err["error"]


def test_non_convergence_exits_2(files, tmp_path, capsys):
    assert run("solve", "--economy", files["e2"], "--out", tmp_path, "--p0", 0.5, "--tol-newton", 1e-300) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "NoConvergence"


def test_property_failure_exits_3(files, tmp_path, capsys, monkeypatch):
    from exchange_index import cli

    monkeypatch.setattr(cli, "delta", lambda *a, **k: 1.0)  # a sign that disagrees with index -1
    assert run("delta", "--economy", files["e2"], "--out", tmp_path) == 3
    assert json.loads(capsys.readouterr().err)["exit_code"] == 3
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["checks"]["sign_delta_equals_index"] == "fail"


def test_module_entry_point(files, tmp_path):
    out = subprocess.run([sys.executable, "-m", "exchange_index", "scan", "--economy", str(files["e1"]),
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 0
    assert (tmp_path / "equilibria.csv").exists()


@pytest.mark.slow
def test_verify_passes_on_builtin_corpus(tmp_path, capsys):
    assert run("verify", "--out", tmp_path) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert len(summary["checks"]) == 10
    assert set(summary["checks"].values()) == {"pass"}
    assert capsys.readouterr().out.count("[PASS]") == 10
