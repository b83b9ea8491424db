import json
import subprocess
import sys

import pytest

from resgen.cli import main
from resgen.export import read_manifest, read_pgm


def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_gen_contract_and_determinism(tmp_path, capsys):
    args = ["gen", "--category", "layered", "--count", "10", "--seed", "7"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = tmp_path / "a"
    assert len(list((a / "grids").glob("*.npy"))) == 10
    assert len(list((a / "meta").glob("*.json"))) == 10
    assert (a / "manifest.jsonl").exists()
    assert _tree(a) == _tree(tmp_path / "b")


def test_gen_unknown_category(tmp_path, capsys):
    assert main(["gen", "--category", "granite", "--count", "1", "--seed", "1", "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    for name in ("halfspace_anomaly", "layered", "folded_fault_anomaly"):
        assert name in err


@pytest.mark.parametrize("args", [
    ["gen", "--category", "layered", "--out", "x"],
    ["gen", "--category", "layered", "--count", "0", "--seed", "1", "--out", "x"],
    ["split", "--manifest", "x", "--ratio", "7:2"],
])
def test_usage_errors_exit_1(args, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(args) == 1


def test_argparse_errors_exit_1():
    with pytest.raises(SystemExit) as exc:
        main(["gen"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 1


def test_config_file(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("global_seed = 3\ncount.folded = 2\ncount.halfspace_anomaly = 1\n")
    assert main(["gen", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    m = read_manifest(tmp_path / "o")
    assert [r.category.value for r in m.records] == ["halfspace_anomaly", "folded", "folded"]
    cfg.write_text("nope = 1\n")
    assert main(["gen", "--config", str(cfg), "--out", str(tmp_path / "p")]) == 1
    assert main(["gen", "--config", str(tmp_path / "missing.txt"), "--out", str(tmp_path / "q")]) == 3


def test_stats_split_slice(tmp_path, capsys):
    out = tmp_path / "d"
    assert main(["gen", "--category", "all", "--count", "2", "--seed", "1", "--out", str(out)]) == 0
    capsys.readouterr()
    assert main(["stats", "--manifest", str(out), "--grids", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(doc) == {"n_layers", "n_anomalies", "log10_resistivity"}
    assert sum(doc["n_layers"]["counts"]) == 16
    assert main(["stats", "--manifest", str(out / "manifest.jsonl")]) == 0
    assert "chi2" in capsys.readouterr().out
    assert main(["split", "--manifest", str(out), "--ratio", "8:1:1", "--seed", "2"]) == 0
    split = json.loads((out / "split.json").read_text())
    assert len(split["train"]) + len(split["validation"]) + len(split["test"]) == 18
    grid = next((out / "grids").glob("*.npy"))
    assert main(["slice", "--grid", str(grid), "--axis", "z", "--index", "0", "--out", str(tmp_path / "s.pgm")]) == 0
    assert read_pgm(tmp_path / "s.pgm").shape == (64, 64)
    assert main(["slice", "--grid", str(grid), "--axis", "z", "--index", "99", "--out", str(tmp_path / "t.pgm")]) == 1
    assert main(["slice", "--grid", str(tmp_path / "none.npy"), "--index", "0", "--out", str(tmp_path / "u.pgm")]) == 3


def test_stats_failures(tmp_path):
    empty = tmp_path / "e"
    empty.mkdir()
    (empty / "manifest.jsonl").write_text("")
    assert main(["stats", "--manifest", str(empty)]) == 1
    assert main(["stats", "--manifest", str(tmp_path / "absent")]) == 3
    out = tmp_path / "d"
    assert main(["gen", "--category", "layered", "--count", "2", "--seed", "1", "--out", str(out)]) == 0
    next((out / "grids").glob("*.npy")).unlink()
    assert main(["stats", "--manifest", str(out), "--grids"]) == 3


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "resgen.cli", "gen", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "folded_fault_anomaly" in res.stdout
