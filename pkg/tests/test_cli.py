import hashlib
import json
import subprocess
import sys

import pytest

from sparselab.cli import main
from sparselab.suites import SUITES
from sparselab.verify import default_jobs


def write(tmp_path, name, cfg):
    p = tmp_path / name
    p.write_text(json.dumps(cfg, indent=2) + "\n")
    return p


BASE = {
    "name": "mini",
    "seed": 0,
    "suites": ["tq-sparse"],
    "resolutions": [5],
    "corpus": {"seeds": [0], "kinds": ["cell"], "kernels": ["hilbert"]},
}


def test_list_suites(capsys):
    assert main(["list-suites"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == len(SUITES) == 21
    assert lines[0].split()[0] == next(iter(SUITES))


def test_run_writes_reports_and_manifest(tmp_path):
    cfg = write(tmp_path, "mini.json", BASE)
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    paths = {f["path"] for f in manifest["files"]}
    assert {"report.json", "tables/tq-sparse.csv"} <= paths
    for f in manifest["files"]:
        data = (out / f["path"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == f["sha256"]
        assert len(data) == f["bytes"]
    report = json.loads((out / "report.json").read_text())
    assert report["passed"] and report["suites"]["tq-sparse"]["passed"]
    assert not (out / "dump").exists()


def test_identical_runs_have_identical_hashes(tmp_path):
    cfg = write(tmp_path, "mini.json", BASE)
    hashes = []
    for name in ("a", "b"):
        assert main(["run", str(cfg), "--out", str(tmp_path / name)]) == 0
        hashes.append(json.loads((tmp_path / name / "manifest.json").read_text())["content_hash"])
    assert hashes[0] == hashes[1]
    assert main(["run", str(cfg), "--out", str(tmp_path / "c"), "--seed", "1"]) == 0
    other = json.loads((tmp_path / "c" / "manifest.json").read_text())
    assert other["content_hash"] != hashes[0] and other["seed"] == 1


def test_q_at_most_one_is_rejected(tmp_path, capsys):
    cfg = dict(BASE, suites=["mq-sparse"], params={"q": 1.0})
    path = write(tmp_path, "q1.json", cfg)
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    line = next(i + 1 for i, s in enumerate(path.read_text().splitlines()) if '"q"' in s)
    assert f"q1.json:{line}:" in err
    assert not (tmp_path / "o").exists()


def test_invalid_config_exit_code(tmp_path, capsys):
    path = write(tmp_path, "bad.json", dict(BASE, mystery=3))
    assert main(["run", str(path)]) == 2
    assert "mystery" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.json")]) == 2


def test_empty_suite_list_writes_manifest_only(tmp_path):
    path = write(tmp_path, "empty.json", dict(BASE, suites=[]))
    out = tmp_path / "out"
    assert main(["run", str(path), "--out", str(out)]) == 0
    assert [p.name for p in out.iterdir()] == ["manifest.json"]
    assert json.loads((out / "manifest.json").read_text())["files"] == []


def failing_run(tmp_path):
    cfg = dict(BASE, resolutions=[5, 6], stability_factor=1.0)
    path = write(tmp_path, "strict.json", cfg)
    out = tmp_path / "out"
    return main(["run", str(path), "--out", str(out)]), out


def test_failure_writes_dump_and_replays(tmp_path, capsys):
    code, out = failing_run(tmp_path)
    assert code == 1
    dump = out / "dump"
    assert (dump / "instance.json").exists()
    assert any((dump / "functions").iterdir())
    capsys.readouterr()
    # the dumped instance alone satisfies its inequality; only the stability check failed
    assert main(["replay", str(dump)]) == 0
    text = capsys.readouterr().out
    assert "instance tq-sparse/" in text and "recorded=" in text


def test_replay_missing_or_corrupted_dump(tmp_path):
    assert main(["replay", str(tmp_path / "nowhere")]) == 2
    code, out = failing_run(tmp_path)
    dump = out / "dump"
    victim = sorted((dump / "functions").iterdir())[0]
    victim.write_text("cell,value\n0,not-a-number\n")
    assert main(["replay", str(dump)]) == 2
    (dump / "instance.json").write_text("{ truncated")
    assert main(["replay", str(dump)]) == 2


def test_jobs_default_from_environment(monkeypatch):
    monkeypatch.setenv("SPARSELAB_JOBS", "3")
    assert default_jobs() == 3
    monkeypatch.setenv("SPARSELAB_JOBS", "junk")
    assert default_jobs() == 1
    monkeypatch.delenv("SPARSELAB_JOBS")
    assert default_jobs() == 1


def test_bad_jobs_argument():
    with pytest.raises(SystemExit) as err:
        main(["run", "x.json", "--jobs", "0"])
    assert err.value.code == 2


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "sparselab", "list-suites"], capture_output=True, text=True)
    assert r.returncode == 0 and "tq-sparse" in r.stdout
