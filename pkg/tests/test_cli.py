"""
Command-line surface: CSV output, exit codes and suite determinism.

Run with: pytest tests/test_cli.py
"""
import json
import pathlib
import subprocess
import sys

import pytest

ROOT = pathlib.Path(__file__).resolve().parents[1]
CLI = ROOT / "scripts" / "thinsets_cli.py"
CONFIGS = ROOT / "configs"


def run_cli(*args, cwd=ROOT):
    return subprocess.run(
        [sys.executable, str(CLI), *map(str, args)],
        capture_output=True,
        text=True,
        cwd=cwd,
    )


def test_gen_small_nh_set():
    proc = run_cli("gen", "--config", CONFIGS / "nh15.yaml", "--N", 20)
    assert proc.returncode == 0, proc.stderr
    lines = proc.stdout.splitlines()
    assert lines[0] == "n,block"
    assert lines[1:] == ["1,1", "2,2", "5,3", "8,4", "11,5", "14,6", "18,7"]
    assert "[gen]" in proc.stderr


def test_gen_stats_json():
    proc = run_cli("gen", "--config", CONFIGS / "nh15.yaml", "--N", 1000, "--stats")
    assert proc.returncode == 0, proc.stderr
    stats = json.loads(proc.stdout)
    assert stats["max_run"] == 2


def test_count_json(tmp_path):
    out = tmp_path / "count.json"
    proc = run_cli("count", "--config", CONFIGS / "pow125.yaml", "--t", "0,100,1000", "--json", "--out", out)
    assert proc.returncode == 0, proc.stderr
    rows = json.loads(out.read_text(encoding="utf-8"))["counts"]
    assert [r["t"] for r in rows] == [0, 100, 1000]
    assert rows[0]["count"] == 0
    assert rows[0]["ratio"] is None


def test_unknown_family_is_config_error(tmp_path):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("h1: {family: bogus, c: 1.5}\nsign: plus\n", encoding="utf-8")
    proc = run_cli("gen", "--config", cfg, "--N", 10)
    assert proc.returncode == 2
    assert "h1.family" in proc.stderr


def test_inadmissible_exponent_is_config_error(tmp_path):
    cfg = tmp_path / "c2.yaml"
    cfg.write_text("h1: {family: pow, c: 2.0}\nsign: plus\n", encoding="utf-8")
    proc = run_cli("stats", "--config", cfg, "--N", 10)
    assert proc.returncode == 2
    assert "InadmissibleExponent" in proc.stderr


def test_missing_config_file_is_io_error(tmp_path):
    proc = run_cli("gen", "--config", tmp_path / "nope.yaml", "--N", 10)
    assert proc.returncode == 4


def test_missing_config_flag():
    proc = run_cli("gen", "--N", 10)
    assert proc.returncode == 2
    assert "--config" in proc.stderr


def test_bad_cut_points_exit_code():
    proc = run_cli("ops", "oscillation", "--config", CONFIGS / "pow125.yaml", "--N", 1000, "--cuts", "5,3")
    assert proc.returncode == 2
    assert "BadCutPoints" in proc.stderr


def test_czd_decompose_delta():
    proc = run_cli("czd", "decompose", "--alpha", "0.25")
    assert proc.returncode == 0, proc.stderr
    doc = json.loads(proc.stdout)
    assert doc["cubes"] == [[1, 0]]


def test_suite_single_criterion_is_deterministic():
    args = ("suite", "--quick", "--criterion", "czd.decomposition_v1")
    first = run_cli(*args)
    second = run_cli(*args)
    assert first.returncode == 0, first.stderr
    assert first.stdout == second.stdout
    summary = json.loads(first.stdout)
    assert summary["status"] == "GREEN"
    assert summary["mode"] == "quick"
    assert len(summary["digest"]) == 64


@pytest.mark.slow
def test_quick_suite_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    first = run_cli("suite", "--quick", "--out", a)
    second = run_cli("suite", "--quick", "--threads", 4, "--out", b)
    assert first.returncode in (0, 3), first.stderr
    assert a.read_bytes() == b.read_bytes()
