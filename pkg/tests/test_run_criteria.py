"""
In-process suite runner: classification, summaries and digests.

Run with: pytest tests/test_run_criteria.py
"""
import json

import pytest

from errors import ConfigError
from report_io import digest
from run_config import ROOT, load_schema, schema_errors
from run_criteria import (
    CRITERIA_DIR,
    format_human_output,
    run_suite,
    run_witness,
    summary_json,
)
from suite_checks import SuiteContext


@pytest.fixture(scope="module")
def cz_summary():
    return run_suite(CRITERIA_DIR, quick=True, criterion_filter={"czd.decomposition_v1"})


def test_summary_shape(cz_summary):
    assert cz_summary["suite"] == "thinsets"
    assert cz_summary["mode"] == "quick"
    assert list(cz_summary["criteria"]) == ["czd.decomposition_v1"]
    statuses = {w["name"]: w["status"] for w in cz_summary["criteria"]["czd.decomposition_v1"]["witnesses"]}
    assert statuses == {"random_signals": "PASS", "delta_fixture": "PASS"}
    assert cz_summary["status"] == "GREEN"


def test_digest_covers_everything_but_itself(cz_summary):
    body = {k: v for k, v in cz_summary.items() if k != "digest"}
    assert cz_summary["digest"] == digest(body)


def test_rerun_is_byte_identical(cz_summary):
    again = run_suite(CRITERIA_DIR, quick=True, criterion_filter={"czd.decomposition_v1"})
    assert summary_json(again) == summary_json(cz_summary)
    assert "elapsed" not in summary_json(again)


def test_seed_changes_random_witnesses(cz_summary):
    other = run_suite(CRITERIA_DIR, seed=1, quick=True, criterion_filter={"czd.decomposition_v1"})
    assert other["seed"] == 1
    assert other["digest"] != cz_summary["digest"]


def test_witness_filter_skips_criteria():
    summary = run_suite(CRITERIA_DIR, quick=True, criterion_filter={"czd.decomposition_v1"},
                        witness_filter={"delta_fixture"})
    witnesses = summary["criteria"]["czd.decomposition_v1"]["witnesses"]
    assert [w["name"] for w in witnesses] == ["delta_fixture"]


def test_human_output_marks(cz_summary):
    text = format_human_output(cz_summary)
    assert "✓ delta_fixture PASS" in text
    assert text.rstrip().endswith("GREEN (quick, seed %d)" % cz_summary["seed"])


def test_failing_threshold_is_FAIL():
    ctx = SuiteContext(seed=0, threads=1, quick=True)
    res = run_witness({"name": "w", "check": "cz_delta", "params": {}, "threshold": True}, ctx)
    assert res["status"] == "PASS"
    res = run_witness({"name": "w", "check": "variation_dp", "params": {"sequences": 3, "length": 5},
                       "threshold": -1.0}, ctx)
    assert res["status"] == "FAIL"
    assert res["measured"]["max_deviation"] >= 0.0


def test_raising_check_is_ERROR():
    ctx = SuiteContext(seed=0, threads=1, quick=True)
    res = run_witness({"name": "w", "check": "counting_ratio", "params": {"config": "no_such_config", "N": 10},
                       "threshold": [0.1, 10.0]}, ctx)
    assert res["status"] == "ERROR"
    assert res["measured"] is None


def test_timeout_keeps_measurement():
    ctx = SuiteContext(seed=0, threads=1, quick=True)
    res = run_witness({"name": "w", "check": "cz_delta", "params": {}, "threshold": True, "timeout_ms": 1}, ctx)
    assert res["status"] in ("PASS", "TIMEOUT")
    assert res["measured"] is not None


def test_empty_directory_is_config_error(tmp_path):
    with pytest.raises(ConfigError):
        run_suite(str(tmp_path))


def test_invalid_criterion_is_config_error(tmp_path):
    (tmp_path / "thinset.x_v1.yaml").write_text("id: thinset.x_v1\n", encoding="utf-8")
    with pytest.raises(ConfigError) as exc:
        run_suite(str(tmp_path))
    assert "witnesses" in str(exc.value)


def test_summary_json_is_canonical(cz_summary):
    text = summary_json(cz_summary)
    assert text.endswith("\n")
    assert json.loads(text) == json.loads(json.dumps(cz_summary, sort_keys=True))


def test_summary_matches_schema(cz_summary):
    schema = load_schema(f"{ROOT}/schemas/summary.schema.v1.json")
    assert schema_errors(json.loads(summary_json(cz_summary)), schema) == []
