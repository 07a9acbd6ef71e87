"""
Basic criterion and config validation tests.

Run with: pytest tests/
"""
import pathlib

import pytest
import yaml

from run_config import load_config, load_schema
from run_criteria import CRITERION_SCHEMA, criterion_errors, load_criteria, witness_params
from suite_checks import CHECKS

ROOT = pathlib.Path(__file__).resolve().parents[1]
CRITERIA = ROOT / "criteria"
CONFIGS = ROOT / "configs"


def test_all_criteria_validate():
    """Every criterion passes the schema, names known checks and matches its file name."""
    criteria = load_criteria(str(CRITERIA))
    assert len(criteria) > 0, "No criterion files found"
    schema = load_schema(CRITERION_SCHEMA)
    for c in criteria:
        errs = criterion_errors(c, schema)
        assert errs == [], f"{pathlib.Path(c['__file__']).name}: {errs}"


def test_witness_names_unique_per_criterion():
    for path in CRITERIA.glob("*.yaml"):
        with open(path, "r", encoding="utf-8") as f:
            doc = yaml.safe_load(f)
        names = [w["name"] for w in doc["witnesses"]]
        assert len(names) == len(set(names)), f"{path.name}: duplicate witness names"


def test_every_check_is_used():
    used = set()
    for path in CRITERIA.glob("*.yaml"):
        with open(path, "r", encoding="utf-8") as f:
            used |= {w["check"] for w in yaml.safe_load(f)["witnesses"]}
    assert set(CHECKS) - used == set(), f"unused checks: {sorted(set(CHECKS) - used)}"


def test_config_references_exist():
    """Witness params naming a config point at a file under configs/."""
    for path in CRITERIA.glob("*.yaml"):
        with open(path, "r", encoding="utf-8") as f:
            doc = yaml.safe_load(f)
        for w in doc["witnesses"]:
            params = w.get("params") or {}
            names = list(params.get("configs") or []) + ([params["config"]] if "config" in params else [])
            for name in names:
                assert (CONFIGS / f"{name}.yaml").exists(), f"{path.name}/{w['name']}: no config '{name}'"


def test_unknown_check_is_reported(tmp_path):
    bad = tmp_path / "thinset.bad_v1.yaml"
    bad.write_text(
        "id: thinset.bad_v1\nversion: \"1.0.0\"\ndomain: thinset\ntitle: t\nstatement: s\n"
        "witnesses:\n  - {name: w, check: no_such_check, params: {}, threshold: 0}\n",
        encoding="utf-8",
    )
    (crit,) = load_criteria(str(bad))
    errs = criterion_errors(crit)
    assert any("unknown check" in e for e in errs), errs


def test_id_must_match_file_name(tmp_path):
    bad = tmp_path / "thinset.other_v1.yaml"
    bad.write_text(
        "id: thinset.bad_v1\nversion: \"1.0.0\"\ndomain: thinset\ntitle: t\nstatement: s\n"
        "witnesses:\n  - {name: w, check: cz_delta, params: {}, threshold: true}\n",
        encoding="utf-8",
    )
    (crit,) = load_criteria(str(bad))
    assert any("does not match file name" in e for e in criterion_errors(crit))


def test_quick_overrides_params():
    w = {"params": {"N": 100, "trials": 5}, "quick": {"N": 10}}
    assert witness_params(w, quick=False) == {"N": 100, "trials": 5}
    assert witness_params(w, quick=True) == {"N": 10, "trials": 5}


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.stem)
def test_configs_load(path):
    cfg = load_config(str(path))
    assert cfg.spec.sign in ("plus", "minus")
    assert cfg.horizon is None or cfg.horizon >= 1
