#!/usr/bin/env python3
"""
Acceptance Suite Runner - evaluate the criteria in criteria/*.yaml.

Each criterion lists witnesses; a witness names a check in suite_checks.CHECKS,
its parameters, optional `quick` overrides and a threshold. Checks run
in-process and share one enumeration cache, so a set used by several
criteria is materialised once.

Witness status: PASS, FAIL (threshold missed), ERROR (the check raised),
TIMEOUT (finished after timeout_ms; the measurement is kept), SKIP.
A criterion is GREEN when no witness is FAIL/ERROR/TIMEOUT.

The JSON summary carries no timings and ends with a SHA-256 digest of its
canonical form, so two runs with the same seed are byte-identical.

Usage:
    python run_criteria.py criteria/                 # full suite, human output
    python run_criteria.py criteria/ --quick --json  # quick suite, JSON summary
    python run_criteria.py criteria/ --criterion thinset.nh_reduction_v1
    python run_criteria.py criteria/ --witness floor_oracle -v
"""
import argparse
import json
import os
import sys
import time
from typing import Any, Dict, List, Optional

import yaml

from errors import EXIT_ASSERTION, EXIT_CONFIG, EXIT_IO, EXIT_OK, ConfigError, ThinSetsError
from report_io import canonical_json, digest
from run_config import DEFAULT_SEED, load_schema, schema_errors
from suite_checks import CHECKS, SuiteContext

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CRITERION_SCHEMA = os.path.join(ROOT, "schemas", "criterion.schema.v1.json")
CRITERIA_DIR = os.path.join(ROOT, "criteria")
SUITE_NAME = "thinsets"


def load_criteria(path: str) -> List[Dict[str, Any]]:
    """Load all YAML criteria from a file or directory.

    Returns:
        List of criterion dicts with __file__ metadata; unreadable files
        carry __error__ instead of content
    """
    if os.path.isfile(path):
        files = [path]
    elif os.path.isdir(path):
        files = [
            os.path.join(path, name)
            for name in sorted(os.listdir(path))
            if name.endswith((".yaml", ".yml"))
        ]
    else:
        return []

    items = []
    for filepath in files:
        try:
            with open(filepath, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f.read()) or {}
            data["__file__"] = filepath
            items.append(data)
        except (OSError, yaml.YAMLError) as e:
            items.append({"__file__": filepath, "__error__": f"Parse error: {e}"})
    return items


def criterion_errors(criterion: Dict[str, Any], schema: Optional[Dict[str, Any]] = None) -> List[str]:
    """Schema violations plus unknown check names."""
    if "__error__" in criterion:
        return [criterion["__error__"]]
    doc = {k: v for k, v in criterion.items() if not k.startswith("__")}
    errs = schema_errors(doc, schema or load_schema(CRITERION_SCHEMA))
    for i, w in enumerate(doc.get("witnesses") or []):
        if isinstance(w, dict) and w.get("check") not in CHECKS:
            errs.append(f"witnesses.{i}.check: unknown check '{w.get('check')}'")
    stem = os.path.basename(criterion.get("__file__", "")).rsplit(".", 1)[0]
    if stem and doc.get("id") and stem != doc["id"]:
        errs.append(f"id: '{doc['id']}' does not match file name '{stem}'")
    return errs


def witness_params(witness: Dict[str, Any], quick: bool) -> Dict[str, Any]:
    params = dict(witness.get("params") or {})
    if quick:
        params.update(witness.get("quick") or {})
    return params


def run_witness(witness: Dict[str, Any], ctx: SuiteContext) -> Dict[str, Any]:
    """Run one witness and classify it."""
    name = witness["name"]
    threshold = witness.get("threshold")
    timeout_ms = witness.get("timeout_ms")
    out = {"name": name, "status": "ERROR", "measured": None, "threshold": threshold, "detail": ""}

    started = time.perf_counter()
    try:
        res = CHECKS[witness["check"]](ctx, witness_params(witness, ctx.quick), threshold)
    except ThinSetsError as e:
        out["detail"] = f"{type(e).__name__}: {e}"
        return out
    except Exception as e:
        out["detail"] = f"Check error: {type(e).__name__}: {e}"
        return out
    elapsed_ms = (time.perf_counter() - started) * 1000.0

    out["measured"] = res["measured"]
    out["detail"] = res.get("detail", "")
    if timeout_ms is not None and elapsed_ms > timeout_ms:
        out["status"] = "TIMEOUT"
        out["detail"] = f"Execution exceeded {timeout_ms}ms timeout"
    else:
        out["status"] = "PASS" if res["passed"] else "FAIL"
    return out


def run_criterion(criterion: Dict[str, Any], ctx: SuiteContext,
                  witness_filter: Optional[set] = None, verbose: bool = False) -> Dict[str, Any]:
    criterion_id = criterion.get("id", "unknown")
    witnesses = criterion.get("witnesses", [])
    if witness_filter:
        witnesses = [w for w in witnesses if w.get("name") in witness_filter]
    if not witnesses:
        return {"criterion_id": criterion_id, "status": "SKIP", "witnesses": []}

    results = []
    for witness in witnesses:
        if verbose:
            print(f"[suite] {criterion_id}/{witness['name']} ...", file=sys.stderr)
        results.append(run_witness(witness, ctx))

    statuses = [r["status"] for r in results]
    if any(s in ("FAIL", "ERROR", "TIMEOUT") for s in statuses):
        status = "RED"
    elif all(s == "SKIP" for s in statuses):
        status = "SKIP"
    else:
        status = "GREEN"
    return {"criterion_id": criterion_id, "status": status, "witnesses": results}


def run_suite(path: str = CRITERIA_DIR, seed: int = DEFAULT_SEED, threads: int = 1, quick: bool = False,
              criterion_filter: Optional[set] = None, witness_filter: Optional[set] = None,
              verbose: bool = False) -> Dict[str, Any]:
    """Validate and run the criteria under `path`; returns the digested summary.

    Raises:
        ThinSetsError (exit 2): a criterion file is invalid
    """
    criteria = load_criteria(path)
    if not criteria:
        raise ConfigError(f"{path}: no criteria found")
    schema = load_schema(CRITERION_SCHEMA)
    problems = []
    for c in criteria:
        problems += [f"{c['__file__']}: {e}" for e in criterion_errors(c, schema)]
    if problems:
        raise ConfigError("; ".join(problems))

    if criterion_filter:
        criteria = [c for c in criteria if c["id"] in criterion_filter]

    ctx = SuiteContext(seed=seed, threads=threads, quick=quick)
    results = {}
    for c in criteria:
        results[c["id"]] = run_criterion(c, ctx, witness_filter, verbose)

    ran = [r for r in results.values() if r["status"] != "SKIP"]
    summary = {
        "suite": SUITE_NAME,
        "mode": "quick" if quick else "full",
        "seed": int(seed),
        "status": "GREEN" if ran and all(r["status"] == "GREEN" for r in ran) else "RED",
        "criteria": results,
    }
    summary["digest"] = digest(summary)
    return summary


def format_human_output(summary: Dict[str, Any], verbose: bool = False) -> str:
    lines = []
    for criterion_id, result in summary["criteria"].items():
        if result["status"] == "SKIP":
            continue
        lines.append(f"\n{criterion_id}:")
        for wr in result["witnesses"]:
            name, s = wr["name"], wr["status"]
            if s == "PASS":
                lines.append(f"  ✓ {name} PASS")
                if verbose and wr.get("detail"):
                    lines.append(f"    {wr['detail']}")
            elif s == "FAIL":
                lines.append(f"  ✗ {name} FAIL (threshold {wr['threshold']})")
                lines.append(f"    measured: {json.dumps(wr['measured'], sort_keys=True)}")
                if wr.get("detail"):
                    lines.append(f"    {wr['detail']}")
            elif s == "ERROR":
                lines.append(f"  ⚠ {name} ERROR")
                lines.append(f"    {wr.get('detail') or 'Execution error'}")
            elif s == "SKIP":
                lines.append(f"  – {name} SKIP")
            elif s == "TIMEOUT":
                lines.append(f"  ⏱ {name} TIMEOUT")
                lines.append(f"    {wr.get('detail') or 'Execution timeout'}")
    lines.append(f"\n{summary['status']} ({summary['mode']}, seed {summary['seed']})")
    return "\n".join(lines)


def summary_json(summary: Dict[str, Any]) -> str:
    """Canonical JSON text of a summary, newline terminated."""
    return canonical_json(summary) + "\n"


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("path", nargs="?", default=CRITERIA_DIR, help="Criterion file or directory (default: criteria/)")
    ap.add_argument("--quick", action="store_true", help="Apply each witness's quick overrides")
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED, help="Suite seed. Default: %(default)s")
    ap.add_argument("--threads", type=int, default=1, help="Enumeration threads. Default: %(default)s")
    ap.add_argument("--json", action="store_true", help="Print the canonical JSON summary")
    ap.add_argument("--out", help="Also write the JSON summary to this file")
    ap.add_argument("--verbose", "-v", action="store_true", help="Progress on stderr and details for passes")
    ap.add_argument("--criterion", action="append", help="Run only this criterion id (repeatable)")
    ap.add_argument("--witness", action="append", help="Run only witnesses with this name (repeatable)")
    args = ap.parse_args()

    if not os.path.exists(args.path):
        print(f"ERROR: Path not found: {args.path}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)

    try:
        summary = run_suite(
            args.path,
            seed=args.seed,
            threads=args.threads,
            quick=args.quick,
            criterion_filter=set(args.criterion) if args.criterion else None,
            witness_filter=set(args.witness) if args.witness else None,
            verbose=args.verbose,
        )
    except ThinSetsError as e:
        print(f"ERROR: {e}", file=sys.stderr)
        sys.exit(e.exit_code)

    text = summary_json(summary)
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8", newline="") as f:
                f.write(text)
        except OSError as e:
            print(f"ERROR: {e}", file=sys.stderr)
            sys.exit(EXIT_IO)

    if args.json:
        sys.stdout.write(text)
    else:
        print(format_human_output(summary, args.verbose))
    sys.exit(EXIT_OK if summary["status"] == "GREEN" else EXIT_ASSERTION)


if __name__ == "__main__":
    main()
