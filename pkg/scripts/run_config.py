#!/usr/bin/env python3
"""
Run configuration: load a YAML/JSON set spec, validate it, build the ThinSetSpec.

Config shape (unknown keys rejected at every level):

    h1:   {family: pow, c: 1.05}
    h2:   {family: pow, c: 1.05}        # defaults to h1
    psi:  {kappa: 1.0, kind: derivative}
    sign: plus
    seed: 7          # optional
    threads: 1       # optional
    horizon: 100000  # optional default for --N

Usage:
    python run_config.py configs/pow105.yaml          # validate + echo
    python run_config.py configs/pow105.yaml --json
"""
import argparse
import json
import os
import sys
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import yaml
from jsonschema import Draft7Validator

from errors import ConfigError, ThinSetsError
from thinset import ThinSetSpec

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SCHEMA_PATH = os.path.join(ROOT, "schemas", "runconfig.schema.v1.json")

DEFAULT_SEED = 20240601


def load_schema(path: str = SCHEMA_PATH) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def schema_errors(doc: Any, schema: Optional[Dict[str, Any]] = None) -> List[str]:
    """Draft-7 violations as 'path: message' strings, in document order."""
    validator = Draft7Validator(schema or load_schema())
    out = []
    for error in sorted(validator.iter_errors(doc), key=lambda e: [str(p) for p in e.path]):
        path = ".".join(str(p) for p in error.path) if error.path else "root"
        out.append(f"{path}: {error.message}")
    return out


@dataclass(frozen=True)
class RunConfig:
    raw: Dict[str, Any]
    spec: ThinSetSpec
    seed: int = DEFAULT_SEED
    threads: int = 1
    horizon: Optional[int] = None
    source: str = "<memory>"


def config_from_dict(doc: Any, source: str = "<memory>") -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: config must be a mapping")
    errs = schema_errors(doc)
    if errs:
        raise ConfigError(f"{source}: " + "; ".join(errs))
    return RunConfig(
        raw=doc,
        spec=ThinSetSpec.from_config(doc),
        seed=int(doc.get("seed", DEFAULT_SEED)),
        threads=int(doc.get("threads", 1)),
        horizon=doc.get("horizon"),
        source=source,
    )


def load_config(path: str) -> RunConfig:
    """Read and validate a config file.

    Raises:
        OSError: file cannot be read
        ConfigError: parse error, schema violation or inadmissible parameters
    """
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: parse error: {e}") from e
    return config_from_dict(doc, source=path)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("config", help="YAML or JSON config file")
    ap.add_argument("--json", action="store_true", help="Print the resolved spec as JSON")
    args = ap.parse_args()

    try:
        cfg = load_config(args.config)
    except OSError as e:
        print(f"ERROR: {e}", file=sys.stderr)
        sys.exit(4)
    except ThinSetsError as e:
        print(f"ERROR: {e}", file=sys.stderr)
        sys.exit(e.exit_code)

    if args.json:
        print(json.dumps(cfg.spec.describe(), indent=2))
    else:
        print(f"✓ {args.config}: valid ({cfg.spec.sign}, h1={cfg.spec.phi1.base.family})")
    sys.exit(0)


if __name__ == "__main__":
    main()
