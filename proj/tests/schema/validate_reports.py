#!/usr/bin/env python3
"""Runs the cdo CLI on a small toy config and validates every JSON artifact against schemas/.

Usage: validate_reports.py <cdo binary> <repo root>. Exits 77 (ctest skip) without jsonschema.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path


def main():
    try:
        import jsonschema
    except ImportError as e:
        print(f"SKIP: {e}")
        return 77

    cdo, root = sys.argv[1], Path(sys.argv[2])
    schemas = {p.name: json.loads(p.read_text()) for p in (root / "schemas").glob("*.schema.json")}
    for s in schemas.values():
        jsonschema.Draft202012Validator.check_schema(s)

    def check(doc_path, schema_name):
        doc = json.loads(Path(doc_path).read_text())
        jsonschema.validate(doc, schemas[schema_name], cls=jsonschema.Draft202012Validator)
        print(f"ok  {schema_name:28s} {doc_path}")

    for cfg in sorted((root / "configs").glob("*.json")):
        check(cfg, "run_config.schema.json")

    with tempfile.TemporaryDirectory() as tmp:
        run = Path(tmp) / "run"
        cfg = root / "tests" / "fixtures" / "minimal_toy.json"
        subprocess.run([cdo, "-q", "train", "--config", str(cfg), "--run-dir", str(run)], check=True)
        subprocess.run([cdo, "-q", "eval", "--run-dir", str(run)], check=True)
        subprocess.run([cdo, "-q", "bench", "--run-dir", str(run), "--images", "5"], check=True)
        check(run / "config.json", "run_config.schema.json")
        check(run / "report" / "metrics.json", "metrics_report.schema.json")
        check(run / "report" / "bundle.json", "report_bundle.schema.json")
        check(run / "bench.json", "bench.schema.json")

        # The schema must actually constrain: a report without its hash is rejected.
        bad = json.loads((run / "report" / "metrics.json").read_text())
        del bad["config_hash"]
        try:
            jsonschema.validate(bad, schemas["metrics_report.schema.json"], cls=jsonschema.Draft202012Validator)
        except jsonschema.ValidationError:
            print("ok  incomplete report rejected")
        else:
            print("FAIL: incomplete report accepted")
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
