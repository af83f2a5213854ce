#!/usr/bin/env python3
"""Walkthrough: the full CLI chain end to end on a generated fixture world,
entirely offline. Prints the final report.md."""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from conftest import (  # noqa: E402 (fixture world builder lives in tests/)
    build_fixture_repo,
    make_config,
    script_mock_responses,
    write_issue_corpus,
)


def cli(*args) -> None:
    subprocess.run([sys.executable, "-m", "supcom.cli", *args], check=True)


def main():
    base = Path(tempfile.mkdtemp(prefix="supcom-demo-"))
    repo = build_fixture_repo(base / "repo")
    issues_dir = write_issue_corpus(base / "issues")
    fixtures = base / "mock"
    out = base / "out"
    cfg = base / "run.json"
    cfg.write_text(
        json.dumps(make_config(repo, issues_dir, fixtures, out), indent=2), encoding="utf-8"
    )
    print(f"workspace: {base}\n")

    for stage in ("mine", "ingest-issues", "link"):
        cli(stage, "--config", str(cfg), "--offline")
    scripted = script_mock_responses(out, fixtures)
    print(f"\nscripted mock responses for {scripted} methods\n")
    for stage in ("dataset", "generate", "evaluate"):
        cli(stage, "--config", str(cfg), "--offline")

    print("\n" + "=" * 72)
    print((out / "report.md").read_text(encoding="utf-8"))
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    print("manifest counters:", json.dumps(manifest["counters"], indent=2))


if __name__ == "__main__":
    main()
