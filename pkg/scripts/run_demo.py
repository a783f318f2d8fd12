#!/usr/bin/env python3
"""Run the whole pipeline offline on the bundled synthetic fixtures.

Every stage runs with the mock scorer and recorded API responses, so no
network access is needed. Artifacts land in ./demo-out; start with
demo-out/report.md.

    python scripts/run_demo.py [output-dir]
"""

from __future__ import annotations

import shutil
import sys
from pathlib import Path

from litriage.config import RunConfig
from litriage.pipeline import (
    CORPUS_FILE,
    do_classify,
    do_evaluate,
    do_report,
    do_trends,
    do_tune,
)

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "tests" / "fixtures"


def main() -> None:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo-out")
    out.mkdir(parents=True, exist_ok=True)
    shutil.copy(FIXTURES / "corpus30.jsonl", out / CORPUS_FILE)
    config = RunConfig(
        query="synthetic fixture corpus",
        taxonomy=str(FIXTURES / "taxonomy.yaml"),
        annotations=str(FIXTURES / "annotations.jsonl"),
        out_dir=str(out),
        seed=0,
    )
    print("== tune ==")
    do_tune(config)
    print("== classify ==")
    do_classify(config)
    print("== evaluate ==")
    do_evaluate(config)
    print("== trends ==")
    do_trends(config)
    print("== report ==")
    do_report(config)
    print(f"\nopen {out / 'report.md'}")


if __name__ == "__main__":
    main()
