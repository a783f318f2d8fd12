#!/usr/bin/env python3
"""Regenerate the golden end-to-end output under tests/fixtures/golden/.

Runs classify -> trends -> report over the fixture corpus with the mock
scorer and seed 0. Wall-clock stage timings are the one non-deterministic
artifact, so a pinned timings.csv is written before the report step; the
determinism test replays exactly this sequence and compares bytes.

Run from the repository root after any intentional pipeline change:

    python scripts/regen_golden.py
"""

from __future__ import annotations

import shutil
import tempfile
from pathlib import Path

from litriage.config import RunConfig
from litriage.pipeline import CORPUS_FILE, do_classify, do_report, do_trends
from litriage.report import write_timings_csv
from litriage.trends import record_timing

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "tests" / "fixtures"
GOLDEN = FIXTURES / "golden"

PINNED_TIMINGS = [
    record_timing("classify Study Approach [appended]", 2.4, 30),
    record_timing("classify Clinical Focus [appended]", 3.0, 30),
]


def run_pipeline(out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    shutil.copy(FIXTURES / "corpus30.jsonl", out / CORPUS_FILE)
    config = RunConfig(
        query="synthetic fixture corpus",
        taxonomy=str(FIXTURES / "taxonomy.yaml"),
        out_dir=str(out),
        seed=0,
    )
    quiet = lambda message: None
    do_classify(config, quiet)
    # Replace the measured timings with the pinned fixture so the report
    # (which embeds the timing table) is byte-reproducible.
    write_timings_csv(PINNED_TIMINGS, out / "timings.csv")
    do_trends(config, quiet)
    do_report(config, quiet)


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "out"
        run_pipeline(out)
        if GOLDEN.exists():
            shutil.rmtree(GOLDEN)
        GOLDEN.mkdir(parents=True)
        for path in sorted(out.iterdir()):
            if path.name == CORPUS_FILE:
                continue  # input, not output
            shutil.copy(path, GOLDEN / path.name)
    print(f"golden output refreshed under {GOLDEN}")
    for path in sorted(GOLDEN.iterdir()):
        print(f"  {path.name}")


if __name__ == "__main__":
    main()
