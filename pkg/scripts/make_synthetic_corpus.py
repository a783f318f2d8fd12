#!/usr/bin/env python3
"""Regenerate the synthetic test fixtures (corpus, taxonomy, annotations,
phrasing variants).

The vocabulary pools per category are pairwise disjoint, so the mock
scorer's token-overlap formula classifies each record by construction.
A few rows deliberately disagree with their annotations (or carry vote
ties) to exercise the evaluation edge cases. Output is fully
deterministic; run from the repository root:

    python scripts/make_synthetic_corpus.py
"""

from __future__ import annotations

import json
from pathlib import Path

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

APPROACH_PHRASES = {
    "Deep Learning": "deep neural network model",
    "Machine Learning": "classic machine learning classifier",
    "Image Processing": "digital image processing technique",
}

FOCUS_PHRASES = {
    "Screening": "screening program",
    "Diagnosis": "diagnostic evaluation",
    "Management": "treatment management",
}

DISEASES = ["glaucoma", "diabetic retinopathy", "macular degeneration", "cataract", "dry eye"]

APPROACHES = list(APPROACH_PHRASES)
FOCUSES = list(FOCUS_PHRASES)

# Per-record plan: (approach, focus labels in the text, gold focus labels,
# quirk). Quirks: "" none, "wrong-text" text carries another approach's
# tokens, "mc-tie" multiclass annotators tie three ways, "ml-halftie" four
# annotators split two-two on Screening, "no-abstract" empty abstract.
PLAN = []
_focus_cycle = [
    ("Screening",),
    ("Diagnosis",),
    ("Management",),
    ("Screening", "Diagnosis"),
    ("Diagnosis", "Management"),
    (),
]
for i in range(30):
    approach = APPROACHES[i % 3]
    focus = _focus_cycle[i % len(_focus_cycle)]
    quirk = ""
    if i == 13:
        quirk = "no-abstract"
    elif i == 20 or i == 21:
        quirk = "wrong-text"
    elif i == 22:
        quirk = "ml-miss"  # gold adds Management, text omits it
    elif i == 23:
        quirk = "ml-extra"  # text adds treatment, gold omits Management
    elif i == 25 or i == 26:
        quirk = "mc-tie"
    elif i == 27:
        quirk = "ml-halftie"
    PLAN.append((approach, focus, quirk))


def _record(i: int, approach: str, focus: tuple[str, ...], quirk: str) -> dict:
    pmid = f"9{i + 1:07d}"
    disease = DISEASES[i % len(DISEASES)]
    year = 2015 + (i % 8)
    text_approach = approach
    if quirk == "wrong-text":
        text_approach = APPROACHES[(APPROACHES.index(approach) + 1) % 3]
    title = f"{APPROACH_PHRASES[text_approach].capitalize()} study of {disease}"
    text_focus = list(focus)
    if quirk == "ml-miss":
        text_focus = [f for f in focus if f != "Management"]
    if quirk == "ml-extra":
        text_focus = list(focus) + ["Management"]
    focus_clause = "; ".join(FOCUS_PHRASES[f] for f in text_focus)
    abstract = (
        f"This work applies a {APPROACH_PHRASES[text_approach]} to {disease}."
        + (f" The study covers {focus_clause}." if focus_clause else "")
    )
    if quirk == "no-abstract":
        abstract = ""
    return {
        "pmid": pmid,
        "title": title,
        "abstract": abstract,
        "year": year,
        "link": f"https://pubmed.ncbi.nlm.nih.gov/{pmid}/",
    }


def _annotation_lines(i: int, record: dict, approach: str, focus: tuple[str, ...], quirk: str):
    pmid = record["pmid"]
    # Study Approach: three annotators, plurality resolves the true label.
    if quirk == "mc-tie":
        votes = [APPROACHES[0], APPROACHES[1], APPROACHES[2]]
    elif i % 7 == 3:
        other = APPROACHES[(APPROACHES.index(approach) + 1) % 3]
        votes = [approach, approach, other]
    else:
        votes = [approach, approach, approach]
    for annotator, vote in zip(("a1", "a2", "a3"), votes):
        yield {"pmid": pmid, "group": "Study Approach", "annotator": annotator, "labels": [vote]}
    # Clinical Focus: label sets; gold is the planned focus.
    if quirk == "ml-halftie":
        sets = [["Screening"], ["Screening"], [], []]
        annotators = ("a1", "a2", "a3", "a4")
    elif i % 5 == 2 and focus:
        sets = [list(focus), list(focus), list(focus[:-1])]
        annotators = ("a1", "a2", "a3")
    else:
        sets = [list(focus), list(focus), list(focus)]
        annotators = ("a1", "a2", "a3")
    for annotator, labels in zip(annotators, sets):
        yield {"pmid": pmid, "group": "Clinical Focus", "annotator": annotator, "labels": labels}


TAXONOMY = """\
# Synthetic two-group taxonomy used by the test suite and the demo run.
groups:
  - name: Study Approach
    mode: multiclass
    labels:
      Deep Learning: ["deep neural network model"]
      Machine Learning: ["classic machine learning classifier"]
      Image Processing: ["digital image processing technique"]
  - name: Clinical Focus
    mode: multilabel
    labels:
      Screening: ["screening program"]
      Diagnosis: ["diagnostic evaluation"]
      Management: ["treatment management"]
"""

VARIANTS = """\
# Phrasing variants for the ablation driver. The descriptive set shares
# tokens with the corpus texts; the opaque set shares none.
group: Study Approach
variants:
  - name: descriptive
    phrasings:
      Deep Learning: ["deep neural network model"]
      Machine Learning: ["classic machine learning classifier"]
      Image Processing: ["digital image processing technique"]
  - name: opaque
    phrasings:
      Deep Learning: ["alpha"]
      Machine Learning: ["beta"]
      Image Processing: ["gamma"]
"""


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    records = []
    annotation_lines = []
    for i, (approach, focus, quirk) in enumerate(PLAN):
        record = _record(i, approach, focus, quirk)
        records.append(record)
        annotation_lines.extend(_annotation_lines(i, record, approach, focus, quirk))
    with open(FIXTURES / "corpus30.jsonl", "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    with open(FIXTURES / "annotations.jsonl", "w", encoding="utf-8") as fh:
        for line in annotation_lines:
            fh.write(json.dumps(line, ensure_ascii=False) + "\n")
    (FIXTURES / "taxonomy.yaml").write_text(TAXONOMY, encoding="utf-8")
    (FIXTURES / "variants.yaml").write_text(VARIANTS, encoding="utf-8")
    print(f"wrote {len(records)} records and {len(annotation_lines)} annotation lines to {FIXTURES}")


if __name__ == "__main__":
    main()
