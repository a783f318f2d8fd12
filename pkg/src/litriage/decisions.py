"""Turning label scores into final decisions.

Covers the two decision rules (argmax for multiclass, strict threshold
for multilabel), scorer-input construction per mode, probability fusion,
per-label binary decomposition, and grid threshold sweeps.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import ArticleRecord
from .errors import DataError
from .scoring import DEFAULT_TEMPLATE, LabelScores, ScoreRequest
from .taxonomy import CategoryGroup

log = logging.getLogger(__name__)

ABSTRACT = "abstract"
TITLE = "title"
FUSED = "fused"
APPENDED = "appended"
INPUT_MODES = (ABSTRACT, TITLE, FUSED, APPENDED)

APPEND_SEPARATOR = ". "

FLAG_TIED = "tied"
FLAG_EMPTY = "empty"
FLAG_TITLE_FALLBACK = "title_fallback"

DEFAULT_GRID = tuple(round(0.05 * k, 2) for k in range(1, 20))

DECISION_FIELDS = ("pmid", "group", "mode", "input_mode", "labels", "scores", "flags")


@dataclass
class ThresholdConfig:
    """Scalar decision threshold with optional per-label overrides."""

    default: float = 0.5
    per_label: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for value in (self.default, *self.per_label.values()):
            if not 0.0 < value < 1.0:
                raise DataError(f"threshold {value} must lie strictly in (0, 1)")

    def for_label(self, label: str) -> float:
        return self.per_label.get(label, self.default)

    def vector(self, labels: Sequence[str]) -> tuple[float, ...]:
        return tuple(self.for_label(label) for label in labels)


def save_thresholds(config: ThresholdConfig, path: str | Path) -> None:
    payload = {"default": config.default, "per_label": config.per_label}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_thresholds(path: str | Path) -> ThresholdConfig:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return ThresholdConfig(default=payload["default"], per_label=dict(payload["per_label"]))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"{path}: not a thresholds file: {exc}") from exc


def decide_multiclass(scores: Sequence[float]) -> tuple[int, bool]:
    """Index of the highest score.

    An exact tie goes to the lowest index and is reported through the
    second element.
    """
    arr = np.asarray(scores, dtype=float)
    if arr.size < 2:
        raise ValueError("multiclass decision needs at least 2 scores")
    index = int(np.argmax(arr))
    tied = bool(np.count_nonzero(arr == arr[index]) > 1)
    return index, tied


def decide_multilabel(
    scores: Sequence[float], thresholds: float | Sequence[float]
) -> tuple[frozenset[int], bool]:
    """Indices whose probability strictly exceeds their threshold.

    An empty result is permitted and reported through the second element;
    boundary equality excludes.
    """
    arr = np.asarray(scores, dtype=float)
    if isinstance(thresholds, (int, float)):
        cut = np.full(arr.shape, float(thresholds))
    else:
        cut = np.asarray(thresholds, dtype=float)
        if cut.shape != arr.shape:
            raise ValueError(f"{cut.size} thresholds for {arr.size} scores")
    chosen = frozenset(int(i) for i in np.nonzero(arr > cut)[0])
    return chosen, not chosen


def build_input(record: ArticleRecord, mode: str) -> str | tuple[str, str]:
    """Scorer input for a record.

    ``appended`` joins title and abstract with a sentence boundary so the
    text stays well-formed; ``fused`` returns the (abstract, title) pair
    for two separate scoring passes.
    """
    if mode == TITLE:
        return record.title
    abstract = record.abstract.strip()
    if mode == ABSTRACT:
        if not abstract:
            raise ValueError(f"pmid {record.pmid}: no abstract; use title mode")
        return abstract
    if mode == APPENDED:
        return f"{record.title}{APPEND_SEPARATOR}{abstract}" if abstract else record.title
    if mode == FUSED:
        if not abstract:
            raise ValueError(f"pmid {record.pmid}: no abstract; use title mode")
        return (abstract, record.title)
    raise ValueError(f"unknown input mode {mode!r}")


def fuse_scores(a: LabelScores, b: LabelScores) -> LabelScores:
    """Element-wise mean of two aligned score vectors."""
    if len(a.scores) != len(b.scores):
        raise ValueError(f"cannot fuse score vectors of length {len(a.scores)} and {len(b.scores)}")
    return LabelScores(tuple((x + y) / 2.0 for x, y in zip(a.scores, b.scores)))


def hierarchical_requests(
    text: str, group: CategoryGroup, template: str = DEFAULT_TEMPLATE
) -> list[tuple[str, ScoreRequest]]:
    """One binary (phrase vs negated phrase) request per label."""
    out = []
    for label in group.labels:
        positive = group.phrasings[label][0]
        negative = group.negative_phrasings.get(label, f"not {positive}")
        request = ScoreRequest(
            text=text, label_phrases=(positive, negative), multi_label=False, template=template
        )
        out.append((label, request))
    return out


def hierarchical_decide(
    binary_scores: Mapping[str, LabelScores],
    labels: Sequence[str],
    thresholds: ThresholdConfig,
) -> tuple[tuple[str, ...], bool]:
    """Per-label binary decisions: keep a label iff its positive-class
    probability strictly exceeds that label's threshold."""
    chosen = []
    for label in labels:
        scores = binary_scores.get(label)
        if scores is None:
            raise ValueError(f"no binary scores for label {label!r}")
        if scores.scores[0] > thresholds.for_label(label):
            chosen.append(label)
    return tuple(chosen), not chosen


_OBJECTIVES = ("f1", "precision", "recall")


def _binary_objective(objective: str, tp: int, fp: int, fn: int) -> float:
    if objective == "precision":
        return tp / (tp + fp) if tp + fp else 0.0
    if objective == "recall":
        return tp / (tp + fn) if tp + fn else 0.0
    return 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 0.0


def sweep_thresholds(
    score_rows: Sequence[Sequence[float]],
    gold_sets: Sequence[Iterable[int]],
    labels: Sequence[str],
    grid: Sequence[float] = DEFAULT_GRID,
    objective: str = "f1",
) -> ThresholdConfig:
    """Per label, the grid value maximizing the tuning objective.

    Ties go to the smallest grid value. A label absent from the tuning
    gold falls back to the grid median with a warning.
    """
    if not grid:
        raise ValueError("grid must be non-empty")
    grid = sorted(grid)
    if any(not 0.0 < g < 1.0 for g in grid):
        raise ValueError("grid values must lie strictly in (0, 1)")
    if objective not in _OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}; pick one of {_OBJECTIVES}")
    rows = np.asarray(score_rows, dtype=float)
    if rows.size == 0:
        raise ValueError("tuning set must be non-empty")
    if rows.ndim != 2 or rows.shape[1] != len(labels):
        raise ValueError(f"score rows must be shaped (records, {len(labels)})")
    if len(gold_sets) != rows.shape[0]:
        raise ValueError("gold sets must align with score rows")
    member = np.zeros(rows.shape, dtype=bool)
    for i, gold in enumerate(gold_sets):
        for j in gold:
            member[i, j] = True
    median = grid[(len(grid) - 1) // 2]
    per_label: dict[str, float] = {}
    for j, label in enumerate(labels):
        gold_column = member[:, j]
        if not gold_column.any():
            log.warning("label %r absent from tuning gold; using the grid median %s", label, median)
            per_label[label] = median
            continue
        best_value, best_score = grid[0], -1.0
        for candidate in grid:
            predicted = rows[:, j] > candidate
            tp = int(np.count_nonzero(predicted & gold_column))
            fp = int(np.count_nonzero(predicted & ~gold_column))
            fn = int(np.count_nonzero(~predicted & gold_column))
            value = _binary_objective(objective, tp, fp, fn)
            if value > best_score:
                best_score, best_value = value, candidate
        per_label[label] = best_value
    return ThresholdConfig(default=median, per_label=per_label)


@dataclass(frozen=True)
class Decision:
    """Final label assignment for one record in one group."""

    pmid: str
    group: str
    mode: str
    input_mode: str
    labels: tuple[str, ...]
    scores: tuple[float, ...]
    flags: tuple[str, ...] = ()


def decision_to_line(decision: Decision) -> str:
    payload = {
        "pmid": decision.pmid,
        "group": decision.group,
        "mode": decision.mode,
        "input_mode": decision.input_mode,
        "labels": list(decision.labels),
        "scores": list(decision.scores),
        "flags": list(decision.flags),
    }
    return json.dumps(payload, ensure_ascii=False)


def save_decisions(decisions: Iterable[Decision], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for decision in decisions:
            fh.write(decision_to_line(decision) + "\n")


def load_decisions(path: str | Path) -> list[Decision]:
    decisions = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            where = f"{path}:{lineno}"
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{where}: not valid JSON: {exc}") from exc
            if not isinstance(payload, dict) or set(payload) != set(DECISION_FIELDS):
                raise DataError(f"{where}: expected exactly the keys {', '.join(DECISION_FIELDS)}")
            try:
                decisions.append(
                    Decision(
                        pmid=payload["pmid"],
                        group=payload["group"],
                        mode=payload["mode"],
                        input_mode=payload["input_mode"],
                        labels=tuple(payload["labels"]),
                        scores=tuple(float(s) for s in payload["scores"]),
                        flags=tuple(payload["flags"]),
                    )
                )
            except (TypeError, ValueError) as exc:
                raise DataError(f"{where}: malformed decision: {exc}") from exc
    return decisions


def decisions_to_csv(
    decisions: Sequence[Decision], group_labels: Sequence[str], path: str | Path
) -> None:
    """CSV export with one score column per label."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["pmid", "group", "mode", "input_mode", "labels", "flags"]
            + [f"score:{label}" for label in group_labels]
        )
        for decision in decisions:
            if len(decision.scores) != len(group_labels):
                raise DataError(
                    f"pmid {decision.pmid}: {len(decision.scores)} scores for "
                    f"{len(group_labels)} labels"
                )
            writer.writerow(
                [
                    decision.pmid,
                    decision.group,
                    decision.mode,
                    decision.input_mode,
                    "|".join(decision.labels),
                    "|".join(decision.flags),
                ]
                + [repr(score) for score in decision.scores]
            )
