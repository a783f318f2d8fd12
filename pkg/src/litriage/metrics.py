"""Evaluation metrics computed from first principles.

Confusion counts, one-vs-rest precision/recall/F1 with support-weighted
aggregation, pooled micro variants for multilabel predictions, and a
pairwise-concordance AUC (ties count one half).
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

log = logging.getLogger(__name__)

AVERAGES = ("weighted", "macro")


@dataclass(frozen=True)
class LabelMetrics:
    label: str
    precision: float
    recall: float
    f1: float
    support: int
    auc: float | None = None


@dataclass(frozen=True)
class EvalReport:
    """Everything reported for one (group, input mode) evaluation.

    Multiclass reports carry accuracy, support-weighted aggregates, and a
    confusion matrix; multilabel reports carry the pooled micro values in
    the precision/recall/f1 slots and no confusion matrix.
    """

    group: str
    mode: str
    input_mode: str
    record_count: int
    accuracy: float | None
    precision: float
    recall: float
    f1: float
    auc: float | None
    per_label: tuple[LabelMetrics, ...]
    confusion: tuple[tuple[int, ...], ...] | None = None


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


def _f1(precision: float, recall: float) -> float:
    return _safe_div(2.0 * precision * recall, precision + recall)


def confusion_matrix(
    gold: Sequence[int], pred: Sequence[int], num_labels: int
) -> np.ndarray:
    """Count matrix with entry (g, p) = records of gold g predicted p."""
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold labels vs {len(pred)} predictions")
    matrix = np.zeros((num_labels, num_labels), dtype=int)
    for i, (g, p) in enumerate(zip(gold, pred)):
        if not (0 <= g < num_labels and 0 <= p < num_labels):
            raise ValueError(f"record {i}: label outside [0, {num_labels})")
        matrix[g, p] += 1
    return matrix


def multiclass_metrics(
    confusion: Sequence[Sequence[int]],
    labels: Sequence[str] | None = None,
    average: str = "weighted",
) -> EvalReport:
    """Accuracy plus one-vs-rest precision/recall/F1 from a confusion matrix.

    Aggregates are support-weighted by default (macro on request); 0/0
    cases are defined as 0, never NaN.
    """
    if average not in AVERAGES:
        raise ValueError(f"unknown average {average!r}; pick one of {AVERAGES}")
    matrix = np.asarray(confusion, dtype=int)
    total = int(matrix.sum())
    if total == 0:
        raise ValueError("confusion matrix is empty")
    num = matrix.shape[0]
    if labels is None:
        labels = [str(i) for i in range(num)]
    accuracy = float(np.trace(matrix)) / total
    per_label = []
    for i in range(num):
        tp = int(matrix[i, i])
        support = int(matrix[i].sum())
        predicted = int(matrix[:, i].sum())
        precision = _safe_div(tp, predicted)
        recall = _safe_div(tp, support)
        if support == 0:
            log.debug("label %r has zero support; its metrics default to 0", labels[i])
        per_label.append(
            LabelMetrics(
                label=labels[i],
                precision=precision,
                recall=recall,
                f1=_f1(precision, recall),
                support=support,
            )
        )
    if average == "weighted":
        weights = [m.support / total for m in per_label]
    else:
        present = [m for m in per_label if m.support > 0]
        weights = [(1.0 / len(present)) if m.support > 0 else 0.0 for m in per_label]
    aggregate = {
        name: float(sum(w * getattr(m, name) for w, m in zip(weights, per_label)))
        for name in ("precision", "recall", "f1")
    }
    return EvalReport(
        group="",
        mode="multiclass",
        input_mode="",
        record_count=total,
        accuracy=accuracy,
        precision=aggregate["precision"],
        recall=aggregate["recall"],
        f1=aggregate["f1"],
        auc=None,
        per_label=tuple(per_label),
        confusion=tuple(tuple(int(v) for v in row) for row in matrix),
    )


def _check_sets(sets: Sequence[Iterable[int]], num_labels: int, kind: str) -> list[frozenset[int]]:
    out = []
    for i, labels in enumerate(sets):
        fs = frozenset(int(l) for l in labels)
        if any(not 0 <= l < num_labels for l in fs):
            raise ValueError(f"record {i}: {kind} label outside [0, {num_labels})")
        out.append(fs)
    return out


def multilabel_micro_metrics(
    pred_sets: Sequence[Iterable[int]],
    gold_sets: Sequence[Iterable[int]],
    num_labels: int,
) -> tuple[float, float, float]:
    """Pooled (precision, recall, F1) over all record-label pairs."""
    if len(pred_sets) != len(gold_sets):
        raise ValueError(f"{len(pred_sets)} predictions vs {len(gold_sets)} gold sets")
    preds = _check_sets(pred_sets, num_labels, "predicted")
    golds = _check_sets(gold_sets, num_labels, "gold")
    tp = fp = fn = 0
    for pred, gold in zip(preds, golds):
        tp += len(pred & gold)
        fp += len(pred - gold)
        fn += len(gold - pred)
    if tp + fp == 0 or tp + fn == 0:
        log.warning("micro metrics hit a 0/0 case; reporting 0")
    precision = _safe_div(tp, tp + fp)
    recall = _safe_div(tp, tp + fn)
    return precision, recall, _f1(precision, recall)


def auc_binary(scores: Sequence[float], gold: Sequence[int]) -> float:
    """Probability that a random positive outscores a random negative.

    Mann-Whitney formulation: ties count one half, so the value is
    invariant under any strictly increasing transform of the scores.
    """
    s = np.asarray(scores, dtype=float)
    g = np.asarray(gold, dtype=int)
    if s.shape != g.shape or s.ndim != 1:
        raise ValueError("scores and gold must be aligned 1-d sequences")
    n_pos = int(np.count_nonzero(g == 1))
    n_neg = int(np.count_nonzero(g == 0))
    if n_pos + n_neg != g.size:
        raise ValueError("gold labels must be 0 or 1")
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined: gold contains a single class")
    _, inverse, counts = np.unique(s, return_inverse=True, return_counts=True)
    cum = np.cumsum(counts)
    average_rank = cum - (counts - 1) / 2.0
    ranks = average_rank[inverse]
    rank_sum = float(ranks[g == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auc_aggregate(
    score_rows: Sequence[Sequence[float]],
    gold: Sequence[int] | Sequence[Iterable[int]],
    mode: str,
) -> tuple[float, list[float | None]]:
    """Aggregate AUC over a score matrix.

    Multiclass: one-vs-rest AUC per label, macro-averaged over labels
    where both classes occur (single-class labels are skipped with a
    warning). Multilabel: micro AUC over the pooled record-label matrix.
    Per-label values are returned alongside, None where undefined.
    """
    rows = np.asarray(score_rows, dtype=float)
    if rows.ndim != 2:
        raise ValueError("score rows must be a 2-d matrix")
    if rows.shape[0] != len(gold):
        raise ValueError(f"{rows.shape[0]} score rows vs {len(gold)} gold entries")
    num_labels = rows.shape[1]
    if mode == "multiclass":
        member = np.zeros(rows.shape, dtype=bool)
        for i, g in enumerate(gold):
            if not 0 <= int(g) < num_labels:
                raise ValueError(f"record {i}: label outside [0, {num_labels})")
            member[i, int(g)] = True
    elif mode == "multilabel":
        golds = _check_sets(gold, num_labels, "gold")
        member = np.zeros(rows.shape, dtype=bool)
        for i, labels in enumerate(golds):
            for l in labels:
                member[i, l] = True
    else:
        raise ValueError(f"unknown mode {mode!r}")

    per_label: list[float | None] = []
    for j in range(num_labels):
        column = member[:, j].astype(int)
        if column.all() or not column.any():
            log.warning("label %d has single-class gold; skipped for AUC", j)
            per_label.append(None)
        else:
            per_label.append(auc_binary(rows[:, j], column))

    if mode == "multiclass":
        valid = [v for v in per_label if v is not None]
        if not valid:
            raise ValueError("AUC undefined: no label has both classes in the gold")
        return float(np.mean(valid)), per_label
    flat_member = member.ravel().astype(int)
    if flat_member.all() or not flat_member.any():
        raise ValueError("AUC undefined: pooled gold contains a single class")
    return auc_binary(rows.ravel(), flat_member), per_label


def evaluate_multiclass(
    gold: Sequence[int],
    pred: Sequence[int],
    labels: Sequence[str],
    score_rows: Sequence[Sequence[float]] | None = None,
    average: str = "weighted",
) -> EvalReport:
    """Full multiclass report: confusion, per-label metrics, aggregate AUC."""
    matrix = confusion_matrix(gold, pred, len(labels))
    report = multiclass_metrics(matrix, labels, average)
    if score_rows is not None:
        auc, per_label_auc = auc_aggregate(score_rows, gold, "multiclass")
        report = replace(
            report,
            auc=auc,
            per_label=tuple(
                replace(m, auc=a) for m, a in zip(report.per_label, per_label_auc)
            ),
        )
    return report


def evaluate_multilabel(
    gold_sets: Sequence[Iterable[int]],
    pred_sets: Sequence[Iterable[int]],
    labels: Sequence[str],
    score_rows: Sequence[Sequence[float]] | None = None,
) -> EvalReport:
    """Full multilabel report: pooled micro metrics plus micro AUC."""
    precision, recall, f1 = multilabel_micro_metrics(pred_sets, gold_sets, len(labels))
    golds = _check_sets(gold_sets, len(labels), "gold")
    preds = _check_sets(pred_sets, len(labels), "predicted")
    per_label = []
    for j, label in enumerate(labels):
        tp = sum(1 for p, g in zip(preds, golds) if j in p and j in g)
        fp = sum(1 for p, g in zip(preds, golds) if j in p and j not in g)
        fn = sum(1 for p, g in zip(preds, golds) if j not in p and j in g)
        p_j = _safe_div(tp, tp + fp)
        r_j = _safe_div(tp, tp + fn)
        per_label.append(
            LabelMetrics(label=label, precision=p_j, recall=r_j, f1=_f1(p_j, r_j), support=tp + fn)
        )
    auc = None
    if score_rows is not None:
        auc, per_label_auc = auc_aggregate(score_rows, golds, "multilabel")
        per_label = [replace(m, auc=a) for m, a in zip(per_label, per_label_auc)]
    return EvalReport(
        group="",
        mode="multilabel",
        input_mode="",
        record_count=len(golds),
        accuracy=None,
        precision=precision,
        recall=recall,
        f1=f1,
        auc=auc,
        per_label=tuple(per_label),
        confusion=None,
    )


def save_report(report: EvalReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(asdict(report), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_report(path: str | Path) -> EvalReport:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        per_label = tuple(LabelMetrics(**m) for m in payload.pop("per_label"))
        confusion = payload.pop("confusion")
        if confusion is not None:
            confusion = tuple(tuple(int(v) for v in row) for row in confusion)
        return EvalReport(per_label=per_label, confusion=confusion, **payload)
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"{path}: not an evaluation report: {exc}") from exc
