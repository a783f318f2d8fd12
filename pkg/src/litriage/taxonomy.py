"""Category groups, taxonomy config loading, and gold-label aggregation.

Several annotators label each article; a plurality settles multiclass
groups and a strict majority (more than half) settles each label of a
multilabel group. Ties are surfaced, never broken silently.
"""

from __future__ import annotations

import json
import logging
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import yaml

from .errors import DataError

log = logging.getLogger(__name__)

MULTICLASS = "multiclass"
MULTILABEL = "multilabel"
MODES = (MULTICLASS, MULTILABEL)

RESOLVED = "resolved"
TIE = "tie"


@dataclass(frozen=True)
class CategoryGroup:
    """A named label set with a classification mode.

    ``labels`` are the canonical names reported in output; ``phrasings``
    hold the descriptive phrases actually sent to the scorer (one or more
    per label). The two are deliberately separate fields.
    """

    name: str
    mode: str
    labels: tuple[str, ...]
    phrasings: Mapping[str, tuple[str, ...]]
    negative_phrasings: Mapping[str, str] = field(default_factory=dict)
    template: str | None = None  # per-group hypothesis template override

    def __post_init__(self) -> None:
        if not self.name:
            raise DataError("category group needs a name")
        if self.mode not in MODES:
            raise DataError(f"group {self.name!r}: unknown mode {self.mode!r}")
        if self.template is not None and self.template.count("{}") != 1:
            raise DataError(
                f"group {self.name!r}: template must contain exactly one {{}} placeholder"
            )
        if len(self.labels) < 2:
            raise DataError(f"group {self.name!r}: needs at least 2 labels")
        if len(set(self.labels)) != len(self.labels):
            raise DataError(f"group {self.name!r}: duplicate labels")
        for label in self.labels:
            if not self.phrasings.get(label):
                raise DataError(f"group {self.name!r}: label {label!r} has no phrasings")
        unknown = set(self.phrasings) - set(self.labels)
        if unknown:
            raise DataError(f"group {self.name!r}: phrasings for unknown labels {sorted(unknown)}")

    def primary_phrases(self) -> tuple[str, ...]:
        """First phrasing per label, aligned to ``labels``."""
        return tuple(self.phrasings[label][0] for label in self.labels)

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise DataError(f"group {self.name!r}: unknown label {label!r}") from None


def _as_phrase_tuple(value: object, group: str, label: str) -> tuple[str, ...]:
    if isinstance(value, str):
        value = [value]
    if not isinstance(value, list) or not all(isinstance(p, str) and p for p in value):
        raise DataError(f"group {group!r}: phrasings for {label!r} must be non-empty strings")
    return tuple(value)


def load_taxonomy(path: str | Path) -> list[CategoryGroup]:
    """Load category groups from a YAML document.

    Expected shape::

        groups:
          - name: Article Type
            mode: multiclass
            labels:
              Clinical: ["Clinical finding based on humans"]
              Experimental: "Experimental study based on animals"

    Label order follows the document. ``negative_phrasings`` is an optional
    label-to-phrase map used by the per-label binary decomposition.
    """
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise DataError(f"{path}: not valid YAML: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("groups"), list):
        raise DataError(f"{path}: expected a mapping with a 'groups' list")
    groups: list[CategoryGroup] = []
    for raw in doc["groups"]:
        if not isinstance(raw, dict):
            raise DataError(f"{path}: each group must be a mapping")
        name = raw.get("name")
        if not isinstance(name, str) or not name:
            raise DataError(f"{path}: group without a name")
        labels_raw = raw.get("labels")
        if not isinstance(labels_raw, dict):
            raise DataError(f"group {name!r}: 'labels' must map label names to phrasings")
        phrasings = {
            label: _as_phrase_tuple(phrases, name, label) for label, phrases in labels_raw.items()
        }
        negatives = raw.get("negative_phrasings") or {}
        if not isinstance(negatives, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in negatives.items()
        ):
            raise DataError(f"group {name!r}: 'negative_phrasings' must map labels to strings")
        template = raw.get("template")
        if template is not None and not isinstance(template, str):
            raise DataError(f"group {name!r}: 'template' must be a string")
        groups.append(
            CategoryGroup(
                name=name,
                mode=raw.get("mode", MULTICLASS),
                labels=tuple(labels_raw),
                phrasings=phrasings,
                negative_phrasings=dict(negatives),
                template=template,
            )
        )
    names = [group.name for group in groups]
    if len(set(names)) != len(names):
        raise DataError(f"{path}: duplicate group names")
    return groups


@dataclass(frozen=True)
class AnnotationSet:
    """All annotator votes for one (article, group) pair."""

    pmid: str
    group: str
    assignments: tuple[tuple[str, tuple[str, ...]], ...]  # (annotator, labels)

    def __post_init__(self) -> None:
        if not self.assignments:
            raise DataError(f"pmid {self.pmid}: needs at least one annotator")
        annotators = [annotator for annotator, _ in self.assignments]
        if len(set(annotators)) != len(annotators):
            raise DataError(f"pmid {self.pmid}: duplicate annotator ids")


@dataclass(frozen=True)
class GoldLabel:
    """Aggregated gold assignment for one (article, group) pair."""

    pmid: str
    group: str
    labels: tuple[str, ...]
    status: str = RESOLVED
    tied_labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.status not in (RESOLVED, TIE):
            raise DataError(f"pmid {self.pmid}: unknown status {self.status!r}")


def majority_vote(annotations: AnnotationSet, group: CategoryGroup) -> GoldLabel:
    """Aggregate one article's votes into a gold label.

    Multiclass: the label with a strict plurality wins; an exact tie is
    surfaced as status ``tie`` with no label invented. Multilabel: a label
    is gold iff more than half the annotators assigned it; a count of
    exactly half excludes the label and flags it tied.
    """
    votes = []
    for annotator, labels in annotations.assignments:
        unknown = set(labels) - set(group.labels)
        if unknown:
            raise DataError(
                f"pmid {annotations.pmid}: annotator {annotator!r} used unknown labels {sorted(unknown)}"
            )
        if group.mode == MULTICLASS and len(labels) != 1:
            raise DataError(
                f"pmid {annotations.pmid}: annotator {annotator!r} must assign exactly one label"
            )
        votes.append(tuple(labels))

    if group.mode == MULTICLASS:
        counts = Counter(labels[0] for labels in votes)
        top = max(counts.values())
        winners = [label for label in group.labels if counts.get(label) == top]
        if len(winners) == 1:
            return GoldLabel(annotations.pmid, group.name, (winners[0],))
        return GoldLabel(annotations.pmid, group.name, (), TIE, tuple(winners))

    n = len(votes)
    chosen, tied = [], []
    for label in group.labels:
        count = sum(label in labels for labels in votes)
        if count * 2 > n:
            chosen.append(label)
        elif count * 2 == n:
            tied.append(label)
    status = TIE if tied else RESOLVED
    return GoldLabel(annotations.pmid, group.name, tuple(chosen), status, tuple(tied))


def load_annotations(path: str | Path, groups: Sequence[CategoryGroup]) -> list[AnnotationSet]:
    """Read line-delimited annotation records.

    Each line is a JSON object with pmid, group, annotator, labels. Lines
    are aggregated into one :class:`AnnotationSet` per (pmid, group).
    """
    by_name = {group.name: group for group in groups}
    collected: dict[tuple[str, str], list[tuple[str, tuple[str, ...]]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            where = f"{path}:{lineno}"
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{where}: not valid JSON: {exc}") from exc
            try:
                pmid = payload["pmid"]
                group_name = payload["group"]
                annotator = payload["annotator"]
                labels = payload["labels"]
            except (KeyError, TypeError) as exc:
                raise DataError(f"{where}: needs pmid, group, annotator, labels") from exc
            if group_name not in by_name:
                raise DataError(f"{where}: unknown group {group_name!r}")
            if not isinstance(labels, list) or not all(isinstance(l, str) for l in labels):
                raise DataError(f"{where}: labels must be a list of strings")
            collected.setdefault((pmid, group_name), []).append((annotator, tuple(labels)))
    out = []
    for (pmid, group_name), assignments in collected.items():
        annotation = AnnotationSet(pmid=pmid, group=group_name, assignments=tuple(assignments))
        out.append(annotation)
    return out


def resolve_gold(
    annotations: Iterable[AnnotationSet], group: CategoryGroup
) -> dict[str, GoldLabel]:
    """Majority-vote every annotation set of one group, keyed by pmid."""
    return {
        annotation.pmid: majority_vote(annotation, group)
        for annotation in annotations
        if annotation.group == group.name
    }


def split_labeled_corpus(
    gold: Sequence[GoldLabel],
    fraction: float,
    seed: int,
    mode: str = MULTICLASS,
) -> tuple[list[GoldLabel], list[GoldLabel]]:
    """Deterministic stratified split into (tuning set, evaluation set).

    ``fraction`` is the tuning share. Every label with at least two
    instances lands on both sides; a singleton label goes wholly to the
    tuning set with a warning. Tie-status records are dropped with a
    warning; they carry no usable gold.
    """
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie strictly between 0 and 1")
    records = [g for g in gold if g.status == RESOLVED]
    dropped = len(gold) - len(records)
    if dropped:
        log.warning("%d tie-status gold records dropped from the split", dropped)
    if not records:
        return [], []
    rng = random.Random(seed)
    target = round(fraction * len(records))
    side_of: dict[str, str] = {}

    if mode == MULTICLASS:
        by_label: dict[str, list[GoldLabel]] = {}
        for record in records:
            by_label.setdefault(record.labels[0], []).append(record)
        labels = sorted(by_label)
        quotas = {label: fraction * len(by_label[label]) for label in labels}
        alloc = {label: int(quotas[label]) for label in labels}
        spare = target - sum(alloc.values())
        for label in sorted(labels, key=lambda l: (alloc[l] - quotas[l], l))[: max(0, spare)]:
            alloc[label] += 1
        for label in labels:
            members = by_label[label][:]
            rng.shuffle(members)
            k = alloc[label]
            if len(members) == 1:
                log.warning("label %r has a single gold instance; kept in the tuning set", label)
                k = 1
            else:
                k = min(max(k, 1), len(members) - 1)
            for member in members[:k]:
                side_of[member.pmid] = "tuning"
            for member in members[k:]:
                side_of[member.pmid] = "evaluation"
    else:
        index: dict[str, list[GoldLabel]] = {}
        for record in records:
            for label in record.labels:
                index.setdefault(label, []).append(record)
        # Rarest labels first: guarantee presence on both sides while
        # assignments are still free.
        for label in sorted(index, key=lambda l: (len(index[l]), l)):
            members = index[label]
            if len(members) == 1:
                log.warning("label %r has a single gold instance; kept in the tuning set", label)
                side_of.setdefault(members[0].pmid, "tuning")
                continue
            pool = [m for m in members if m.pmid not in side_of]
            rng.shuffle(pool)
            for side in ("tuning", "evaluation"):
                if side not in {side_of.get(m.pmid) for m in members}:
                    if pool:
                        side_of[pool.pop().pmid] = side
                    else:
                        log.warning("label %r could not be placed on the %s side", label, side)
        need = target - sum(1 for side in side_of.values() if side == "tuning")
        unassigned = [record for record in records if record.pmid not in side_of]
        rng.shuffle(unassigned)
        for record in unassigned:
            if need > 0:
                side_of[record.pmid] = "tuning"
                need -= 1
            else:
                side_of[record.pmid] = "evaluation"

    tuning = [record for record in records if side_of[record.pmid] == "tuning"]
    evaluation = [record for record in records if side_of[record.pmid] == "evaluation"]
    return tuning, evaluation
