"""Category-wise and time-wise aggregation of decisions, and stage timing."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

from .decisions import FLAG_TIED, Decision
from .taxonomy import MULTILABEL, CategoryGroup

log = logging.getLogger(__name__)

CATEGORY_AXIS = "category"
YEAR_AXIS = "year"

UNASSIGNED = "unassigned"


@dataclass(frozen=True)
class TrendSeries:
    """Counts per bin for one group.

    Category series have a single counts row; year series have one row per
    consecutive year (zero-filled), columns aligned to ``categories``.
    """

    group: str
    axis: str
    categories: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]
    years: tuple[int, ...] = ()
    tied_records: int = 0
    excluded_records: int = 0

    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    def category_totals(self) -> tuple[int, ...]:
        return tuple(sum(row[j] for row in self.counts) for j in range(len(self.categories)))

    def row_sums(self) -> tuple[int, ...]:
        return tuple(sum(row) for row in self.counts)


def _bins_for(group: CategoryGroup) -> tuple[str, ...]:
    if group.mode == MULTILABEL:
        return group.labels + (UNASSIGNED,)
    return group.labels


def category_counts(decisions: Sequence[Decision], group: CategoryGroup) -> TrendSeries:
    """Per-category decision counts.

    Multiclass records count once under their (tie-broken) label, with the
    number of tied records noted. Multilabel records count once per
    assigned label; empty decisions land in an explicit unassigned bin so
    totals stay conserved.
    """
    categories = _bins_for(group)
    index = {category: j for j, category in enumerate(categories)}
    row = [0] * len(categories)
    tied = 0
    for decision in decisions:
        if decision.group != group.name:
            raise ValueError(
                f"decision for group {decision.group!r} passed to {group.name!r}"
            )
        if FLAG_TIED in decision.flags:
            tied += 1
        if not decision.labels:
            row[index[UNASSIGNED]] += 1
        for label in decision.labels:
            row[index[label]] += 1
    return TrendSeries(
        group=group.name,
        axis=CATEGORY_AXIS,
        categories=categories,
        counts=(tuple(row),),
        tied_records=tied,
    )


def time_series(
    decisions: Sequence[Decision],
    years_by_pmid: Mapping[str, int],
    group: CategoryGroup,
    year_range: tuple[int, int],
) -> TrendSeries:
    """Year-by-category count matrix over consecutive years.

    Years without records stay as zero rows; records outside the range are
    excluded and reported through ``excluded_records``.
    """
    lo, hi = year_range
    if lo > hi:
        raise ValueError(f"year range [{lo}, {hi}] has min > max")
    years = tuple(range(lo, hi + 1))
    categories = _bins_for(group)
    index = {category: j for j, category in enumerate(categories)}
    matrix = [[0] * len(categories) for _ in years]
    excluded = 0
    for decision in decisions:
        if decision.group != group.name:
            raise ValueError(
                f"decision for group {decision.group!r} passed to {group.name!r}"
            )
        year = years_by_pmid.get(decision.pmid)
        if year is None:
            raise ValueError(f"decision {decision.pmid} has no source record")
        if not lo <= year <= hi:
            excluded += 1
            continue
        row = matrix[year - lo]
        if not decision.labels:
            row[index[UNASSIGNED]] += 1
        for label in decision.labels:
            row[index[label]] += 1
    return TrendSeries(
        group=group.name,
        axis=YEAR_AXIS,
        categories=categories,
        counts=tuple(tuple(row) for row in matrix),
        years=years,
        excluded_records=excluded,
    )


@dataclass(frozen=True)
class StageTiming:
    """Wall-clock duration of one pipeline stage."""

    stage: str
    seconds: float
    records: int

    def __post_init__(self) -> None:
        if self.seconds < 0:
            raise ValueError("duration must be >= 0")
        if self.records < 0:
            raise ValueError("record count must be >= 0")

    @property
    def minutes(self) -> float:
        return self.seconds / 60.0

    @property
    def records_per_min(self) -> float | None:
        if self.records > 0 and self.seconds > 0:
            return self.records / self.minutes
        return None


def record_timing(stage: str, seconds: float, records: int) -> StageTiming:
    """Capture one stage measurement (durations from a monotonic clock)."""
    return StageTiming(stage=stage, seconds=seconds, records=records)


def timing_table(timings: Sequence[StageTiming]) -> str:
    """Fixed-width text table: stage, records, minutes, records/min."""
    rows = [("stage", "records", "minutes", "records/min")]
    for t in timings:
        rate = f"{t.records_per_min:.2f}" if t.records_per_min is not None else "-"
        rows.append((t.stage, str(t.records), f"{t.minutes:.2f}", rate))
    widths = [max(len(row[j]) for row in rows) for j in range(4)]
    lines = ["  ".join(cell.ljust(widths[j]) for j, cell in enumerate(row)).rstrip() for row in rows]
    return "\n".join(lines)
