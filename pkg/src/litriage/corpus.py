"""Article records, inclusion filtering, and the line-delimited corpus format.

A corpus file holds one JSON object per line (UTF-8) with the keys
pmid, title, abstract, year, link. Loading is strict: a malformed or
incomplete line fails with its line number.
"""

from __future__ import annotations

import datetime
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import DataError

log = logging.getLogger(__name__)

PUBMED_LINK_TEMPLATE = "https://pubmed.ncbi.nlm.nih.gov/{pmid}/"
MIN_YEAR = 1800

CORPUS_FIELDS = ("pmid", "title", "abstract", "year", "link")


def link_for(pmid: str) -> str:
    """Canonical article URL for a pmid."""
    return PUBMED_LINK_TEMPLATE.format(pmid=pmid)


def _max_year() -> int:
    return datetime.date.today().year


@dataclass(frozen=True)
class ArticleRecord:
    """One retrieved article. ``abstract`` may be empty, never absent."""

    pmid: str
    title: str
    abstract: str
    year: int
    link: str = ""

    def __post_init__(self) -> None:
        if not self.pmid:
            raise DataError("article record needs a non-empty pmid")
        if not self.title:
            raise DataError(f"pmid {self.pmid}: title must be non-empty")
        if not MIN_YEAR <= self.year <= _max_year():
            raise DataError(
                f"pmid {self.pmid}: year {self.year} outside [{MIN_YEAR}, {_max_year()}]"
            )
        if not self.link:
            object.__setattr__(self, "link", link_for(self.pmid))
        elif self.link != link_for(self.pmid):
            raise DataError(f"pmid {self.pmid}: link is not derived from the pmid")


@dataclass(frozen=True)
class InclusionCriteria:
    """User-defined filters applied to a fetched corpus before classification."""

    query: str
    max_articles: int
    year_range: tuple[int, int] | None = None
    require_abstract: bool = False

    def __post_init__(self) -> None:
        if self.max_articles < 1:
            raise DataError("max_articles must be >= 1")
        if self.year_range is not None:
            lo, hi = self.year_range
            if lo > hi:
                raise DataError(f"year range [{lo}, {hi}] has min > max")


def apply_inclusion(
    records: Iterable[ArticleRecord], criteria: InclusionCriteria
) -> list[ArticleRecord]:
    """Filter a corpus: dedup by pmid, year range, abstract presence, size cap.

    Keeps the first record for a duplicated pmid, never reorders survivors,
    and is idempotent. Year bounds are inclusive on both ends.
    """
    seen: set[str] = set()
    kept: list[ArticleRecord] = []
    for record in records:
        if record.pmid in seen:
            continue
        seen.add(record.pmid)
        if criteria.year_range is not None:
            lo, hi = criteria.year_range
            if not lo <= record.year <= hi:
                continue
        if criteria.require_abstract and not record.abstract.strip():
            continue
        kept.append(record)
        if len(kept) == criteria.max_articles:
            break
    return kept


def record_to_line(record: ArticleRecord) -> str:
    payload = {field: getattr(record, field) for field in CORPUS_FIELDS}
    return json.dumps(payload, ensure_ascii=False)


def save_corpus(records: Iterable[ArticleRecord], path: str | Path) -> None:
    """Write one record per line; pmids must be unique."""
    records = list(records)
    pmids = [record.pmid for record in records]
    if len(set(pmids)) != len(pmids):
        raise DataError("corpus has duplicate pmids; run apply_inclusion first")
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(record_to_line(record) + "\n")


def _record_from_payload(payload: object, where: str) -> ArticleRecord:
    if not isinstance(payload, dict) or set(payload) != set(CORPUS_FIELDS):
        raise DataError(f"{where}: expected exactly the keys {', '.join(CORPUS_FIELDS)}")
    for field, kind in (("pmid", str), ("title", str), ("abstract", str), ("link", str)):
        if not isinstance(payload[field], kind):
            raise DataError(f"{where}: field {field!r} must be a string")
    if not isinstance(payload["year"], int) or isinstance(payload["year"], bool):
        raise DataError(f"{where}: field 'year' must be an integer")
    try:
        return ArticleRecord(**payload)
    except DataError as exc:
        raise DataError(f"{where}: {exc}") from exc


def load_corpus(path: str | Path) -> list[ArticleRecord]:
    """Read a corpus file; any malformed line is fatal with its line number."""
    records: list[ArticleRecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            where = f"{path}:{lineno}"
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{where}: not valid JSON: {exc}") from exc
            record = _record_from_payload(payload, where)
            if record.pmid in seen:
                raise DataError(f"{where}: duplicate pmid {record.pmid}")
            seen.add(record.pmid)
            records.append(record)
    return records
