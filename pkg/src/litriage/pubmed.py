"""Rate-limited NCBI E-utilities client: esearch for ids, efetch for records.

Setting ``NCBI_API_KEY`` raises the request ceiling from 3/s to 10/s.
A directory of recorded responses can stand in for the live service
(:class:`FixtureTransport`) so runs are reproducible offline.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Protocol, Sequence

import requests

from .corpus import ArticleRecord, link_for
from .errors import DataError, NetworkError, ProtocolError

log = logging.getLogger(__name__)

EUTILS_BASE = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils"
API_KEY_ENV = "NCBI_API_KEY"

# Documented E-utilities ceilings.
RATE_NO_KEY = 3.0
RATE_WITH_KEY = 10.0

DEFAULT_BATCH_SIZE = 200


class TokenBucket:
    """Blocking token bucket; one token per request."""

    def __init__(self, rate: float, capacity: float | None = None):
        self.rate = float(rate)
        self.capacity = capacity if capacity is not None else max(1.0, self.rate)
        self._tokens = self.capacity
        self._stamp = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(self.capacity, self._tokens + (now - self._stamp) * self.rate)
                self._stamp = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            time.sleep(wait)


class Transport(Protocol):
    def get(self, endpoint: str, params: dict) -> str: ...


class HttpTransport:
    """Live E-utilities access with rate limiting and bounded retries."""

    def __init__(
        self,
        base_url: str = EUTILS_BASE,
        api_key: str | None = None,
        rate: float | None = None,
        max_retries: int = 3,
        timeout: float = 30.0,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV) or None
        if rate is None:
            rate = RATE_WITH_KEY if self.api_key else RATE_NO_KEY
        self.bucket = TokenBucket(rate)
        self.max_retries = max_retries
        self.timeout = timeout
        self.session = session or requests.Session()

    def get(self, endpoint: str, params: dict) -> str:
        if self.api_key:
            params = {**params, "api_key": self.api_key}
        url = f"{self.base_url}/{endpoint}"
        delay = 1.0
        last: object = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                log.warning("retrying %s (%d/%d): %s", endpoint, attempt, self.max_retries, last)
                time.sleep(delay)
                delay *= 2
            self.bucket.acquire()
            try:
                response = self.session.get(url, params=params, timeout=self.timeout)
            except requests.RequestException as exc:
                last = exc
                continue
            if response.status_code == 429 or response.status_code >= 500:
                last = f"HTTP {response.status_code}"
                continue
            if response.status_code != 200:
                raise ProtocolError(
                    f"{endpoint}: HTTP {response.status_code}: {response.text[:200]}"
                )
            return response.text
        raise NetworkError(f"{endpoint}: giving up after {self.max_retries} retries: {last}")


class FixtureTransport:
    """Replays recorded responses from a directory.

    ``esearch.json`` answers id searches and ``efetch.xml`` answers record
    fetches. The efetch document may be a superset of any one request; the
    caller keeps only the ids it asked for.
    """

    FILENAMES = {"esearch.fcgi": "esearch.json", "efetch.fcgi": "efetch.xml"}

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def get(self, endpoint: str, params: dict) -> str:
        name = self.FILENAMES.get(endpoint)
        if name is None:
            raise DataError(f"no fixture mapping for endpoint {endpoint!r}")
        path = self.directory / name
        if not path.exists():
            raise DataError(f"fixture not found: {path}")
        return path.read_text(encoding="utf-8")


def search_articles(
    query: str,
    max_results: int,
    year_range: tuple[int, int] | None = None,
    transport: Transport | None = None,
) -> list[str]:
    """Search PubMed and return up to ``max_results`` unique pmids.

    Order follows the service's relevance ranking. The optional year range
    is passed as a publication-date filter.
    """
    if not query or not query.strip():
        raise ValueError("query must be non-empty")
    if max_results < 1:
        raise ValueError("max_results must be >= 1")
    transport = transport or HttpTransport()
    params = {"db": "pubmed", "term": query, "retmax": str(max_results), "retmode": "json"}
    if year_range is not None:
        lo, hi = year_range
        params.update({"datetype": "pdat", "mindate": str(lo), "maxdate": str(hi)})
    body = transport.get("esearch.fcgi", params)
    try:
        idlist = json.loads(body)["esearchresult"]["idlist"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ProtocolError(
            f"esearch response not understood ({exc}); starts with: {body[:200]!r}"
        ) from exc
    if not isinstance(idlist, list) or not all(isinstance(i, str) for i in idlist):
        raise ProtocolError(f"esearch idlist malformed; starts with: {body[:200]!r}")
    seen: set[str] = set()
    pmids: list[str] = []
    for pmid in idlist:
        if pmid in seen:
            continue
        seen.add(pmid)
        pmids.append(pmid)
        if len(pmids) == max_results:
            break
    return pmids


def fetch_records(
    pmids: Sequence[str],
    transport: Transport | None = None,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> list[ArticleRecord]:
    """Fetch one record per pmid found, in the order requested.

    Unknown or unparseable pmids are logged and skipped, never fatal; a
    document the XML parser rejects is fatal with its location.
    """
    pmids = list(pmids)
    if not pmids:
        raise ValueError("pmids must be non-empty")
    transport = transport or HttpTransport()
    requested = set(pmids)
    by_pmid: dict[str, ArticleRecord] = {}
    for start in range(0, len(pmids), batch_size):
        batch = pmids[start : start + batch_size]
        body = transport.get("efetch.fcgi", {"db": "pubmed", "id": ",".join(batch), "retmode": "xml"})
        for record in parse_efetch(body):
            if record.pmid in requested:
                by_pmid.setdefault(record.pmid, record)
    records = []
    for pmid in pmids:
        record = by_pmid.get(pmid)
        if record is None:
            log.warning("pmid %s: not in the efetch response, skipped", pmid)
        else:
            records.append(record)
    return records


def parse_efetch(xml_text: str) -> list[ArticleRecord]:
    """Parse an efetch XML document into records, in document order."""
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        line, column = exc.position
        raise ProtocolError(f"efetch XML unparseable at line {line}, column {column}: {exc}") from exc
    records = []
    for article in root.iter("PubmedArticle"):
        record = _parse_article(article)
        if record is not None:
            records.append(record)
    return records


def _text(element: ET.Element | None) -> str:
    if element is None:
        return ""
    return "".join(element.itertext()).strip()


_YEAR_RE = re.compile(r"\b(1[89]\d\d|20\d\d)\b")


def _article_year(article: ET.Element) -> int | None:
    """Publication year, by precedence: journal issue date, then the
    electronic article date, then the PubMed history entry date."""
    issue_date = article.find("MedlineCitation/Article/Journal/JournalIssue/PubDate")
    if issue_date is not None:
        year = issue_date.findtext("Year")
        if year and year.isdigit():
            return int(year)
        match = _YEAR_RE.search(issue_date.findtext("MedlineDate") or "")
        if match:
            return int(match.group())
    for date in article.findall("MedlineCitation/Article/ArticleDate"):
        if date.get("DateType", "Electronic") == "Electronic":
            year = date.findtext("Year")
            if year and year.isdigit():
                return int(year)
    for status in ("entrez", "pubmed"):
        for date in article.findall("PubmedData/History/PubMedPubDate"):
            if date.get("PubStatus") == status:
                year = date.findtext("Year")
                if year and year.isdigit():
                    return int(year)
    return None


def _parse_article(article: ET.Element) -> ArticleRecord | None:
    pmid = _text(article.find("MedlineCitation/PMID"))
    if not pmid:
        log.warning("article without a PMID skipped")
        return None
    title = _text(article.find("MedlineCitation/Article/ArticleTitle"))
    if not title:
        log.warning("pmid %s: no title, skipped", pmid)
        return None
    sections = [
        _text(section)
        for section in article.findall("MedlineCitation/Article/Abstract/AbstractText")
    ]
    abstract = " ".join(section for section in sections if section)
    year = _article_year(article)
    if year is None:
        log.warning("pmid %s: no usable publication year, skipped", pmid)
        return None
    try:
        return ArticleRecord(pmid=pmid, title=title, abstract=abstract, year=year, link=link_for(pmid))
    except DataError as exc:
        log.warning("%s; record skipped", exc)
        return None
