"""Scorer gateway: shared request/response shapes, a deterministic
token-overlap mock, and a client for the remote scoring service."""

from __future__ import annotations

import logging
import math
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Protocol

import requests

from .errors import NetworkError, ProtocolError

log = logging.getLogger(__name__)

DEFAULT_TEMPLATE = "This example is about {}."
DEFAULT_CHAR_BUDGET = 4000
MULTICLASS_SUM_TOLERANCE = 1e-6

# Tiny embedded list so the mock needs no lexical resources. "not" stays
# scoreable: negated phrases must differ from their positives.
STOP_WORDS = frozenset(
    "a an and are as at be by for from had has have in is it its of on or "
    "that the their this to was were will with".split()
)

_WORD_RE = re.compile(r"\w+")


def content_tokens(text: str) -> frozenset[str]:
    """Case-folded word tokens with stop-words removed."""
    return frozenset(_WORD_RE.findall(text.casefold())) - STOP_WORDS


@dataclass(frozen=True)
class ScoreRequest:
    """One text to score against an ordered list of label phrases."""

    text: str
    label_phrases: tuple[str, ...]
    multi_label: bool = False
    template: str = DEFAULT_TEMPLATE

    def __post_init__(self) -> None:
        object.__setattr__(self, "label_phrases", tuple(self.label_phrases))
        if not self.text:
            raise ValueError("text must be non-empty")
        if len(self.label_phrases) < 2:
            raise ValueError("need at least 2 label phrases")
        if self.template.count("{}") != 1:
            raise ValueError("template must contain exactly one {} placeholder")


@dataclass(frozen=True)
class LabelScores:
    """Per-label probabilities aligned to the request's label phrases."""

    scores: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))
        for s in self.scores:
            if not 0.0 <= s <= 1.0:
                raise ValueError(f"score {s} outside [0, 1]")

    def __len__(self) -> int:
        return len(self.scores)


class ScorerBackend(Protocol):
    def score(self, request: ScoreRequest) -> LabelScores: ...


class MockScorer:
    """Deterministic test backend with an analytic formula.

    Each phrase gets ``raw = |shared content tokens with the text| + 0.01``.
    Multiclass scores are the raws normalized to sum 1; multilabel scores
    are ``raw / (raw + 1)`` per label, independently.
    """

    model_id = "mock-token-overlap"

    def score(self, request: ScoreRequest) -> LabelScores:
        text_tokens = content_tokens(request.text)
        raw = [len(text_tokens & content_tokens(p)) + 0.01 for p in request.label_phrases]
        if request.multi_label:
            return LabelScores(tuple(r / (r + 1.0) for r in raw))
        # fsum keeps normalization exactly permutation-invariant.
        total = math.fsum(raw)
        return LabelScores(tuple(r / total for r in raw))


class RemoteScorer:
    """Client for the HTTP scoring service (POST <endpoint>/score)."""

    def __init__(
        self,
        endpoint: str,
        timeout: float = 120.0,
        max_retries: int = 3,
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.max_retries = max_retries
        self.session = session or requests.Session()

    def score(self, request: ScoreRequest) -> LabelScores:
        payload = {
            "text": request.text,
            "labels": list(request.label_phrases),
            "template": request.template,
            "multi_label": request.multi_label,
        }
        delay = 1.0
        last: object = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                log.warning("retrying scorer (%d/%d): %s", attempt, self.max_retries, last)
                time.sleep(delay)
                delay *= 2
            try:
                response = self.session.post(
                    f"{self.endpoint}/score", json=payload, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last = exc
                continue
            if response.status_code == 503 or response.status_code == 429 or response.status_code >= 500:
                last = f"HTTP {response.status_code}"
                continue
            if response.status_code != 200:
                raise ProtocolError(
                    f"scorer rejected the request: HTTP {response.status_code}: {response.text[:200]}"
                )
            return self._parse(response, request)
        raise NetworkError(f"scorer unreachable after {self.max_retries} retries: {last}")

    def _parse(self, response: requests.Response, request: ScoreRequest) -> LabelScores:
        try:
            data = response.json()
        except ValueError as exc:
            raise ProtocolError(f"scorer response is not JSON: {response.text[:200]!r}") from exc
        scores = data.get("scores") if isinstance(data, dict) else None
        if not isinstance(scores, list) or len(scores) != len(request.label_phrases):
            got = len(scores) if isinstance(scores, list) else "no"
            raise ProtocolError(
                f"scorer returned {got} scores for {len(request.label_phrases)} labels"
            )
        try:
            return LabelScores(tuple(float(s) for s in scores))
        except (TypeError, ValueError) as exc:
            raise ProtocolError(f"scorer scores malformed: {exc}") from exc


def truncate_text(text: str, budget: int = DEFAULT_CHAR_BUDGET, keep_prefix: int = 0) -> str:
    """Cut at a word boundary within ``budget`` characters.

    The first ``keep_prefix`` characters are never shortened, so a title
    leading an appended input always survives.
    """
    if len(text) <= budget:
        return text
    cut = text.rfind(" ", keep_prefix, budget + 1)
    if cut <= keep_prefix:
        cut = max(budget, keep_prefix)
    return text[:cut].rstrip()


def score(
    backend: ScorerBackend,
    request: ScoreRequest,
    char_budget: int | None = None,
    keep_prefix: int = 0,
) -> LabelScores:
    """Score one request and enforce the response contract."""
    if char_budget is not None and len(request.text) > char_budget:
        request = replace(request, text=truncate_text(request.text, char_budget, keep_prefix))
    result = backend.score(request)
    if len(result.scores) != len(request.label_phrases):
        raise ProtocolError(
            f"backend returned {len(result.scores)} scores for {len(request.label_phrases)} phrases"
        )
    if not request.multi_label:
        total = sum(result.scores)
        if abs(total - 1.0) > MULTICLASS_SUM_TOLERANCE:
            raise ProtocolError(f"multiclass scores sum to {total!r}, expected 1")
    return result


def score_batch(
    backend: ScorerBackend,
    batch: Iterable[ScoreRequest],
    parallelism: int = 1,
    char_budget: int | None = None,
    keep_prefix: int = 0,
) -> list[LabelScores]:
    """Score many requests, preserving input order.

    Each element equals a sequential :func:`score` call. The first failure
    aborts the batch and names the failing index.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    batch = list(batch)

    def one(index: int, request: ScoreRequest) -> LabelScores:
        try:
            return score(backend, request, char_budget, keep_prefix)
        except (NetworkError, ProtocolError, ValueError) as exc:
            raise type(exc)(f"request {index}: {exc}") from exc

    if parallelism == 1:
        return [one(i, request) for i, request in enumerate(batch)]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        futures = [pool.submit(one, i, request) for i, request in enumerate(batch)]
        return [future.result() for future in futures]
