import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from litriage.errors import NetworkError, ProtocolError
from litriage.scoring import (
    LabelScores,
    MockScorer,
    RemoteScorer,
    ScoreRequest,
    score,
    score_batch,
    truncate_text,
)

MOCK = MockScorer()

words = st.text(alphabet="abcdefghij", min_size=1, max_size=6)
phrase = st.lists(words, min_size=1, max_size=4).map(" ".join)
texts = st.lists(words, min_size=1, max_size=8).map(" ".join)


def request(text, phrases, multi_label=False):
    return ScoreRequest(text=text, label_phrases=tuple(phrases), multi_label=multi_label)


class TestRequestValidation:
    def test_empty_text_rejected(self):
        with pytest.raises(ValueError):
            request("", ["a", "b"])

    def test_needs_two_phrases(self):
        with pytest.raises(ValueError):
            request("t", ["only"])

    @pytest.mark.parametrize("template", ["no placeholder", "{} and {}"])
    def test_template_needs_one_placeholder(self, template):
        with pytest.raises(ValueError):
            ScoreRequest(text="t", label_phrases=("a", "b"), template=template)

    def test_scores_must_be_probabilities(self):
        with pytest.raises(ValueError):
            LabelScores((0.5, 1.2))


class TestMockFormula:
    def test_hand_computed_overlap_counts(self):
        # Overlaps per the stated formula: ("machine learning model" vs
        # first phrase) shares 3 tokens, vs second shares {learning, model}
        # = 2. raw = (3.01, 2.01), normalized by 5.02.
        result = MOCK.score(request("machine learning model",
                                    ["Machine learning Model", "Deep learning Model"]))
        assert result.scores[0] == pytest.approx(3.01 / 5.02, abs=1e-12)
        assert result.scores[1] == pytest.approx(2.01 / 5.02, abs=1e-12)

    def test_highest_on_most_overlapping_phrase(self):
        result = MOCK.score(request(
            "deep neural network segmentation",
            ["Deep learning Model", "Digital Image processing technique", "Machine learning Model"],
        ))
        assert max(range(3), key=lambda i: result.scores[i]) == 0

    def test_no_overlap_gives_uniform(self):
        result = MOCK.score(request("zzz qqq", ["aa bb", "cc dd", "ee ff"]))
        assert len(set(result.scores)) == 1
        assert result.scores[0] == pytest.approx(1 / 3)

    def test_multilabel_single_overlap(self):
        # raw = 1.01 -> 1.01 / 2.01
        result = MOCK.score(request("screening data", ["screening", "unrelated phrase"],
                                    multi_label=True))
        assert result.scores[0] == pytest.approx(1.01 / 2.01, abs=1e-12)
        assert result.scores[1] == pytest.approx(0.01 / 1.01, abs=1e-12)

    def test_stop_words_do_not_count(self):
        # "of" and "the" are stop-words on both sides.
        with_stops = MOCK.score(request("the screening of patients", ["screening of the eye", "other"]))
        without = MOCK.score(request("screening patients", ["screening eye", "other"]))
        assert with_stops.scores == without.scores

    def test_determinism(self):
        r = request("machine learning", ["a b", "machine c"])
        assert MOCK.score(r).scores == MOCK.score(r).scores

    def test_identical_overlap_identical_scores(self):
        result = MOCK.score(request("shared token here", ["shared one", "shared two"]))
        assert result.scores[0] == result.scores[1]

    @settings(max_examples=100)
    @given(text=texts, phrases=st.lists(phrase, min_size=2, max_size=5))
    def test_multiclass_normalization(self, text, phrases):
        result = MOCK.score(request(text, phrases))
        assert sum(result.scores) == pytest.approx(1.0, abs=1e-6)

    @settings(max_examples=100)
    @given(text=texts, phrases=st.lists(phrase, min_size=2, max_size=5), seed=st.integers(0, 999))
    def test_permutation_equivariance(self, text, phrases, seed):
        import random

        order = list(range(len(phrases)))
        random.Random(seed).shuffle(order)
        base = MOCK.score(request(text, phrases)).scores
        permuted = MOCK.score(request(text, [phrases[i] for i in order])).scores
        assert permuted == tuple(base[i] for i in order)


class TestGateway:
    def test_wrong_length_backend_is_protocol_error(self):
        class Bad:
            def score(self, request):
                return LabelScores((1.0,))

        with pytest.raises(ProtocolError, match="1 scores for 2"):
            score(Bad(), request("t", ["a", "b"]))

    def test_unnormalized_multiclass_is_protocol_error(self):
        class Bad:
            def score(self, request):
                return LabelScores((0.9, 0.9))

        with pytest.raises(ProtocolError, match="sum"):
            score(Bad(), request("t", ["a", "b"]))

    def test_char_budget_truncates_before_backend(self):
        seen = {}

        class Spy:
            def score(self, request):
                seen["text"] = request.text
                return MOCK.score(request)

        long_text = "word " * 2000
        score(Spy(), request(long_text, ["a", "b"]), char_budget=100)
        assert len(seen["text"]) <= 100


class TestTruncate:
    def test_short_text_untouched(self):
        assert truncate_text("short", 100) == "short"

    def test_cuts_at_word_boundary(self):
        text = "alpha beta gamma delta"
        out = truncate_text(text, 12)
        assert out == "alpha beta"

    def test_keep_prefix_preserved(self):
        title = "a" * 50
        text = title + " " + "b" * 100
        out = truncate_text(text, 30, keep_prefix=len(title))
        assert out.startswith(title)

    def test_unbreakable_text_hard_cut(self):
        assert truncate_text("x" * 500, 100) == "x" * 100


class TestBatch:
    def test_matches_sequential_calls(self):
        reqs = [request(f"text {i} deep learning", ["deep learning", "other phrase"])
                for i in range(10)]
        sequential = [score(MOCK, r) for r in reqs]
        for parallelism in (1, 2, 4):
            assert score_batch(MOCK, reqs, parallelism) == sequential

    def test_parallelism_must_be_positive(self):
        with pytest.raises(ValueError):
            score_batch(MOCK, [], 0)

    def test_failure_names_index(self):
        class Flaky:
            def score(self, request):
                if "boom" in request.text:
                    return LabelScores((2.0, 0.0))  # triggers LabelScores range error
                return MOCK.score(request)

        reqs = [request("fine", ["a", "b"]), request("fine", ["a", "b"]),
                request("boom", ["a", "b"])]
        with pytest.raises(ValueError, match="request 2"):
            score_batch(Flaky(), reqs, parallelism=2)

    @settings(max_examples=25, deadline=None)
    @given(
        n=st.integers(min_value=0, max_value=8),
        parallelism=st.integers(min_value=1, max_value=4),
    )
    def test_order_preserved_any_parallelism(self, n, parallelism):
        reqs = [request(f"item {i}", [f"item {i}", "other"]) for i in range(n)]
        results = score_batch(MOCK, reqs, parallelism)
        assert results == [score(MOCK, r) for r in reqs]


class FakeHttpResponse:
    def __init__(self, status_code=200, payload=None, text=""):
        self.status_code = status_code
        self._payload = payload
        self.text = text or json.dumps(payload)

    def json(self):
        if self._payload is None:
            raise ValueError("no json")
        return self._payload


class TestRemoteScorer:
    def make(self, session, retries=1):
        scorer = RemoteScorer("http://scorer.local", max_retries=retries, session=session)
        return scorer

    @pytest.fixture(autouse=True)
    def no_sleep(self, monkeypatch):
        monkeypatch.setattr("litriage.scoring.time.sleep", lambda s: None)

    def test_parses_scores(self):
        class Session:
            def post(self, url, json=None, timeout=None):
                assert url.endswith("/score")
                assert set(json) == {"text", "labels", "template", "multi_label"}
                return FakeHttpResponse(payload={"scores": [0.7, 0.3], "model_id": "m", "latency_ms": 1})

        result = self.make(Session()).score(request("t", ["a", "b"]))
        assert result.scores == (0.7, 0.3)

    def test_wrong_length_is_protocol_error(self):
        class Session:
            def post(self, url, json=None, timeout=None):
                return FakeHttpResponse(payload={"scores": [1.0]})

        with pytest.raises(ProtocolError, match="1 scores for 2"):
            self.make(Session()).score(request("t", ["a", "b"]))

    def test_retries_then_succeeds_on_503(self):
        calls = {"n": 0}

        class Session:
            def post(self, url, json=None, timeout=None):
                calls["n"] += 1
                if calls["n"] == 1:
                    return FakeHttpResponse(status_code=503, payload={})
                return FakeHttpResponse(payload={"scores": [0.5, 0.5]})

        assert self.make(Session()).score(request("t", ["a", "b"])).scores == (0.5, 0.5)

    def test_unreachable_becomes_network_error(self):
        import requests

        class Session:
            def post(self, url, json=None, timeout=None):
                raise requests.ConnectionError("refused")

        with pytest.raises(NetworkError):
            self.make(Session()).score(request("t", ["a", "b"]))

    def test_client_error_is_protocol_error(self):
        class Session:
            def post(self, url, json=None, timeout=None):
                return FakeHttpResponse(status_code=400, payload={}, text="bad request")

        with pytest.raises(ProtocolError, match="400"):
            self.make(Session()).score(request("t", ["a", "b"]))
