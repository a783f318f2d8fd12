import json
import logging

import pytest

from litriage.errors import DataError, NetworkError, ProtocolError
from litriage.pubmed import (
    FixtureTransport,
    HttpTransport,
    TokenBucket,
    fetch_records,
    parse_efetch,
    search_articles,
)


class RecordingTransport:
    """Serves canned bodies and records every call."""

    def __init__(self, body=""):
        self.body = body
        self.calls = []

    def get(self, endpoint, params):
        self.calls.append((endpoint, dict(params)))
        return self.body


class TestSearch:
    def test_recorded_fixture_three_ids_in_order(self, fixtures):
        transport = RecordingTransport((fixtures / "esearch_3ids.json").read_text())
        pmids = search_articles("glaucoma deep learning", 5, transport=transport)
        assert pmids == ["31452104", "28915566", "25651787"]

    def test_deduplicates_and_caps(self):
        body = json.dumps({"esearchresult": {"idlist": ["1", "2", "1", "3", "4"]}})
        transport = RecordingTransport(body)
        assert search_articles("q", 3, transport=transport) == ["1", "2", "3"]

    def test_zero_max_results_rejected_before_any_request(self):
        transport = RecordingTransport()
        with pytest.raises(ValueError):
            search_articles("q", 0, transport=transport)
        assert transport.calls == []

    def test_empty_query_rejected(self):
        transport = RecordingTransport()
        with pytest.raises(ValueError):
            search_articles("  ", 5, transport=transport)
        assert transport.calls == []

    def test_year_range_becomes_date_params(self):
        transport = RecordingTransport(json.dumps({"esearchresult": {"idlist": []}}))
        search_articles("q", 5, year_range=(2015, 2022), transport=transport)
        _, params = transport.calls[0]
        assert params["datetype"] == "pdat"
        assert (params["mindate"], params["maxdate"]) == ("2015", "2022")

    def test_malformed_response_carries_excerpt(self):
        transport = RecordingTransport("<html>service down</html>")
        with pytest.raises(ProtocolError, match="service down"):
            search_articles("q", 5, transport=transport)


class TestFetch:
    def test_single_article_fixture(self, fixtures):
        transport = RecordingTransport((fixtures / "efetch_single.xml").read_text())
        (record,) = fetch_records(["101"], transport=transport)
        assert record.title == "T"
        assert record.abstract == "A"
        assert record.year == 2020
        assert record.link == "https://pubmed.ncbi.nlm.nih.gov/101/"

    def test_missing_abstract_is_empty_string(self, fixtures):
        transport = RecordingTransport((fixtures / "efetch_noabstract.xml").read_text())
        (record,) = fetch_records(["102"], transport=transport)
        assert record.abstract == ""

    def test_multisection_abstract_concatenated_in_order(self, fixtures):
        # Expected value built by hand from the fixture sections.
        transport = RecordingTransport((fixtures / "efetch_multisection.xml").read_text())
        (record,) = fetch_records(["103"], transport=transport)
        assert record.abstract == "First section. Second section with markup inside. Third section."
        assert record.title == "Structured abstract with inline markup"
        assert record.year == 2019

    def test_year_precedence(self, fixtures):
        records = parse_efetch((fixtures / "efetch_years.xml").read_text())
        years = {record.pmid: record.year for record in records}
        assert years == {"201": 2021, "202": 1998, "203": 2017, "204": 2016}
        assert "205" not in years  # no usable date: skipped

    def test_unknown_pmid_omitted_and_logged(self, fixtures, caplog):
        transport = RecordingTransport((fixtures / "efetch_single.xml").read_text())
        with caplog.at_level(logging.WARNING, logger="litriage.pubmed"):
            records = fetch_records(["101", "999"], transport=transport)
        assert [record.pmid for record in records] == ["101"]
        assert any("999" in message for message in caplog.messages)

    def test_output_order_follows_request(self, fixtures):
        transport = RecordingTransport((fixtures / "pubmed_demo" / "efetch.xml").read_text())
        records = fetch_records(["503", "501"], transport=transport)
        assert [record.pmid for record in records] == ["503", "501"]

    def test_output_pmids_subset_of_input(self, fixtures):
        transport = RecordingTransport((fixtures / "pubmed_demo" / "efetch.xml").read_text())
        records = fetch_records(["501", "777"], transport=transport)
        assert {record.pmid for record in records} <= {"501", "777"}

    def test_empty_pmids_rejected(self):
        with pytest.raises(ValueError):
            fetch_records([], transport=RecordingTransport())

    def test_malformed_xml_reports_location(self):
        transport = RecordingTransport("<PubmedArticleSet><broken")
        with pytest.raises(ProtocolError, match="line 1"):
            fetch_records(["1"], transport=transport)


class FakeResponse:
    def __init__(self, status_code=200, text="ok"):
        self.status_code = status_code
        self.text = text


class FlakySession:
    """Fails a set number of times, then succeeds."""

    def __init__(self, failures, exc=None, status=500, body="ok"):
        self.failures = failures
        self.exc = exc
        self.status = status
        self.body = body
        self.calls = 0

    def get(self, url, params=None, timeout=None):
        self.calls += 1
        if self.calls <= self.failures:
            if self.exc is not None:
                raise self.exc
            return FakeResponse(status_code=self.status)
        return FakeResponse(text=self.body)


class TestHttpTransport:
    @pytest.fixture(autouse=True)
    def no_sleep(self, monkeypatch):
        monkeypatch.setattr("litriage.pubmed.time.sleep", lambda s: None)

    def transport(self, session):
        return HttpTransport(rate=10000.0, session=session)

    def test_retries_connection_errors_then_succeeds(self):
        import requests

        session = FlakySession(2, exc=requests.ConnectionError("refused"))
        assert self.transport(session).get("esearch.fcgi", {}) == "ok"
        assert session.calls == 3

    def test_retries_server_errors(self):
        session = FlakySession(1, status=503)
        assert self.transport(session).get("esearch.fcgi", {}) == "ok"

    def test_gives_up_after_bounded_retries(self):
        import requests

        session = FlakySession(99, exc=requests.ConnectionError("refused"))
        with pytest.raises(NetworkError, match="3 retries"):
            self.transport(session).get("esearch.fcgi", {})
        assert session.calls == 4  # initial call + 3 retries

    def test_client_error_is_fatal_protocol_error(self):
        class Session:
            def get(self, url, params=None, timeout=None):
                return FakeResponse(status_code=404, text="not found")

        with pytest.raises(ProtocolError, match="404"):
            self.transport(Session()).get("efetch.fcgi", {})

    def test_api_key_added_to_params(self):
        captured = {}

        class Session:
            def get(self, url, params=None, timeout=None):
                captured.update(params)
                return FakeResponse()

        HttpTransport(api_key="secret", rate=10000.0, session=Session()).get("esearch.fcgi", {})
        assert captured["api_key"] == "secret"


class TestTokenBucket:
    def test_never_exceeds_rate(self, monkeypatch):
        now = [0.0]
        monkeypatch.setattr("litriage.pubmed.time.monotonic", lambda: now[0])

        def sleep(seconds):
            now[0] += seconds

        monkeypatch.setattr("litriage.pubmed.time.sleep", sleep)
        bucket = TokenBucket(rate=2.0, capacity=1.0)
        for _ in range(5):
            bucket.acquire()
        # 1 token available immediately, 4 more need 0.5 s each.
        assert now[0] == pytest.approx(2.0)


class TestFixtureTransport:
    def test_replay_is_deterministic(self, fixtures):
        transport = FixtureTransport(fixtures / "pubmed_demo")
        first = search_articles("q", 10, transport=transport)
        second = search_articles("q", 10, transport=transport)
        assert first == second == ["501", "502", "503", "504", "505"]

    def test_missing_fixture_is_data_error(self, tmp_path):
        transport = FixtureTransport(tmp_path)
        with pytest.raises(DataError, match="fixture not found"):
            transport.get("esearch.fcgi", {})
