"""Protocol conformance for the scoring service, on the deterministic
hash backend: normalization, determinism, label-order equivariance, and
the documented error statuses. Prints one line for the gating criterion."""

import math
import random

import pytest
from fastapi.testclient import TestClient

from nli_sidecar.backends import HashEntailmentBackend
from nli_sidecar.service import create_app


@pytest.fixture(scope="module")
def client():
    app = create_app(backend=HashEntailmentBackend())
    with TestClient(app) as client:
        yield client


def payload(text="deep neural network segmentation", labels=("model a", "model b"),
            multi_label=False, **extra):
    body = {"text": text, "labels": list(labels), "multi_label": multi_label}
    body.update(extra)
    return body


def random_request(rng):
    words = ["retina", "neural", "screening", "laser", "cohort", "gene", "lens", "tear"]
    text = " ".join(rng.choice(words) for _ in range(rng.randint(3, 12)))
    labels = [
        " ".join(rng.choice(words) for _ in range(rng.randint(1, 3)))
        + f" #{i}"  # keep labels unique
        for i in range(rng.randint(2, 6))
    ]
    return {"text": text, "labels": labels, "multi_label": False}


class TestCriterion10:
    def test_protocol_conformance(self, client):
        rng = random.Random(100)
        for _ in range(50):
            body = random_request(rng)
            first = client.post("/score", json=body)
            assert first.status_code == 200
            scores = first.json()["scores"]
            assert len(scores) == len(body["labels"])
            assert abs(math.fsum(scores) - 1.0) <= 1e-4

            again = client.post("/score", json=body).json()["scores"]
            assert again == scores

            order = list(range(len(body["labels"])))
            rng.shuffle(order)
            permuted_body = dict(body, labels=[body["labels"][i] for i in order])
            permuted = client.post("/score", json=permuted_body).json()["scores"]
            assert permuted == [scores[i] for i in order]
        print("[criterion 10] PASS - normalization, determinism, and label "
              "equivariance hold on 50 randomized requests")


class TestWireFormat:
    def test_response_fields(self, client):
        data = client.post("/score", json=payload()).json()
        assert set(data) == {"scores", "model_id", "latency_ms"}
        assert isinstance(data["scores"], list)
        assert data["model_id"] == "hash"
        assert data["latency_ms"] >= 0

    def test_scores_align_with_labels(self, client):
        labels = ["one", "two", "three", "four"]
        data = client.post("/score", json=payload(labels=labels)).json()
        assert len(data["scores"]) == 4

    def test_multilabel_scores_are_independent_per_label(self, client):
        full = client.post(
            "/score", json=payload(labels=("alpha", "beta", "gamma"), multi_label=True)
        ).json()["scores"]
        partial = client.post(
            "/score", json=payload(labels=("alpha", "gamma"), multi_label=True)
        ).json()["scores"]
        assert partial == [full[0], full[2]]

    def test_multilabel_scores_do_not_sum_to_one(self, client):
        data = client.post(
            "/score",
            json=payload(text="retina retina", labels=("retina scan", "unrelated"),
                         multi_label=True),
        ).json()
        assert all(0.0 <= s <= 1.0 for s in data["scores"])

    def test_template_changes_scores(self, client):
        base = client.post("/score", json=payload()).json()["scores"]
        other = client.post(
            "/score", json=payload(template="This study is mainly about {}?")
        ).json()["scores"]
        assert base != other


class TestErrors:
    def test_empty_text_is_400(self, client):
        assert client.post("/score", json=payload(text="")).status_code == 400

    def test_single_label_is_400(self, client):
        assert client.post("/score", json=payload(labels=("only",))).status_code == 400

    def test_missing_field_is_400(self, client):
        assert client.post("/score", json={"labels": ["a", "b"]}).status_code == 400

    def test_wrong_type_is_400(self, client):
        body = {"text": "t", "labels": "not-a-list", "multi_label": False}
        assert client.post("/score", json=body).status_code == 400

    def test_bad_template_is_400(self, client):
        assert client.post("/score", json=payload(template="no placeholder")).status_code == 400

    def test_oversized_text_is_413(self):
        app = create_app(backend=HashEntailmentBackend(), max_chars=100)
        with TestClient(app) as client:
            response = client.post("/score", json=payload(text="x" * 200))
            assert response.status_code == 413

    def test_truncation_reported(self, client):
        text = "word " * 2000  # beyond the hash backend's 512-word window
        data = client.post("/score", json=payload(text=text)).json()
        assert data.get("truncated") is True


class TestHealth:
    def test_ready(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json() == {"status": "ready", "model_id": "hash"}

    def test_loading_is_503(self):
        app = create_app(load=False)
        with TestClient(app) as client:
            response = client.get("/health")
            assert response.status_code == 503
            assert response.json()["status"] == "loading"
            assert client.post("/score", json=payload()).status_code == 503

    def test_model_id_echoes_checkpoint(self, monkeypatch):
        monkeypatch.setenv("SIDECAR_MODEL", "hash")
        with TestClient(create_app()) as client:
            assert client.get("/health").json()["model_id"] == "hash"
