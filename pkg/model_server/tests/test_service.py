"""Endpoint behavior against the tiny checkpoints, no sockets involved."""

import math
from types import SimpleNamespace

import pytest
from fastapi.testclient import TestClient

from model_server.backends import build_backend, strip_marker
from model_server.config import ConfigError, ServerConfig
from model_server.service import build_app

from conftest import VOCAB

NON_SPECIAL = {strip_marker(t) for t in VOCAB if not t.startswith("[")}


@pytest.fixture(scope="module")
def classifier_client(classifier_dir):
    config = ServerConfig(model=classifier_dir, role="classifier", max_batch=4)
    return TestClient(build_app(build_backend(config)))


@pytest.fixture(scope="module")
def mlm_client(mlm_dir):
    config = ServerConfig(model=mlm_dir, role="masked-lm")
    return TestClient(build_app(build_backend(config)))


class TestHealthAndInfo:
    def test_healthz(self, classifier_client, mlm_client):
        for client in (classifier_client, mlm_client):
            reply = client.get("/healthz")
            assert reply.status_code == 200
            assert reply.json() == {"status": "ok"}

    def test_classifier_info(self, classifier_client):
        body = classifier_client.get("/v1/info").json()
        assert body["labels"] == ["neg", "pos"]
        assert body["unk_literal"] == "[UNK]"
        assert body["max_batch"] == 4
        assert isinstance(body["model_id"], str) and body["model_id"]

    def test_mlm_info(self, mlm_client):
        body = mlm_client.get("/v1/info").json()
        assert body["mask_literal"] == "[MASK]"
        assert body["unk_literal"] == "[UNK]"


class TestClassify:
    def test_distributions_sum_to_one(self, classifier_client):
        reply = classifier_client.post(
            "/v1/classify", json={"texts": ["ཀ་ཁ", "ང་ང་ང", "hello"]}
        )
        assert reply.status_code == 200
        results = reply.json()["results"]
        assert len(results) == 3
        for result in results:
            assert result["labels"] == ["neg", "pos"]
            assert len(result["probs"]) == 2
            assert abs(math.fsum(result["probs"]) - 1.0) <= 1e-6

    def test_empty_batch(self, classifier_client):
        reply = classifier_client.post("/v1/classify", json={"texts": []})
        assert reply.status_code == 200
        assert reply.json() == {"results": []}

    def test_over_batch_limit_rejected_not_split(self, classifier_client):
        reply = classifier_client.post("/v1/classify", json={"texts": ["ཀ"] * 5})
        assert reply.status_code == 400
        assert reply.json()["error"]["code"] == "batch_too_large"

    def test_malformed_body(self, classifier_client):
        reply = classifier_client.post("/v1/classify", json={"texts": "ཀ"})
        assert reply.status_code == 400
        assert reply.json()["error"]["code"] == "bad_request"

    def test_identical_requests_identical_bodies(self, classifier_client):
        payload = {"texts": ["ཀ་ཁ་ག", "ང"]}
        first = classifier_client.post("/v1/classify", json=payload)
        second = classifier_client.post("/v1/classify", json=payload)
        assert first.content == second.content

    def test_fill_mask_endpoint_absent(self, classifier_client):
        reply = classifier_client.post(
            "/v1/fill-mask",
            json={"text_with_mask": "[MASK]", "mask_token_index": 0, "top_k": 5},
        )
        assert reply.status_code == 404
        assert reply.json()["error"]["code"] == "not_found"


class TestFillMask:
    def test_candidates_clean_and_ordered(self, mlm_client):
        reply = mlm_client.post(
            "/v1/fill-mask",
            json={
                "text_with_mask": "[MASK]་ཁ",
                "mask_token_index": 0,
                "top_k": 50,
                "original_token": "ཀ",
            },
        )
        assert reply.status_code == 200
        candidates = reply.json()["candidates"]
        assert 1 <= len(candidates) <= 50
        tokens = [c["token"] for c in candidates]
        scores = [c["score"] for c in candidates]
        assert "ཀ" not in tokens
        assert all(not t.startswith("##") for t in tokens)
        assert all(t in NON_SPECIAL for t in tokens)
        assert len(tokens) == len(set(tokens))
        assert all(a >= b for a, b in zip(scores, scores[1:]))
        assert all(0.0 < s < 1.0 for s in scores)

    def test_marker_stripping_merges_subword_variant(self, mlm_client):
        # Vocab holds both ཀ and ##ཀ; the stripped forms must collapse.
        reply = mlm_client.post(
            "/v1/fill-mask",
            json={"text_with_mask": "ཁ་[MASK]", "mask_token_index": 0, "top_k": 50},
        )
        tokens = [c["token"] for c in reply.json()["candidates"]]
        assert tokens.count("ཀ") == 1

    def test_top_k_truncates(self, mlm_client):
        reply = mlm_client.post(
            "/v1/fill-mask",
            json={"text_with_mask": "[MASK]", "mask_token_index": 0, "top_k": 3},
        )
        assert len(reply.json()["candidates"]) == 3

    def test_ordinal_selects_among_multiple_masks(self, mlm_client):
        body = {"text_with_mask": "[MASK]་[MASK]", "top_k": 5, "mask_token_index": 1}
        first = mlm_client.post("/v1/fill-mask", json={**body, "mask_token_index": 0})
        second = mlm_client.post("/v1/fill-mask", json=body)
        assert first.status_code == second.status_code == 200
        out_of_range = mlm_client.post("/v1/fill-mask", json={**body, "mask_token_index": 2})
        assert out_of_range.status_code == 422
        assert out_of_range.json()["error"]["code"] == "index_out_of_range"

    def test_text_without_mask_is_422(self, mlm_client):
        reply = mlm_client.post(
            "/v1/fill-mask",
            json={"text_with_mask": "ཀ་ཁ", "mask_token_index": 0, "top_k": 5},
        )
        assert reply.status_code == 422

    def test_negative_index_malformed(self, mlm_client):
        reply = mlm_client.post(
            "/v1/fill-mask",
            json={"text_with_mask": "[MASK]", "mask_token_index": -1, "top_k": 5},
        )
        assert reply.status_code == 400

    def test_identical_requests_identical_bodies(self, mlm_client):
        payload = {"text_with_mask": "[MASK]་ང", "mask_token_index": 0, "top_k": 10}
        first = mlm_client.post("/v1/fill-mask", json=payload)
        second = mlm_client.post("/v1/fill-mask", json=payload)
        assert first.content == second.content

    def test_unknown_endpoint_enveloped(self, mlm_client):
        reply = mlm_client.get("/v1/nope")
        assert reply.status_code == 404
        assert reply.json()["error"]["code"] == "not_found"


class TestBackendGuards:
    def test_role_must_match_head(self, classifier_dir, mlm_dir):
        with pytest.raises(ConfigError, match="does not match role"):
            build_backend(ServerConfig(model=classifier_dir, role="masked-lm"))
        with pytest.raises(ConfigError, match="does not match role"):
            build_backend(ServerConfig(model=mlm_dir, role="classifier"))

    def test_label_count_must_match_head(self, classifier_dir):
        with pytest.raises(ConfigError, match="2 outputs"):
            build_backend(
                ServerConfig(model=classifier_dir, role="classifier", labels=("a", "b", "c"))
            )

    def test_model_failure_is_enveloped_500(self):
        class Boom:
            role = "classifier"
            config = SimpleNamespace(max_batch=8)

            def info(self):
                return {"model_id": "boom", "max_batch": 8, "unk_literal": "[UNK]"}

            def classify(self, texts):
                raise RuntimeError("kaboom")

        client = TestClient(build_app(Boom()), raise_server_exceptions=False)
        reply = client.post("/v1/classify", json={"texts": ["x"]})
        assert reply.status_code == 500
        body = reply.json()["error"]
        assert body["code"] == "internal"
        assert "kaboom" in body["message"]
