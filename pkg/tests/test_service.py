"""HTTP endpoints: health, evaluate, ingest, and their error mapping."""

from __future__ import annotations

import warnings

import pytest

with warnings.catch_warnings():
    warnings.simplefilter("ignore", DeprecationWarning)
    from fastapi.testclient import TestClient

from compass.provider import ScriptedProvider, embedding_fixture
from compass.rag import KnowledgeBase
from compass.service import create_app

from conftest import make_request, script_judgments


def request_body(request, use_rag=False):
    return {
        "test_id": request.test_id,
        "country": request.country,
        "generative_ai_model": request.generative_ai_model,
        "country_model": request.country_model,
        "country_data": request.country_data,
        "description": request.description,
        "use_rag": use_rag,
    }


@pytest.fixture()
def scored_client(templates):
    request = make_request("SOV-05")
    scores = {"SOV": 0.50, "CAR": 0.50, "COM": 0.25, "ETH": 0.50}
    provider = script_judgments(templates, request, scores)
    app = create_app(provider, templates=templates)
    return TestClient(app), request


class TestHealth:
    def test_health(self, templates):
        client = TestClient(create_app(ScriptedProvider(), templates=templates))
        response = client.get("/v1/health")
        assert response.status_code == 200
        assert response.json() == {"status": "ok"}


class TestEvaluate:
    def test_scored_case(self, scored_client):
        client, request = scored_client
        response = client.post("/v1/evaluate", json=request_body(request))
        assert response.status_code == 200
        payload = response.json()
        assert payload["schema_version"] == "1"
        assert payload["request"]["test_id"] == "SOV-05"
        assert payload["aggregate"] == pytest.approx(0.4375)
        assert payload["clearance"] == "Rejected"
        assert [v["pillar"] for v in payload["violations"]] == ["COM"]
        assert payload["pillars"]["COM"]["score"] == 0.25
        assert payload["pillars"]["SOV"]["rag_used"] is False
        assert payload["provider_id"] == "ScriptedProvider"

    def test_missing_field_names_it(self, scored_client):
        client, request = scored_client
        body = request_body(request)
        del body["description"]
        response = client.post("/v1/evaluate", json=body)
        assert response.status_code == 422
        assert any(item["field"] == "description" for item in response.json()["detail"])

    def test_extra_field_rejected(self, scored_client):
        client, request = scored_client
        response = client.post("/v1/evaluate", json={**request_body(request), "mood": "sunny"})
        assert response.status_code == 422

    def test_malformed_json_is_400(self, scored_client):
        client, _ = scored_client
        response = client.post(
            "/v1/evaluate", content=b"{not json", headers={"content-type": "application/json"}
        )
        assert response.status_code == 400
        assert response.json() == {"detail": "malformed JSON body"}

    def test_bad_test_id_is_422(self, scored_client):
        client, request = scored_client
        body = request_body(request)
        body["test_id"] = "NOPE-07"
        response = client.post("/v1/evaluate", json=body)
        assert response.status_code == 422
        assert response.json()["detail"][0]["field"] == "test_id"

    def test_unscripted_provider_is_502(self, templates):
        client = TestClient(create_app(ScriptedProvider(), templates=templates))
        response = client.post("/v1/evaluate", json=request_body(make_request("SOV-05")))
        assert response.status_code == 502
        assert "judges failed" in response.json()["detail"]


class TestIngest:
    def test_ingest_counts_chunks(self, templates):
        words = " ".join(f"w{i}" for i in range(10))
        provider = ScriptedProvider(
            embeddings=[embedding_fixture(" ".join(f"w{i}" for i in range(6)), vector=[1.0, 0.0]),
                        embedding_fixture("w4 w5 w6 w7 w8 w9", vector=[0.0, 1.0])]
        )
        kb = KnowledgeBase(provider)
        client = TestClient(
            create_app(provider, templates=templates, knowledge_base=kb, chunk_size=6, overlap=2)
        )
        response = client.post(
            "/v1/ingest", json={"id": "doc-1", "pillar": "SOV", "title": "t", "body": words}
        )
        assert response.status_code == 200
        assert response.json() == {"document_id": "doc-1", "chunks": 2}

    def test_duplicate_document_is_422(self, templates):
        provider = ScriptedProvider(embeddings=[embedding_fixture("text", vector=[1.0, 0.0])])
        client = TestClient(create_app(provider, templates=templates))
        body = {"id": "doc-1", "pillar": "CAR", "title": "t", "body": "text"}
        assert client.post("/v1/ingest", json=body).status_code == 200
        response = client.post("/v1/ingest", json=body)
        assert response.status_code == 422
        assert "doc-1" in response.json()["detail"][0]["message"]

    def test_unknown_pillar_is_422(self, templates):
        client = TestClient(create_app(ScriptedProvider(), templates=templates))
        response = client.post(
            "/v1/ingest", json={"id": "d", "pillar": "AIR", "title": "t", "body": "b"}
        )
        assert response.status_code == 422
        assert response.json()["detail"][0]["field"] == "pillar"

    def test_embedding_failure_is_502(self, templates):
        client = TestClient(create_app(ScriptedProvider(), templates=templates))
        response = client.post(
            "/v1/ingest", json={"id": "d", "pillar": "ETH", "title": "t", "body": "no fixture"}
        )
        assert response.status_code == 502

    def test_empty_body_field_is_422(self, templates):
        client = TestClient(create_app(ScriptedProvider(), templates=templates))
        response = client.post(
            "/v1/ingest", json={"id": "d", "pillar": "ETH", "title": "", "body": "b"}
        )
        assert response.status_code == 422
        assert any(item["field"] == "title" for item in response.json()["detail"])
