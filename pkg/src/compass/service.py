"""HTTP facade over the governance pipeline.

One app instance owns one provider, one knowledge base and one
orchestrator; requests are handled independently and the knowledge base
serializes writes internally, so concurrent traffic is safe.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field

from .explain import build_report, report_to_dict
from .judge import EvaluationRequest, Judge, PromptTemplate
from .orchestrator import Orchestrator, OrchestrationFailure, SynthesisPolicy
from .provider import GenerationParams, Provider, ProviderError, TransportError
from .rag import (
    DEFAULT_CHUNK_SIZE,
    DEFAULT_OVERLAP,
    DEFAULT_TOP_K,
    Document,
    EmbeddingFailure,
    KnowledgeBase,
)
from .scoring import Pillar

__all__ = ["create_app"]


class EvaluateBody(BaseModel):
    model_config = ConfigDict(extra="forbid")

    test_id: str = Field(min_length=1)
    country: str = Field(min_length=1)
    generative_ai_model: str = Field(min_length=1)
    country_model: str = Field(min_length=1)
    country_data: str = Field(min_length=1)
    description: str = Field(min_length=1)
    use_rag: bool = False


class IngestBody(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str = Field(min_length=1)
    pillar: str = Field(min_length=1)
    title: str = Field(min_length=1)
    body: str = Field(min_length=1)


def create_app(
    provider: Provider,
    templates: dict[Pillar, PromptTemplate] | None = None,
    knowledge_base: KnowledgeBase | None = None,
    policy: SynthesisPolicy | None = None,
    params: GenerationParams | None = None,
    top_k: int = DEFAULT_TOP_K,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    overlap: int = DEFAULT_OVERLAP,
) -> FastAPI:
    """Wire the pipeline components into a FastAPI application."""
    app = FastAPI(title="compass-governance", docs_url=None, redoc_url=None)
    kb = knowledge_base if knowledge_base is not None else KnowledgeBase(provider)
    judge = Judge(provider, templates=templates, knowledge_base=kb, params=params, top_k=top_k)
    orchestrator = Orchestrator(judge, policy=policy)

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        errors = exc.errors()
        # Undecodable JSON is a malformed request, not a failed invariant.
        if any(e.get("type") == "json_invalid" for e in errors):
            return JSONResponse(status_code=400, content={"detail": "malformed JSON body"})
        detail = [
            {
                "field": ".".join(str(part) for part in e.get("loc", ()) if part != "body"),
                "message": e.get("msg", "invalid value"),
            }
            for e in errors
        ]
        return JSONResponse(status_code=422, content={"detail": detail})

    @app.get("/v1/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/v1/evaluate")
    def evaluate(body: EvaluateBody) -> JSONResponse:
        try:
            request = EvaluationRequest(
                test_id=body.test_id,
                country=body.country,
                generative_ai_model=body.generative_ai_model,
                country_model=body.country_model,
                country_data=body.country_data,
                description=body.description,
            )
        except ValueError as exc:
            return JSONResponse(
                status_code=422,
                content={"detail": [{"field": "test_id", "message": str(exc)}]},
            )
        try:
            result = orchestrator.synchronise(request, use_rag=body.use_rag)
        except OrchestrationFailure as exc:
            status = 502 if _is_provider_fault(exc) else 500
            return JSONResponse(status_code=status, content={"detail": str(exc)})
        report = build_report(result, provider_id=type(provider).__name__)
        return JSONResponse(status_code=200, content=report_to_dict(report))

    @app.post("/v1/ingest")
    def ingest(body: IngestBody) -> JSONResponse:
        try:
            pillar = Pillar.from_code(body.pillar.upper())
        except ValueError as exc:
            return JSONResponse(
                status_code=422,
                content={"detail": [{"field": "pillar", "message": str(exc)}]},
            )
        document = Document(id=body.id, pillar=pillar, title=body.title, body=body.body)
        try:
            chunks = kb.ingest(document, chunk_size=chunk_size, overlap=overlap)
        except (ProviderError, TransportError, EmbeddingFailure) as exc:
            return JSONResponse(status_code=502, content={"detail": str(exc)})
        except ValueError as exc:
            return JSONResponse(
                status_code=422,
                content={"detail": [{"field": "id", "message": str(exc)}]},
            )
        return JSONResponse(status_code=200, content={"document_id": document.id, "chunks": chunks})

    return app


def _is_provider_fault(failure: OrchestrationFailure) -> bool:
    def provider_fault(exc: BaseException | None) -> bool:
        while exc is not None:
            if isinstance(exc, (ProviderError, TransportError)):
                return True
            exc = exc.__cause__
        return False

    return any(provider_fault(exc) for exc in failure.failures.values())
