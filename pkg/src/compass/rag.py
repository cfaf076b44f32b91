"""Per-pillar reference corpus: ingestion, retrieval and key-point context.

Documents are split into overlapping word windows, embedded through the
provider, and kept in an exact brute-force cosine index. Corpora here are a
handful of policy texts per pillar, so a linear scan beats any approximate
index on both correctness and testability.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .provider import ChatMessage, GenerationParams, Provider, Role
from .scoring import Pillar

__all__ = [
    "Document",
    "Chunk",
    "RagContext",
    "KnowledgeBase",
    "EmbeddingFailure",
    "DuplicateDocument",
    "chunk_words",
    "load_manifest",
    "KEY_POINT_SYSTEM_PROMPT",
    "KEY_POINT_USER_PROMPT",
]

KEY_POINT_SYSTEM_PROMPT = "You must extract the most valuable information in this document."
KEY_POINT_USER_PROMPT = "What are the document's key points?"

DEFAULT_CHUNK_SIZE = 220
DEFAULT_OVERLAP = 40
DEFAULT_TOP_K = 4


class EmbeddingFailure(Exception):
    """Provider failed while embedding; no partial index state is left behind."""


class DuplicateDocument(ValueError):
    """A document id was ingested twice into the same corpus."""


@dataclass(frozen=True)
class Document:
    id: str
    pillar: Pillar
    title: str
    body: str

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("document id must be non-empty")
        if not self.body:
            raise ValueError("document body must be non-empty")


@dataclass(frozen=True)
class Chunk:
    doc_id: str
    seq: int
    text: str
    embedding: np.ndarray = field(compare=False)

    def sort_key(self) -> tuple[str, int]:
        return (self.doc_id, self.seq)


@dataclass(frozen=True)
class RagContext:
    """Retrieved grounding for one pillar: ranked chunks plus their key points."""

    pillar: Pillar
    chunks: tuple[tuple[Chunk, float], ...]
    key_points: str

    @property
    def is_empty(self) -> bool:
        return not self.chunks or not self.key_points


def chunk_words(body: str, chunk_size: int, overlap: int) -> list[str]:
    """Split text into word windows of ``chunk_size`` words sharing ``overlap`` words."""
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    if overlap < 0 or overlap >= chunk_size:
        raise ValueError("overlap must satisfy 0 <= overlap < chunk_size")
    words = body.split()
    if not words:
        raise ValueError("text contains no words")
    step = chunk_size - overlap
    chunks = []
    start = 0
    while True:
        window = words[start : start + chunk_size]
        chunks.append(" ".join(window))
        if start + chunk_size >= len(words):
            break
        start += step
    return chunks


class KnowledgeBase:
    """One brute-force vector index per pillar, fed through a shared provider.

    Reads take a snapshot of the committed chunk list, so retrieval is safe
    against a concurrent ingest; ingest itself embeds everything first and
    commits under a lock, keeping the index atomic per document.
    """

    def __init__(self, provider: Provider, params: GenerationParams | None = None):
        self._provider = provider
        self._params = params or GenerationParams()
        self._lock = threading.Lock()
        self._chunks: dict[Pillar, tuple[Chunk, ...]] = {p: () for p in Pillar}

    def chunk_count(self, pillar: Pillar | None = None) -> int:
        if pillar is not None:
            return len(self._chunks[pillar])
        return sum(len(chunks) for chunks in self._chunks.values())

    def ingest(
        self,
        doc: Document,
        chunk_size: int = DEFAULT_CHUNK_SIZE,
        overlap: int = DEFAULT_OVERLAP,
    ) -> int:
        """Chunk, embed and commit one document; returns the chunk count."""
        texts = chunk_words(doc.body, chunk_size, overlap)
        embedded = []
        for seq, text in enumerate(texts):
            try:
                vector = self._provider.embed_text(text)
            except Exception as exc:
                raise EmbeddingFailure(
                    f"embedding chunk {seq} of document {doc.id!r} failed: {exc}"
                ) from exc
            embedded.append(Chunk(doc_id=doc.id, seq=seq, text=text, embedding=vector))
        with self._lock:
            existing = self._chunks[doc.pillar]
            if any(c.doc_id == doc.id for c in existing):
                raise DuplicateDocument(f"document {doc.id!r} already ingested")
            self._chunks[doc.pillar] = existing + tuple(embedded)
        return len(embedded)

    def retrieve(self, pillar: Pillar, query: str, k: int) -> list[tuple[Chunk, float]]:
        """Top-k chunks of the pillar's index by cosine similarity, descending."""
        if not query:
            raise ValueError("query must be non-empty")
        if k < 1:
            raise ValueError("k must be >= 1")
        chunks = self._chunks[pillar]
        if not chunks:
            return []
        try:
            query_vec = self._provider.embed_text(query)
        except Exception as exc:
            raise EmbeddingFailure(f"embedding query failed: {exc}") from exc
        scored = [(chunk, float(np.dot(chunk.embedding, query_vec))) for chunk in chunks]
        # Ties broken by (doc_id, seq) so retrieval is ingestion-order invariant.
        scored.sort(key=lambda item: (-item[1], item[0].sort_key()))
        return scored[:k]

    def extract_key_points(self, pillar: Pillar, retrieved: Sequence[Chunk]) -> str:
        """Summarise the retrieved chunks through the provider; returns the completion."""
        if not retrieved:
            raise ValueError("retrieved chunks must be non-empty")
        user_text = KEY_POINT_USER_PROMPT + "\n\n" + "\n\n".join(c.text for c in retrieved)
        messages = [
            ChatMessage(Role.SYSTEM, KEY_POINT_SYSTEM_PROMPT),
            ChatMessage(Role.USER, user_text),
        ]
        return self._provider.chat(messages, self._params)

    def build_context(self, pillar: Pillar, request_text: str, k: int = DEFAULT_TOP_K) -> RagContext:
        """Retrieve then summarise; empty index yields an empty, un-grounded context."""
        if not request_text:
            raise ValueError("request_text must be non-empty")
        results = self.retrieve(pillar, request_text, k)
        if not results:
            return RagContext(pillar=pillar, chunks=(), key_points="")
        key_points = self.extract_key_points(pillar, [chunk for chunk, _ in results])
        return RagContext(pillar=pillar, chunks=tuple(results), key_points=key_points)

    def save(self, path: str | Path) -> int:
        """Persist all chunk records as JSON lines; returns the record count."""
        with self._lock:
            snapshot = {pillar: self._chunks[pillar] for pillar in Pillar}
        count = 0
        with open(path, "w", encoding="utf-8") as handle:
            for pillar in Pillar:
                for chunk in snapshot[pillar]:
                    record = {
                        "doc_id": chunk.doc_id,
                        "seq": chunk.seq,
                        "pillar": pillar.value,
                        "text": chunk.text,
                        "embedding": chunk.embedding.tolist(),
                    }
                    handle.write(json.dumps(record, ensure_ascii=False) + "\n")
                    count += 1
        return count

    def load(self, path: str | Path) -> int:
        """Replace the index contents with previously saved records."""
        loaded: dict[Pillar, list[Chunk]] = {p: [] for p in Pillar}
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                pillar = Pillar.from_code(record["pillar"])
                loaded[pillar].append(
                    Chunk(
                        doc_id=record["doc_id"],
                        seq=int(record["seq"]),
                        text=record["text"],
                        embedding=np.asarray(record["embedding"], dtype=np.float64),
                    )
                )
        with self._lock:
            self._chunks = {p: tuple(chunks) for p, chunks in loaded.items()}
        return sum(len(chunks) for chunks in loaded.values())


def load_manifest(path: str | Path) -> list[Document]:
    """Read a corpus manifest: a JSON list of {id, pillar, title, path} records.

    Document paths are resolved relative to the manifest file.
    """
    manifest_path = Path(path)
    with open(manifest_path, encoding="utf-8") as handle:
        entries = json.load(handle)
    if not isinstance(entries, list):
        raise ValueError(f"manifest {manifest_path} must contain a JSON list")
    documents = []
    for entry in entries:
        doc_path = Path(entry["path"])
        if not doc_path.is_absolute():
            doc_path = manifest_path.parent / doc_path
        body = doc_path.read_text(encoding="utf-8")
        documents.append(
            Document(
                id=entry["id"],
                pillar=Pillar.from_code(entry["pillar"]),
                title=entry.get("title", entry["id"]),
                body=body,
            )
        )
    return documents
