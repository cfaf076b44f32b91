"""Uniform access to text generation and embeddings.

Two backends share one protocol: :class:`HttpProvider` speaks the
OpenAI-compatible wire shape served by commodity inference servers, and
:class:`ScriptedProvider` replays canned fixtures so every pipeline above
this module can be tested deterministically.

Wire contract expected from the HTTP backend:

* ``POST {base_url}/chat/completions`` with the usual chat body; the reply
  text is read from ``choices[0].message.content``.
* ``POST {base_url}/embeddings`` with ``{"input": <text>}`` for one
  sentence-level vector, or ``{"input": <text>, "granularity": "token"}``
  for one vector per token, where each ``data`` entry then carries a
  ``token`` string next to its ``embedding``.

All vectors leaving this module are L2-normalized.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import httpx
import numpy as np

__all__ = [
    "Role",
    "ChatMessage",
    "GenerationParams",
    "ProviderConfig",
    "TokenEmbeddingSequence",
    "Provider",
    "HttpProvider",
    "ScriptedProvider",
    "chat_fingerprint",
    "chat_fixture",
    "embedding_fixture",
    "TransportError",
    "ProviderError",
    "EmptyCompletion",
    "EmptyText",
    "NormalizationError",
]

# Base delay for exponential backoff between retried requests, in seconds.
_BACKOFF_BASE = 0.25

_UNIT_NORM_TOL = 1e-9


class TransportError(Exception):
    """Endpoint unreachable or timed out after all retries."""


class ProviderError(Exception):
    """The provider answered but the answer is unusable (non-2xx, missing fixture)."""

    def __init__(self, message: str, status_code: int | None = None, body: str | None = None):
        super().__init__(message)
        self.status_code = status_code
        self.body = body


class EmptyCompletion(ProviderError):
    """The provider returned zero-length completion text."""

    def __init__(self, message: str = "provider returned an empty completion"):
        super().__init__(message)


class EmptyText(ValueError):
    """An embedding was requested for empty text."""


class NormalizationError(ValueError):
    """A vector of all zeros cannot be scaled to unit norm."""


class Role(str, Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    content: str

    def __post_init__(self) -> None:
        if self.role in (Role.SYSTEM, Role.USER) and not self.content:
            raise ValueError(f"{self.role.value} message content must be non-empty")


@dataclass(frozen=True)
class GenerationParams:
    """Decoding configuration; the defaults are the production judge settings."""

    model_name: str = "mistralai/Mistral-7B-Instruct-v0.2"
    max_new_tokens: int = 256
    temperature: float = 0.7
    top_p: float = 0.7
    repetition_penalty: float = 1.2
    do_sample: bool = True
    num_beams: int = 1

    def __post_init__(self) -> None:
        if not self.model_name:
            raise ValueError("model_name must be non-empty")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.repetition_penalty < 1:
            raise ValueError("repetition_penalty must be >= 1")
        if self.num_beams < 1:
            raise ValueError("num_beams must be >= 1")


@dataclass(frozen=True)
class ProviderConfig:
    """Connection settings for an HTTP provider endpoint."""

    base_url: str = "http://localhost:8080/v1"
    api_key: str | None = None
    timeout: float = 30.0
    retries: int = 2
    embedding_model: str | None = None

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")


def _normalize_rows(vectors: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise NormalizationError("cannot normalize a zero vector")
    return vectors / norms


def normalize_vector(vector: Sequence[float] | np.ndarray) -> np.ndarray:
    """Return the vector scaled to unit L2 norm as float64."""
    arr = np.asarray(vector, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("expected a non-empty 1-D vector")
    return _normalize_rows(arr[None, :])[0]


class TokenEmbeddingSequence:
    """Ordered token strings with one embedding vector per token."""

    def __init__(self, tokens: Sequence[str], vectors: np.ndarray | Sequence[Sequence[float]]):
        arr = np.asarray(vectors, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("vectors must be a 2-D array, one row per token")
        if len(tokens) != arr.shape[0]:
            raise ValueError(f"{len(tokens)} tokens but {arr.shape[0]} vectors")
        if arr.shape[1] < 1:
            raise ValueError("embedding dimension must be >= 1")
        self.tokens: tuple[str, ...] = tuple(tokens)
        self.vectors: np.ndarray = arr

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    def normalized(self) -> "TokenEmbeddingSequence":
        return TokenEmbeddingSequence(self.tokens, _normalize_rows(self.vectors))

    def is_unit_norm(self, tol: float = _UNIT_NORM_TOL) -> bool:
        return bool(np.all(np.abs(np.linalg.norm(self.vectors, axis=1) - 1.0) <= tol))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TokenEmbeddingSequence):
            return NotImplemented
        return self.tokens == other.tokens and np.array_equal(self.vectors, other.vectors)

    def __repr__(self) -> str:
        return f"TokenEmbeddingSequence({len(self)} tokens, dim={self.dimension})"


class Provider(Protocol):
    """What the rest of the pipeline needs from any backend."""

    def chat(self, messages: Sequence[ChatMessage], params: GenerationParams) -> str: ...

    def embed_tokens(self, text: str) -> TokenEmbeddingSequence: ...

    def embed_text(self, text: str) -> np.ndarray: ...


def _check_single_turn(messages: Sequence[ChatMessage]) -> None:
    # This artifact issues single-turn judge calls only.
    if len(messages) != 2 or messages[0].role is not Role.SYSTEM or messages[1].role is not Role.USER:
        raise ValueError("chat expects exactly one system message followed by one user message")


def chat_fingerprint(*contents: str) -> str:
    """SHA-256 hex digest of the concatenated message contents."""
    digest = hashlib.sha256()
    for content in contents:
        digest.update(content.encode("utf-8"))
    return digest.hexdigest()


def chat_fixture(system_text: str, user_text: str, reply: str) -> dict:
    """Build one scripted chat record for the given prompt pair."""
    return {"fingerprint": chat_fingerprint(system_text, user_text), "reply": reply}


def embedding_fixture(
    text: str,
    vector: Sequence[float] | None = None,
    tokens: Sequence[str] | None = None,
    vectors: Sequence[Sequence[float]] | None = None,
) -> dict:
    """Build one scripted embedding record; token data is optional."""
    record: dict = {"text": text}
    if vector is not None:
        record["vector"] = list(map(float, vector))
    if tokens is not None or vectors is not None:
        if tokens is None or vectors is None:
            raise ValueError("tokens and vectors must be given together")
        record["tokens"] = list(tokens)
        record["vectors"] = [list(map(float, row)) for row in vectors]
    return record


class HttpProvider:
    """OpenAI-compatible HTTP backend.

    Instances are immutable after construction and safe to call from many
    threads; every request builds its own client and connection.
    """

    def __init__(self, config: ProviderConfig, transport: httpx.BaseTransport | None = None):
        self._config = config
        self._transport = transport

    @property
    def config(self) -> ProviderConfig:
        return self._config

    def chat(self, messages: Sequence[ChatMessage], params: GenerationParams) -> str:
        _check_single_turn(messages)
        payload = {
            "model": params.model_name,
            "messages": [{"role": m.role.value, "content": m.content} for m in messages],
            "max_tokens": params.max_new_tokens,
            # Greedy decoding has no do_sample switch on this wire; temperature 0
            # is the conventional encoding. Beam search has no equivalent at all,
            # so single-beam operation is assumed.
            "temperature": params.temperature if params.do_sample else 0.0,
            "top_p": params.top_p if params.do_sample else 1.0,
            "repetition_penalty": params.repetition_penalty,
        }
        data = self._post("/chat/completions", payload)
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed chat completion response: {exc}") from exc
        if not text:
            raise EmptyCompletion()
        return text

    def embed_tokens(self, text: str) -> TokenEmbeddingSequence:
        if not text:
            raise EmptyText("cannot embed empty text")
        payload: dict = {"input": text, "granularity": "token"}
        if self._config.embedding_model:
            payload["model"] = self._config.embedding_model
        data = self._post("/embeddings", payload)
        try:
            entries = data["data"]
            tokens = [entry["token"] for entry in entries]
            vectors = [entry["embedding"] for entry in entries]
        except (KeyError, TypeError) as exc:
            raise ProviderError(f"malformed token embedding response: {exc}") from exc
        if not tokens:
            raise ProviderError("provider returned no token embeddings")
        return TokenEmbeddingSequence(tokens, vectors).normalized()

    def embed_text(self, text: str) -> np.ndarray:
        if not text:
            raise EmptyText("cannot embed empty text")
        payload = {"input": text}
        if self._config.embedding_model:
            payload["model"] = self._config.embedding_model
        data = self._post("/embeddings", payload)
        try:
            vector = data["data"][0]["embedding"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed embedding response: {exc}") from exc
        return normalize_vector(vector)

    def _post(self, path: str, payload: dict) -> dict:
        url = self._config.base_url.rstrip("/") + path
        headers = {}
        if self._config.api_key:
            headers["Authorization"] = f"Bearer {self._config.api_key}"
        last_exc: Exception | None = None
        for attempt in range(self._config.retries + 1):
            try:
                with httpx.Client(timeout=self._config.timeout, transport=self._transport) as client:
                    response = client.post(url, json=payload, headers=headers)
            except httpx.TransportError as exc:
                last_exc = exc
                if attempt < self._config.retries:
                    time.sleep(_BACKOFF_BASE * 2**attempt)
                continue
            if not 200 <= response.status_code < 300:
                raise ProviderError(
                    f"provider returned HTTP {response.status_code} for {path}",
                    status_code=response.status_code,
                    body=response.text,
                )
            return response.json()
        raise TransportError(
            f"{url} unreachable after {self._config.retries + 1} attempts: {last_exc}"
        ) from last_exc


class ScriptedProvider:
    """Deterministic test double replaying stored completions and embeddings.

    Chat replies are keyed by the SHA-256 fingerprint of the concatenated
    message contents; embeddings are keyed by the exact input text. Unknown
    inputs raise :class:`ProviderError` so silent drift is impossible.
    """

    def __init__(
        self,
        chat_replies: dict[str, str] | None = None,
        embeddings: Iterable[dict] | None = None,
    ):
        self._replies = dict(chat_replies or {})
        self._vectors: dict[str, np.ndarray] = {}
        self._token_sequences: dict[str, TokenEmbeddingSequence] = {}
        for record in embeddings or ():
            self._add_embedding_record(record)

    @classmethod
    def from_files(
        cls,
        chat_path: str | Path | None = None,
        embeddings_path: str | Path | None = None,
    ) -> "ScriptedProvider":
        replies: dict[str, str] = {}
        for record in _load_jsonl(chat_path):
            replies[record["fingerprint"]] = record["reply"]
        return cls(chat_replies=replies, embeddings=_load_jsonl(embeddings_path))

    def _add_embedding_record(self, record: dict) -> None:
        text = record["text"]
        if "vector" in record:
            self._vectors[text] = np.asarray(record["vector"], dtype=np.float64)
        if "tokens" in record:
            self._token_sequences[text] = TokenEmbeddingSequence(
                record["tokens"], record["vectors"]
            )

    def add_chat_fixture(self, system_text: str, user_text: str, reply: str) -> None:
        self._replies[chat_fingerprint(system_text, user_text)] = reply

    def chat(self, messages: Sequence[ChatMessage], params: GenerationParams) -> str:
        _check_single_turn(messages)
        key = chat_fingerprint(*(m.content for m in messages))
        if key not in self._replies:
            raise ProviderError(f"no scripted reply for fingerprint {key[:12]}…")
        reply = self._replies[key]
        if not reply:
            raise EmptyCompletion()
        return reply

    def embed_tokens(self, text: str) -> TokenEmbeddingSequence:
        if not text:
            raise EmptyText("cannot embed empty text")
        if text not in self._token_sequences:
            raise ProviderError(f"no scripted token embeddings for text {text[:40]!r}")
        return self._token_sequences[text].normalized()

    def embed_text(self, text: str) -> np.ndarray:
        if not text:
            raise EmptyText("cannot embed empty text")
        if text not in self._vectors:
            raise ProviderError(f"no scripted embedding for text {text[:40]!r}")
        return normalize_vector(self._vectors[text])


def _load_jsonl(path: str | Path | None) -> list[dict]:
    if path is None:
        return []
    records = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
