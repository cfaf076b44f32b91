"""A/B evaluation harness: BERTScore, IDF weighting, delta scores, tables.

Compares judge output with and without retrieval context, then quantifies
how similar the two explanations are via greedy-matched token embeddings.
Tokenization is whatever the embedding provider returns; nothing here
re-tokenizes text.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .judge import EvaluationRequest, Judge
from .provider import Provider, TokenEmbeddingSequence
from .scoring import (
    NOT_APPLICABLE,
    Score,
    format_score,
    is_numeric,
    score_from_json,
    score_to_json,
)

__all__ = [
    "DimensionMismatch",
    "EmptySequence",
    "EmptyCorpus",
    "BertScoreResult",
    "IdfTable",
    "BaselineStats",
    "EvalRecord",
    "bertscore",
    "rescale",
    "build_idf",
    "delta_score",
    "run_ab_evaluation",
    "emit_table",
    "load_cases",
    "records_to_json",
    "records_from_json",
]


class DimensionMismatch(ValueError):
    """Reference and candidate embeddings have different dimensions."""


class EmptySequence(ValueError):
    """BERTScore over zero tokens is undefined."""


class EmptyCorpus(ValueError):
    """IDF statistics need at least one document."""


@dataclass(frozen=True)
class BertScoreResult:
    precision: float
    recall: float
    f1: float
    rescaled: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class IdfTable:
    """Smoothed inverse document frequencies over a token corpus."""

    doc_count: int
    df: dict[str, int] = field(repr=False)
    weight: dict[str, float] = field(repr=False)

    def weight_of(self, token: str) -> float:
        # Unseen tokens take the df=0 smoothing value.
        return self.weight.get(token, math.log(self.doc_count + 1))


@dataclass(frozen=True)
class BaselineStats:
    """Corpus-level similarity floor used to spread scores over [0, 1]."""

    b: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.b < 1.0:
            raise ValueError(f"baseline must be in [0, 1), got {self.b}")


@dataclass(frozen=True)
class EvalRecord:
    """One A/B comparison row; ``error`` set means the row failed."""

    test_id: str
    score_no_rag: Score
    score_rag: Score
    delta: Score
    similarity_f1: float | None
    error: str | None = None


def _weights(seq: TokenEmbeddingSequence, idf: IdfTable | None) -> np.ndarray:
    if idf is None:
        return np.ones(len(seq.tokens), dtype=np.float64)
    return np.array([idf.weight_of(t) for t in seq.tokens], dtype=np.float64)


def _weighted_max_mean(best: np.ndarray, weights: np.ndarray) -> float:
    total = float(weights.sum())
    if total == 0.0:
        # All-zero IDF weights (every token ubiquitous): fall back to uniform.
        return float(best.mean())
    return float(np.dot(best, weights) / total)


def bertscore(
    reference: TokenEmbeddingSequence,
    candidate: TokenEmbeddingSequence,
    idf: IdfTable | None = None,
) -> BertScoreResult:
    """Greedy-matched cosine similarity between two token embedding rolls.

    Recall averages, over reference tokens, the best dot product against any
    candidate token; precision mirrors that over candidate tokens; f1 is the
    harmonic mean. With ``idf`` the averages are weighted by token IDF.
    """
    if len(reference.tokens) == 0 or len(candidate.tokens) == 0:
        raise EmptySequence("both token sequences must be non-empty")
    if reference.vectors.shape[1] != candidate.vectors.shape[1]:
        raise DimensionMismatch(
            f"embedding dims differ: {reference.vectors.shape[1]} vs {candidate.vectors.shape[1]}"
        )
    sim = reference.vectors @ candidate.vectors.T
    recall = _weighted_max_mean(sim.max(axis=1), _weights(reference, idf))
    precision = _weighted_max_mean(sim.max(axis=0), _weights(candidate, idf))
    if precision + recall == 0.0:
        f1 = 0.0
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return BertScoreResult(precision=precision, recall=recall, f1=f1)


def rescale(result: BertScoreResult, baseline: BaselineStats) -> BertScoreResult:
    """Map each of P, R, F through (x - b)/(1 - b); results may go negative."""
    b = baseline.b
    scaled = tuple((x - b) / (1.0 - b) for x in (result.precision, result.recall, result.f1))
    return replace(result, rescaled=scaled)


def build_idf(corpus: Sequence[Iterable[str]]) -> IdfTable:
    """Smoothed IDF: weight(t) = log((N + 1)/(df(t) + 1)) over the corpus."""
    if len(corpus) == 0:
        raise EmptyCorpus("IDF corpus is empty")
    n = len(corpus)
    df: dict[str, int] = {}
    for doc in corpus:
        for token in set(doc):
            df[token] = df.get(token, 0) + 1
    weight = {t: math.log((n + 1) / (c + 1)) for t, c in df.items()}
    return IdfTable(doc_count=n, df=df, weight=weight)


def delta_score(no_rag: Score, with_rag: Score) -> Score:
    """Retrieval gain: with-RAG score minus no-RAG score, N/A propagating."""
    if is_numeric(no_rag) and is_numeric(with_rag):
        return with_rag - no_rag
    return NOT_APPLICABLE


def run_ab_evaluation(
    judge: Judge,
    cases: Sequence[EvaluationRequest],
    similarity_provider: Provider | None = None,
    idf: IdfTable | None = None,
) -> list[EvalRecord]:
    """Judge each case without then with retrieval; one record per case.

    A failure on either branch marks only that row (``error`` set, scores
    NotApplicable); remaining cases still run. Explanations are compared via
    ``bertscore`` on ``similarity_provider`` token embeddings when one is
    given, otherwise the similarity column stays empty.
    """
    if not cases:
        raise ValueError("no evaluation cases supplied")
    records: list[EvalRecord] = []
    for case in cases:
        try:
            without = judge.evaluate(case.pillar, case, use_rag=False)
            with_rag = judge.evaluate(case.pillar, case, use_rag=True)
            similarity = None
            if similarity_provider is not None:
                similarity = bertscore(
                    similarity_provider.embed_tokens(with_rag.explanation),
                    similarity_provider.embed_tokens(without.explanation),
                    idf,
                ).f1
            records.append(
                EvalRecord(
                    test_id=case.test_id,
                    score_no_rag=without.score,
                    score_rag=with_rag.score,
                    delta=delta_score(without.score, with_rag.score),
                    similarity_f1=similarity,
                )
            )
        except Exception as exc:
            records.append(
                EvalRecord(
                    test_id=case.test_id,
                    score_no_rag=NOT_APPLICABLE,
                    score_rag=NOT_APPLICABLE,
                    delta=NOT_APPLICABLE,
                    similarity_f1=None,
                    error=str(exc) or type(exc).__name__,
                )
            )
    return records


_HEADERS = ("Test id.", "Score without RAG", "Score with RAG", "Δ Score", "Similarity")


def _delta_cell(record: EvalRecord) -> str:
    if record.error is not None:
        return "ERROR"
    if not is_numeric(record.delta):
        return "N/A"
    return f"{record.delta:+.2f}"


def _similarity_cell(record: EvalRecord) -> str:
    if record.error is not None:
        return "ERROR"
    if record.similarity_f1 is None:
        return "N/A"
    return f"{record.similarity_f1 * 100:.1f}%"


def _score_cell(record: EvalRecord, score: Score) -> str:
    return "ERROR" if record.error is not None else format_score(score)


def emit_table(records: Sequence[EvalRecord]) -> str:
    """Aligned plain-text table over the five comparison columns."""
    rows = [
        (
            r.test_id,
            _score_cell(r, r.score_no_rag),
            _score_cell(r, r.score_rag),
            _delta_cell(r),
            _similarity_cell(r),
        )
        for r in records
    ]
    widths = [
        max(len(_HEADERS[i]), *(len(row[i]) for row in rows)) if rows else len(_HEADERS[i])
        for i in range(len(_HEADERS))
    ]
    def line(cells: tuple[str, ...]) -> str:
        return "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(cells)).rstrip()

    out = [line(_HEADERS), line(tuple("-" * w for w in widths))]
    out.extend(line(row) for row in rows)
    return "\n".join(out)


def load_cases(path: str | Path) -> list[EvaluationRequest]:
    """Read evaluation cases from a JSONL file, one request object per line."""
    cases = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                cases.append(EvaluationRequest(**raw))
            except (json.JSONDecodeError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{line_no}: bad case record: {exc}") from exc
    return cases


def records_to_json(records: Sequence[EvalRecord]) -> str:
    payload = [
        {
            "test_id": r.test_id,
            "score_no_rag": score_to_json(r.score_no_rag),
            "score_rag": score_to_json(r.score_rag),
            "delta": score_to_json(r.delta),
            "similarity_f1": r.similarity_f1,
            "error": r.error,
        }
        for r in records
    ]
    return json.dumps(payload, indent=2, ensure_ascii=False)


def records_from_json(text: str) -> list[EvalRecord]:
    return [
        EvalRecord(
            test_id=entry["test_id"],
            score_no_rag=score_from_json(entry["score_no_rag"]),
            score_rag=score_from_json(entry["score_rag"]),
            delta=score_from_json(entry["delta"]),
            similarity_f1=entry["similarity_f1"],
            error=entry.get("error"),
        )
        for entry in json.loads(text)
    ]
