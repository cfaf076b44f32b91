"""Shared builders for scripted-provider tests."""

from __future__ import annotations

import math
import re

import numpy as np
import pytest

from compass import (
    NOT_APPLICABLE,
    PILLAR_ORDER,
    EvaluationRequest,
    Judgment,
    Pillar,
    ScriptedProvider,
    load_templates,
    render_prompt,
)
from compass.judge import serialize_verdict
from compass.scoring import Score


@pytest.fixture(scope="session")
def templates():
    return load_templates()


def make_request(test_id: str = "SOV-05", description: str = "Deploy a chatbot") -> EvaluationRequest:
    return EvaluationRequest(
        test_id=test_id,
        country="Canada",
        generative_ai_model="Google Gemini",
        country_model="France",
        country_data="Canada",
        description=description,
    )


@pytest.fixture
def table3_request() -> EvaluationRequest:
    return EvaluationRequest(
        test_id="SOV-02",
        country="Canada",
        generative_ai_model="Google Gemini",
        country_model="France",
        country_data="Canada",
        description="Building a cloud-based AI chatbot for customer support automation",
    )


def make_judgment(pillar: Pillar, score: Score, explanation: str = "because") -> Judgment:
    return Judgment(
        pillar=pillar,
        score=score,
        explanation=explanation,
        rag_used=False,
        context=None,
        raw_completion=serialize_verdict(score, explanation),
    )


def judgments_for(scores: dict[Pillar, Score]) -> dict[Pillar, Judgment]:
    return {p: make_judgment(p, s, f"{p.value} rationale") for p, s in scores.items()}


def script_judgments(
    templates,
    request: EvaluationRequest,
    scores: dict[Pillar, Score],
    explanations: dict[Pillar, str] | None = None,
    provider: ScriptedProvider | None = None,
) -> ScriptedProvider:
    """Register no-RAG chat fixtures answering every pillar branch of a request."""
    provider = provider or ScriptedProvider()
    for pillar in PILLAR_ORDER:
        branch = request.for_pillar(pillar)
        system, user = render_prompt(templates[pillar], branch, None)
        explanation = (explanations or {}).get(pillar, f"Scripted {pillar.value} rationale.")
        provider.add_chat_fixture(system, user, serialize_verdict(scores[pillar], explanation))
    return provider


def unit_vector(dim: int, axis: int) -> list[float]:
    vec = [0.0] * dim
    vec[axis] = 1.0
    return vec


def random_unit_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    rows = rng.normal(size=(n, dim))
    # Re-draw the (measure-zero) degenerate rows instead of normalizing junk.
    norms = np.linalg.norm(rows, axis=1)
    while np.any(norms < 1e-12):
        rows[norms < 1e-12] = rng.normal(size=(int(np.sum(norms < 1e-12)), dim))
        norms = np.linalg.norm(rows, axis=1)
    return rows / norms[:, None]


def assert_close(a: float, b: float, tol: float) -> None:
    assert math.isfinite(a) and math.isfinite(b)
    assert abs(a - b) <= tol, f"|{a} - {b}| > {tol}"


_CRITERION_PATTERN = re.compile(r"::test_criterion_(\d+)_(\w+)")
_criterion_outcomes: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    match = _CRITERION_PATTERN.search(report.nodeid)
    if match:
        number = int(match.group(1))
        label = match.group(2).replace("_", " ")
        _criterion_outcomes[number] = (report.outcome, label)


def pytest_terminal_summary(terminalreporter):
    if not _criterion_outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criterion_outcomes):
        outcome, label = _criterion_outcomes[number]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {verdict} - {label}")
