"""One judge per pillar: render the pillar's prompt pair, call the provider,
parse the verdict.

Prompt templates are data, not code: a system/user text file pair per pillar
under ``templates/``, using the placeholder syntax ``{RAG1}`` and
``{keyword0}``..``{keyword5}``. Leading lines starting with ``#`` are header
metadata and are stripped on load.

Verdict completions are expected to be a JSON object with ``score`` and
``explanation`` keys, but models routinely wrap it in prose, leave trailing
commas, single-quote keys, or emit the bare token ``N/A``. The parser
extracts the first balanced object and applies those repairs in order; an
out-of-range score is rejected rather than clamped, because a judge emitting
1.5 signals a broken completion, not a strong approval.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import ClassVar, Sequence

from .provider import ChatMessage, GenerationParams, Provider, Role
from .rag import DEFAULT_TOP_K, KnowledgeBase, RagContext
from .scoring import NOT_APPLICABLE, Pillar, Score, validate_score

__all__ = [
    "EvaluationRequest",
    "Judgment",
    "PromptTemplate",
    "Judge",
    "load_templates",
    "render_prompt",
    "parse_judgment",
    "serialize_verdict",
    "ParseError",
    "NoJsonFound",
    "MissingKey",
    "ScoreOutOfRange",
    "MalformedJson",
    "UnboundPlaceholder",
    "JudgeFailure",
    "NO_CONTEXT_TEXT",
    "RETRY_SUFFIX",
]

NO_CONTEXT_TEXT = "No retrieval context available."

# Corrective line appended to the user prompt when the first completion
# could not be parsed.
RETRY_SUFFIX = "\nReturn only the JSON object."

_TEMPLATE_DIR = Path(__file__).parent / "templates"

_PLACEHOLDER_RE = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


class ParseError(Exception):
    """A completion could not be turned into a verdict."""


class NoJsonFound(ParseError):
    pass


class MissingKey(ParseError):
    pass


class ScoreOutOfRange(ParseError):
    pass


class MalformedJson(ParseError):
    pass


class UnboundPlaceholder(KeyError):
    """A template placeholder has no binding."""


class JudgeFailure(Exception):
    """Evaluation failed after the corrective retry; the cause is attached."""

    def __init__(self, pillar: Pillar, cause: Exception):
        super().__init__(f"{pillar.value} judge failed: {cause}")
        self.pillar = pillar
        self.cause = cause


@dataclass(frozen=True)
class EvaluationRequest:
    """The action under review, as submitted by the calling application."""

    test_id: str
    country: str
    generative_ai_model: str
    country_model: str
    country_data: str
    description: str

    _TEST_ID_RE: ClassVar[re.Pattern] = re.compile(r"^(SOV|CAR|COM|ETH)-\d{2}$")

    def __post_init__(self) -> None:
        for name in ("test_id", "country", "generative_ai_model", "country_model", "country_data", "description"):
            if not getattr(self, name):
                raise ValueError(f"request field {name!r} must be non-empty")
        if not self._TEST_ID_RE.match(self.test_id):
            raise ValueError(
                f"test_id {self.test_id!r} does not match PREFIX-NN with prefix SOV/CAR/COM/ETH"
            )

    @property
    def pillar(self) -> Pillar:
        return Pillar.from_code(self.test_id.split("-", 1)[0])

    def for_pillar(self, pillar: Pillar) -> "EvaluationRequest":
        """The same request re-labelled for another pillar's judge (SOV-05 -> CAR-05)."""
        suffix = self.test_id.split("-", 1)[1]
        return replace(self, test_id=f"{pillar.value}-{suffix}")

    def keyword_bindings(self) -> dict[str, str]:
        return {
            "keyword0": self.test_id,
            "keyword1": self.country,
            "keyword2": self.generative_ai_model,
            "keyword3": self.country_model,
            "keyword4": self.country_data,
            "keyword5": self.description,
        }


@dataclass(frozen=True)
class Judgment:
    """One pillar's verdict, with the raw completion retained for audit."""

    pillar: Pillar
    score: Score
    explanation: str
    rag_used: bool
    context: RagContext | None
    raw_completion: str

    def __post_init__(self) -> None:
        validate_score(self.score)
        if not self.explanation:
            raise ValueError("judgment explanation must be non-empty")


@dataclass(frozen=True)
class PromptTemplate:
    pillar: Pillar
    system_text: str
    user_text: str


def _strip_header(text: str) -> str:
    lines = text.splitlines()
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        i += 1
    if i:
        while i < len(lines) and not lines[i].strip():
            i += 1
    return "\n".join(lines[i:])


def load_templates(directory: str | Path | None = None) -> dict[Pillar, PromptTemplate]:
    """Load the per-pillar prompt pairs from a directory (packaged ones by default)."""
    base = Path(directory) if directory is not None else _TEMPLATE_DIR
    templates = {}
    for pillar in Pillar:
        code = pillar.value.lower()
        system_text = _strip_header((base / f"{code}_system.txt").read_text(encoding="utf-8")).rstrip("\n")
        user_text = _strip_header((base / f"{code}_user.txt").read_text(encoding="utf-8")).rstrip("\n")
        templates[pillar] = PromptTemplate(pillar=pillar, system_text=system_text, user_text=user_text)
    return templates


def render_prompt(
    template: PromptTemplate,
    request: EvaluationRequest,
    context: RagContext | None = None,
) -> tuple[str, str]:
    """Bind the request keywords and RAG context into the template's user text.

    Substitution is literal and single-pass: inserted values are never
    re-scanned for placeholders. The system text is returned untouched.
    """
    if template.pillar is not request.pillar:
        raise ValueError(
            f"template pillar {template.pillar.value} does not match request {request.test_id!r}"
        )
    bindings = request.keyword_bindings()
    bindings["RAG1"] = (
        context.key_points if context is not None and not context.is_empty else NO_CONTEXT_TEXT
    )

    def _substitute(match: re.Match) -> str:
        name = match.group(1)
        if name not in bindings:
            raise UnboundPlaceholder(name)
        return bindings[name]

    return template.system_text, _PLACEHOLDER_RE.sub(_substitute, template.user_text)


def _balanced_objects(text: str):
    """Yield the balanced {...} substrings of ``text`` in order of appearance."""
    start = text.find("{")
    while start != -1:
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
            elif ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    yield text[start : i + 1]
                    break
        start = text.find("{", start + 1)


_REPAIRS = (
    # trailing commas before a closing brace or bracket
    lambda s: re.sub(r",\s*([}\]])", r"\1", s),
    # single-quoted keys
    lambda s: re.sub(r"'([^'\\\n]*)'(\s*:)", r'"\1"\2', s),
    # single-quoted string values
    lambda s: re.sub(r"(:\s*)'([^'\\\n]*)'", r'\1"\2"', s),
    # the bare token N/A in value position
    lambda s: re.sub(r"(:\s*)N/A", r'\1"N/A"', s),
)


def _parse_object(candidate: str) -> dict | None:
    text = candidate
    for repair in (None, *_REPAIRS):
        if repair is not None:
            text = repair(text)
        try:
            obj = json.loads(text)
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
        return None
    return None


def parse_judgment(completion: str) -> tuple[Score, str]:
    """Extract (score, explanation) from a judge completion."""
    if not completion:
        raise NoJsonFound("completion is empty")
    candidates = list(_balanced_objects(completion))
    if not candidates:
        raise NoJsonFound("no balanced JSON object in completion")
    obj = None
    for candidate in candidates:
        obj = _parse_object(candidate)
        if obj is not None:
            break
    if obj is None:
        raise MalformedJson("balanced object found but not repairable into JSON")
    for key in ("score", "explanation"):
        if key not in obj:
            raise MissingKey(f"verdict object lacks {key!r}")
    score = _coerce_score(obj["score"])
    explanation = obj["explanation"]
    if not isinstance(explanation, str):
        raise MalformedJson(f"explanation must be a string, got {type(explanation).__name__}")
    return score, explanation


def _coerce_score(value: object) -> Score:
    if isinstance(value, str):
        if value.strip().upper() == "N/A":
            return NOT_APPLICABLE
        try:
            value = float(value)
        except ValueError:
            raise MalformedJson(f"score is not a number or N/A: {value!r}") from None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MalformedJson(f"score is not a number or N/A: {value!r}")
    if not 0.0 <= value <= 1.0:
        raise ScoreOutOfRange(f"score {value} outside [0, 1]")
    return float(value)


def serialize_verdict(score: Score, explanation: str) -> str:
    """Canonical JSON form of a verdict; ``parse_judgment`` round-trips it."""
    value = "N/A" if score is NOT_APPLICABLE else score
    return json.dumps({"score": value, "explanation": explanation}, ensure_ascii=False)


class Judge:
    """Stateless evaluator: safe for concurrent calls across pillars and requests."""

    def __init__(
        self,
        provider: Provider,
        templates: dict[Pillar, PromptTemplate] | None = None,
        knowledge_base: KnowledgeBase | None = None,
        params: GenerationParams | None = None,
        top_k: int = DEFAULT_TOP_K,
    ):
        self._provider = provider
        self._templates = templates or load_templates()
        self._kb = knowledge_base
        self._params = params or GenerationParams()
        self._top_k = top_k

    def evaluate(self, pillar: Pillar, request: EvaluationRequest, use_rag: bool) -> Judgment:
        try:
            return self._evaluate(pillar, request, use_rag)
        except JudgeFailure:
            raise
        except Exception as exc:
            raise JudgeFailure(pillar, exc) from exc

    def _evaluate(self, pillar: Pillar, request: EvaluationRequest, use_rag: bool) -> Judgment:
        context = None
        if use_rag:
            if self._kb is None:
                raise ValueError("RAG requested but no knowledge base is configured")
            context = self._kb.build_context(pillar, request.description, self._top_k)
        system_text, user_text = render_prompt(self._templates[pillar], request, context)
        completion = self._chat(system_text, user_text)
        try:
            score, explanation = parse_judgment(completion)
        except ParseError:
            completion = self._chat(system_text, user_text + RETRY_SUFFIX)
            score, explanation = parse_judgment(completion)
        return Judgment(
            pillar=pillar,
            score=score,
            explanation=explanation,
            rag_used=context is not None and not context.is_empty,
            context=context,
            raw_completion=completion,
        )

    def _chat(self, system_text: str, user_text: str) -> str:
        messages = [ChatMessage(Role.SYSTEM, system_text), ChatMessage(Role.USER, user_text)]
        return self._provider.chat(messages, self._params)
