"""Explainability artifacts for a synthesized decision.

Charts are hand-built SVG 1.1 strings: no plotting dependency, byte
reproducible, diff-testable. Bar heights and radar radii are exactly linear
in the score. Timestamps live only in the report metadata, never in SVG.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone

from .judge import EvaluationRequest
from .orchestrator import Clearance, SynthesisResult, aggregate_constraints
from .scoring import (
    NOT_APPLICABLE,
    PILLAR_ORDER,
    Pillar,
    Score,
    format_score,
    is_numeric,
    score_from_json,
    score_to_json,
)

__all__ = [
    "REPORT_SCHEMA_VERSION",
    "Report",
    "PillarOutcome",
    "render_bar_chart",
    "render_radar_chart",
    "build_report",
    "report_to_dict",
    "emit_report",
    "parse_report",
]

REPORT_SCHEMA_VERSION = "1"

BAR_WIDTH, BAR_HEIGHT = 600, 400
RADAR_SIZE = 500

# Plot geometry shared by the bar chart and its tests.
_PLOT_LEFT, _PLOT_RIGHT = 70, 570
_PLOT_TOP, _PLOT_BASE = 50, 340
BAR_MAX_EXTENT = _PLOT_BASE - _PLOT_TOP

_RADAR_CENTER = RADAR_SIZE / 2
RADAR_MAX_RADIUS = 180.0

# Axis directions at 90 degree intervals, in presentation order (top,
# right, bottom, left). Integer components keep coordinates exact.
_DIRECTIONS = ((0.0, -1.0), (1.0, 0.0), (0.0, 1.0), (-1.0, 0.0))

_GRID_LEVELS = (0.0, 0.25, 0.5, 0.75, 1.0)

_HATCH_DEF = (
    '<defs><pattern id="na-hatch" width="6" height="6" patternUnits="userSpaceOnUse"'
    ' patternTransform="rotate(45)"><line x1="0" y1="0" x2="0" y2="6"'
    ' stroke="#999999" stroke-width="2"/></pattern></defs>'
)

_BAR_FILL = "#4878a8"
_GRID_STROKE = "#cccccc"
_AXIS_STROKE = "#444444"


def _fmt(value: float) -> str:
    text = f"{value:.4f}".rstrip("0").rstrip(".")
    return text if text != "-0" else "0"


def _esc(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")
    )


def _svg_open(width: int, height: int) -> str:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}"'
        f' height="{height}" viewBox="0 0 {width} {height}">'
    )


def _check_result(result: SynthesisResult) -> None:
    missing = [p.value for p in PILLAR_ORDER if p not in result.judgments]
    if missing:
        raise ValueError(f"result missing pillars: {', '.join(missing)}")


def render_bar_chart(result: SynthesisResult) -> str:
    """Four bars in fixed pillar order; height is score times the plot extent."""
    _check_result(result)
    parts = [_svg_open(BAR_WIDTH, BAR_HEIGHT), _HATCH_DEF]
    parts.append(
        f'<rect x="0" y="0" width="{BAR_WIDTH}" height="{BAR_HEIGHT}" fill="#ffffff"/>'
    )
    parts.append(
        f'<text x="{BAR_WIDTH // 2}" y="28" text-anchor="middle" font-size="16"'
        f' font-family="sans-serif">Pillar scores: {_esc(result.request.test_id)}</text>'
    )
    for level in _GRID_LEVELS:
        y = _PLOT_BASE - level * BAR_MAX_EXTENT
        parts.append(
            f'<line x1="{_PLOT_LEFT}" y1="{_fmt(y)}" x2="{_PLOT_RIGHT}" y2="{_fmt(y)}"'
            f' stroke="{_GRID_STROKE}" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_PLOT_LEFT - 8}" y="{_fmt(y + 4)}" text-anchor="end" font-size="11"'
            f' font-family="sans-serif">{level:.2f}</text>'
        )
    slot = (_PLOT_RIGHT - _PLOT_LEFT) / len(PILLAR_ORDER)
    bar_width = 70.0
    for i, pillar in enumerate(PILLAR_ORDER):
        score = result.judgments[pillar].score
        x = _PLOT_LEFT + i * slot + (slot - bar_width) / 2
        if is_numeric(score):
            height = score * BAR_MAX_EXTENT
            fill = _BAR_FILL
        else:
            height = 0.0
            fill = "url(#na-hatch)"
        y = _PLOT_BASE - height
        parts.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(bar_width)}"'
            f' height="{_fmt(height)}" fill="{fill}" stroke="{_AXIS_STROKE}" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_fmt(x + bar_width / 2)}" y="{_fmt(y - 6)}" text-anchor="middle"'
            f' font-size="12" font-family="sans-serif">{format_score(score)}</text>'
        )
        parts.append(
            f'<text x="{_fmt(x + bar_width / 2)}" y="{_PLOT_BASE + 20}" text-anchor="middle"'
            f' font-size="13" font-family="sans-serif">{pillar.value}</text>'
        )
    parts.append(
        f'<line x1="{_PLOT_LEFT}" y1="{_PLOT_BASE}" x2="{_PLOT_RIGHT}" y2="{_PLOT_BASE}"'
        f' stroke="{_AXIS_STROKE}" stroke-width="1"/>'
    )
    parts.append("</svg>")
    return "\n".join(parts)


def render_radar_chart(result: SynthesisResult) -> str:
    """Four axes at right angles; vertex radius is score times the max radius."""
    _check_result(result)
    cx = cy = _RADAR_CENTER
    parts = [_svg_open(RADAR_SIZE, RADAR_SIZE)]
    parts.append(
        f'<rect x="0" y="0" width="{RADAR_SIZE}" height="{RADAR_SIZE}" fill="#ffffff"/>'
    )
    parts.append(
        f'<text x="{RADAR_SIZE // 2}" y="26" text-anchor="middle" font-size="16"'
        f' font-family="sans-serif">Pillar scores: {_esc(result.request.test_id)}</text>'
    )
    for level in _GRID_LEVELS[1:]:
        radius = level * RADAR_MAX_RADIUS
        points = " ".join(
            f"{_fmt(cx + dx * radius)},{_fmt(cy + dy * radius)}" for dx, dy in _DIRECTIONS
        )
        parts.append(
            f'<polygon points="{points}" fill="none" stroke="{_GRID_STROKE}" stroke-width="1"/>'
        )
    for dx, dy in _DIRECTIONS:
        parts.append(
            f'<line x1="{_fmt(cx)}" y1="{_fmt(cy)}" x2="{_fmt(cx + dx * RADAR_MAX_RADIUS)}"'
            f' y2="{_fmt(cy + dy * RADAR_MAX_RADIUS)}" stroke="{_GRID_STROKE}" stroke-width="1"/>'
        )
    vertices = []
    labels = []
    for (dx, dy), pillar in zip(_DIRECTIONS, PILLAR_ORDER):
        score = result.judgments[pillar].score
        radius = score * RADAR_MAX_RADIUS if is_numeric(score) else 0.0
        vertices.append(f"{_fmt(cx + dx * radius)},{_fmt(cy + dy * radius)}")
        lx = cx + dx * (RADAR_MAX_RADIUS + 28)
        ly = cy + dy * (RADAR_MAX_RADIUS + 28)
        labels.append(
            f'<text x="{_fmt(lx)}" y="{_fmt(ly + 5)}" text-anchor="middle" font-size="13"'
            f' font-family="sans-serif">{pillar.value} {format_score(score)}</text>'
        )
    parts.append(
        f'<polygon points="{" ".join(vertices)}" fill="#4878a8" fill-opacity="0.35"'
        f' stroke="{_BAR_FILL}" stroke-width="2"/>'
    )
    parts.extend(labels)
    parts.append("</svg>")
    return "\n".join(parts)


@dataclass(frozen=True)
class PillarOutcome:
    score: Score
    explanation: str
    rag_used: bool


@dataclass(frozen=True)
class Report:
    """Machine-readable account of one synthesized decision (schema v1)."""

    schema_version: str
    request: EvaluationRequest
    outcomes: dict[Pillar, PillarOutcome]
    aggregate: Score
    clearance: Clearance
    violations: tuple[tuple[Pillar, float, float], ...]
    conflicts: tuple[tuple[Pillar, Pillar, float], ...]
    generated_at: str
    provider_id: str
    model_id: str


def build_report(
    result: SynthesisResult,
    provider_id: str = "",
    model_id: str = "",
    generated_at: str | None = None,
) -> Report:
    if generated_at is None:
        generated_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
    outcomes = {
        p: PillarOutcome(
            score=result.judgments[p].score,
            explanation=result.judgments[p].explanation,
            rag_used=result.judgments[p].rag_used,
        )
        for p in PILLAR_ORDER
    }
    return Report(
        schema_version=REPORT_SCHEMA_VERSION,
        request=result.request,
        outcomes=outcomes,
        aggregate=result.aggregate,
        clearance=result.clearance,
        violations=result.violations,
        conflicts=result.conflicts,
        generated_at=generated_at,
        provider_id=provider_id,
        model_id=model_id,
    )


def report_to_dict(report: Report) -> dict:
    return {
        "schema_version": report.schema_version,
        "request": {
            "test_id": report.request.test_id,
            "country": report.request.country,
            "generative_ai_model": report.request.generative_ai_model,
            "country_model": report.request.country_model,
            "country_data": report.request.country_data,
            "description": report.request.description,
        },
        "pillars": {
            p.value: {
                "score": score_to_json(report.outcomes[p].score),
                "explanation": report.outcomes[p].explanation,
                "rag_used": report.outcomes[p].rag_used,
            }
            for p in PILLAR_ORDER
        },
        "aggregate": score_to_json(report.aggregate),
        "clearance": report.clearance.value,
        "violations": [
            {"pillar": p.value, "score": score, "threshold": threshold}
            for p, score, threshold in report.violations
        ],
        "conflicts": [
            {"first": a.value, "second": b.value, "gap": gap} for a, b, gap in report.conflicts
        ],
        "generated_at": report.generated_at,
        "provider_id": report.provider_id,
        "model_id": report.model_id,
    }


def parse_report(text: str) -> Report:
    """Inverse of the structured ``emit_report`` output."""
    data = json.loads(text)
    if data.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise ValueError(f"unsupported report schema: {data.get('schema_version')!r}")
    request = EvaluationRequest(**data["request"])
    outcomes = {
        Pillar.from_code(code): PillarOutcome(
            score=score_from_json(entry["score"]),
            explanation=entry["explanation"],
            rag_used=bool(entry["rag_used"]),
        )
        for code, entry in data["pillars"].items()
    }
    return Report(
        schema_version=data["schema_version"],
        request=request,
        outcomes=outcomes,
        aggregate=score_from_json(data["aggregate"]),
        clearance=Clearance(data["clearance"]),
        violations=tuple(
            (Pillar.from_code(v["pillar"]), float(v["score"]), float(v["threshold"]))
            for v in data["violations"]
        ),
        conflicts=tuple(
            (Pillar.from_code(c["first"]), Pillar.from_code(c["second"]), float(c["gap"]))
            for c in data["conflicts"]
        ),
        generated_at=data["generated_at"],
        provider_id=data["provider_id"],
        model_id=data["model_id"],
    )


def emit_report(
    result: SynthesisResult,
    format: str = "structured",
    provider_id: str = "",
    model_id: str = "",
    generated_at: str | None = None,
) -> str:
    """Serialize the decision as schema-v1 JSON or as a human-readable summary."""
    report = build_report(result, provider_id, model_id, generated_at)
    if format == "structured":
        return json.dumps(report_to_dict(report), indent=2, ensure_ascii=False)
    if format == "markdown":
        return _to_markdown(report, result)
    raise ValueError(f"unknown report format: {format!r}")


def _to_markdown(report: Report, result: SynthesisResult) -> str:
    aggregate = (
        "N/A" if report.aggregate is NOT_APPLICABLE else _fmt(float(report.aggregate))
    )
    lines = [
        f"# Governance report: {report.request.test_id}",
        "",
        f"- Clearance: **{report.clearance.value}**",
        f"- Aggregate score: {aggregate}",
        f"- Generated at: {report.generated_at}",
    ]
    if report.provider_id or report.model_id:
        lines.append(f"- Provider: {report.provider_id} / model: {report.model_id}")
    lines += ["", "## Constraints", ""]
    lines += [f"- {line}" for line in aggregate_constraints(result.judgments)]
    if report.violations:
        lines += ["", "## Violations", ""]
        lines += [
            f"- {p.value}: score {format_score(score)} below threshold {format_score(threshold)}"
            for p, score, threshold in report.violations
        ]
    if report.conflicts:
        lines += ["", "## Conflicts", ""]
        lines += [
            f"- {a.value} vs {b.value}: gap {format_score(gap)}" for a, b, gap in report.conflicts
        ]
    lines += ["", f"Request description: {report.request.description}", ""]
    return "\n".join(lines)
