"""Shared scoring vocabulary: the four governance pillars and the score domain.

A score is either a float in [0, 1] or the distinguished ``NOT_APPLICABLE``
marker. The marker is deliberately not coerced to 0.0 anywhere: a judge that
declines to score is a different outcome than a judge that scores zero.
"""

from __future__ import annotations

from enum import Enum
from typing import Union


class Pillar(str, Enum):
    """The four normative dimensions every action is evaluated against."""

    SOVEREIGNTY = "SOV"
    CARBON = "CAR"
    COMPLIANCE = "COM"
    ETHICS = "ETH"

    @classmethod
    def from_code(cls, code: str) -> "Pillar":
        try:
            return cls(code.upper())
        except ValueError:
            raise ValueError(f"unknown pillar code: {code!r}") from None


# Fixed presentation order used by constraint lines, charts and tables.
PILLAR_ORDER: tuple[Pillar, ...] = (
    Pillar.SOVEREIGNTY,
    Pillar.CARBON,
    Pillar.COMPLIANCE,
    Pillar.ETHICS,
)


class NotApplicableType:
    """Singleton marker for verdicts the judge declined to score."""

    _instance: "NotApplicableType | None" = None

    def __new__(cls) -> "NotApplicableType":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "N/A"

    def __copy__(self) -> "NotApplicableType":
        return self

    def __deepcopy__(self, memo: dict) -> "NotApplicableType":
        return self


NOT_APPLICABLE = NotApplicableType()

Score = Union[float, NotApplicableType]


def is_numeric(score: Score) -> bool:
    """True when the score carries a number rather than the N/A marker."""
    return isinstance(score, (int, float)) and not isinstance(score, bool)


def validate_score(score: Score) -> Score:
    """Check the score domain invariant; returns the score unchanged."""
    if isinstance(score, NotApplicableType):
        return score
    if not is_numeric(score):
        raise ValueError(f"score must be a float or N/A, got {score!r}")
    if not 0.0 <= score <= 1.0:
        raise ValueError(f"numeric score outside [0, 1]: {score}")
    return score


def format_score(score: Score) -> str:
    """Render a score for constraint lines and tables ('0.50' or 'N/A')."""
    if isinstance(score, NotApplicableType):
        return "N/A"
    return f"{score:.2f}"


def score_to_json(score: Score) -> "float | str":
    """JSON value for a score: the number itself, or the string 'N/A'."""
    if isinstance(score, NotApplicableType):
        return "N/A"
    return float(score)


def score_from_json(value: "float | str") -> Score:
    """Inverse of :func:`score_to_json`."""
    if value == "N/A":
        return NOT_APPLICABLE
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"not a score value: {value!r}")
    return validate_score(float(value))
