"""Fan a request out to the four pillar judges, synthesize the gated decision.

The synthesis is all-or-nothing: if any judge fails, no partial result is
produced, because a governance gate must not silently approve on partial
information. Gating is strict-less-than: a score equal to its threshold
passes.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

from .judge import EvaluationRequest, Judge, Judgment
from .scoring import (
    NOT_APPLICABLE,
    PILLAR_ORDER,
    Pillar,
    Score,
    format_score,
    is_numeric,
)

__all__ = [
    "NaPolicy",
    "Clearance",
    "SynthesisPolicy",
    "SynthesisResult",
    "Orchestrator",
    "synthesize",
    "aggregate_constraints",
    "OrchestrationFailure",
    "MissingPillar",
]

_WEIGHT_SUM_TOL = 1e-9


class NaPolicy(str, Enum):
    """How an N/A verdict affects the gate: block for review, or stay neutral."""

    BLOCKING = "blocking"
    NEUTRAL = "neutral"


class Clearance(str, Enum):
    APPROVED = "Approved"
    REJECTED = "Rejected"
    INDETERMINATE = "Indeterminate"


class OrchestrationFailure(Exception):
    """One or more judges failed; carries the per-pillar failure set."""

    def __init__(self, failures: dict[Pillar, Exception]):
        names = ", ".join(p.value for p in PILLAR_ORDER if p in failures)
        super().__init__(f"judges failed for: {names}")
        self.failures = failures


class MissingPillar(KeyError):
    pass


@dataclass(frozen=True)
class SynthesisPolicy:
    """Weights, per-pillar gates, conflict sensitivity and N/A handling."""

    weights: dict[Pillar, float]
    thresholds: dict[Pillar, float]
    conflict_gap: float = 0.5
    na_policy: NaPolicy = NaPolicy.BLOCKING

    def __post_init__(self) -> None:
        for mapping, label in ((self.weights, "weights"), (self.thresholds, "thresholds")):
            missing = [p.value for p in PILLAR_ORDER if p not in mapping]
            if missing:
                raise ValueError(f"{label} missing pillars: {', '.join(missing)}")
        if any(w < 0 for w in self.weights.values()):
            raise ValueError("weights must be non-negative")
        total = sum(self.weights.values())
        if abs(total - 1.0) > _WEIGHT_SUM_TOL:
            raise ValueError(f"weights must sum to 1, got {total}")
        if any(not 0.0 <= t <= 1.0 for t in self.thresholds.values()):
            raise ValueError("thresholds must lie in [0, 1]")
        if not 0.0 < self.conflict_gap <= 1.0:
            raise ValueError("conflict_gap must lie in (0, 1]")

    @classmethod
    def default(cls) -> "SynthesisPolicy":
        return cls(
            weights={p: 0.25 for p in Pillar},
            thresholds={p: 0.5 for p in Pillar},
            conflict_gap=0.5,
            na_policy=NaPolicy.BLOCKING,
        )


@dataclass(frozen=True)
class SynthesisResult:
    request: EvaluationRequest
    judgments: dict[Pillar, Judgment]
    aggregate: Score
    clearance: Clearance
    violations: tuple[tuple[Pillar, float, float], ...]
    conflicts: tuple[tuple[Pillar, Pillar, float], ...]


def synthesize(
    request: EvaluationRequest,
    judgments: dict[Pillar, Judgment],
    policy: SynthesisPolicy,
) -> SynthesisResult:
    """Combine four judgments into the weighted, gated decision."""
    missing = [p.value for p in PILLAR_ORDER if p not in judgments]
    if missing:
        raise MissingPillar(f"judgments missing pillars: {', '.join(missing)}")

    numeric = {p: j.score for p, j in judgments.items() if is_numeric(j.score)}

    if len(numeric) == len(PILLAR_ORDER):
        aggregate: Score = sum(policy.weights[p] * numeric[p] for p in PILLAR_ORDER)
    else:
        aggregate = NOT_APPLICABLE

    violations = tuple(
        (p, numeric[p], policy.thresholds[p])
        for p in PILLAR_ORDER
        if p in numeric and numeric[p] < policy.thresholds[p]
    )

    conflicts = []
    for i, a in enumerate(PILLAR_ORDER):
        for b in PILLAR_ORDER[i + 1 :]:
            if a in numeric and b in numeric:
                gap = abs(numeric[a] - numeric[b])
                if gap >= policy.conflict_gap:
                    conflicts.append((a, b, gap))

    if violations:
        clearance = Clearance.REJECTED
    elif len(numeric) < len(PILLAR_ORDER) and policy.na_policy is NaPolicy.BLOCKING:
        clearance = Clearance.INDETERMINATE
    else:
        clearance = Clearance.APPROVED

    return SynthesisResult(
        request=request,
        judgments=dict(judgments),
        aggregate=aggregate,
        clearance=clearance,
        violations=violations,
        conflicts=tuple(conflicts),
    )


def aggregate_constraints(judgments: dict[Pillar, Judgment]) -> list[str]:
    """Deterministically ordered 'PILLAR [score]: explanation' display lines."""
    missing = [p.value for p in PILLAR_ORDER if p not in judgments]
    if missing:
        raise MissingPillar(f"judgments missing pillars: {', '.join(missing)}")
    return [
        f"{p.value} [{format_score(judgments[p].score)}]: {judgments[p].explanation}"
        for p in PILLAR_ORDER
    ]


class Orchestrator:
    """Owns the four judge branches; applications call ``synchronise`` and gate
    on ``get_ethical_clearance``."""

    def __init__(self, judge: Judge, policy: SynthesisPolicy | None = None, max_workers: int = 4):
        self._judge = judge
        self._policy = policy or SynthesisPolicy.default()
        self._max_workers = max(1, max_workers)

    @property
    def policy(self) -> SynthesisPolicy:
        return self._policy

    def synchronise(
        self,
        request: EvaluationRequest,
        use_rag: bool = False,
        policy: SynthesisPolicy | None = None,
    ) -> SynthesisResult:
        """Evaluate all four pillars concurrently and synthesize the decision."""
        policy = policy or self._policy
        # Each branch sees the request re-labelled with its own pillar prefix,
        # so a SOV-05 submission is judged as CAR-05 by the carbon judge.
        branches = {p: request.for_pillar(p) for p in PILLAR_ORDER}

        judgments: dict[Pillar, Judgment] = {}
        failures: dict[Pillar, Exception] = {}
        with ThreadPoolExecutor(max_workers=self._max_workers) as pool:
            futures = {
                p: pool.submit(self._judge.evaluate, p, branches[p], use_rag)
                for p in PILLAR_ORDER
            }
            for pillar, future in futures.items():
                try:
                    judgments[pillar] = future.result()
                except Exception as exc:
                    failures[pillar] = exc
        if failures:
            raise OrchestrationFailure(failures)
        return synthesize(request, judgments, policy)

    def get_ethical_clearance(self, result: SynthesisResult) -> Clearance:
        """The single gate call inheriting applications consume."""
        return result.clearance
