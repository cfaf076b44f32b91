"""Weighted synthesis, gating, conflicts, concurrent fan-out."""

from __future__ import annotations

import pytest

from compass.judge import Judge, JudgeFailure
from compass.orchestrator import (
    Clearance,
    MissingPillar,
    NaPolicy,
    OrchestrationFailure,
    Orchestrator,
    SynthesisPolicy,
    aggregate_constraints,
    synthesize,
)
from compass.provider import ScriptedProvider
from compass.scoring import NOT_APPLICABLE, PILLAR_ORDER, Pillar

from conftest import judgments_for, make_request, script_judgments

SOV, CAR, COM, ETH = PILLAR_ORDER


def scores(sov, car, com, eth):
    return {SOV: sov, CAR: car, COM: com, ETH: eth}


class TestSynthesisPolicy:
    def test_default_values(self):
        policy = SynthesisPolicy.default()
        assert all(policy.weights[p] == 0.25 for p in PILLAR_ORDER)
        assert all(policy.thresholds[p] == 0.5 for p in PILLAR_ORDER)
        assert policy.conflict_gap == 0.5
        assert policy.na_policy is NaPolicy.BLOCKING

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            SynthesisPolicy(
                weights=scores(0.5, 0.5, 0.5, 0.5),
                thresholds=scores(0.5, 0.5, 0.5, 0.5),
            )

    def test_all_pillars_required(self):
        with pytest.raises(ValueError):
            SynthesisPolicy(
                weights={SOV: 0.5, CAR: 0.5},
                thresholds=scores(0.5, 0.5, 0.5, 0.5),
            )

    def test_threshold_range_checked(self):
        with pytest.raises(ValueError):
            SynthesisPolicy(
                weights=scores(0.25, 0.25, 0.25, 0.25),
                thresholds=scores(0.5, 0.5, 1.5, 0.5),
            )

    def test_conflict_gap_range(self):
        for bad in (0.0, 1.1, -0.5):
            with pytest.raises(ValueError):
                SynthesisPolicy(
                    weights=scores(0.25, 0.25, 0.25, 0.25),
                    thresholds=scores(0.5, 0.5, 0.5, 0.5),
                    conflict_gap=bad,
                )


class TestSynthesize:
    def test_row_05_rejection(self):
        result = synthesize(
            make_request("SOV-05"),
            judgments_for(scores(0.50, 0.50, 0.25, 0.50)),
            SynthesisPolicy.default(),
        )
        assert result.aggregate == pytest.approx(0.4375, abs=1e-12)
        assert result.clearance is Clearance.REJECTED
        assert result.violations == ((COM, 0.25, 0.5),)
        assert result.conflicts == ()

    def test_score_equal_to_threshold_passes(self):
        result = synthesize(
            make_request(), judgments_for(scores(0.5, 0.5, 0.5, 0.5)), SynthesisPolicy.default()
        )
        assert result.clearance is Clearance.APPROVED
        assert result.violations == ()
        assert result.aggregate == pytest.approx(0.5)

    def test_all_zero_scores(self):
        result = synthesize(
            make_request(), judgments_for(scores(0.0, 0.0, 0.0, 0.0)), SynthesisPolicy.default()
        )
        assert result.aggregate == 0.0
        assert len(result.violations) == 4

    def test_weighted_aggregate(self):
        policy = SynthesisPolicy(
            weights=scores(0.4, 0.3, 0.2, 0.1),
            thresholds=scores(0.0, 0.0, 0.0, 0.0),
        )
        result = synthesize(
            make_request(), judgments_for(scores(1.0, 0.5, 0.25, 0.0)), policy
        )
        assert result.aggregate == pytest.approx(0.4 + 0.15 + 0.05, abs=1e-12)

    def test_conflicts_every_pair_with_outlier(self):
        result = synthesize(
            make_request(), judgments_for(scores(1.0, 0.0, 1.0, 1.0)), SynthesisPolicy.default()
        )
        assert result.conflicts == (
            (SOV, CAR, 1.0),
            (CAR, COM, 1.0),
            (CAR, ETH, 1.0),
        )

    def test_na_blocking_is_indeterminate(self):
        result = synthesize(
            make_request(),
            judgments_for(scores(0.75, 0.75, 0.75, NOT_APPLICABLE)),
            SynthesisPolicy.default(),
        )
        assert result.clearance is Clearance.INDETERMINATE
        assert result.aggregate is NOT_APPLICABLE

    def test_na_neutral_can_approve(self):
        policy = SynthesisPolicy(
            weights=scores(0.25, 0.25, 0.25, 0.25),
            thresholds=scores(0.5, 0.5, 0.5, 0.5),
            na_policy=NaPolicy.NEUTRAL,
        )
        result = synthesize(
            make_request(), judgments_for(scores(0.75, 0.75, 0.75, NOT_APPLICABLE)), policy
        )
        assert result.clearance is Clearance.APPROVED
        assert result.aggregate is NOT_APPLICABLE

    def test_violation_beats_na(self):
        result = synthesize(
            make_request(),
            judgments_for(scores(0.25, 0.75, 0.75, NOT_APPLICABLE)),
            SynthesisPolicy.default(),
        )
        assert result.clearance is Clearance.REJECTED
        assert result.violations == ((SOV, 0.25, 0.5),)

    def test_na_excluded_from_conflicts(self):
        result = synthesize(
            make_request(),
            judgments_for(scores(1.0, NOT_APPLICABLE, 1.0, 1.0)),
            SynthesisPolicy.default(),
        )
        assert result.conflicts == ()


class TestAggregateConstraints:
    def test_order_and_format(self):
        lines = aggregate_constraints(judgments_for(scores(1.0, 0.5, 0.25, 0.0)))
        assert lines[0].startswith("SOV [1.00]: ")
        assert lines[1].startswith("CAR [0.50]: ")
        assert lines[2].startswith("COM [0.25]: ")
        assert lines[3].startswith("ETH [0.00]: ")

    def test_na_rendered(self):
        lines = aggregate_constraints(judgments_for(scores(0.5, 0.5, NOT_APPLICABLE, 0.5)))
        assert lines[2].startswith("COM [N/A]: ")

    def test_missing_pillar_raises(self):
        judgments = judgments_for(scores(0.5, 0.5, 0.5, 0.5))
        del judgments[ETH]
        with pytest.raises(MissingPillar):
            aggregate_constraints(judgments)


class TestSynchronise:
    def test_concurrent_fan_out_matches_scripted_scores(self, templates):
        request = make_request("SOV-05")
        provider = script_judgments(templates, request, scores(0.50, 0.50, 0.25, 0.50))
        orchestrator = Orchestrator(Judge(provider, templates=templates))
        result = orchestrator.synchronise(request, use_rag=False)
        assert result.aggregate == pytest.approx(0.4375)
        assert result.clearance is Clearance.REJECTED
        assert {p: j.score for p, j in result.judgments.items()} == scores(0.50, 0.50, 0.25, 0.50)
        assert result.request is request

    def test_branches_keep_suffix(self, templates):
        request = make_request("SOV-09")
        provider = script_judgments(templates, request, scores(1.0, 1.0, 1.0, 1.0))
        orchestrator = Orchestrator(Judge(provider, templates=templates))
        result = orchestrator.synchronise(request, use_rag=False)
        # The branch fixtures only exist for CAR-09/COM-09/ETH-09, so reaching
        # them proves the per-pillar test id rewrite happened.
        assert result.clearance is Clearance.APPROVED

    def test_all_or_nothing_on_failure(self, templates):
        request = make_request("SOV-05")
        provider = script_judgments(templates, request, scores(0.5, 0.5, 0.5, 0.5))
        # Drop the COM fixture to make exactly one branch fail.
        from compass.judge import render_prompt

        system, user = render_prompt(templates[COM], request.for_pillar(COM), None)
        from compass.provider import chat_fingerprint

        del provider._replies[chat_fingerprint(system, user)]
        orchestrator = Orchestrator(Judge(provider, templates=templates))
        with pytest.raises(OrchestrationFailure) as info:
            orchestrator.synchronise(request, use_rag=False)
        assert set(info.value.failures) == {COM}
        assert isinstance(info.value.failures[COM], JudgeFailure)

    def test_get_ethical_clearance_projection(self, templates):
        request = make_request("SOV-05")
        provider = script_judgments(templates, request, scores(0.9, 0.9, 0.9, 0.9))
        orchestrator = Orchestrator(Judge(provider, templates=templates))
        result = orchestrator.synchronise(request, use_rag=False)
        assert orchestrator.get_ethical_clearance(result) is Clearance.APPROVED
        assert result.clearance is Clearance.APPROVED

    def test_policy_override_per_call(self, templates):
        request = make_request("SOV-05")
        provider = script_judgments(templates, request, scores(0.6, 0.6, 0.6, 0.6))
        orchestrator = Orchestrator(Judge(provider, templates=templates))
        strict = SynthesisPolicy(
            weights=scores(0.25, 0.25, 0.25, 0.25),
            thresholds=scores(0.9, 0.9, 0.9, 0.9),
        )
        assert orchestrator.synchronise(request, use_rag=False).clearance is Clearance.APPROVED
        assert (
            orchestrator.synchronise(request, use_rag=False, policy=strict).clearance
            is Clearance.REJECTED
        )
