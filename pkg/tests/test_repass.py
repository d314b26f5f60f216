"""Answer-stability scoring: sentence splitting, components, composite."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import pytest

from regrag.errors import ContractError, TransportError
from regrag.raggen import AnswerRecord
from regrag.repass import (
    HttpNliScorer,
    NliScores,
    PerfectMatchNli,
    contradiction_score,
    entailment_score,
    evaluate_answers,
    extract_obligations,
    obligation_coverage,
    repass_score,
    report_to_json,
    split_sentences,
)

from conftest import make_corpus


class TestSplitSentences:
    def test_two_sentences(self):
        assert split_sentences("A must disclose. B may not.") == [
            "A must disclose.",
            "B may not.",
        ]

    def test_section_identifier_never_splits(self):
        assert split_sentences("See Rule 7.3.4 for details.") == [
            "See Rule 7.3.4 for details."
        ]

    def test_empty(self):
        assert split_sentences("") == []

    def test_decimal_numbers_survive(self):
        assert split_sentences("The ratio is 3.14 exactly.") == ["The ratio is 3.14 exactly."]

    def test_lowercase_continuation_does_not_split(self):
        assert split_sentences("This cites op. cit. and more.") == [
            "This cites op. cit. and more."
        ]

    def test_exclamation_and_question(self):
        assert split_sentences("Stop! Why? Because rules.") == [
            "Stop!",
            "Why?",
            "Because rules.",
        ]

    def test_no_terminal_punctuation(self):
        assert split_sentences("tail without punctuation") == ["tail without punctuation"]

    def test_newline_boundary(self):
        assert split_sentences("First rule.\nSecond rule.") == ["First rule.", "Second rule."]


class TestEntailment:
    def test_verbatim_answer_scores_one(self):
        passages = ["A Person must disclose holdings. Another sentence here."]
        answer = "A Person must disclose holdings."
        assert entailment_score(answer, passages, PerfectMatchNli()) == 1.0

    def test_unrelated_answer_scores_zero(self):
        passages = ["A Person must disclose holdings."]
        answer = "Totally different content."
        assert entailment_score(answer, passages, PerfectMatchNli()) == 0.0

    def test_half_supported_answer(self):
        passages = ["A Person must disclose holdings."]
        answer = "A Person must disclose holdings. Invented extra claim."
        assert entailment_score(answer, passages, PerfectMatchNli()) == 0.5


@dataclass
class FixedNli:
    """Test double returning a fixed triple for chosen hypotheses."""

    contradicted: frozenset[str] = frozenset()

    def score_pairs(self, pairs: Sequence[tuple[str, str]]) -> list[NliScores]:
        return [
            NliScores(0.0, 1.0, 0.0) if hyp in self.contradicted else NliScores(0.0, 0.0, 1.0)
            for _, hyp in pairs
        ]


class TestContradiction:
    def test_no_contradictions(self):
        passages = ["A Person must disclose holdings."]
        answer = "Anything at all."
        assert contradiction_score(answer, passages, PerfectMatchNli()) == 0.0

    def test_one_of_two_sentences_contradicts(self):
        passages = ["A Person must disclose holdings."]
        answer = "First claim. Second claim."
        nli = FixedNli(contradicted=frozenset(["Second claim."]))
        assert contradiction_score(answer, passages, nli) == 0.5


class TestExtractObligations:
    def test_must_sentence_extracted(self):
        assert extract_obligations(["A Person must disclose holdings."]) == [
            "A Person must disclose holdings."
        ]

    def test_descriptive_sentence_not_extracted(self):
        assert extract_obligations(["This chapter describes definitions."]) == []

    def test_mixed_passage(self):
        passage = (
            "This chapter has five parts. A Person must disclose holdings. "
            "Definitions appear in the glossary. An Insurer shall maintain records. "
            "Examples are illustrative."
        )
        assert extract_obligations([passage]) == [
            "A Person must disclose holdings.",
            "An Insurer shall maintain records.",
        ]

    def test_marker_requires_word_boundary(self):
        assert extract_obligations(["The mustard clause is descriptive."]) == []

    def test_multi_word_markers(self):
        assert extract_obligations(["A Firm is required to notify the Regulator."]) == [
            "A Firm is required to notify the Regulator."
        ]


class TestObligationCoverage:
    def test_vacuous_coverage(self):
        assert obligation_coverage("Any answer.", ["Purely descriptive text."], PerfectMatchNli()) == 1.0

    def test_half_coverage(self):
        passages = ["A must disclose. B shall record."]
        answer = "A must disclose."
        assert obligation_coverage(answer, passages, PerfectMatchNli()) == 0.5

    def test_full_coverage(self):
        passages = ["A must disclose. B shall record."]
        answer = "A must disclose. B shall record."
        assert obligation_coverage(answer, passages, PerfectMatchNli()) == 1.0

    def test_tau_validation(self):
        with pytest.raises(ContractError):
            obligation_coverage("x.", ["y."], PerfectMatchNli(), tau=0.0)


class TestComposite:
    def test_reference_row_baseline(self):
        assert repass_score(0.78, 0.24, 0.20) == pytest.approx(0.58, abs=0.005)

    def test_reference_row_best_system(self):
        assert repass_score(0.58, 0.21, 0.33) == pytest.approx(0.57, abs=0.005)

    def test_perfect_answer(self):
        assert repass_score(1.0, 0.0, 1.0) == 1.0

    def test_monotonicity(self):
        base = repass_score(0.5, 0.5, 0.5)
        assert repass_score(0.6, 0.5, 0.5) > base
        assert repass_score(0.5, 0.6, 0.5) < base
        assert repass_score(0.5, 0.5, 0.6) > base

    def test_input_validation(self):
        with pytest.raises(ContractError):
            repass_score(1.2, 0.0, 0.0)


class TestEvaluateAnswers:
    def make_records_and_corpus(self):
        corpus = make_corpus(
            [
                "A Person must disclose holdings. This rule is strict.",
                "An Insurer shall maintain records.",
            ]
        )
        return corpus

    def test_perfect_echo_answer(self):
        corpus = self.make_records_and_corpus()
        # answer = all obligation sentences of its source passage, verbatim
        record = AnswerRecord(
            "q1",
            "A Person must disclose holdings. This rule is strict.",
            [(1, "p0")],
            "echo",
            "d",
        )
        reports, aggregate = evaluate_answers([record], corpus, PerfectMatchNli())
        assert reports[0].e_s == 1.0
        assert reports[0].c_s == 0.0
        assert reports[0].oc_s == 1.0
        assert reports[0].composite == pytest.approx(1.0)
        assert aggregate.composite == pytest.approx(1.0)

    def test_empty_answers_yield_no_data_marker(self):
        corpus = self.make_records_and_corpus()
        reports, aggregate = evaluate_answers([], corpus, PerfectMatchNli())
        assert reports == []
        assert not aggregate.has_data
        assert aggregate.composite is None
        assert '"no_data": true' in report_to_json(reports, aggregate)

    def test_unresolved_key_excluded_from_aggregates(self):
        corpus = self.make_records_and_corpus()
        good = AnswerRecord("q1", "A Person must disclose holdings. This rule is strict.",
                            [(1, "p0")], "echo", "d")
        bad = AnswerRecord("q2", "Answer.", [(9, "missing")], "echo", "d")
        reports, aggregate = evaluate_answers([good, bad], corpus, PerfectMatchNli())
        assert aggregate.n_scored == 1
        assert aggregate.n_errors == 1
        assert reports[1].error is not None

    def test_three_answer_aggregate_is_mean(self):
        corpus = self.make_records_and_corpus()
        records = [
            # e_s=1, c_s=0, oc_s=1
            AnswerRecord("q1", "A Person must disclose holdings. This rule is strict.",
                         [(1, "p0")], "echo", "d"),
            # e_s=0, c_s=0; one obligation ("must disclose") uncovered -> oc_s=0
            AnswerRecord("q2", "Fabricated claim.", [(1, "p0")], "echo", "d"),
            # e_s=1, c_s=0, oc_s=1 against the second passage
            AnswerRecord("q3", "An Insurer shall maintain records.", [(1, "p1")], "echo", "d"),
        ]
        reports, aggregate = evaluate_answers(records, corpus, PerfectMatchNli())
        assert [r.e_s for r in reports] == [1.0, 0.0, 1.0]
        assert [r.oc_s for r in reports] == [1.0, 0.0, 1.0]
        assert aggregate.e_s == pytest.approx(2 / 3)
        assert aggregate.oc_s == pytest.approx(2 / 3)
        assert aggregate.composite == pytest.approx(
            sum(r.composite for r in reports) / 3
        )


class TestHttpNliScorer:
    def test_batching_and_order(self, fake_service):
        def handler(body):
            scores = []
            for pair in body["pairs"]:
                if pair["premise"] == pair["hypothesis"]:
                    scores.append({"entail": 1.0, "contradict": 0.0, "neutral": 0.0})
                else:
                    scores.append({"entail": 0.0, "contradict": 0.0, "neutral": 1.0})
            return 200, {"scores": scores}

        fake_service.route("/nli", handler)
        scorer = HttpNliScorer(fake_service.url, batch_size=2, max_retries=1)
        pairs = [("a", "a"), ("a", "b"), ("c", "c"), ("d", "e"), ("f", "f")]
        result = scorer.score_pairs(pairs)
        assert [s.entail for s in result] == [1.0, 0.0, 1.0, 0.0, 1.0]

    def test_unreachable(self):
        scorer = HttpNliScorer("http://127.0.0.1:1", max_retries=1, timeout=0.2)
        with pytest.raises(TransportError):
            scorer.score_pairs([("a", "b")])

    def test_probabilities_sum_to_one_stub(self):
        scorer = PerfectMatchNli()
        for s in scorer.score_pairs([("a", "a"), ("a", "b")]):
            assert s.entail + s.contradict + s.neutral == pytest.approx(1.0, abs=1e-6)
