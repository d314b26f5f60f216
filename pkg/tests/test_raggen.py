"""Passage selection policy, prompt assembly, and answer generation."""

from __future__ import annotations

import math

import pytest
from hypothesis import given, settings, strategies as st

from regrag.corpus import Question
from regrag.errors import ContractError, GenerationError, NoContextError, TransportError
from regrag.fusion import ScoredHit
from regrag.raggen import (
    AnswerRecord,
    EchoProvider,
    HttpLlmProvider,
    SelectionPolicy,
    build_prompt,
    generate_answer,
    load_prompt_assets,
    read_answers,
    select_passages,
)

from conftest import make_corpus


def hits_from_scores(scores):
    return [ScoredHit(ordinal=i, lexical_norm=0.0, semantic_norm=0.0, fused=s)
            for i, s in enumerate(scores)]


class TestSelectPassages:
    def test_threshold_cut(self):
        kept = select_passages(hits_from_scores([0.90, 0.85, 0.70, 0.69]))
        assert [h.fused for h in kept] == [0.90, 0.85]

    def test_drop_cut(self):
        kept = select_passages(hits_from_scores([0.95, 0.80]))
        assert [h.fused for h in kept] == [0.95]

    def test_empty(self):
        assert select_passages([]) == []

    def test_max_passages_truncation(self):
        kept = select_passages(hits_from_scores([0.99] * 20))
        assert len(kept) == 10

    def test_drop_of_exactly_max_drop_is_kept(self):
        policy = SelectionPolicy(min_score=0.0, max_drop=0.25)
        kept = select_passages(hits_from_scores([1.0, 0.75]), policy)
        assert len(kept) == 2

    def test_permissive_policy_is_plain_truncation(self):
        policy = SelectionPolicy(max_passages=3, min_score=0.0, max_drop=math.inf)
        kept = select_passages(hits_from_scores([0.9, 0.1, 0.05, 0.01]), policy)
        assert len(kept) == 3

    @settings(max_examples=1000, deadline=None)
    @given(
        st.lists(st.floats(min_value=0.0, max_value=1.0), max_size=25),
        st.floats(min_value=0.0, max_value=1.0),
        st.floats(min_value=0.01, max_value=1.0),
        st.integers(min_value=1, max_value=12),
    )
    def test_prefix_threshold_and_drop_invariants(self, scores, min_score, max_drop, max_passages):
        scores = sorted(scores, reverse=True)
        hits = hits_from_scores(scores)
        policy = SelectionPolicy(
            max_passages=max_passages, min_score=min_score, max_drop=max_drop
        )
        kept = select_passages(hits, policy)
        assert kept == hits[: len(kept)]  # always a prefix
        assert len(kept) <= policy.max_passages
        for h in kept:
            assert h.fused >= policy.min_score
        for prev, cur in zip(kept, kept[1:]):
            assert prev.fused - cur.fused <= policy.max_drop

    def test_policy_validation(self):
        with pytest.raises(ContractError):
            SelectionPolicy(max_passages=0)
        with pytest.raises(ContractError):
            SelectionPolicy(max_drop=0.0)


QUESTION = Question(
    question_id="q-1", text="What must a Person disclose?", gold_passage_keys=((1, "p0"),),
    group=1,
)


class TestBuildPrompt:
    def test_single_passage_block(self, toy_corpus):
        bundle = build_prompt(QUESTION, hits_from_scores([0.9])[:1], toy_corpus)
        assert bundle.user_text.count("Passage 1") == 1
        assert "Passage 2" not in bundle.user_text
        assert "DocumentID 1, PassageID p0" in bundle.user_text
        assert toy_corpus[0].text in bundle.user_text

    def test_bundled_few_shots_contain_reference_exemplar(self):
        assets = load_prompt_assets()
        answers = [shot.answer for shot in assets.few_shots]
        assert any("52 percent of the Insurer's Net Written Premium" in a for a in answers)

    def test_system_text_matches_bundled_file(self):
        from importlib import resources

        assets = load_prompt_assets()
        raw = resources.files("regrag.data").joinpath("system_prompt.txt").read_text("utf-8")
        assert assets.system_text == raw.strip("\n")
        assert assets.system_text.startswith("As a regulatory compliance assistant.")

    def test_passage_order_follows_hit_order(self, toy_corpus):
        hits = [
            ScoredHit(ordinal=2, lexical_norm=0, semantic_norm=0, fused=0.9),
            ScoredHit(ordinal=0, lexical_norm=0, semantic_norm=0, fused=0.8),
            ScoredHit(ordinal=4, lexical_norm=0, semantic_norm=0, fused=0.75),
        ]
        bundle = build_prompt(QUESTION, hits, toy_corpus)
        first = bundle.user_text.index(toy_corpus[2].text)
        second = bundle.user_text.index(toy_corpus[0].text)
        third = bundle.user_text.index(toy_corpus[4].text)
        assert first < second < third

    def test_permuting_hits_changes_user_text(self, toy_corpus):
        hits = hits_from_scores([0.9, 0.8])[:2]
        bundle_a = build_prompt(QUESTION, hits, toy_corpus)
        bundle_b = build_prompt(QUESTION, list(reversed(hits)), toy_corpus)
        assert bundle_a.user_text != bundle_b.user_text
        assert bundle_a.digest() != bundle_b.digest()

    def test_empty_selection_raises_no_context(self, toy_corpus):
        with pytest.raises(NoContextError):
            build_prompt(QUESTION, [], toy_corpus)


class TestGenerateAnswer:
    def test_echo_concatenates_passages(self, toy_corpus):
        bundle = build_prompt(QUESTION, hits_from_scores([0.9, 0.8])[:2], toy_corpus)
        answer = generate_answer(EchoProvider(), bundle)
        assert answer == toy_corpus[0].text + "\n" + toy_corpus[1].text

    def test_echo_is_deterministic(self, toy_corpus):
        bundle = build_prompt(QUESTION, hits_from_scores([0.9])[:1], toy_corpus)
        assert generate_answer(EchoProvider(), bundle) == generate_answer(EchoProvider(), bundle)

    def test_http_provider_happy_path(self, toy_corpus, fake_service):
        seen = {}

        def handler(body):
            seen.update(body)
            return 200, {"content": "Synthesized answer."}

        fake_service.route("/llm", handler)
        provider = HttpLlmProvider(fake_service.url + "/llm", max_retries=1)
        bundle = build_prompt(QUESTION, hits_from_scores([0.9])[:1], toy_corpus)
        assert generate_answer(provider, bundle) == "Synthesized answer."
        assert seen["system"] == bundle.system_text
        assert seen["messages"][-1]["content"] == bundle.user_text
        # few-shot exemplars precede the question
        assert len(seen["messages"]) == len(bundle.few_shots) + 1

    def test_empty_completion_is_generation_error(self, toy_corpus, fake_service):
        fake_service.route("/llm", lambda body: (200, {"content": "  "}))
        provider = HttpLlmProvider(fake_service.url + "/llm", max_retries=1)
        bundle = build_prompt(QUESTION, hits_from_scores([0.9])[:1], toy_corpus)
        with pytest.raises(GenerationError):
            generate_answer(provider, bundle)

    def test_unreachable_is_transport_error(self, toy_corpus):
        provider = HttpLlmProvider(
            "http://127.0.0.1:1/llm", max_retries=2, backoff=0.0, timeout=0.2
        )
        bundle = build_prompt(QUESTION, hits_from_scores([0.9])[:1], toy_corpus)
        with pytest.raises(TransportError):
            generate_answer(provider, bundle)


class TestAnswerRecords:
    def test_round_trip(self, tmp_path):
        records = [
            AnswerRecord("q1", "An answer.", [(1, "p0")], "echo", "abcd1234"),
            AnswerRecord("q2", None, [], "echo", "", error="no-context"),
        ]
        path = tmp_path / "answers.ndjson"
        path.write_text("".join(r.to_json() + "\n" for r in records), encoding="utf-8")
        loaded = read_answers(path)
        assert loaded == records
