"""Answer-stability evaluation over a pluggable NLI scorer.

Three component scores are computed for a generated answer against its
source passages, all on sentence level:

* entailment: mean over answer sentences of the best supporting passage
  sentence (passage sentence as premise);
* contradiction: mean over answer sentences of the worst contradicting
  passage sentence (same premise direction);
* obligation coverage: fraction of deontic passage sentences entailed by at
  least one answer sentence at threshold tau (answer sentence as premise).

The composite is (entailment + (1 - contradiction) + coverage) / 3.

Real NLI inference is served over the wire protocol (POST /nli); CI uses the
deterministic perfect-match stub.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Protocol, Sequence

import requests

from regrag.corpus import Corpus
from regrag.errors import ContractError, TransportError
from regrag.raggen import AnswerRecord

DEFAULT_COVERAGE_TAU = 0.5


@dataclass(frozen=True)
class NliScores:
    entail: float
    contradict: float
    neutral: float


class NliScorer(Protocol):
    def score_pairs(self, pairs: Sequence[tuple[str, str]]) -> list[NliScores]:
        """One (entail, contradict, neutral) triple per (premise, hypothesis)."""
        ...


def _collapse_ws(text: str) -> str:
    return " ".join(text.split())


@dataclass
class PerfectMatchNli:
    """Deterministic stub: entail=1 iff premise and hypothesis match exactly
    (after whitespace collapsing), else neutral=1. Never contradicts."""

    name: str = "perfect-match"

    def score_pairs(self, pairs: Sequence[tuple[str, str]]) -> list[NliScores]:
        return [
            NliScores(1.0, 0.0, 0.0)
            if _collapse_ws(premise) == _collapse_ws(hypothesis)
            else NliScores(0.0, 0.0, 1.0)
            for premise, hypothesis in pairs
        ]


class HttpNliScorer:
    """Client for the NLI wire protocol (POST /nli)."""

    def __init__(
        self,
        base_url: str,
        *,
        batch_size: int = 128,
        timeout: float = 60.0,
        max_retries: int = 3,
        backoff: float = 0.5,
        session: requests.Session | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.batch_size = batch_size
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self._session = session or requests.Session()

    def score_pairs(self, pairs: Sequence[tuple[str, str]]) -> list[NliScores]:
        out: list[NliScores] = []
        for start in range(0, len(pairs), self.batch_size):
            chunk = pairs[start : start + self.batch_size]
            out.extend(self._score_chunk(chunk))
        return out

    def _score_chunk(self, chunk: Sequence[tuple[str, str]]) -> list[NliScores]:
        body = {"pairs": [{"premise": p, "hypothesis": h} for p, h in chunk]}
        last_error: Exception | None = None
        for attempt in range(1, self.max_retries + 1):
            try:
                response = self._session.post(
                    f"{self.base_url}/nli", json=body, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = exc
                if attempt < self.max_retries:
                    time.sleep(self.backoff * attempt)
                continue
            if response.status_code != 200:
                raise TransportError(
                    f"NLI service returned HTTP {response.status_code}", attempts=attempt
                )
            scores = response.json()["scores"]
            if len(scores) != len(chunk):
                raise ContractError(
                    f"NLI service returned {len(scores)} scores for {len(chunk)} pairs"
                )
            return [
                NliScores(float(s["entail"]), float(s["contradict"]), float(s["neutral"]))
                for s in scores
            ]
        raise TransportError(f"NLI service unreachable: {last_error}", attempts=self.max_retries)


_BOUNDARY = re.compile(r"[.!?]+")


def split_sentences(text: str) -> list[str]:
    """Split on terminal punctuation followed by whitespace + uppercase, or end.

    Periods inside decimal numbers and section identifiers ("7.3.4") never
    split because they are not followed by whitespace.
    """
    sentences: list[str] = []
    start = 0
    for match in _BOUNDARY.finditer(text):
        end = match.end()
        rest = text[end:]
        stripped = rest.lstrip()
        at_end = not stripped
        boundary = at_end or (rest[:1].isspace() and stripped[:1].isupper())
        if boundary:
            candidate = text[start:end].strip()
            if candidate:
                sentences.append(candidate)
            start = end
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def _passage_sentences(passages: Sequence[str]) -> list[str]:
    out: list[str] = []
    for passage in passages:
        out.extend(split_sentences(passage))
    return out


def _max_by_answer_sentence(
    answer_sentences: list[str],
    premise_sentences: list[str],
    nli: NliScorer,
    component: str,
) -> list[float]:
    if not premise_sentences:
        return [0.0 for _ in answer_sentences]
    pairs = [(p, a) for a in answer_sentences for p in premise_sentences]
    scores = nli.score_pairs(pairs)
    values = [getattr(s, component) for s in scores]
    n = len(premise_sentences)
    return [max(values[i * n : (i + 1) * n]) for i in range(len(answer_sentences))]


def entailment_score(answer: str, passages: Sequence[str], nli: NliScorer) -> float:
    """Mean over answer sentences of the best entailing passage sentence."""
    answer_sentences = split_sentences(answer)
    if not answer_sentences:
        raise ContractError("answer has no sentences")
    best = _max_by_answer_sentence(answer_sentences, _passage_sentences(passages), nli, "entail")
    return sum(best) / len(best)


def contradiction_score(answer: str, passages: Sequence[str], nli: NliScorer) -> float:
    """Mean over answer sentences of the strongest contradicting passage sentence."""
    answer_sentences = split_sentences(answer)
    if not answer_sentences:
        raise ContractError("answer has no sentences")
    worst = _max_by_answer_sentence(
        answer_sentences, _passage_sentences(passages), nli, "contradict"
    )
    return sum(worst) / len(worst)


def _marker_patterns() -> list[re.Pattern[str]]:
    text = resources.files("regrag.data").joinpath("obligation_markers.txt").read_text("utf-8")
    patterns = []
    for line in text.splitlines():
        marker = line.strip()
        if marker and not marker.startswith("#"):
            patterns.append(re.compile(rf"\b{re.escape(marker)}\b", re.IGNORECASE))
    return patterns


_MARKERS: list[re.Pattern[str]] | None = None


def extract_obligations(passages: Sequence[str]) -> list[str]:
    """Passage sentences containing at least one deontic marker."""
    global _MARKERS
    if _MARKERS is None:
        _MARKERS = _marker_patterns()
    return [
        sentence
        for sentence in _passage_sentences(passages)
        if any(p.search(sentence) for p in _MARKERS)
    ]


def obligation_coverage(
    answer: str,
    passages: Sequence[str],
    nli: NliScorer,
    tau: float = DEFAULT_COVERAGE_TAU,
) -> float:
    """Fraction of obligation sentences entailed by some answer sentence.

    The answer sentence is the premise here: the answer must entail the
    obligation. No obligations means vacuous full coverage (1.0).
    """
    if not 0.0 < tau < 1.0:
        raise ContractError(f"tau must be in (0, 1), got {tau}")
    obligations = extract_obligations(passages)
    if not obligations:
        return 1.0
    answer_sentences = split_sentences(answer)
    if not answer_sentences:
        return 0.0
    pairs = [(a, o) for o in obligations for a in answer_sentences]
    scores = nli.score_pairs(pairs)
    n = len(answer_sentences)
    covered = 0
    for i in range(len(obligations)):
        best = max(s.entail for s in scores[i * n : (i + 1) * n])
        if best >= tau:
            covered += 1
    return covered / len(obligations)


def repass_score(e_s: float, c_s: float, oc_s: float) -> float:
    """Composite: (entailment + (1 - contradiction) + coverage) / 3."""
    for name, value in (("e_s", e_s), ("c_s", c_s), ("oc_s", oc_s)):
        if not 0.0 <= value <= 1.0:
            raise ContractError(f"{name} must be in [0, 1], got {value}")
    return (e_s + (1.0 - c_s) + oc_s) / 3.0


@dataclass
class RePassReport:
    question_id: str
    e_s: float
    c_s: float
    oc_s: float
    composite: float
    n_answer_sentences: int
    n_obligation_sentences: int
    error: str | None = None


@dataclass
class RePassAggregate:
    n_scored: int
    n_errors: int
    e_s: float | None
    c_s: float | None
    oc_s: float | None
    composite: float | None

    @property
    def has_data(self) -> bool:
        return self.n_scored > 0


def evaluate_answer(
    record: AnswerRecord,
    corpus: Corpus,
    nli: NliScorer,
    tau: float = DEFAULT_COVERAGE_TAU,
) -> RePassReport:
    """Score one answer record against its recorded source passages."""
    missing = [key for key in record.passage_keys if key not in corpus.key_index]
    if missing:
        return RePassReport(record.question_id, 0.0, 0.0, 0.0, 0.0, 0, 0,
                            error=f"unresolved passage keys: {missing}")
    if record.answer is None or not record.answer.strip():
        return RePassReport(record.question_id, 0.0, 0.0, 0.0, 0.0, 0, 0,
                            error=record.error or "no answer text")
    passages = [corpus[corpus.ordinal(key)].text for key in record.passage_keys]
    e_s = entailment_score(record.answer, passages, nli)
    c_s = contradiction_score(record.answer, passages, nli)
    oc_s = obligation_coverage(record.answer, passages, nli, tau)
    return RePassReport(
        question_id=record.question_id,
        e_s=e_s,
        c_s=c_s,
        oc_s=oc_s,
        composite=repass_score(e_s, c_s, oc_s),
        n_answer_sentences=len(split_sentences(record.answer)),
        n_obligation_sentences=len(extract_obligations(passages)),
    )


def evaluate_answers(
    records: Sequence[AnswerRecord],
    corpus: Corpus,
    nli: NliScorer,
    tau: float = DEFAULT_COVERAGE_TAU,
) -> tuple[list[RePassReport], RePassAggregate]:
    """Per-answer reports plus macro-averaged aggregates.

    Answers with unresolved passage keys (or no text) get an error entry and
    are excluded from the averages; the exclusion count is reported.
    """
    reports = [evaluate_answer(record, corpus, nli, tau) for record in records]
    scored = [r for r in reports if r.error is None]
    if not scored:
        return reports, RePassAggregate(0, len(reports), None, None, None, None)
    n = len(scored)
    return reports, RePassAggregate(
        n_scored=n,
        n_errors=len(reports) - n,
        e_s=sum(r.e_s for r in scored) / n,
        c_s=sum(r.c_s for r in scored) / n,
        oc_s=sum(r.oc_s for r in scored) / n,
        composite=sum(r.composite for r in scored) / n,
    )


def report_to_json(
    reports: Sequence[RePassReport],
    aggregate: RePassAggregate,
    *,
    manifest_digest: str | None = None,
) -> str:
    payload = {
        "aggregate": {
            "n_scored": aggregate.n_scored,
            "n_errors": aggregate.n_errors,
            "entailment": aggregate.e_s,
            "contradiction": aggregate.c_s,
            "obligation_coverage": aggregate.oc_s,
            "composite": aggregate.composite,
            "no_data": not aggregate.has_data,
        },
        "answers": [
            {
                "question_id": r.question_id,
                "entailment": r.e_s,
                "contradiction": r.c_s,
                "obligation_coverage": r.oc_s,
                "composite": r.composite,
                "n_answer_sentences": r.n_answer_sentences,
                "n_obligation_sentences": r.n_obligation_sentences,
                **({"error": r.error} if r.error else {}),
            }
            for r in reports
        ],
    }
    if manifest_digest is not None:
        payload["manifest_digest"] = manifest_digest
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def load_report(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
