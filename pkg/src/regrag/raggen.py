"""Passage selection and prompt assembly for answer generation.

The selection policy mirrors the retrieval thresholds of the deployed
system: keep the longest prefix of the fused ranking whose scores stay at or
above ``min_score`` and never fall by more than ``max_drop`` from one kept
passage to the next, truncated to ``max_passages``. The drop rule terminates
the prefix (early stopping), it does not skip individual passages.

LLM access goes through a provider interface. The offline echo provider is
the CI default; HTTP providers speak a generic chat-completion contract.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Protocol, Sequence

import requests

from regrag.corpus import Corpus, Question
from regrag.errors import (
    ContractError,
    DataFormatError,
    GenerationError,
    NoContextError,
    TransportError,
)
from regrag.fusion import ScoredHit


@dataclass(frozen=True)
class SelectionPolicy:
    max_passages: int = 10
    min_score: float = 0.72
    max_drop: float = 0.1

    def __post_init__(self) -> None:
        if self.max_passages < 1:
            raise ContractError(f"max_passages must be >= 1, got {self.max_passages}")
        if not 0.0 <= self.min_score <= 1.0:
            raise ContractError(f"min_score must be in [0, 1], got {self.min_score}")
        if not self.max_drop > 0.0:
            raise ContractError(f"max_drop must be > 0, got {self.max_drop}")


def select_passages(hits: Sequence[ScoredHit], policy: SelectionPolicy | None = None) -> list[ScoredHit]:
    """Longest admissible prefix of a fused-score-descending hit list."""
    if policy is None:
        policy = SelectionPolicy()
    selected: list[ScoredHit] = []
    previous: float | None = None
    for hit in hits:
        if len(selected) == policy.max_passages:
            break
        if hit.fused < policy.min_score:
            break
        if previous is not None and previous - hit.fused > policy.max_drop:
            break
        selected.append(hit)
        previous = hit.fused
    return selected


@dataclass(frozen=True)
class FewShot:
    question: str
    passage: str
    answer: str
    origin: str = "repo"


@dataclass(frozen=True)
class PromptAssets:
    """System prompt text and few-shot exemplars, loaded from data files."""

    system_text: str
    few_shots: tuple[FewShot, ...]


def load_prompt_assets(
    system_path: str | Path | None = None,
    few_shots_path: str | Path | None = None,
) -> PromptAssets:
    if system_path is None:
        system_text = resources.files("regrag.data").joinpath("system_prompt.txt").read_text("utf-8")
    else:
        system_text = Path(system_path).read_text(encoding="utf-8")
    if few_shots_path is None:
        raw = resources.files("regrag.data").joinpath("few_shots.json").read_text("utf-8")
    else:
        raw = Path(few_shots_path).read_text(encoding="utf-8")
    shots = tuple(
        FewShot(
            question=entry["question"],
            passage=entry["passage"],
            answer=entry["answer"],
            origin=entry.get("origin", "repo"),
        )
        for entry in json.loads(raw)
    )
    return PromptAssets(system_text=system_text.strip("\n"), few_shots=shots)


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    few_shots: tuple[FewShot, ...]
    user_text: str
    passage_keys: tuple[tuple[int, str], ...]
    passage_texts: tuple[str, ...]

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.system_text.encode("utf-8"))
        for shot in self.few_shots:
            h.update(f"\x1e{shot.question}\x1f{shot.passage}\x1f{shot.answer}".encode("utf-8"))
        h.update(b"\x1d")
        h.update(self.user_text.encode("utf-8"))
        return h.hexdigest()[:16]


def _few_shot_block(shot: FewShot) -> str:
    return (
        f"Question: {shot.question}\n"
        f"Passage: {shot.passage}\n"
        f"Your response should read:\n{shot.answer}"
    )


def build_prompt(
    question: Question,
    selected: Sequence[ScoredHit],
    corpus: Corpus,
    assets: PromptAssets | None = None,
) -> PromptBundle:
    """Assemble the generation prompt from the selected passages.

    Passages appear verbatim in fused-score order, each introduced by a
    "Passage i (DocumentID d, PassageID p):" header so the model can cite
    them. Raises :class:`NoContextError` when nothing was selected.
    """
    if not selected:
        raise NoContextError(
            f"no passages cleared the selection policy for question {question.question_id}"
        )
    if assets is None:
        assets = load_prompt_assets()

    blocks = []
    keys = []
    texts = []
    for i, hit in enumerate(selected, start=1):
        passage = corpus[hit.ordinal]
        keys.append(passage.key)
        texts.append(passage.text)
        blocks.append(
            f"Passage {i} (DocumentID {passage.document_id}, "
            f"PassageID {passage.passage_id}):\n{passage.text}"
        )
    user_text = (
        f"Question: {question.text}\n\n" + "\n\n".join(blocks) + "\n\nYour response:"
    )
    return PromptBundle(
        system_text=assets.system_text,
        few_shots=assets.few_shots,
        user_text=user_text,
        passage_keys=tuple(keys),
        passage_texts=tuple(texts),
    )


class LlmProvider(Protocol):
    name: str

    def generate(self, bundle: PromptBundle) -> str: ...


@dataclass
class EchoProvider:
    """Offline test double: the answer is the selected passages, concatenated."""

    name: str = "echo"

    def generate(self, bundle: PromptBundle) -> str:
        return "\n".join(bundle.passage_texts)


class HttpLlmProvider:
    """Client for the generic chat-completion wire contract.

    Request: {"system": str, "messages": [{"role", "content"}]};
    response: {"content": str}. Vendor adapters live outside the core.
    """

    def __init__(
        self,
        base_url: str,
        *,
        name: str | None = None,
        timeout: float = 120.0,
        max_retries: int = 3,
        backoff: float = 1.0,
        session: requests.Session | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.name = name or f"http:{self.base_url}"
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self._session = session or requests.Session()

    def generate(self, bundle: PromptBundle) -> str:
        messages = []
        for shot in bundle.few_shots:
            messages.append({"role": "user", "content": _few_shot_block(shot)})
        messages.append({"role": "user", "content": bundle.user_text})
        body = {"system": bundle.system_text, "messages": messages}
        last_error: Exception | None = None
        for attempt in range(1, self.max_retries + 1):
            try:
                response = self._session.post(self.base_url, json=body, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
                if attempt < self.max_retries:
                    time.sleep(self.backoff * attempt)
                continue
            if response.status_code == 429:
                retry_after = float(response.headers.get("Retry-After", self.backoff))
                if attempt < self.max_retries:
                    time.sleep(retry_after)
                    continue
                raise TransportError(
                    "rate limited by LLM provider", attempts=attempt, retry_after=retry_after
                )
            if response.status_code != 200:
                raise TransportError(
                    f"LLM provider returned HTTP {response.status_code}", attempts=attempt
                )
            return _require_answer(response.json().get("content"))
        raise TransportError(f"LLM provider unreachable: {last_error}", attempts=self.max_retries)


def _require_answer(content) -> str:
    if not isinstance(content, str) or not content.strip():
        raise GenerationError("provider returned an empty completion")
    return content


def generate_answer(provider: LlmProvider, bundle: PromptBundle) -> str:
    """One answer for one assembled prompt; always a non-empty string."""
    return _require_answer(provider.generate(bundle))


@dataclass
class AnswerRecord:
    question_id: str
    answer: str | None
    passage_keys: list[tuple[int, str]]
    provider: str
    prompt_digest: str
    error: str | None = None

    def to_json(self) -> str:
        payload = {
            "question_id": self.question_id,
            "answer": self.answer,
            "passage_keys": [[doc, pid] for doc, pid in self.passage_keys],
            "provider": self.provider,
            "prompt_digest": self.prompt_digest,
        }
        if self.error is not None:
            payload["error"] = self.error
        return json.dumps(payload, ensure_ascii=False, sort_keys=True)


def read_answers(path: str | Path) -> list[AnswerRecord]:
    path = Path(path)
    records = []
    with path.open(encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            if not raw.strip():
                continue
            try:
                payload = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise DataFormatError(
                    f"malformed answer line: {exc.msg}", path=str(path), line=lineno
                ) from exc
            records.append(
                AnswerRecord(
                    question_id=payload["question_id"],
                    answer=payload.get("answer"),
                    passage_keys=[(int(d), p) for d, p in payload.get("passage_keys", [])],
                    provider=payload.get("provider", ""),
                    prompt_digest=payload.get("prompt_digest", ""),
                    error=payload.get("error"),
                )
            )
    return records
