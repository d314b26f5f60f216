"""Passage/question data model and ingestion of question and corpus files.

Two on-disk formats are understood:

* Question file: a JSON array of records with ``QuestionID``, ``Question``,
  ``Passages`` (each ``{DocumentID, PassageID, Passage}``), and ``Group``.
* Corpus file: UTF-8 newline-delimited JSON, one passage object per line.

Passages are deduplicated by (document_id, passage_id); the first-seen text
wins, and a byte-wise text conflict after whitespace trimming is an error.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from regrag.errors import DataFormatError, PassageConflictError

PassageKey = tuple[int, str]


@dataclass(frozen=True)
class Passage:
    """Atomic retrievable unit: raw text addressed by (document, passage) ids."""

    document_id: int
    passage_id: str
    text: str

    @property
    def key(self) -> PassageKey:
        return (self.document_id, self.passage_id)


@dataclass(frozen=True)
class Question:
    question_id: str
    text: str
    gold_passage_keys: tuple[PassageKey, ...]
    group: int


@dataclass
class Corpus:
    """Ordered passages plus a key -> ordinal lookup.

    Ordinals (dense integers in load order) are the document handles used by
    every index. A built Corpus is treated as immutable.
    """

    passages: list[Passage] = field(default_factory=list)
    key_index: dict[PassageKey, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.passages)

    def __iter__(self) -> Iterator[Passage]:
        return iter(self.passages)

    def __getitem__(self, ordinal: int) -> Passage:
        return self.passages[ordinal]

    def ordinal(self, key: PassageKey) -> int:
        return self.key_index[key]

    def fingerprint(self) -> str:
        """Content hash binding indexes to the corpus they were built from."""
        h = hashlib.sha256()
        for p in self.passages:
            h.update(f"{p.document_id}\x1f{p.passage_id}\x1f{p.text}\x1e".encode("utf-8"))
        return f"corpus-sha256:{h.hexdigest()[:16]}"


class _CorpusBuilder:
    """Accumulates passages with first-wins deduplication."""

    def __init__(self) -> None:
        self.corpus = Corpus()

    def add(self, document_id: int, passage_id: str, text: str, *, where: str) -> None:
        key = (document_id, passage_id)
        existing = self.corpus.key_index.get(key)
        if existing is not None:
            old = self.corpus.passages[existing].text
            if old.strip() != text.strip():
                raise PassageConflictError(
                    f"passage {key} appears with two different texts: "
                    f"{old.strip()[:80]!r} vs {text.strip()[:80]!r} ({where})"
                )
            return
        self.corpus.key_index[key] = len(self.corpus.passages)
        self.corpus.passages.append(Passage(document_id, passage_id, text))


def _require(
    record: dict,
    name: str,
    kind: type,
    *,
    path: str,
    index: int | None = None,
    line: int | None = None,
):
    if name not in record:
        raise DataFormatError(
            f"missing required field {name!r}", path=path, record=index, line=line, field=name
        )
    value = record[name]
    if (kind is int and isinstance(value, bool)) or not isinstance(value, kind):
        raise DataFormatError(
            f"field {name!r} must be {kind.__name__}, got {type(value).__name__}",
            path=path,
            record=index,
            line=line,
            field=name,
        )
    return value


def _check_text(text: str, *, path: str, index: int | None = None, line: int | None = None) -> str:
    if not text.strip():
        raise DataFormatError(
            "passage text is empty", path=path, record=index, line=line, field="Passage"
        )
    return text


def load_obliqa(path: str | Path) -> tuple[list[Question], Corpus]:
    """Load a question file; returns questions plus the deduplicated corpus."""
    path = Path(path)
    try:
        records = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(
            f"malformed JSON at byte offset {exc.pos}: {exc.msg}", path=str(path)
        ) from exc
    if not isinstance(records, list):
        raise DataFormatError("top level must be a JSON array", path=str(path))

    builder = _CorpusBuilder()
    questions: list[Question] = []
    for i, record in enumerate(records):
        if not isinstance(record, dict):
            raise DataFormatError("question record must be an object", path=str(path), record=i)
        qid = _require(record, "QuestionID", str, path=str(path), index=i)
        qtext = _require(record, "Question", str, path=str(path), index=i)
        group = _require(record, "Group", int, path=str(path), index=i)
        passages = _require(record, "Passages", list, path=str(path), index=i)
        if not passages:
            raise DataFormatError(
                "question has no gold passages", path=str(path), record=i, field="Passages"
            )
        keys: list[PassageKey] = []
        for entry in passages:
            if not isinstance(entry, dict):
                raise DataFormatError(
                    "Passages entries must be objects", path=str(path), record=i, field="Passages"
                )
            doc = _require(entry, "DocumentID", int, path=str(path), index=i)
            pid = _require(entry, "PassageID", str, path=str(path), index=i)
            text = _require(entry, "Passage", str, path=str(path), index=i)
            _check_text(text, path=str(path), index=i)
            builder.add(doc, pid, text, where=f"record {i}")
            keys.append((doc, pid))
        questions.append(
            Question(question_id=qid, text=qtext, gold_passage_keys=tuple(keys), group=group)
        )
    return questions, builder.corpus


def load_corpus(path: str | Path) -> Corpus:
    """Load a newline-delimited JSON corpus file, preserving file order."""
    path = Path(path)
    builder = _CorpusBuilder()
    with path.open(encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise DataFormatError(
                    f"malformed JSON: {exc.msg}", path=str(path), line=lineno
                ) from exc
            if not isinstance(record, dict):
                raise DataFormatError("line must be a JSON object", path=str(path), line=lineno)
            doc = _require(record, "DocumentID", int, path=str(path), line=lineno)
            pid = _require(record, "PassageID", str, path=str(path), line=lineno)
            text = _require(record, "Passage", str, path=str(path), line=lineno)
            _check_text(text, path=str(path), line=lineno)
            builder.add(doc, pid, text, where=f"line {lineno}")
    return builder.corpus


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus as newline-delimited JSON in ordinal order."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for p in corpus:
            handle.write(
                json.dumps(
                    {"DocumentID": p.document_id, "PassageID": p.passage_id, "Passage": p.text},
                    ensure_ascii=False,
                    sort_keys=True,
                )
                + "\n"
            )


def write_questions(questions: list[Question], path: str | Path) -> None:
    """Write questions as newline-delimited JSON (ids, text, group, gold keys)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for q in questions:
            handle.write(
                json.dumps(
                    {
                        "question_id": q.question_id,
                        "text": q.text,
                        "group": q.group,
                        "gold_keys": [[doc, pid] for doc, pid in q.gold_passage_keys],
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
                + "\n"
            )


def read_questions(path: str | Path) -> list[Question]:
    path = Path(path)
    questions = []
    with path.open(encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            if not raw.strip():
                continue
            try:
                payload = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise DataFormatError(
                    f"malformed JSON: {exc.msg}", path=str(path), line=lineno
                ) from exc
            try:
                questions.append(
                    Question(
                        question_id=payload["question_id"],
                        text=payload["text"],
                        gold_passage_keys=tuple(
                            (int(doc), pid) for doc, pid in payload["gold_keys"]
                        ),
                        group=int(payload["group"]),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise DataFormatError(
                    f"bad question record: {exc}", path=str(path), line=lineno
                ) from exc
    return questions


def corpus_stats(corpus: Corpus) -> tuple[int, float]:
    """(passage count, mean raw text length in characters); (0, 0.0) if empty."""
    if not corpus.passages:
        return (0, 0.0)
    total = sum(len(p.text) for p in corpus.passages)
    return (len(corpus.passages), total / len(corpus.passages))
