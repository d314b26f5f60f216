"""Retrieval metrics: Recall@k, Precision@k, MAP@k, and run-level reports.

Average precision truncates the ranking at k and divides by min(|relevant|, k),
matching the sentence-transformers evaluator convention, so values compare
like-for-like with that tooling. All run-level metrics are macro-averaged
over the judged questions; a judged question missing from the run scores 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Sequence

from regrag.errors import ContractError, DataFormatError

Key = Hashable


@dataclass
class MetricReport:
    recall_at: dict[int, float]
    precision_at: dict[int, float]
    map_at: dict[int, float]
    n_questions: int
    skipped_question_ids: list[str] = field(default_factory=list)


def recall_at_k(ranked: Sequence[Key], relevant: set[Key], k: int) -> float:
    """|top-k intersect relevant| / |relevant|."""
    if k < 1:
        raise ContractError(f"k must be >= 1, got {k}")
    if not relevant:
        raise ContractError("relevant set must be non-empty")
    hits = sum(1 for key in ranked[:k] if key in relevant)
    return hits / len(relevant)


def precision_at_k(ranked: Sequence[Key], relevant: set[Key], k: int) -> float:
    """|top-k intersect relevant| / k."""
    if k < 1:
        raise ContractError(f"k must be >= 1, got {k}")
    hits = sum(1 for key in ranked[:k] if key in relevant)
    return hits / k


def average_precision_at_k(ranked: Sequence[Key], relevant: set[Key], k: int) -> float:
    """(1 / min(|relevant|, k)) * sum over relevant ranks i <= k of P@i."""
    if k < 1:
        raise ContractError(f"k must be >= 1, got {k}")
    if not relevant:
        raise ContractError("relevant set must be non-empty")
    hits = 0
    total = 0.0
    for i, key in enumerate(ranked[:k], start=1):
        if key in relevant:
            hits += 1
            total += hits / i
    return total / min(len(relevant), k)


def evaluate_run(
    run: dict[str, list[tuple]],
    qrels: dict[str, set],
    ks: Sequence[int],
) -> MetricReport:
    """Macro-averaged metrics over every judged question.

    Run entries are (key..., score) tuples; the trailing score is dropped and
    the remaining prefix is the passage key matched against the qrels sets.
    Run questions without judgments are reported and excluded from averages.
    """
    skipped = sorted(qid for qid in run if qid not in qrels)
    recall_at: dict[int, float] = {k: 0.0 for k in ks}
    precision_at: dict[int, float] = {k: 0.0 for k in ks}
    map_at: dict[int, float] = {k: 0.0 for k in ks}
    n = len(qrels)
    if n == 0:
        return MetricReport(recall_at, precision_at, map_at, 0, skipped)

    for qid, relevant in qrels.items():
        ranked = [tuple(entry[:-1]) for entry in run.get(qid, [])]
        for k in ks:
            recall_at[k] += recall_at_k(ranked, relevant, k)
            precision_at[k] += precision_at_k(ranked, relevant, k)
            map_at[k] += average_precision_at_k(ranked, relevant, k)

    return MetricReport(
        recall_at={k: v / n for k, v in recall_at.items()},
        precision_at={k: v / n for k, v in precision_at.items()},
        map_at={k: v / n for k, v in map_at.items()},
        n_questions=n,
        skipped_question_ids=skipped,
    )


def report_to_json(report: MetricReport, *, manifest_digest: str | None = None) -> str:
    payload: dict = {}
    for k in sorted(report.recall_at):
        payload[f"recall@{k}"] = report.recall_at[k]
        payload[f"precision@{k}"] = report.precision_at[k]
        payload[f"map@{k}"] = report.map_at[k]
    payload["n_questions"] = report.n_questions
    if report.skipped_question_ids:
        payload["skipped_question_ids"] = report.skipped_question_ids
    if manifest_digest is not None:
        payload["manifest_digest"] = manifest_digest
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_qrels(
    path: str | Path,
    qrels: dict[str, set[tuple[int, str]]],
    *,
    manifest_digest: str | None = None,
) -> None:
    """TSV lines: question_id, document_id, passage_id."""
    with Path(path).open("w", encoding="utf-8") as handle:
        if manifest_digest is not None:
            handle.write(f"# manifest {manifest_digest}\n")
        for qid in qrels:
            for doc, pid in sorted(qrels[qid]):
                handle.write(f"{qid}\t{doc}\t{pid}\n")


def read_qrels(path: str | Path) -> dict[str, set[tuple[int, str]]]:
    path = Path(path)
    qrels: dict[str, set[tuple[int, str]]] = {}
    with path.open(encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataFormatError(
                    f"qrels line must have 3 tab-separated fields, got {len(parts)}",
                    path=str(path),
                    line=lineno,
                )
            qid, doc, pid = parts
            try:
                qrels.setdefault(qid, set()).add((int(doc), pid))
            except ValueError as exc:
                raise DataFormatError(
                    f"bad document id: {exc}", path=str(path), line=lineno
                ) from exc
    return qrels
