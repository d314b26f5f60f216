"""Score normalization and weighted fusion of lexical and semantic rankings.

Each retriever's candidate pool is min-max normalized independently, then
combined per hit as

    fused = alpha * semantic_norm + (1 - alpha) * lexical_norm

over the union of both pools; an ordinal absent from one pool contributes 0
for that component. A degenerate pool (all scores equal, or fewer than two
entries) normalizes to all zeros: a constant pool carries no ranking signal
and must not dominate the combination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from regrag.corpus import Corpus
from regrag.errors import ConfigMismatchError, ContractError, DataFormatError
from regrag.lexical import Bm25Params, InvertedIndex, search_lexical
from regrag.semantic import EmbeddingProvider, VectorIndex, embed_batch, search_semantic
from regrag.textproc import PipelineConfig

DEFAULT_ALPHA = 0.65


@dataclass(frozen=True)
class FusionConfig:
    alpha: float = DEFAULT_ALPHA
    pool_lexical: int = 50
    pool_semantic: int = 50
    top_k: int = 10

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ContractError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.pool_lexical < self.top_k or self.pool_semantic < self.top_k:
            raise ContractError("candidate pools must be at least top_k deep")


@dataclass(frozen=True)
class ScoredHit:
    """Per-passage component and fused scores for one query."""

    ordinal: int
    lexical_norm: float
    semantic_norm: float
    fused: float


def min_max_normalize(scores: Sequence[float]) -> list[float]:
    """Map scores affinely onto [0, 1]; degenerate inputs map to all zeros."""
    for s in scores:
        if not math.isfinite(s):
            raise ContractError(f"non-finite score {s!r}")
    if len(scores) < 2:
        return [0.0 for _ in scores]
    lo = min(scores)
    hi = max(scores)
    if hi == lo:
        return [0.0 for _ in scores]
    span = hi - lo
    return [(s - lo) / span for s in scores]


def fuse(
    lexical_hits: Sequence[tuple[int, float]],
    semantic_hits: Sequence[tuple[int, float]],
    config: FusionConfig | None = None,
) -> list[ScoredHit]:
    """Combine two scored pools into a fused top-k ranking.

    Ties in the fused score break by ascending ordinal, so identical inputs
    always produce identical output.
    """
    if config is None:
        config = FusionConfig()
    for name, hits in (("lexical", lexical_hits), ("semantic", semantic_hits)):
        ordinals = [o for o, _ in hits]
        if len(set(ordinals)) != len(ordinals):
            raise ContractError(f"{name} hits contain duplicate ordinals")

    lex_norm = dict(
        zip((o for o, _ in lexical_hits), min_max_normalize([s for _, s in lexical_hits]))
    )
    sem_norm = dict(
        zip((o for o, _ in semantic_hits), min_max_normalize([s for _, s in semantic_hits]))
    )
    alpha = config.alpha
    hits = [
        ScoredHit(
            ordinal=o,
            lexical_norm=lex_norm.get(o, 0.0),
            semantic_norm=sem_norm.get(o, 0.0),
            fused=alpha * sem_norm.get(o, 0.0) + (1.0 - alpha) * lex_norm.get(o, 0.0),
        )
        for o in sorted(set(lex_norm) | set(sem_norm))
    ]
    hits.sort(key=lambda h: (-h.fused, h.ordinal))
    return hits[: config.top_k]


def hybrid_search(
    query: str,
    lex_index: InvertedIndex,
    vec_index: VectorIndex,
    provider: EmbeddingProvider,
    params: Bm25Params | None = None,
    config: FusionConfig | None = None,
    pipeline: PipelineConfig | None = None,
) -> list[ScoredHit]:
    """Lexical pool + semantic pool + fusion, over indexes of one corpus."""
    if lex_index.corpus_fingerprint != vec_index.corpus_fingerprint:
        raise ConfigMismatchError(
            "lexical and vector indexes were built over different corpora: "
            f"{lex_index.corpus_fingerprint} vs {vec_index.corpus_fingerprint}"
        )
    params = params or Bm25Params()
    config = config or FusionConfig()
    lexical_hits = search_lexical(lex_index, params, query, config.pool_lexical, pipeline)
    query_vec = embed_batch(provider, [query])[0]
    semantic_hits = search_semantic(vec_index, query_vec, config.pool_semantic)
    return fuse(lexical_hits, semantic_hits, config)


def write_run_file(
    path: str | Path,
    results: dict[str, list[tuple[int, float]]],
    corpus: Corpus,
    *,
    manifest_digest: str | None = None,
) -> None:
    """TSV lines: question_id, document_id, passage_id, rank (1-based), score."""
    with Path(path).open("w", encoding="utf-8") as handle:
        if manifest_digest is not None:
            handle.write(f"# manifest {manifest_digest}\n")
        for qid, hits in results.items():
            for rank, (ordinal, score) in enumerate(hits, start=1):
                passage = corpus[ordinal]
                handle.write(
                    f"{qid}\t{passage.document_id}\t{passage.passage_id}"
                    f"\t{rank}\t{format(score, '.10g')}\n"
                )


def read_run_file(path: str | Path) -> dict[str, list[tuple[int, str, float]]]:
    """Parse a run file into question_id -> [(document_id, passage_id, score)]."""
    path = Path(path)
    run: dict[str, list[tuple[int, str, float]]] = {}
    with path.open(encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise DataFormatError(
                    f"run line must have 5 tab-separated fields, got {len(parts)}",
                    path=str(path),
                    line=lineno,
                )
            qid, doc, pid, _rank, score = parts
            try:
                run.setdefault(qid, []).append((int(doc), pid, float(score)))
            except ValueError as exc:
                raise DataFormatError(
                    f"bad numeric field: {exc}", path=str(path), line=lineno
                ) from exc
    return run
