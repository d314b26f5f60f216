"""Inverted index and BM25 ranking.

Scoring uses the non-negative "+1 inside the log" IDF variant:

    idf(t) = ln((N - df + 0.5) / (df + 0.5) + 1)

and the usual saturated term-frequency form with parameters k1 and b.
Query term multiplicity is ignored (each distinct term contributes once).
Candidate evaluation is postings-driven; the hot accumulation loop runs in a
compiled kernel when available (see ``regrag._kernels``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from regrag import _kernels
from regrag.corpus import Corpus
from regrag.errors import ConfigMismatchError, ContractError, DataFormatError
from regrag.textproc import PipelineConfig, TermList, preprocess

INDEX_MAGIC = "regrag-lexical-index"
INDEX_VERSION = 1


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.5
    b: float = 0.75

    def __post_init__(self) -> None:
        if self.k1 <= 0:
            raise ContractError(f"k1 must be > 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ContractError(f"b must be in [0, 1], got {self.b}")


@dataclass
class InvertedIndex:
    """Term -> postings map plus the corpus statistics BM25 needs."""

    postings: dict[str, list[tuple[int, int]]]
    doc_len: list[int]
    avgdl: float
    n_docs: int
    df: dict[str, int]
    pipeline_fingerprint: str
    corpus_fingerprint: str

    # Per-term postings as parallel arrays, built lazily for the scoring kernel.
    _arrays: dict[str, tuple[np.ndarray, np.ndarray]] = field(
        default_factory=dict, repr=False, compare=False
    )
    _doc_len_arr: np.ndarray | None = field(default=None, repr=False, compare=False)

    def term_arrays(self, term: str) -> tuple[np.ndarray, np.ndarray] | None:
        cached = self._arrays.get(term)
        if cached is not None:
            return cached
        plist = self.postings.get(term)
        if plist is None:
            return None
        ordinals = np.fromiter((o for o, _ in plist), dtype=np.int32, count=len(plist))
        tfs = np.fromiter((tf for _, tf in plist), dtype=np.float64, count=len(plist))
        self._arrays[term] = (ordinals, tfs)
        return self._arrays[term]

    def doc_len_array(self) -> np.ndarray:
        if self._doc_len_arr is None:
            self._doc_len_arr = np.asarray(self.doc_len, dtype=np.float64)
        return self._doc_len_arr


def build_index(corpus: Corpus, config: PipelineConfig | None = None) -> InvertedIndex:
    """Index every passage's preprocessed terms. The corpus must be non-empty."""
    if len(corpus) == 0:
        raise ContractError("cannot build an index over an empty corpus")
    if config is None:
        config = PipelineConfig()

    postings: dict[str, list[tuple[int, int]]] = {}
    doc_len: list[int] = []
    for ordinal, passage in enumerate(corpus):
        terms = preprocess(passage.text, config)
        doc_len.append(len(terms))
        counts: dict[str, int] = {}
        for term in terms:
            counts[term] = counts.get(term, 0) + 1
        for term, tf in counts.items():
            postings.setdefault(term, []).append((ordinal, tf))

    # Ordinals ascend by construction; sort defensively so the invariant is
    # independent of iteration order.
    for plist in postings.values():
        plist.sort()

    n_docs = len(doc_len)
    return InvertedIndex(
        postings=postings,
        doc_len=doc_len,
        avgdl=sum(doc_len) / n_docs,
        n_docs=n_docs,
        df={term: len(plist) for term, plist in postings.items()},
        pipeline_fingerprint=config.fingerprint(),
        corpus_fingerprint=corpus.fingerprint(),
    )


def idf(index: InvertedIndex, term: str) -> float:
    """ln((N - df + 0.5) / (df + 0.5) + 1); unseen terms use df = 0."""
    df = index.df.get(term, 0)
    return math.log((index.n_docs - df + 0.5) / (df + 0.5) + 1.0)


def bm25_score(
    index: InvertedIndex,
    params: Bm25Params,
    query_terms: TermList,
    ordinal: int,
) -> float:
    """Score one passage against the distinct query terms."""
    if not 0 <= ordinal < index.n_docs:
        raise ContractError(f"ordinal {ordinal} out of range [0, {index.n_docs})")
    dl = index.doc_len[ordinal]
    denom_norm = params.k1 * (1.0 - params.b + params.b * dl / index.avgdl)
    score = 0.0
    for term in dict.fromkeys(query_terms):
        plist = index.postings.get(term)
        if not plist:
            continue
        tf = _posting_tf(plist, ordinal)
        if tf == 0:
            continue
        score += idf(index, term) * (tf * (params.k1 + 1.0)) / (tf + denom_norm)
    return score


def _posting_tf(plist: list[tuple[int, int]], ordinal: int) -> int:
    lo, hi = 0, len(plist)
    while lo < hi:
        mid = (lo + hi) // 2
        if plist[mid][0] < ordinal:
            lo = mid + 1
        else:
            hi = mid
    if lo < len(plist) and plist[lo][0] == ordinal:
        return plist[lo][1]
    return 0


def search_lexical(
    index: InvertedIndex,
    params: Bm25Params,
    query: str,
    top_n: int,
    config: PipelineConfig | None = None,
    *,
    _accumulate=None,
) -> list[tuple[int, float]]:
    """Top passages by BM25 among those sharing at least one query term.

    Results are sorted by score descending, ties broken by ascending ordinal.
    """
    if top_n < 1:
        raise ContractError(f"top_n must be >= 1, got {top_n}")
    accumulate = _accumulate or _kernels.accumulate_term
    query_terms = preprocess(query, config if config is not None else PipelineConfig())

    scores = np.zeros(index.n_docs, dtype=np.float64)
    touched = np.zeros(index.n_docs, dtype=np.uint8)
    denom = params.k1 * (1.0 - params.b + params.b * index.doc_len_array() / index.avgdl)
    k1_plus_1 = params.k1 + 1.0
    for term in dict.fromkeys(query_terms):
        arrays = index.term_arrays(term)
        if arrays is None:
            continue
        ordinals, tfs = arrays
        accumulate(scores, touched, ordinals, tfs, idf(index, term), k1_plus_1, denom)

    candidates = np.flatnonzero(touched)
    if candidates.size == 0:
        return []
    order = np.lexsort((candidates, -scores[candidates]))[: int(top_n)]
    return [(int(candidates[i]), float(scores[candidates[i]])) for i in order]


def save_index(index: InvertedIndex, path: str | Path) -> None:
    """Serialize as a versioned JSON container with embedded fingerprints."""
    payload = {
        "magic": INDEX_MAGIC,
        "version": INDEX_VERSION,
        "pipeline_fingerprint": index.pipeline_fingerprint,
        "corpus_fingerprint": index.corpus_fingerprint,
        "n_docs": index.n_docs,
        "avgdl": index.avgdl,
        "doc_len": index.doc_len,
        "postings": {term: [[o, tf] for o, tf in plist] for term, plist in index.postings.items()},
    }
    Path(path).write_text(
        json.dumps(payload, ensure_ascii=False, sort_keys=True, separators=(",", ":")),
        encoding="utf-8",
    )


def load_index(
    path: str | Path, *, expected_pipeline_fingerprint: str | None = None
) -> InvertedIndex:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(
            f"malformed index JSON at byte offset {exc.pos}", path=str(path)
        ) from exc
    if not isinstance(payload, dict) or payload.get("magic") != INDEX_MAGIC:
        raise DataFormatError("not a lexical index file (bad magic)", path=str(path))
    if payload.get("version") != INDEX_VERSION:
        raise DataFormatError(
            f"unsupported index version {payload.get('version')}", path=str(path)
        )
    if (
        expected_pipeline_fingerprint is not None
        and payload["pipeline_fingerprint"] != expected_pipeline_fingerprint
    ):
        raise ConfigMismatchError(
            f"index was built with pipeline {payload['pipeline_fingerprint']}, "
            f"requested {expected_pipeline_fingerprint}"
        )
    postings = {
        term: [(int(o), int(tf)) for o, tf in plist]
        for term, plist in payload["postings"].items()
    }
    return InvertedIndex(
        postings=postings,
        doc_len=[int(x) for x in payload["doc_len"]],
        avgdl=float(payload["avgdl"]),
        n_docs=int(payload["n_docs"]),
        df={term: len(plist) for term, plist in postings.items()},
        pipeline_fingerprint=payload["pipeline_fingerprint"],
        corpus_fingerprint=payload["corpus_fingerprint"],
    )
