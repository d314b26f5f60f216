"""Dense retrieval: embedding providers, vector index, exact cosine search.

Embeddings are computed over raw text (the lexical pipeline feeds BM25 only).
Search is an exact matrix-vector product; corpora in the tens of thousands of
passages do not need an approximate index.

Two providers ship with the package: a deterministic offline stub that
expands a seeded hash of the text into a unit vector (the test-suite
default), and an HTTP client for the ``/embed`` wire protocol.
"""

from __future__ import annotations

import hashlib
import json
import struct
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
import requests

from regrag.corpus import Corpus
from regrag.errors import ContractError, DataFormatError, TransportError

VECTOR_MAGIC = b"regrag-vector-index-v1\n"
DEFAULT_DIM = 512


class EmbeddingProvider(Protocol):
    """Deterministic text -> vector mapping with a fixed dimension."""

    name: str
    dim: int

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray: ...

    def fingerprint(self) -> str: ...


def _normalize_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    # A zero vector cannot be normalized; give it a fixed direction instead.
    zero = norms[:, 0] < 1e-12
    if zero.any():
        matrix = matrix.copy()
        matrix[zero, 0] = 1.0
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    return matrix / norms


def hash_embedding(text: str, dim: int = DEFAULT_DIM, seed: int = 0) -> np.ndarray:
    """Unit vector from a counter-mode SHA-256 expansion of (seed, text).

    Fully deterministic across platforms and library versions: each digest
    block yields four uint64s mapped linearly into [-1, 1).
    """
    key = f"{seed}:{text}".encode("utf-8")
    values = np.empty(dim, dtype=np.float64)
    filled = 0
    block = 0
    while filled < dim:
        digest = hashlib.sha256(key + block.to_bytes(8, "little")).digest()
        for (word,) in struct.iter_unpack("<Q", digest):
            if filled == dim:
                break
            values[filled] = word / 2.0**63 - 1.0
            filled += 1
        block += 1
    norm = float(np.linalg.norm(values))
    if norm < 1e-12:
        values[0] = 1.0
        norm = 1.0
    return values / norm


@dataclass
class HashEmbeddingProvider:
    """Offline deterministic stub provider (no model inference)."""

    dim: int = DEFAULT_DIM
    seed: int = 0
    name: str = "hash-sha256"

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        out = np.empty((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            out[i] = hash_embedding(text, self.dim, self.seed)
        return out

    def fingerprint(self) -> str:
        return f"{self.name}:d{self.dim}:s{self.seed}"


class HttpEmbeddingProvider:
    """Client for the embedding wire protocol (POST /embed)."""

    def __init__(
        self,
        base_url: str,
        dim: int = DEFAULT_DIM,
        *,
        timeout: float = 30.0,
        max_retries: int = 3,
        backoff: float = 0.5,
        session: requests.Session | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.dim = dim
        self.name = f"http:{self.base_url}"
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self._session = session or requests.Session()

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.empty((0, self.dim), dtype=np.float64)
        body = {"texts": list(texts)}
        last_error: Exception | None = None
        for attempt in range(1, self.max_retries + 1):
            try:
                response = self._session.post(
                    f"{self.base_url}/embed", json=body, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = exc
                if attempt < self.max_retries:
                    time.sleep(self.backoff * attempt)
                continue
            if response.status_code != 200:
                raise TransportError(
                    f"embedding service returned HTTP {response.status_code}",
                    attempts=attempt,
                )
            payload = response.json()
            vectors = np.asarray(payload["vectors"], dtype=np.float64)
            if vectors.ndim != 2 or vectors.shape != (len(texts), self.dim):
                raise ContractError(
                    f"provider returned shape {vectors.shape}, "
                    f"expected ({len(texts)}, {self.dim})"
                )
            return vectors
        raise TransportError(
            f"embedding service unreachable: {last_error}", attempts=self.max_retries
        )

    def fingerprint(self) -> str:
        return f"{self.name}:d{self.dim}"


def embed_batch(provider: EmbeddingProvider, texts: Sequence[str]) -> np.ndarray:
    """Embed texts in input order and unit-normalize the result rows."""
    for i, text in enumerate(texts):
        if not text:
            raise ContractError(f"text {i} is empty")
    if not texts:
        return np.empty((0, provider.dim), dtype=np.float64)
    vectors = provider.embed_batch(texts)
    if vectors.shape != (len(texts), provider.dim):
        raise ContractError(
            f"provider {provider.name} returned shape {vectors.shape}, "
            f"expected ({len(texts)}, {provider.dim})"
        )
    if not np.isfinite(vectors).all():
        raise ContractError(f"provider {provider.name} returned non-finite values")
    return _normalize_rows(vectors)


@dataclass
class VectorIndex:
    """Unit-normalized embedding matrix, row i = passage ordinal i."""

    matrix: np.ndarray
    dim: int
    provider_fingerprint: str
    corpus_fingerprint: str


def build_vector_index(
    corpus: Corpus,
    provider: EmbeddingProvider,
    batch_size: int = 64,
) -> VectorIndex:
    """Embed every passage's raw text in batches."""
    if len(corpus) == 0:
        raise ContractError("cannot build a vector index over an empty corpus")
    if batch_size < 1:
        raise ContractError(f"batch_size must be >= 1, got {batch_size}")
    rows = []
    texts = [p.text for p in corpus]
    for start in range(0, len(texts), batch_size):
        chunk = texts[start : start + batch_size]
        try:
            rows.append(embed_batch(provider, chunk))
        except (TransportError, ContractError) as exc:
            raise type(exc)(
                f"embedding passages {start}..{start + len(chunk) - 1} failed: {exc}"
            ) from exc
    return VectorIndex(
        matrix=np.vstack(rows),
        dim=provider.dim,
        provider_fingerprint=provider.fingerprint(),
        corpus_fingerprint=corpus.fingerprint(),
    )


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """dot(u, v) / (|u| |v|), in [-1, 1]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ContractError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ContractError("cosine similarity is undefined for zero vectors")
    return float(np.dot(u, v) / (nu * nv))


def search_semantic(
    index: VectorIndex, query_vec: np.ndarray, top_n: int
) -> list[tuple[int, float]]:
    """Exact top-n by dot product on unit vectors; ties by ascending ordinal."""
    if top_n < 1:
        raise ContractError(f"top_n must be >= 1, got {top_n}")
    query_vec = np.asarray(query_vec, dtype=np.float64).ravel()
    if query_vec.shape[0] != index.dim:
        raise ContractError(
            f"query dimension {query_vec.shape[0]} != index dimension {index.dim}"
        )
    scores = index.matrix @ query_vec
    n = scores.shape[0]
    order = np.lexsort((np.arange(n), -scores))[: int(top_n)]
    return [(int(i), float(scores[i])) for i in order]


def save_vector_index(index: VectorIndex, path: str | Path) -> None:
    """Binary layout: magic, JSON header line, row-major little-endian float32."""
    header = json.dumps(
        {
            "dim": index.dim,
            "n_docs": int(index.matrix.shape[0]),
            "provider_fingerprint": index.provider_fingerprint,
            "corpus_fingerprint": index.corpus_fingerprint,
        },
        sort_keys=True,
    )
    with Path(path).open("wb") as handle:
        handle.write(VECTOR_MAGIC)
        handle.write(header.encode("utf-8") + b"\n")
        handle.write(np.ascontiguousarray(index.matrix, dtype="<f4").tobytes())


def load_vector_index(path: str | Path) -> VectorIndex:
    path = Path(path)
    with path.open("rb") as handle:
        magic = handle.read(len(VECTOR_MAGIC))
        if magic != VECTOR_MAGIC:
            raise DataFormatError("not a vector index file (bad magic)", path=str(path))
        header_line = handle.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise DataFormatError("corrupt vector index header", path=str(path)) from exc
        dim = int(header["dim"])
        n_docs = int(header["n_docs"])
        raw = handle.read()
    expected = n_docs * dim * 4
    if len(raw) != expected:
        raise DataFormatError(
            f"vector payload is {len(raw)} bytes, expected {expected}", path=str(path)
        )
    matrix = np.frombuffer(raw, dtype="<f4").reshape(n_docs, dim).astype(np.float64)
    return VectorIndex(
        matrix=matrix,
        dim=dim,
        provider_fingerprint=header["provider_fingerprint"],
        corpus_fingerprint=header["corpus_fingerprint"],
    )
