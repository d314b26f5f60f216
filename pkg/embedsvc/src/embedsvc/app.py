"""FastAPI application serving /embed, /nli, and /healthz.

Two operating modes:

* test mode: fully deterministic; /embed returns seeded-hash vectors
  identical to the retrieval engine's offline stub, /nli scores 1.0
  entailment for exact (whitespace-collapsed) premise/hypothesis matches and
  1.0 neutral otherwise.
* real mode: lazily loads a sentence-embedding model and an NLI
  cross-encoder; a failed load surfaces as 503.

Batch endpoints are synchronous; real-model calls are serialized behind a
lock. Responses are always order-aligned with the request.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel

from embedsvc.hashvec import hash_embedding

DEFAULT_EMBED_MODEL = "raul-delarosa99/bge-small-en-v1.5-RIRAG_ObliQA"
DEFAULT_NLI_MODEL = "cross-encoder/nli-deberta-v3-base"


@dataclass
class ServiceConfig:
    embed_model: str = DEFAULT_EMBED_MODEL
    nli_model: str = DEFAULT_NLI_MODEL
    port: int = 8900
    max_batch: int = 256
    test_mode: bool = False
    dim: int = 512
    seed: int = 0


class EmbedRequest(BaseModel):
    texts: list[str]


class NliPair(BaseModel):
    premise: str
    hypothesis: str


class NliRequest(BaseModel):
    pairs: list[NliPair]


@dataclass
class _ModelHolder:
    """Lazy model loading shared across requests; real mode only."""

    config: ServiceConfig
    lock: threading.Lock = field(default_factory=threading.Lock)
    embedder: object | None = None
    nli: object | None = None

    def get_embedder(self):
        with self.lock:
            if self.embedder is None:
                try:
                    from sentence_transformers import SentenceTransformer

                    self.embedder = SentenceTransformer(self.config.embed_model)
                except Exception as exc:  # noqa: BLE001 - any load failure is a 503
                    raise HTTPException(503, f"embedding model unavailable: {exc}") from exc
            return self.embedder

    def get_nli(self):
        with self.lock:
            if self.nli is None:
                try:
                    from transformers import pipeline

                    self.nli = pipeline(
                        "text-classification",
                        model=self.config.nli_model,
                        top_k=None,
                    )
                except Exception as exc:  # noqa: BLE001
                    raise HTTPException(503, f"NLI model unavailable: {exc}") from exc
            return self.nli


def _collapse_ws(text: str) -> str:
    return " ".join(text.split())


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="embedsvc")
    holder = _ModelHolder(config)

    @app.get("/healthz", response_class=PlainTextResponse)
    def healthz() -> str:
        return "ok"

    @app.post("/embed")
    def embed(request: EmbedRequest) -> dict:
        if len(request.texts) > config.max_batch:
            raise HTTPException(413, f"batch of {len(request.texts)} exceeds {config.max_batch}")
        if config.test_mode:
            vectors = [
                hash_embedding(text, config.dim, config.seed).tolist()
                for text in request.texts
            ]
            return {
                "vectors": vectors,
                "dim": config.dim,
                "model": f"test:hash-sha256:d{config.dim}:s{config.seed}",
            }
        model = holder.get_embedder()
        with holder.lock:
            encoded = model.encode(list(request.texts), convert_to_numpy=True)
        dim = int(encoded.shape[1]) if len(request.texts) else int(model.get_sentence_embedding_dimension())
        max_len = getattr(model, "max_seq_length", None)
        return {
            "vectors": [row.tolist() for row in encoded],
            "dim": dim,
            "model": f"{config.embed_model}:max_seq={max_len}",
        }

    @app.post("/nli")
    def nli(request: NliRequest) -> dict:
        if len(request.pairs) > config.max_batch:
            raise HTTPException(413, f"batch of {len(request.pairs)} exceeds {config.max_batch}")
        if config.test_mode:
            scores = []
            for pair in request.pairs:
                if _collapse_ws(pair.premise) == _collapse_ws(pair.hypothesis):
                    scores.append({"entail": 1.0, "contradict": 0.0, "neutral": 0.0})
                else:
                    scores.append({"entail": 0.0, "contradict": 0.0, "neutral": 1.0})
            return {"scores": scores}
        model = holder.get_nli()
        with holder.lock:
            raw = model(
                [{"text": p.premise, "text_pair": p.hypothesis} for p in request.pairs]
            )
        scores = []
        for entry in raw:
            by_label = {item["label"].lower(): float(item["score"]) for item in entry}
            scores.append(
                {
                    "entail": by_label.get("entailment", 0.0),
                    "contradict": by_label.get("contradiction", 0.0),
                    "neutral": by_label.get("neutral", 0.0),
                }
            )
        return {"scores": scores}

    return app
