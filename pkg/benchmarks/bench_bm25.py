"""Benchmark: compiled BM25 kernel vs the NumPy fallback.

Builds a synthetic corpus, runs a query workload through both accumulation
routes, and reports throughput. Usage:

    python benchmarks/bench_bm25.py [--docs 20000] [--queries 300]
"""

from __future__ import annotations

import argparse
import random
import time

from regrag import _kernels
from regrag.lexical import Bm25Params, build_index, search_lexical
from regrag.corpus import Corpus, Passage
from regrag.textproc import PipelineConfig

WORDS = [f"w{i}" for i in range(5000)]

TOKENIZE_ONLY = PipelineConfig(
    expand_contractions=False,
    lowercase_and_strip=False,
    collapse_spaces=False,
    preserve_legal_tokens=False,
    remove_stopwords=False,
    stem=False,
    emit_bigrams=False,
)


def synthetic_corpus(rng: random.Random, n_docs: int) -> Corpus:
    corpus = Corpus()
    for i in range(n_docs):
        text = " ".join(rng.choice(WORDS) for _ in range(rng.randrange(40, 160)))
        corpus.key_index[(1, str(i))] = i
        corpus.passages.append(Passage(1, str(i), text))
    return corpus


def run_workload(index, params, queries, accumulate) -> float:
    start = time.perf_counter()
    for query in queries:
        search_lexical(index, params, query, 10, TOKENIZE_ONLY, _accumulate=accumulate)
    return time.perf_counter() - start


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--docs", type=int, default=20000)
    parser.add_argument("--queries", type=int, default=300)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    print(f"building index over {args.docs} synthetic passages ...")
    corpus = synthetic_corpus(rng, args.docs)
    index = build_index(corpus, TOKENIZE_ONLY)
    params = Bm25Params()
    queries = [
        " ".join(rng.choice(WORDS) for _ in range(rng.randrange(2, 9)))
        for _ in range(args.queries)
    ]

    # prime postings array caches so both routes measure scoring only
    run_workload(index, params, queries[:10], _kernels.accumulate_term_py)

    routes = [("numpy fallback", _kernels.accumulate_term_py)]
    if _kernels.USING_COMPILED:
        routes.append(("compiled kernel", _kernels.accumulate_term))
    else:
        print("compiled kernel unavailable (REGRAG_NO_EXT set or extension not built)")

    results = {}
    for name, accumulate in routes:
        elapsed = run_workload(index, params, queries, accumulate)
        results[name] = elapsed
        print(f"{name:>16}: {elapsed:.3f}s total, {args.queries / elapsed:,.0f} queries/s")

    if len(results) == 2:
        speedup = results["numpy fallback"] / results["compiled kernel"]
        print(f"{'speedup':>16}: {speedup:.2f}x")

    # both routes must agree exactly
    sample = queries[0]
    a = search_lexical(index, params, sample, 10, TOKENIZE_ONLY,
                       _accumulate=_kernels.accumulate_term_py)
    b = search_lexical(index, params, sample, 10, TOKENIZE_ONLY,
                       _accumulate=_kernels.accumulate_term)
    assert a == b, "routes disagree"


if __name__ == "__main__":
    main()
