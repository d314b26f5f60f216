"""Command-line pipelines: ingest, index, search, eval, generate, repass.

Every command is deterministic given fixed inputs, flags, and the stub
providers. Defaults may come from a config file (flat key = value text with
one [section] per subcommand); explicit flags always win.

Exit codes: 0 success, 2 input error, 3 provider/transport failure,
4 configuration mismatch, 5 data format violation.
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click

from regrag import __version__, corpus as corpus_mod, evalret, fusion, lexical, raggen, repass, semantic
from regrag.errors import (
    ConfigMismatchError,
    ContractError,
    DataFormatError,
    NoContextError,
    TransportError,
    GenerationError,
)
from regrag.manifest import RunManifest
from regrag.textproc import PipelineConfig

EXIT_INPUT = 2
EXIT_TRANSPORT = 3
EXIT_CONFIG = 4
EXIT_FORMAT = 5


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def handle_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (TransportError, GenerationError) as exc:
            _fail(EXIT_TRANSPORT, str(exc))
        except ConfigMismatchError as exc:
            _fail(EXIT_CONFIG, str(exc))
        except DataFormatError as exc:
            _fail(EXIT_FORMAT, str(exc))
        except (FileNotFoundError, ContractError) as exc:
            _fail(EXIT_INPUT, str(exc))

    return wrapper


def parse_config_text(text: str) -> dict[str, dict[str, object]]:
    """Parse flat [section] key = value config text (strings, numbers, bools)."""
    sections: dict[str, dict[str, object]] = {}
    current: dict[str, object] = sections.setdefault("", {})
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = sections.setdefault(line[1:-1].strip(), {})
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise DataFormatError(f"expected key = value, got {line!r}", line=lineno)
        current[key.strip().replace("-", "_")] = _parse_config_value(value.strip())
    return sections


def _parse_config_value(text: str) -> object:
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        return text[1:-1]
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


@click.group()
@click.version_option(version=__version__, prog_name="regrag")
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Config file supplying per-command defaults (flags win).",
)
@click.pass_context
def main(ctx: click.Context, config_path: str | None) -> None:
    """Hybrid lexical+semantic retrieval and RAG pipelines."""
    if config_path is not None:
        try:
            sections = parse_config_text(Path(config_path).read_text(encoding="utf-8"))
        except DataFormatError as exc:
            _fail(EXIT_FORMAT, f"{config_path}: {exc}")
        ctx.default_map = {name: dict(values) for name, values in sections.items() if name}


def pipeline_options(func):
    func = click.option("--pipeline", type=click.Choice(["full", "minimal"]), default="full",
                        show_default=True, help="Preprocessing preset.")(func)
    for flag, help_text in [
        ("contractions", "contraction expansion"),
        ("normalize", "lowercasing and non-alphanumeric stripping"),
        ("collapse", "space collapsing"),
        ("legal", "legal identifier preservation"),
        ("stopwords", "stopword removal"),
        ("stem", "stemming"),
        ("bigrams", "bigram emission"),
    ]:
        func = click.option(
            f"--{flag}/--no-{flag}", default=None, help=f"Override {help_text}."
        )(func)
    return func


def build_pipeline_config(
    pipeline: str,
    contractions: bool | None,
    normalize: bool | None,
    collapse: bool | None,
    legal: bool | None,
    stopwords: bool | None,
    stem: bool | None,
    bigrams: bool | None,
) -> PipelineConfig:
    base = PipelineConfig.full() if pipeline == "full" else PipelineConfig.minimal()
    overrides = {
        "expand_contractions": contractions,
        "lowercase_and_strip": normalize,
        "collapse_spaces": collapse,
        "preserve_legal_tokens": legal,
        "remove_stopwords": stopwords,
        "stem": stem,
        "emit_bigrams": bigrams,
    }
    values = {name: getattr(base, name) if value is None else value for name, value in overrides.items()}
    return PipelineConfig(**values)


def provider_options(func):
    func = click.option("--provider", type=click.Choice(["stub", "http"]), default="stub",
                        show_default=True, help="Embedding provider.")(func)
    func = click.option("--endpoint", default=None, help="Embedding service base URL (http provider).")(func)
    func = click.option("--dim", type=int, default=semantic.DEFAULT_DIM, show_default=True)(func)
    func = click.option("--seed", type=int, default=0, show_default=True,
                        help="Stub provider seed.")(func)
    return func


def make_provider(provider: str, endpoint: str | None, dim: int, seed: int):
    if provider == "stub":
        return semantic.HashEmbeddingProvider(dim=dim, seed=seed)
    if not endpoint:
        raise ContractError("--provider http requires --endpoint")
    return semantic.HttpEmbeddingProvider(endpoint, dim=dim)


# ---------------------------------------------------------------------------
# ingest
# ---------------------------------------------------------------------------


@main.command()
@click.argument("inputs", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@handle_errors
def ingest(inputs: tuple[str, ...], out_dir: str) -> None:
    """Convert question files into corpus, qrels, and question artifacts."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    all_questions: list[corpus_mod.Question] = []
    merged = corpus_mod.Corpus()
    for path in inputs:
        questions, file_corpus = corpus_mod.load_obliqa(path)
        all_questions.extend(questions)
        for passage in file_corpus:
            key = passage.key
            existing = merged.key_index.get(key)
            if existing is None:
                merged.key_index[key] = len(merged.passages)
                merged.passages.append(passage)
            elif merged.passages[existing].text.strip() != passage.text.strip():
                raise corpus_mod.PassageConflictError(
                    f"passage {key} differs between input files"
                )

    manifest = RunManifest.create("ingest", {"n_inputs": len(inputs)}, list(inputs))
    corpus_path = out / "corpus.ndjson"
    qrels_path = out / "qrels.tsv"
    questions_path = out / "questions.ndjson"

    corpus_mod.write_corpus(merged, corpus_path)
    qrels = {}
    for q in all_questions:
        qrels.setdefault(q.question_id, set()).update(q.gold_passage_keys)
    digest = manifest.digest()
    evalret.write_qrels(qrels_path, qrels, manifest_digest=digest)
    corpus_mod.write_questions(all_questions, questions_path)
    for artifact in (corpus_path, qrels_path, questions_path):
        manifest.write_sidecar(artifact)

    click.echo(f"questions: {len(all_questions)}")
    click.echo(f"passages: {len(merged)}")
    click.echo(f"wrote {corpus_path}, {qrels_path}, {questions_path}")


# ---------------------------------------------------------------------------
# index
# ---------------------------------------------------------------------------


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(["lexical", "semantic", "both"]), default="both",
              show_default=True)
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--batch-size", type=int, default=64, show_default=True)
@pipeline_options
@provider_options
@handle_errors
def index(
    corpus_path: str,
    mode: str,
    out_dir: str,
    batch_size: int,
    pipeline: str,
    provider: str,
    endpoint: str | None,
    dim: int,
    seed: int,
    **pipeline_flags,
) -> None:
    """Build and serialize the lexical and/or vector indexes."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = build_pipeline_config(pipeline, **pipeline_flags)
    loaded = corpus_mod.load_corpus(corpus_path)

    manifest_config = {"mode": mode, "pipeline": config.fingerprint()}
    if mode in ("lexical", "both"):
        idx = lexical.build_index(loaded, config)
        path = out / "lexical.idx.json"
        lexical.save_index(idx, path)
        RunManifest.create("index", manifest_config, [corpus_path]).write_sidecar(path)
        click.echo(f"lexical index: {idx.n_docs} passages, {len(idx.postings)} terms -> {path}")
    if mode in ("semantic", "both"):
        emb = make_provider(provider, endpoint, dim, seed)
        vidx = semantic.build_vector_index(loaded, emb, batch_size=batch_size)
        path = out / "vector.idx.bin"
        semantic.save_vector_index(vidx, path)
        RunManifest.create(
            "index", {**manifest_config, "provider": emb.fingerprint()}, [corpus_path]
        ).write_sidecar(path)
        click.echo(f"vector index: {vidx.matrix.shape[0]}x{vidx.dim} -> {path}")


# ---------------------------------------------------------------------------
# search
# ---------------------------------------------------------------------------


@main.command()
@click.option("--system", type=click.Choice(["bm25", "semantic", "hybrid"]), required=True)
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--lexical-index", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--vector-index", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--query", default=None, help="Single ad-hoc query printed to stdout.")
@click.option("--questions", "questions_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Question file; writes a run file.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@click.option("--alpha", type=float, default=fusion.DEFAULT_ALPHA, show_default=True)
@click.option("--k", type=int, default=10, show_default=True)
@click.option("--pool", type=int, default=50, show_default=True,
              help="Per-retriever candidate pool depth before fusion.")
@click.option("--k1", type=float, default=1.5, show_default=True)
@click.option("--b", type=float, default=0.75, show_default=True)
@pipeline_options
@provider_options
@handle_errors
def search(
    system: str,
    corpus_path: str,
    lexical_index: str | None,
    vector_index: str | None,
    query: str | None,
    questions_path: str | None,
    out_path: str | None,
    alpha: float,
    k: int,
    pool: int,
    k1: float,
    b: float,
    pipeline: str,
    provider: str,
    endpoint: str | None,
    dim: int,
    seed: int,
    **pipeline_flags,
) -> None:
    """Rank passages for ad-hoc queries or a whole question file."""
    if (query is None) == (questions_path is None):
        raise ContractError("provide exactly one of --query or --questions")
    config = build_pipeline_config(pipeline, **pipeline_flags)
    params = lexical.Bm25Params(k1=k1, b=b)
    loaded = corpus_mod.load_corpus(corpus_path)

    lex_idx = None
    vec_idx = None
    emb = None
    if system in ("bm25", "hybrid"):
        if lexical_index is None:
            raise ConfigMismatchError(f"--system {system} requires --lexical-index")
        lex_idx = lexical.load_index(
            lexical_index, expected_pipeline_fingerprint=config.fingerprint()
        )
        if lex_idx.corpus_fingerprint != loaded.fingerprint():
            raise ConfigMismatchError("lexical index was built over a different corpus")
    if system in ("semantic", "hybrid"):
        if vector_index is None:
            raise ConfigMismatchError(f"--system {system} requires --vector-index")
        vec_idx = semantic.load_vector_index(vector_index)
        if vec_idx.corpus_fingerprint != loaded.fingerprint():
            raise ConfigMismatchError("vector index was built over a different corpus")
        emb = make_provider(provider, endpoint, vec_idx.dim, seed)

    fusion_config = fusion.FusionConfig(
        alpha=alpha, pool_lexical=max(pool, k), pool_semantic=max(pool, k), top_k=k
    )

    def rank(text: str) -> list[tuple[int, float]]:
        if system == "bm25":
            return lexical.search_lexical(lex_idx, params, text, k, config)
        if system == "semantic":
            qvec = semantic.embed_batch(emb, [text])[0]
            return semantic.search_semantic(vec_idx, qvec, k)
        hits = fusion.hybrid_search(text, lex_idx, vec_idx, emb, params, fusion_config, config)
        return [(h.ordinal, h.fused) for h in hits]

    if query is not None:
        results = rank(query)
        for rank_i, (ordinal, score) in enumerate(results, start=1):
            passage = loaded[ordinal]
            snippet = " ".join(passage.text.split())[:100]
            click.echo(
                f"{rank_i}\t{passage.document_id}\t{passage.passage_id}"
                f"\t{score:.6f}\t{snippet}"
            )
        return

    if out_path is None:
        raise ContractError("--questions requires --out")
    questions = corpus_mod.read_questions(questions_path)
    results = {q.question_id: rank(q.text) for q in questions}
    manifest = RunManifest.create(
        "search",
        {
            "system": system,
            "alpha": alpha,
            "k": k,
            "pool": pool,
            "k1": k1,
            "b": b,
            "pipeline": config.fingerprint(),
        },
        [corpus_path, questions_path]
        + [p for p in (lexical_index, vector_index) if p is not None],
    )
    fusion.write_run_file(out_path, results, loaded, manifest_digest=manifest.digest())
    manifest.write_sidecar(out_path)
    click.echo(f"wrote {out_path} ({len(results)} questions)")


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


@main.command("eval")
@click.option("--run", "run_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--qrels", "qrels_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--k", "ks", default="10,20", show_default=True,
              help="Comma-separated cutoffs.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@handle_errors
def eval_run(run_path: str, qrels_path: str, ks: str, out_path: str | None) -> None:
    """Score a run file against qrels and emit a metric report."""
    try:
        cutoffs = [int(x) for x in ks.split(",") if x.strip()]
    except ValueError as exc:
        raise ContractError(f"bad --k value: {exc}") from exc
    run = fusion.read_run_file(run_path)
    qrels = evalret.read_qrels(qrels_path)
    report = evalret.evaluate_run(run, qrels, cutoffs)
    manifest = RunManifest.create("eval", {"k": cutoffs}, [run_path, qrels_path])
    payload = evalret.report_to_json(report, manifest_digest=manifest.digest())
    if out_path is not None:
        Path(out_path).write_text(payload, encoding="utf-8")
        manifest.write_sidecar(out_path)
    click.echo(payload, nl=False)


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------


@main.command()
@click.option("--run", "run_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--questions", "questions_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--llm", type=click.Choice(["echo", "http"]), default="echo", show_default=True)
@click.option("--llm-endpoint", default=None, help="Chat-completion endpoint (http llm).")
@click.option("--max-passages", type=int, default=10, show_default=True)
@click.option("--min-score", type=float, default=0.72, show_default=True)
@click.option("--max-drop", type=float, default=0.1, show_default=True)
@click.option("--resume/--no-resume", default=True, show_default=True,
              help="Skip questions already answered with the same prompt.")
@handle_errors
def generate(
    run_path: str,
    questions_path: str,
    corpus_path: str,
    out_path: str,
    llm: str,
    llm_endpoint: str | None,
    max_passages: int,
    min_score: float,
    max_drop: float,
    resume: bool,
) -> None:
    """Select passages per question, assemble prompts, and generate answers."""
    loaded = corpus_mod.load_corpus(corpus_path)
    questions = corpus_mod.read_questions(questions_path)
    run = fusion.read_run_file(run_path)
    policy = raggen.SelectionPolicy(
        max_passages=max_passages, min_score=min_score, max_drop=max_drop
    )
    assets = raggen.load_prompt_assets()
    if llm == "echo":
        provider: raggen.LlmProvider = raggen.EchoProvider()
    else:
        if not llm_endpoint:
            raise ContractError("--llm http requires --llm-endpoint")
        provider = raggen.HttpLlmProvider(llm_endpoint)

    done: dict[tuple[str, str], raggen.AnswerRecord] = {}
    out_file = Path(out_path)
    if resume and out_file.exists():
        for record in raggen.read_answers(out_file):
            done[(record.question_id, record.prompt_digest)] = record

    written = 0
    skipped = 0
    failed = 0
    with out_file.open("a" if (resume and out_file.exists()) else "w", encoding="utf-8") as handle:
        for question in questions:
            hits = [
                fusion.ScoredHit(
                    ordinal=loaded.ordinal((doc, pid)), lexical_norm=0.0,
                    semantic_norm=0.0, fused=score,
                )
                for doc, pid, score in run.get(question.question_id, [])
                if (doc, pid) in loaded.key_index
            ]
            selected = raggen.select_passages(hits, policy)
            try:
                bundle = raggen.build_prompt(question, selected, loaded, assets)
            except NoContextError:
                record = raggen.AnswerRecord(
                    question_id=question.question_id,
                    answer=None,
                    passage_keys=[],
                    provider=provider.name,
                    prompt_digest="",
                    error="no-context",
                )
                if (record.question_id, "") not in done:
                    handle.write(record.to_json() + "\n")
                    done[(record.question_id, "")] = record
                    written += 1
                else:
                    skipped += 1
                continue
            digest = bundle.digest()
            if (question.question_id, digest) in done:
                skipped += 1
                continue
            try:
                answer = raggen.generate_answer(provider, bundle)
            except (TransportError, GenerationError) as exc:
                record = raggen.AnswerRecord(
                    question_id=question.question_id,
                    answer=None,
                    passage_keys=list(bundle.passage_keys),
                    provider=provider.name,
                    prompt_digest=digest,
                    error=str(exc),
                )
                handle.write(record.to_json() + "\n")
                failed += 1
                continue
            record = raggen.AnswerRecord(
                question_id=question.question_id,
                answer=answer,
                passage_keys=list(bundle.passage_keys),
                provider=provider.name,
                prompt_digest=digest,
            )
            handle.write(record.to_json() + "\n")
            done[(question.question_id, digest)] = record
            written += 1

    manifest = RunManifest.create(
        "generate",
        {
            "llm": provider.name,
            "max_passages": max_passages,
            "min_score": min_score,
            "max_drop": max_drop,
        },
        [run_path, questions_path, corpus_path],
    )
    manifest.write_sidecar(out_path)
    click.echo(f"answers written: {written}, skipped (resume): {skipped}, failed: {failed}")


# ---------------------------------------------------------------------------
# repass
# ---------------------------------------------------------------------------


@main.command("repass")
@click.option("--answers", "answers_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@click.option("--stub", is_flag=True, help="Use the perfect-match NLI stub.")
@click.option("--endpoint", default=None, help="NLI service base URL.")
@click.option("--tau", type=float, default=repass.DEFAULT_COVERAGE_TAU, show_default=True,
              help="Obligation coverage entailment threshold.")
@handle_errors
def repass_cmd(
    answers_path: str,
    corpus_path: str,
    out_path: str | None,
    stub: bool,
    endpoint: str | None,
    tau: float,
) -> None:
    """Evaluate generated answers for stability against their passages."""
    if not stub and not endpoint:
        raise TransportError("no NLI scorer: pass --endpoint URL or --stub", attempts=0)
    scorer: repass.NliScorer
    scorer = repass.PerfectMatchNli() if stub else repass.HttpNliScorer(endpoint)
    loaded = corpus_mod.load_corpus(corpus_path)
    records = raggen.read_answers(answers_path)
    reports, aggregate = repass.evaluate_answers(records, loaded, scorer, tau)
    manifest = RunManifest.create(
        "repass",
        {"scorer": "stub" if stub else endpoint, "tau": tau},
        [answers_path, corpus_path],
    )
    payload = repass.report_to_json(reports, aggregate, manifest_digest=manifest.digest())
    if out_path is not None:
        Path(out_path).write_text(payload, encoding="utf-8")
        manifest.write_sidecar(out_path)
    if aggregate.has_data:
        click.echo(
            f"n={aggregate.n_scored} entailment={aggregate.e_s:.4f} "
            f"contradiction={aggregate.c_s:.4f} coverage={aggregate.oc_s:.4f} "
            f"composite={aggregate.composite:.4f}"
        )
    else:
        click.echo("no data: nothing scored")
    if aggregate.n_errors:
        click.echo(f"excluded {aggregate.n_errors} answers with errors", err=True)


if __name__ == "__main__":
    main()
