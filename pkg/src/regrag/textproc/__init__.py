"""Text preprocessing pipeline producing index/query terms.

Steps, in order: contraction expansion, lowercasing + non-alphanumeric
stripping (with legal-identifier preservation), space collapsing, whitespace
tokenization, stopword removal, Snowball stemming, and unigram+bigram
emission. Every step is toggled by a :class:`PipelineConfig` flag; the full
pipeline is the default.

The stopword and contraction tables are frozen data files bundled with the
package; see ``regrag/data/``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, fields
from functools import lru_cache
from importlib import resources

from regrag.textproc.porter2 import stem_word

__all__ = [
    "PipelineConfig",
    "TermList",
    "expand_contractions",
    "normalize",
    "remove_stopwords",
    "stem",
    "preprocess",
    "stopword_set",
    "contraction_table",
]

BIGRAM_JOINER = "_"


@dataclass(frozen=True)
class PipelineConfig:
    """Which preprocessing steps run. All steps are enabled by default."""

    expand_contractions: bool = True
    lowercase_and_strip: bool = True
    collapse_spaces: bool = True
    preserve_legal_tokens: bool = True
    remove_stopwords: bool = True
    stem: bool = True
    emit_bigrams: bool = True

    @classmethod
    def full(cls) -> "PipelineConfig":
        return cls()

    @classmethod
    def minimal(cls) -> "PipelineConfig":
        """Bare tokenizer: lowercased whitespace tokens, nothing else."""
        return cls(**{f.name: False for f in fields(cls)})

    def fingerprint(self) -> str:
        """Stable string identifying the enabled steps (embedded in indexes)."""
        bits = "".join("1" if getattr(self, f.name) else "0" for f in fields(self))
        return f"pipeline-v1:{bits}"


@dataclass(frozen=True)
class TermList:
    """Ordered index/query terms: unigrams first, then adjacent-pair bigrams."""

    terms: tuple[str, ...]

    def __iter__(self):
        return iter(self.terms)

    def __len__(self) -> int:
        return len(self.terms)


def _load_data_lines(name: str) -> list[str]:
    text = resources.files("regrag.data").joinpath(name).read_text(encoding="utf-8")
    lines = []
    for raw in text.splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            lines.append(line)
    return lines


@lru_cache(maxsize=1)
def stopword_set() -> frozenset[str]:
    return frozenset(_load_data_lines("stopwords.txt"))


@lru_cache(maxsize=1)
def contraction_table() -> dict[str, str]:
    table = {}
    for line in _load_data_lines("contractions.tsv"):
        contraction, _, expansion = line.partition("\t")
        table[contraction.lower()] = expansion
    return table


@lru_cache(maxsize=1)
def _contraction_pattern() -> re.Pattern[str]:
    keys = sorted(contraction_table(), key=len, reverse=True)
    alternation = "|".join(re.escape(k) for k in keys)
    return re.compile(rf"(?<![\w'])({alternation})(?![\w'])", re.IGNORECASE)


def expand_contractions(text: str) -> str:
    """Replace known contractions with their expansions, case-insensitively.

    Leading capitalization (and full upper-case) of the matched contraction
    carries over to the expansion: "Don't" -> "Do not".
    """
    text = text.replace("’", "'")

    def replace(match: re.Match[str]) -> str:
        found = match.group(0)
        expansion = contraction_table()[found.lower().replace("’", "'")]
        if found.isupper() and len(found) > 1:
            return expansion.upper()
        if found[0].isupper():
            return expansion[0].upper() + expansion[1:]
        return expansion

    return _contraction_pattern().sub(replace, text)


def _is_alnum(ch: str) -> bool:
    return ("a" <= ch <= "z") or ("0" <= ch <= "9")


def normalize(text: str, *, preserve_legal: bool = True, collapse: bool = True) -> str:
    """Lowercase and strip to [a-z0-9] plus preserved legal punctuation.

    "." and "-" survive only when flanked by alphanumerics on both sides, so
    section identifiers like "7.3.4" stay intact while sentence-final periods
    are dropped. Runs of spaces collapse to one; the result is trimmed.
    """
    text = text.lower()
    out = []
    n = len(text)
    for i, ch in enumerate(text):
        if _is_alnum(ch):
            out.append(ch)
        elif (
            preserve_legal
            and ch in ".-"
            and 0 < i < n - 1
            and _is_alnum(text[i - 1])
            and _is_alnum(text[i + 1])
        ):
            out.append(ch)
        else:
            out.append(" ")
    result = "".join(out)
    if collapse:
        result = " ".join(result.split())
    return result


def remove_stopwords(tokens: list[str]) -> list[str]:
    """Drop tokens found in the bundled stopword list, preserving order."""
    stopwords = stopword_set()
    return [t for t in tokens if t not in stopwords]


_SKIP_STEM = re.compile(r"[0-9.]")


def stem(tokens: list[str]) -> list[str]:
    """Snowball-stem each token; identifiers (digits or ".") pass through."""
    return [t if _SKIP_STEM.search(t) else stem_word(t) for t in tokens]


def preprocess(text: str, config: PipelineConfig | None = None) -> TermList:
    """Run the enabled pipeline steps and emit unigrams plus bigrams.

    Bigrams are formed over the post-stem token sequence and joined with
    "_"; an n-token input yields max(0, n-1) bigrams.
    """
    if config is None:
        config = PipelineConfig()
    if config.expand_contractions:
        text = expand_contractions(text)
    text = text.lower()
    if config.lowercase_and_strip:
        text = normalize(
            text,
            preserve_legal=config.preserve_legal_tokens,
            collapse=config.collapse_spaces,
        )
    tokens = text.split()
    if config.remove_stopwords:
        tokens = remove_stopwords(tokens)
    if config.stem:
        tokens = stem(tokens)
    terms = list(tokens)
    if config.emit_bigrams:
        terms.extend(
            f"{first}{BIGRAM_JOINER}{second}" for first, second in zip(tokens, tokens[1:])
        )
    return TermList(terms=tuple(terms))
