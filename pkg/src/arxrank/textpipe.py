"""Text preprocessing: raw title+abstract text to bag-of-words vectors.

Tokenization splits on whitespace and treats every non-alphanumeric
character as a separator, except inside protected tech-words, which are
matched case-insensitively and emitted in their canonical list form
(so "X-ray" and "x-ray" both yield the "x-ray" token).  Remaining
tokens are lowercased, stop-word filtered and Porter-stemmed; the
dictionary then drops tokens outside the document-frequency band.
"""

from __future__ import annotations

import hashlib
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .porter import stem_fixpoint


class PipelineError(ValueError):
    pass


class EmptyDictionaryError(PipelineError):
    """Every token was filtered out by the frequency band."""


def _load_wordlist(name: str) -> frozenset[str]:
    text = resources.files("arxrank.data").joinpath(name).read_text("utf-8")
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


def bundled_stop_words() -> frozenset[str]:
    return _load_wordlist("stopwords.txt")


def bundled_tech_words() -> frozenset[str]:
    return _load_wordlist("techwords.txt")


@dataclass(frozen=True)
class PipelineConfig:
    stop_words: frozenset[str] = field(default_factory=bundled_stop_words)
    tech_words: frozenset[str] = field(default_factory=bundled_tech_words)
    min_docs: int = 50
    max_frac: float = 0.90

    def __post_init__(self):
        if not (0.0 < self.max_frac <= 1.0):
            raise PipelineError(f"max_frac must be in (0, 1], got {self.max_frac}")
        if self.min_docs < 1:
            raise PipelineError(f"min_docs must be >= 1, got {self.min_docs}")


_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

# compiled tech-word splitters, keyed by the config's tech_words set
_tech_cache: dict[frozenset[str], tuple[re.Pattern | None, dict[str, str]]] = {}


def _tech_pattern(tech_words: frozenset[str]):
    try:
        return _tech_cache[tech_words]
    except KeyError:
        pass
    if not tech_words:
        _tech_cache[tech_words] = (None, {})
        return _tech_cache[tech_words]
    # longest alternative first so overlapping entries resolve to the
    # longest match; boundaries forbid touching alphanumerics; the
    # lexicographic tie-break keeps the pattern stable across runs
    alternatives = sorted(tech_words, key=lambda w: (-len(w), w))
    pattern = re.compile(
        r"(?<![0-9A-Za-z])("
        + "|".join(re.escape(w) for w in alternatives)
        + r")(?![0-9A-Za-z])",
        re.IGNORECASE,
    )
    canonical = {w.lower(): w for w in reversed(alternatives)}
    _tech_cache[tech_words] = (pattern, canonical)
    return _tech_cache[tech_words]


def preprocess(text: str, config: PipelineConfig | None = None) -> list[str]:
    """Turn raw text into a deterministic token list.

    Tech-words are preserved in canonical form wherever they occur; all
    other words are lowercased, stripped of punctuation, stop-word
    filtered and stemmed.  Stems that collapse onto a stop word are
    dropped too, which keeps the operation idempotent on its own output.
    """
    if config is None:
        config = default_config()
    pattern, canonical = _tech_pattern(config.tech_words)
    segments = pattern.split(text) if pattern is not None else [text]
    tokens: list[str] = []
    for i, segment in enumerate(segments):
        if pattern is not None and i % 2 == 1:
            tokens.append(canonical[segment.lower()])
            continue
        for raw in _TOKEN_RE.findall(segment.lower()):
            if raw in config.stop_words:
                continue
            stemmed = stem_fixpoint(raw)
            if stemmed in config.stop_words:
                continue
            tokens.append(stemmed)
    return tokens


_default_config: PipelineConfig | None = None


def default_config() -> PipelineConfig:
    global _default_config
    if _default_config is None:
        _default_config = PipelineConfig()
    return _default_config


@dataclass(frozen=True)
class Dictionary:
    """Token <-> dense id map with the document frequencies behind it."""

    tokens: tuple[str, ...]
    doc_freq: tuple[int, ...]
    n_docs: int
    version: int = 1

    def __post_init__(self):
        object.__setattr__(
            self, "index", {tok: i for i, tok in enumerate(self.tokens)}
        )

    def __len__(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int | None:
        return self.index.get(token)

    def to_tsv(self) -> bytes:
        lines = [f"#docs={self.n_docs} version={self.version}"]
        for i, tok in enumerate(self.tokens):
            lines.append(f"{tok}\t{i}\t{self.doc_freq[i]}")
        return ("\n".join(lines) + "\n").encode("utf-8")

    @classmethod
    def from_tsv(cls, data: bytes) -> "Dictionary":
        lines = data.decode("utf-8").splitlines()
        if not lines or not lines[0].startswith("#docs="):
            raise PipelineError("dictionary file missing '#docs=' header")
        m = re.fullmatch(r"#docs=(\d+) version=(\d+)", lines[0])
        if not m:
            raise PipelineError(f"malformed dictionary header: {lines[0]!r}")
        n_docs, version = int(m.group(1)), int(m.group(2))
        tokens: list[str] = []
        freqs: list[int] = []
        for lineno, line in enumerate(lines[1:], start=2):
            if not line:
                continue
            tok, tok_id, freq = line.split("\t")
            if int(tok_id) != len(tokens):
                raise PipelineError(f"line {lineno}: non-dense token id {tok_id}")
            tokens.append(tok)
            freqs.append(int(freq))
        return cls(tokens=tuple(tokens), doc_freq=tuple(freqs), n_docs=n_docs, version=version)

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_tsv())

    @classmethod
    def load(cls, path: str | Path) -> "Dictionary":
        return cls.from_tsv(Path(path).read_bytes())

    def digest(self) -> str:
        return hashlib.sha256(self.to_tsv()).hexdigest()


def build_dictionary(docs: list[list[str]], config: PipelineConfig | None = None) -> Dictionary:
    """Build a frequency-filtered dictionary over tokenized documents.

    Tokens in fewer than ``min_docs`` documents or more than
    ``max_frac`` of them are dropped; survivors get dense ids in
    lexicographic order.
    """
    if config is None:
        config = default_config()
    if not docs:
        raise PipelineError("cannot build a dictionary from zero documents")
    df: Counter[str] = Counter()
    for doc in docs:
        df.update(set(doc))
    n_docs = len(docs)
    ceiling = config.max_frac * n_docs
    kept = sorted(tok for tok, f in df.items() if config.min_docs <= f <= ceiling)
    if not kept:
        raise EmptyDictionaryError(
            f"no tokens survive the frequency band [{config.min_docs}, "
            f"{config.max_frac:.0%} of {n_docs} docs]"
        )
    return Dictionary(
        tokens=tuple(kept),
        doc_freq=tuple(df[tok] for tok in kept),
        n_docs=n_docs,
    )


@dataclass(frozen=True, eq=False)
class BagOfWords:
    """Sparse token counts: (token_id, count) pairs, ids strictly increasing."""

    entries: tuple[tuple[int, int], ...]

    def __post_init__(self):
        prev = -1
        for tok_id, count in self.entries:
            if tok_id <= prev:
                raise PipelineError("token ids must be strictly increasing")
            if count < 1:
                raise PipelineError("counts must be >= 1")
            prev = tok_id

    def __eq__(self, other):
        return isinstance(other, BagOfWords) and self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def ids(self) -> np.ndarray:
        return np.fromiter((i for i, _ in self.entries), dtype=np.int64, count=len(self.entries))

    @property
    def counts(self) -> np.ndarray:
        return np.fromiter((c for _, c in self.entries), dtype=np.float64, count=len(self.entries))

    @property
    def total(self) -> int:
        return sum(c for _, c in self.entries)


def to_bow(tokens: list[str], dictionary: Dictionary) -> BagOfWords:
    """Count in-dictionary tokens; out-of-dictionary tokens are dropped."""
    counts: Counter[int] = Counter()
    for tok in tokens:
        tok_id = dictionary.id_of(tok)
        if tok_id is not None:
            counts[tok_id] += 1
    return BagOfWords(entries=tuple(sorted(counts.items())))
