"""Deterministic synthetic data shared across the test suite."""

from __future__ import annotations

import itertools
from datetime import date

import numpy as np

from arxrank.ingest import Corpus, PaperRecord, to_jsonl

# Four disjoint mini-vocabularies, one per default category.  Words were
# picked so their stems stay distinct across themes, which makes each
# category map onto one clean topic in tiny training runs.
THEME_WORDS = {
    "astro-ph": (
        "galaxy", "stellar", "supernova", "redshift", "quasar", "nebula",
        "accretion", "photometric", "luminosity", "cosmic", "dust", "survey",
    ),
    "gr-qc": (
        "spacetime", "curvature", "horizon", "geodesic", "metric",
        "singularity", "waveform", "inspiral", "merger", "relativistic",
        "tensor", "causal",
    ),
    "hep-ph": (
        "quark", "gluon", "hadron", "collider", "parton", "neutrino",
        "boson", "decay", "chiral", "baryon", "flavor", "lepton",
    ),
    "hep-th": (
        "string", "brane", "duality", "holographic", "supersymmetric",
        "gauge", "vacuum", "moduli", "compactification", "anomaly",
        "instanton", "worldsheet",
    ),
}

THEMES = tuple(THEME_WORDS)


def make_paper(
    pid: str,
    *,
    title: str = "Stellar population gradients",
    abstract: str = "We study stellar population gradients in nearby dwarf galaxies.",
    day: date = date(2026, 8, 1),
    authors: tuple[str, ...] = ("Doe, J.",),
    categories: tuple[str, ...] = ("astro-ph",),
) -> PaperRecord:
    return PaperRecord(
        id=pid,
        title=title,
        abstract=abstract,
        submitted=day,
        authors=tuple(authors),
        categories=tuple(categories),
    )


def themed_paper(
    pid: str,
    theme: str,
    day: date,
    rng: np.random.Generator,
    extra_categories: tuple[str, ...] = (),
) -> PaperRecord:
    words = THEME_WORDS[theme]
    title = " ".join(rng.choice(words, size=4))
    abstract = " ".join(rng.choice(words, size=26)) + "."
    return PaperRecord(
        id=pid,
        title=title,
        abstract=abstract,
        submitted=day,
        authors=("Doe, J.", "Roe, R."),
        categories=(theme,) + extra_categories,
    )


def themed_release(
    day: date,
    n_per_theme: int,
    rng: np.random.Generator,
    prefix: str = "p",
) -> list[PaperRecord]:
    """One day's synthetic release: n papers for each of the four themes."""
    records = []
    for theme in THEMES:
        for i in range(n_per_theme):
            records.append(
                themed_paper(f"{prefix}-{day.isoformat()}-{theme}-{i:03d}", theme, day, rng)
            )
    return records


def write_jsonl(path, records) -> None:
    path.write_bytes(to_jsonl(Corpus(records=tuple(records))))


def pseudo_abstract_texts(
    n_docs: int = 20000,
    doc_len: int = 60,
    lexicon_size: int = 12000,
    exponent: float = 1.07,
    seed: int = 424242,
) -> list[str]:
    """A large corpus of pseudo-word documents with a power-law vocabulary.

    The rank-frequency exponent is tuned so that, at the default document
    count, a few hundred head words exceed the default document-frequency
    ceiling while a couple of thousand mid-band words clear the floor.
    """
    rng = np.random.default_rng(seed)
    syllables = [c + v for c in "bdklmnprstvz" for v in "aeiou"]
    lexicon = [
        "".join(t)
        for t in itertools.islice(itertools.product(syllables, repeat=3), lexicon_size)
    ]
    ranks = np.arange(1, len(lexicon) + 1, dtype=np.float64)
    p = ranks ** -exponent
    p /= p.sum()
    draws = rng.choice(len(lexicon), size=(n_docs, doc_len), p=p)
    return [" ".join(lexicon[i] for i in row) for row in draws]
