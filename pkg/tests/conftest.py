"""Shared fixtures: heavyweight synthetic corpora, trained reference
models, and the end-of-run summary of the headline criteria."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import pytest

from arxrank.lda import LdaModel, TrainSchedule, sample_corpus, train_online
from arxrank.textpipe import BagOfWords

# ---------------------------------------------------------------------------
# headline-criteria reporting

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def _format_line(name: str, ok: bool, detail: str) -> str:
    line = f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f" ({detail})"
    return line


@pytest.fixture
def acceptance():
    """Record one pass/fail line per headline criterion.

    Lines print immediately (visible with -s) and again in a dedicated
    terminal section after the run, so they survive output capture.
    """

    def record(name: str, ok: bool, detail: str = "") -> bool:
        ACCEPTANCE_RESULTS.append((name, bool(ok), detail))
        print(_format_line(name, ok, detail))
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(_format_line(name, ok, detail))


# ---------------------------------------------------------------------------
# reference synthetic corpus and trained models (session-scoped: built once,
# shared by every headline criterion that needs them)

SAMPLE_K = 4
SAMPLE_V = 500
SAMPLE_D = 4000
SAMPLE_DOC_LEN = 60
SAMPLE_ALPHA = 0.08
SAMPLE_ETA = 0.05
SAMPLE_SEED = 20260823
HELDOUT_SIZE = 400

TRAIN_SCHEDULE = TrainSchedule(
    passes=12, e_step_iters=100, batch_size=256, seed=11, gamma_tol=1e-4
)


@dataclass
class TrainedBundle:
    """Synthetic ground truth plus models fitted to it."""

    bows: list[BagOfWords]
    true_beta: np.ndarray
    true_theta: np.ndarray
    train_bows: list[BagOfWords] = field(default_factory=list)
    heldout_bows: list[BagOfWords] = field(default_factory=list)
    model_k4: LdaModel | None = None
    model_k2: LdaModel | None = None
    sample_seconds: float = 0.0
    k4_seconds: float = 0.0
    k2_seconds: float = 0.0


@pytest.fixture(scope="session")
def trained_bundle() -> TrainedBundle:
    t0 = time.perf_counter()
    bows, beta, theta = sample_corpus(
        K=SAMPLE_K,
        V=SAMPLE_V,
        D=SAMPLE_D,
        alpha=SAMPLE_ALPHA,
        eta=SAMPLE_ETA,
        doc_len=SAMPLE_DOC_LEN,
        seed=SAMPLE_SEED,
    )
    t1 = time.perf_counter()
    bundle = TrainedBundle(bows=bows, true_beta=beta, true_theta=theta)
    bundle.sample_seconds = t1 - t0
    bundle.train_bows = bows[: SAMPLE_D - HELDOUT_SIZE]
    bundle.heldout_bows = bows[SAMPLE_D - HELDOUT_SIZE :]

    t0 = time.perf_counter()
    bundle.model_k4 = train_online(
        bundle.train_bows, 4, alpha=0.1, eta=0.05, schedule=TRAIN_SCHEDULE, V=SAMPLE_V
    )
    bundle.k4_seconds = time.perf_counter() - t0

    t0 = time.perf_counter()
    bundle.model_k2 = train_online(
        bundle.train_bows, 2, alpha=0.1, eta=0.05, schedule=TRAIN_SCHEDULE, V=SAMPLE_V
    )
    bundle.k2_seconds = time.perf_counter() - t0
    return bundle


@pytest.fixture(scope="session")
def pseudo_abstracts() -> list[str]:
    from helpers import pseudo_abstract_texts

    return pseudo_abstract_texts()
