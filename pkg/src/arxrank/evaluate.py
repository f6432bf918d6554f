"""Model quality and structure metrics.

Held-out perplexity here is the plug-in predictive bound: per-word log
likelihood of the mixture sum_k theta_k * beta_kw with theta the
variational posterior mean from inference and beta the expected
topic-word distribution.  This keeps the uniform-model identity exact
(beta rows all 1/V give perplexity exactly V regardless of theta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lda import LdaModel, TopicVector, TrainSchedule, e_step, train_online
from .textpipe import BagOfWords


class EvalError(ValueError):
    pass


def log_perplexity(model: LdaModel, heldout: Sequence[BagOfWords]) -> float:
    """Per-word predictive log-likelihood bound L; perplexity = exp(-L)."""
    if not heldout:
        raise EvalError("held-out set must be non-empty")
    beta = model.expected_beta()
    total_log = 0.0
    total_words = 0
    for bow in heldout:
        if len(bow) == 0:
            continue
        res = e_step(bow, model)
        theta = res.gamma / res.gamma.sum()
        word_probs = theta @ beta[:, bow.ids]
        total_log += float(bow.counts @ np.log(word_probs))
        total_words += bow.total
    if total_words == 0:
        raise EvalError("held-out set contains zero words")
    return total_log / total_words


def perplexity(model: LdaModel, heldout: Sequence[BagOfWords]) -> float:
    return math.exp(-log_perplexity(model, heldout))


@dataclass(frozen=True)
class CoherenceResult:
    per_topic: tuple[float, ...]
    mean: float
    skipped_pairs: int


def umass_coherence(
    model: LdaModel,
    corpus: Sequence[BagOfWords],
    topn: int = 10,
) -> CoherenceResult:
    """Document co-occurrence coherence of each topic's top words.

    C_k = sum over ranked word pairs (w_i, w_j), j < i, of
    log[(D(w_i, w_j) + 1) / D(w_j)] with D counting containing
    documents.  Pairs involving a word absent from every document are
    skipped and counted.
    """
    if topn < 2:
        raise EvalError(f"topn must be >= 2, got {topn}")
    if not corpus:
        raise EvalError("corpus must be non-empty")
    beta = model.expected_beta()
    # ties broken toward the lower id, which is lexicographic order for
    # dictionaries built by this package
    top_ids = [
        sorted(range(model.V), key=lambda w: (-beta[k, w], w))[:topn]
        for k in range(model.K)
    ]
    needed = {w for ids in top_ids for w in ids}
    docs_with: dict[int, set[int]] = {w: set() for w in needed}
    for d, bow in enumerate(corpus):
        for w, _ in bow.entries:
            if w in docs_with:
                docs_with[w].add(d)

    per_topic = []
    skipped = 0
    for k in range(model.K):
        words = top_ids[k]
        score = 0.0
        for i in range(1, len(words)):
            for j in range(i):
                wi, wj = words[i], words[j]
                if not docs_with[wi] or not docs_with[wj]:
                    skipped += 1
                    continue
                co = len(docs_with[wi] & docs_with[wj])
                score += math.log((co + 1) / len(docs_with[wj]))
        per_topic.append(score)
    return CoherenceResult(
        per_topic=tuple(per_topic),
        mean=sum(per_topic) / len(per_topic),
        skipped_pairs=skipped,
    )


@dataclass(frozen=True)
class GroupHistogram:
    """Raw per-topic weight lists for one group, plus the per-topic mean."""

    weights: tuple[tuple[float, ...], ...]  # [topic][document]
    mean: tuple[float, ...]


def dominant_topic_histogram(
    thetas: Sequence[TopicVector],
    labels: Sequence,
) -> dict:
    """Per-group, per-topic weight histograms (raw data plus means)."""
    if len(thetas) != len(labels):
        raise EvalError(
            f"got {len(thetas)} topic vectors but {len(labels)} labels"
        )
    if not thetas:
        return {}
    K = len(thetas[0])
    by_group: dict = {}
    for theta, label in zip(thetas, labels):
        by_group.setdefault(label, []).append(theta.weights)
    out = {}
    for label, rows in by_group.items():
        mat = np.vstack(rows)
        out[label] = GroupHistogram(
            weights=tuple(tuple(float(x) for x in mat[:, k]) for k in range(K)),
            mean=tuple(float(x) for x in mat.mean(axis=0)),
        )
    return out


@dataclass(frozen=True)
class RocCurve:
    """Step curve of (false positive rate, true positive rate) points."""

    points: tuple[tuple[float, float], ...]
    auc: float

    def __post_init__(self):
        pts = self.points
        if pts[0] != (0.0, 0.0) or pts[-1] != (1.0, 1.0):
            raise EvalError("ROC curve must run from (0,0) to (1,1)")
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            if x1 < x0 or y1 < y0:
                raise EvalError("ROC coordinates must be non-decreasing")


def roc_one_vs_all(scores: Sequence[float], labels: Sequence[bool]) -> RocCurve:
    """ROC curve from a threshold sweep over the distinct score values.

    Equal scores enter in one step, so the area under the curve equals
    the pair-counting statistic P(s+ > s-) + 1/2 P(s+ = s-).
    """
    if len(scores) != len(labels):
        raise EvalError(f"got {len(scores)} scores but {len(labels)} labels")
    y = np.asarray(labels, dtype=bool)
    s = np.asarray(scores, dtype=np.float64)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EvalError("need at least one positive and one negative label")
    order = np.argsort(-s, kind="stable")
    s = s[order]
    y = y[order]
    tp = np.cumsum(y)
    fp = np.cumsum(~y)
    # keep only the last index of each tied score group
    distinct = np.nonzero(np.diff(s))[0]
    idx = np.concatenate([distinct, [len(s) - 1]])
    tpr = np.concatenate([[0.0], tp[idx] / n_pos])
    fpr = np.concatenate([[0.0], fp[idx] / n_neg])
    auc = float(np.trapezoid(tpr, fpr))
    points = tuple((float(x), float(yv)) for x, yv in zip(fpr, tpr))
    return RocCurve(points=points, auc=auc)


@dataclass(frozen=True)
class PizzaPoint:
    """One document on the pizza plot: slice = dominant topic, radius =
    squared deviation from the uniform mixture."""

    doc_id: str
    main_topic: int
    radius: float
    angle: float


def pizza_radius(theta: TopicVector) -> float:
    w = theta.weights
    return float(np.sum((w - 1.0 / len(w)) ** 2))


def pizza_points(
    thetas: Sequence[TopicVector],
    seed: int,
    doc_ids: Sequence[str] | None = None,
) -> list[PizzaPoint]:
    """Polar coordinates for each document; angles are seeded-uniform
    within the dominant topic's slice (dominance ties pick the lowest
    topic index)."""
    if doc_ids is not None and len(doc_ids) != len(thetas):
        raise EvalError(f"got {len(thetas)} topic vectors but {len(doc_ids)} ids")
    rng = np.random.default_rng(seed)
    points = []
    for i, theta in enumerate(thetas):
        K = len(theta)
        main = int(np.argmax(theta.weights))
        slice_width = 2.0 * math.pi / K
        angle = (main + float(rng.random())) * slice_width
        points.append(
            PizzaPoint(
                doc_id=doc_ids[i] if doc_ids is not None else str(i),
                main_topic=main,
                radius=pizza_radius(theta),
                angle=angle,
            )
        )
    return points


def pizza_csv(points: Sequence[PizzaPoint]) -> str:
    lines = ["doc_id,main_topic,radius,angle"]
    for p in points:
        lines.append(f"{p.doc_id},{p.main_topic},{p.radius!r},{p.angle!r}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ScanRow:
    K: int
    passes: int
    iters: int
    coherence: float
    log_perplexity: float


class ScanError(RuntimeError):
    def __init__(self, K: int, passes: int, iters: int, cause: Exception):
        super().__init__(
            f"scan combination (K={K}, passes={passes}, iters={iters}) failed: {cause}"
        )
        self.combination = (K, passes, iters)
        self.__cause__ = cause


def metric_scan(
    corpus: Sequence[BagOfWords],
    K_values: Sequence[int],
    schedule_values: Sequence[tuple[int, int]],
    *,
    heldout: Sequence[BagOfWords] | None = None,
    V: int | None = None,
    topn: int = 10,
    seed: int = 0,
    batch_size: int = 256,
) -> list[ScanRow]:
    """Train one seeded model per (K, (passes, iters)) combination and
    tabulate coherence plus held-out log-perplexity.

    With no explicit held-out set, every 10th document is held out and
    the rest train.  Rows come back sorted by (K, passes, iters).
    """
    if not corpus:
        raise EvalError("corpus must be non-empty")
    if heldout is None:
        heldout = [bow for i, bow in enumerate(corpus) if i % 10 == 0]
        train_set = [bow for i, bow in enumerate(corpus) if i % 10 != 0]
    else:
        train_set = list(corpus)
    rows = []
    for K in K_values:
        for passes, iters in schedule_values:
            schedule = TrainSchedule(
                passes=passes, e_step_iters=iters, batch_size=batch_size, seed=seed
            )
            try:
                model = train_online(train_set, K, schedule=schedule, V=V)
                coh = umass_coherence(model, train_set, topn=topn).mean
                lp = log_perplexity(model, heldout)
            except (ValueError, ArithmeticError) as exc:
                raise ScanError(K, passes, iters, exc)
            rows.append(
                ScanRow(K=K, passes=passes, iters=iters, coherence=coh, log_perplexity=lp)
            )
    rows.sort(key=lambda r: (r.K, r.passes, r.iters))
    return rows


def scan_csv(rows: Sequence[ScanRow]) -> str:
    lines = ["K,passes,iters,coherence,log_perplexity"]
    for r in rows:
        lines.append(f"{r.K},{r.passes},{r.iters},{r.coherence!r},{r.log_perplexity!r}")
    return "\n".join(lines) + "\n"
