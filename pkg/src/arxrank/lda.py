"""Latent Dirichlet Allocation with online variational Bayes.

Mixed-membership model: each document mixes K topics (theta on the
simplex), each topic is a distribution over the V-word vocabulary.
Training follows the online natural-gradient scheme: per minibatch, a
fixed-point E-step per document yields topic responsibilities, and the
variational topic-word parameters blend toward the minibatch estimate
with step size rho_t = (tau0 + t)^(-kappa).

The digamma function is computed locally (recurrence shift then an
asymptotic series) so inference has no special-function dependency and
tests can check it against an independent reference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .textpipe import BagOfWords, Dictionary

MODEL_FORMAT_VERSION = 1


class LdaConfigError(ValueError):
    pass


def digamma(x):
    """Digamma psi(x) for positive scalars or arrays.

    Entries are shifted above 6 with psi(x) = psi(x+1) - 1/x, then the
    asymptotic series in 1/x^2 is summed.  Accurate to ~1e-13 for
    x >= 0.01, which the unit tests pin against the recurrence and
    psi(1) = -EulerGamma.
    """
    scalar = np.isscalar(x)
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0.0):
        raise ValueError("digamma requires strictly positive arguments")
    result = np.zeros_like(x)
    while True:
        small = x < 6.0
        if not small.any():
            break
        result = result - np.where(small, 1.0 / x, 0.0)
        x = np.where(small, x + 1.0, x)
    inv = 1.0 / x
    inv2 = inv * inv
    series = inv2 * (
        1.0 / 12
        - inv2 * (
            1.0 / 120
            - inv2 * (
                1.0 / 252
                - inv2 * (
                    1.0 / 240
                    - inv2 * (
                        1.0 / 132
                        - inv2 * (691.0 / 32760 - inv2 * (1.0 / 12))
                    )
                )
            )
        )
    )
    result = result + np.log(x) - 0.5 * inv - series
    return float(result) if scalar else result


def dirichlet_expectation(params: np.ndarray) -> np.ndarray:
    """E[log p] for p ~ Dir(params), rowwise for 2-d input."""
    if params.ndim == 1:
        combined = digamma(np.append(params, params.sum()))
        return combined[:-1] - combined[-1]
    return digamma(params) - digamma(params.sum(axis=1))[:, np.newaxis]


@dataclass(frozen=True)
class TopicVector:
    """A point on the K-simplex: topic weights of a paper or document."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        if w.ndim != 1:
            raise ValueError("topic weights must be a 1-d vector")
        if np.any(w < 0):
            raise ValueError("topic weights must be non-negative")
        if abs(float(w.sum()) - 1.0) > 1e-9:
            raise ValueError(f"topic weights must sum to 1, got {w.sum()!r}")

    @classmethod
    def from_unnormalized(cls, values) -> "TopicVector":
        v = np.asarray(values, dtype=np.float64)
        total = v.sum()
        if total <= 0:
            raise ValueError("cannot normalize a non-positive vector")
        return cls(weights=v / total)

    def __len__(self) -> int:
        return len(self.weights)

    def __eq__(self, other):
        return isinstance(other, TopicVector) and np.array_equal(self.weights, other.weights)


@dataclass(frozen=True)
class TrainSchedule:
    """Minibatch training schedule and reproducibility knobs."""

    passes: int = 100
    e_step_iters: int = 100
    batch_size: int = 256
    kappa: float = 0.7
    tau0: float = 0.0
    seed: int = 0
    gamma_tol: float = 1e-4

    def __post_init__(self):
        if not (0.5 < self.kappa <= 1.0):
            raise LdaConfigError(f"kappa must be in (0.5, 1], got {self.kappa}")
        if self.passes < 1:
            raise LdaConfigError(f"passes must be >= 1, got {self.passes}")
        if self.e_step_iters < 1:
            raise LdaConfigError(f"e_step_iters must be >= 1, got {self.e_step_iters}")
        if self.tau0 < 0:
            raise LdaConfigError(f"tau0 must be >= 0, got {self.tau0}")
        if self.batch_size < 1:
            raise LdaConfigError(f"batch_size must be >= 1, got {self.batch_size}")

    def learning_rate(self, t: int) -> float:
        """rho_t for the t-th minibatch update (1-based)."""
        return (self.tau0 + t) ** (-self.kappa)


@dataclass
class LdaModel:
    """Trained (or in-training) model state.

    ``lam`` holds the K x V variational Dirichlet parameters over the
    per-topic word distributions; ``expected_beta`` normalizes its rows.
    """

    K: int
    V: int
    alpha: np.ndarray
    eta: float
    lam: np.ndarray
    schedule: TrainSchedule
    updates_seen: int = 0
    dictionary: Dictionary | None = None

    _exp_elog_beta: np.ndarray | None = field(default=None, repr=False, compare=False)

    def expected_beta(self, k: int | None = None) -> np.ndarray:
        row_sums = self.lam.sum(axis=1, keepdims=True)
        if k is None:
            return self.lam / row_sums
        return self.lam[k] / row_sums[k, 0]

    def exp_elog_beta(self) -> np.ndarray:
        """exp E[log beta]; cached, safe because models are read-only after training."""
        if self._exp_elog_beta is None:
            self._exp_elog_beta = np.exp(dirichlet_expectation(self.lam))
        return self._exp_elog_beta

    def dictionary_digest(self) -> str:
        return self.dictionary.digest() if self.dictionary is not None else ""


class EStepResult(NamedTuple):
    gamma: np.ndarray        # K posterior Dirichlet parameters for theta
    word_ids: np.ndarray     # ids of the document's words
    stats: np.ndarray        # K x len(word_ids): n_w * phi_{wk}


def _resolve_alpha(alpha, K: int) -> np.ndarray:
    if alpha is None:
        alpha = 1.0 / K
    arr = np.asarray(alpha, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full(K, float(arr))
    if arr.shape != (K,):
        raise LdaConfigError(f"alpha must be scalar or length {K}, got shape {arr.shape}")
    if np.any(arr <= 0):
        raise LdaConfigError("alpha entries must be strictly positive")
    return arr


def e_step(
    bow: BagOfWords,
    model: LdaModel,
    *,
    tol: float | None = None,
    max_iters: int | None = None,
) -> EStepResult:
    """Variational E-step for one document.

    Iterates the implicit-phi fixed point until the mean absolute change
    in gamma drops below ``tol`` (schedule default) or the iteration cap
    is hit.  Returns gamma and the phi-weighted count statistics.
    """
    if tol is None:
        tol = model.schedule.gamma_tol
    if max_iters is None:
        max_iters = model.schedule.e_step_iters
    alpha = model.alpha
    if len(bow) == 0:
        return EStepResult(
            gamma=alpha.copy(),
            word_ids=np.empty(0, dtype=np.int64),
            stats=np.empty((model.K, 0)),
        )
    ids = bow.ids
    if ids[-1] >= model.V:
        raise LdaConfigError(f"token id {ids[-1]} out of range for V={model.V}")
    cts = bow.counts
    exp_elog_beta_d = model.exp_elog_beta()[:, ids]

    gamma = alpha + cts.sum() / model.K
    exp_elog_theta = np.exp(dirichlet_expectation(gamma))
    phinorm = exp_elog_theta @ exp_elog_beta_d + 1e-100
    for _ in range(max_iters):
        last_gamma = gamma
        gamma = alpha + exp_elog_theta * (exp_elog_beta_d @ (cts / phinorm))
        exp_elog_theta = np.exp(dirichlet_expectation(gamma))
        phinorm = exp_elog_theta @ exp_elog_beta_d + 1e-100
        if np.mean(np.abs(gamma - last_gamma)) < tol:
            break
    stats = np.outer(exp_elog_theta, cts / phinorm) * exp_elog_beta_d
    return EStepResult(gamma=gamma, word_ids=ids, stats=stats)


def train_online(
    corpus: Sequence[BagOfWords],
    K: int,
    alpha=None,
    eta: float | None = None,
    schedule: TrainSchedule | None = None,
    *,
    V: int | None = None,
    dictionary: Dictionary | None = None,
    on_pass: Callable[[int, LdaModel], None] | None = None,
    n_jobs: int = 1,
) -> LdaModel:
    """Fit topic-word distributions with online variational Bayes.

    Documents are visited in a seeded shuffled order each pass, split
    into minibatches of ``schedule.batch_size``; each minibatch blends
    the candidate lambda into the running estimate at rate rho_t.
    Single-threaded runs are bit-reproducible for a fixed seed
    (``n_jobs > 1`` parallelizes per-document E-steps but reduces the
    statistics in document order, so results are identical).
    """
    if K < 1:
        raise LdaConfigError(f"K must be >= 1, got {K}")
    if not corpus:
        raise LdaConfigError("corpus must be non-empty")
    if schedule is None:
        schedule = TrainSchedule()
    alpha = _resolve_alpha(alpha, K)
    if eta is None:
        eta = 1.0 / K
    if eta <= 0:
        raise LdaConfigError(f"eta must be strictly positive, got {eta}")
    if V is None:
        if dictionary is not None:
            V = len(dictionary)
        else:
            V = 1 + max((int(bow.ids[-1]) for bow in corpus if len(bow)), default=0)

    rng = np.random.default_rng(schedule.seed)
    lam = rng.gamma(100.0, 1.0 / 100.0, (K, V))
    exp_elog_beta = np.exp(dirichlet_expectation(lam))
    D = len(corpus)

    model = LdaModel(
        K=K, V=V, alpha=alpha, eta=float(eta), lam=lam,
        schedule=schedule, updates_seen=0, dictionary=dictionary,
    )
    bows = list(corpus)
    updates = 0
    for pass_idx in range(schedule.passes):
        order = rng.permutation(D)
        for start in range(0, D, schedule.batch_size):
            batch = [bows[i] for i in order[start:start + schedule.batch_size]]
            sstats = np.zeros((K, V))
            model.lam = lam
            model._exp_elog_beta = exp_elog_beta
            if n_jobs > 1:
                from concurrent.futures import ThreadPoolExecutor

                with ThreadPoolExecutor(max_workers=n_jobs) as pool:
                    results = list(pool.map(lambda b: e_step(b, model), batch))
            else:
                results = [e_step(b, model) for b in batch]
            for res in results:
                if len(res.word_ids):
                    sstats[:, res.word_ids] += res.stats
            lam_hat = eta + (D / len(batch)) * sstats
            updates += 1
            rho = schedule.learning_rate(updates)
            lam = (1.0 - rho) * lam + rho * lam_hat
            exp_elog_beta = np.exp(dirichlet_expectation(lam))
        if on_pass is not None:
            snapshot = LdaModel(
                K=K, V=V, alpha=alpha.copy(), eta=float(eta), lam=lam.copy(),
                schedule=schedule, updates_seen=updates, dictionary=dictionary,
            )
            on_pass(pass_idx, snapshot)
    model.lam = lam
    model._exp_elog_beta = None
    model.updates_seen = updates
    return model


def infer_theta(bow: BagOfWords, model: LdaModel) -> TopicVector:
    """Topic weights for one document under a frozen model (deterministic)."""
    result = e_step(bow, model)
    return TopicVector.from_unnormalized(result.gamma)


def top_words(model: LdaModel, k: int, n: int) -> list[tuple[str, float]]:
    """The n most probable dictionary words of topic k, ties lexicographic."""
    if not 0 <= k < model.K:
        raise LdaConfigError(f"topic index {k} out of range for K={model.K}")
    if model.dictionary is None:
        raise LdaConfigError("model has no dictionary attached")
    if n <= 0:
        return []
    beta_k = model.expected_beta(k)
    ranked = sorted(
        ((model.dictionary.tokens[i], float(beta_k[i])) for i in range(model.V)),
        key=lambda item: (-item[1], item[0]),
    )
    return ranked[:n]


def sample_corpus(
    K: int,
    V: int,
    D: int,
    alpha,
    eta: float,
    doc_len: int,
    seed: int,
) -> tuple[list[BagOfWords], np.ndarray, np.ndarray]:
    """Draw a synthetic corpus from the generative model.

    beta_k ~ Dir(eta * 1_V), theta_d ~ Dir(alpha); each document gets
    ``doc_len`` words, every word picking a topic from theta_d and then
    a word from that topic's distribution.  Returns the bags plus the
    ground-truth beta (K x V) and theta (D x K) for test oracles.
    """
    if min(K, V, D, doc_len) < 1:
        raise LdaConfigError("K, V, D and doc_len must all be >= 1")
    alpha = _resolve_alpha(alpha, K)
    rng = np.random.default_rng(seed)
    true_beta = rng.dirichlet(np.full(V, float(eta)), size=K)
    true_theta = rng.dirichlet(alpha, size=D)
    bows = []
    for d in range(D):
        topic_counts = rng.multinomial(doc_len, true_theta[d])
        word_counts = np.zeros(V, dtype=np.int64)
        for k in range(K):
            if topic_counts[k]:
                word_counts += rng.multinomial(topic_counts[k], true_beta[k])
        ids = np.nonzero(word_counts)[0]
        bows.append(
            BagOfWords(entries=tuple((int(i), int(word_counts[i])) for i in ids))
        )
    return bows, true_beta, true_theta


class ModelLoadError(ValueError):
    pass


def model_to_parts(model: LdaModel) -> tuple[str, bytes, bytes | None]:
    """Serialize a model to its three container parts: the JSON metadata
    document, the row-major little-endian float64 lambda matrix, and the
    dictionary TSV bytes (None when no dictionary is attached)."""
    meta = {
        "format_version": MODEL_FORMAT_VERSION,
        "K": model.K,
        "V": model.V,
        "alpha": [float(a) for a in model.alpha],
        "eta": model.eta,
        "updates_seen": model.updates_seen,
        "dictionary_digest": model.dictionary_digest(),
        "schedule": {
            "passes": model.schedule.passes,
            "e_step_iters": model.schedule.e_step_iters,
            "batch_size": model.schedule.batch_size,
            "kappa": model.schedule.kappa,
            "tau0": model.schedule.tau0,
            "seed": model.schedule.seed,
            "gamma_tol": model.schedule.gamma_tol,
        },
    }
    meta_json = json.dumps(meta, indent=2, sort_keys=True) + "\n"
    lam_bytes = np.ascontiguousarray(model.lam, dtype="<f8").tobytes()
    dict_tsv = model.dictionary.to_tsv() if model.dictionary is not None else None
    return meta_json, lam_bytes, dict_tsv


def model_from_parts(
    meta_json: str, lam_bytes: bytes, dict_tsv: bytes | None, *, where: str = "model"
) -> LdaModel:
    """Rebuild a model from container parts, verifying the lambda byte
    size and the recorded dictionary digest."""
    try:
        meta = json.loads(meta_json)
    except json.JSONDecodeError as exc:
        raise ModelLoadError(f"{where}: metadata is not valid JSON: {exc}") from None
    if meta.get("format_version") != MODEL_FORMAT_VERSION:
        raise ModelLoadError(
            f"{where}: unsupported format version {meta.get('format_version')!r}"
        )
    K, V = int(meta["K"]), int(meta["V"])
    expected = K * V * 8
    if len(lam_bytes) != expected:
        raise ModelLoadError(
            f"{where}: lambda matrix is {len(lam_bytes)} bytes, "
            f"expected {expected} (K*V*8)"
        )
    lam = np.frombuffer(lam_bytes, dtype="<f8").reshape(K, V).copy()
    dictionary = None
    digest = meta.get("dictionary_digest", "")
    if dict_tsv is not None:
        dictionary = Dictionary.from_tsv(dict_tsv)
        if digest and dictionary.digest() != digest:
            raise ModelLoadError(f"{where}: dictionary digest mismatch")
    elif digest:
        raise ModelLoadError(
            f"{where}: model expects a dictionary (digest set) but none is present"
        )
    sched = meta["schedule"]
    return LdaModel(
        K=K,
        V=V,
        alpha=np.asarray(meta["alpha"], dtype=np.float64),
        eta=float(meta["eta"]),
        lam=lam,
        schedule=TrainSchedule(**sched),
        updates_seen=int(meta["updates_seen"]),
        dictionary=dictionary,
    )


def save_model(model: LdaModel, out_dir: str | Path) -> None:
    """Write the model container: model.json + lambda.f64le
    (+ dictionary.tsv when a dictionary is attached)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta_json, lam_bytes, dict_tsv = model_to_parts(model)
    (out / "model.json").write_text(meta_json, "utf-8")
    (out / "lambda.f64le").write_bytes(lam_bytes)
    if dict_tsv is not None:
        (out / "dictionary.tsv").write_bytes(dict_tsv)


def load_model(model_dir: str | Path) -> LdaModel:
    """Load a model container, verifying lambda size and dictionary digest."""
    root = Path(model_dir)
    try:
        meta_json = (root / "model.json").read_text("utf-8")
    except FileNotFoundError:
        raise ModelLoadError(f"{root}: missing model.json") from None
    try:
        lam_bytes = (root / "lambda.f64le").read_bytes()
    except FileNotFoundError:
        raise ModelLoadError(f"{root}: missing lambda.f64le") from None
    dict_path = root / "dictionary.tsv"
    dict_tsv = dict_path.read_bytes() if dict_path.exists() else None
    return model_from_parts(meta_json, lam_bytes, dict_tsv, where=str(root))


def relabel_topics(model: LdaModel, permutation: Sequence[int]) -> LdaModel:
    """A copy of the model with topics renumbered by ``permutation``."""
    perm = list(permutation)
    if sorted(perm) != list(range(model.K)):
        raise LdaConfigError(f"not a permutation of 0..{model.K - 1}: {perm}")
    return replace(
        model,
        alpha=model.alpha[perm].copy(),
        lam=model.lam[perm].copy(),
        _exp_elog_beta=None,
    )
