"""HTTP service: accounts, sessions, category preferences, personalized
paper listings, interaction events, related papers — plus the batch jobs
(nightly ingest+infer, full vector rebuild) the service depends on.

Each followed category has its own user vector, built from the user's
events on papers listed in that category and scored against that
category's model.  A listing query scores each paper with the vector of
the first query category the paper is listed under, so cross-listed
papers are ranked by the model of the listing being browsed.
"""

from __future__ import annotations

import hashlib
import hmac
import secrets
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from typing import Mapping, Sequence

import numpy as np
from fastapi import Depends, FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .ingest import PaperRecord, ReleaseSource
from .lda import LdaModel, ModelLoadError, TopicVector, infer_theta
from .ranking import (
    EVENT_KINDS,
    ClickEvent,
    RankingConfig,
    ScoredPaper,
    decay_factor,
    rank_key,
    user_vector,
)
from .store import Repository, UnknownPaperError, UserAccount, UserVector
from .textpipe import default_config, preprocess, to_bow

DEFAULT_CATEGORIES = ("astro-ph", "gr-qc", "hep-ph", "hep-th")

_SCRYPT_N, _SCRYPT_R, _SCRYPT_P = 2**14, 8, 1


def hash_password(password: str, salt: bytes) -> str:
    return hashlib.scrypt(
        password.encode("utf-8"), salt=salt, n=_SCRYPT_N, r=_SCRYPT_R, p=_SCRYPT_P
    ).hex()


def make_account(name: str, password: str, categories: Sequence[str] = ()) -> UserAccount:
    salt = secrets.token_bytes(16)
    return UserAccount(
        name=name,
        password_salt=salt.hex(),
        password_hash=hash_password(password, salt),
        token=None,
        categories=tuple(categories),
    )


def check_password(account: UserAccount, password: str) -> bool:
    expected = hash_password(password, bytes.fromhex(account.password_salt))
    return hmac.compare_digest(expected, account.password_hash)


def new_token() -> str:
    # 32 url-safe random bytes: 256 bits of entropy
    return secrets.token_urlsafe(32)


# ---------------------------------------------------------------------------
# batch jobs


def infer_paper_vector(model: LdaModel, paper: PaperRecord) -> TopicVector:
    if model.dictionary is None:
        raise ModelLoadError("model has no dictionary; cannot infer from text")
    bow = to_bow(preprocess(paper.text, default_config()), model.dictionary)
    return infer_theta(bow, model)


def _resolve_versions(
    store: Repository,
    categories: Sequence[str],
    model_map: Mapping[str, str] | None,
) -> dict[str, str]:
    """Category -> model version; with no explicit map every category
    shares the store's latest model."""
    if model_map is not None:
        return dict(model_map)
    try:
        _, version = store.load_model()
    except ModelLoadError:
        return {}
    return {c: version for c in categories}


def nightly_job(
    store: Repository,
    source: ReleaseSource,
    day: date,
    *,
    categories: Sequence[str] = DEFAULT_CATEGORIES,
    model_map: Mapping[str, str] | None = None,
) -> dict:
    """Pull one day's release, upsert it, and infer a topic vector for
    each (paper, category model) pair that is new, changed, or missing.

    Returns {"new": ..., "updated": ..., "inferred": ..., "failures": ...}.
    Running the same day twice is a no-op the second time.
    """
    corpus = source.fetch(day)
    new, updated = store.upsert_papers(corpus.records)
    versions = _resolve_versions(store, categories, model_map)
    models: dict[str, LdaModel] = {}
    inferred = 0
    failures = 0
    for rec in corpus.records:
        # one inference per distinct model version the paper is listed under
        for version in dict.fromkeys(
            versions[c] for c in rec.categories if c in versions
        ):
            if not store.paper_vector_is_stale(rec.id, version):
                continue
            if version not in models:
                models[version], _ = store.load_model(version)
            try:
                theta = infer_paper_vector(models[version], rec)
                store.put_paper_vector(rec.id, theta, version)
                inferred += 1
            except (ValueError, ArithmeticError):
                failures += 1
    return {"new": new, "updated": updated, "inferred": inferred, "failures": failures}


def rebuild_vectors(
    store: Repository,
    model: LdaModel,
    version: str,
    now: datetime | None = None,
    config: RankingConfig | None = None,
) -> dict:
    """Recompute every paper vector under a (possibly new) model, then
    replay every user's events into fresh per-category user vectors.

    Events whose paper cannot be vectorized are skipped and counted.
    """
    if now is None:
        now = datetime.now(timezone.utc)
    if config is None:
        config = RankingConfig()
    papers = 0
    failures = 0
    thetas: dict[str, TopicVector] = {}
    cats_of: dict[str, tuple[str, ...]] = {}
    for rec in store.list_papers():
        cats_of[rec.id] = rec.categories
        try:
            theta = infer_paper_vector(model, rec)
        except (ValueError, ArithmeticError):
            failures += 1
            continue
        store.put_paper_vector(rec.id, theta, version)
        thetas[rec.id] = theta
        papers += 1
    users = 0
    skipped = 0
    for name in store.list_users():
        account = store.get_user(name)
        events = store.list_events(name)
        usable = [e for e in events if e.paper_id in thetas]
        skipped += len(events) - len(usable)
        for category in account.categories:
            cat_events = [
                e for e in usable if category in cats_of.get(e.paper_id, ())
            ]
            u = user_vector(cat_events, thetas, model.K, now, config)
            store.put_user_vector(
                name,
                category,
                UserVector(weights=u, model_version=version, ref_time=now),
            )
        users += 1
    return {
        "papers": papers,
        "paper_failures": failures,
        "users": users,
        "events_skipped": skipped,
    }


# ---------------------------------------------------------------------------
# request/response bodies


class RegisterBody(BaseModel):
    name: str
    password: str


class SessionBody(BaseModel):
    name: str
    password: str


class CategoriesBody(BaseModel):
    categories: list[str]


class EventBody(BaseModel):
    paper_id: str
    kind: str
    timestamp: str | None = None


@dataclass
class _AppState:
    store: Repository
    categories: tuple[str, ...]
    ranking: RankingConfig
    model_map: Mapping[str, str] | None
    # (user, category) -> (n_events, u, ref_time) replay cache
    user_vecs: dict = field(default_factory=dict)
    versions: dict | None = None

    def category_versions(self) -> dict[str, str]:
        if self.versions is None:
            self.versions = _resolve_versions(self.store, self.categories, self.model_map)
        return self.versions


def _paper_json(p: PaperRecord, score: float | None = None) -> dict:
    obj = {
        "id": p.id,
        "title": p.title,
        "abstract": p.abstract,
        "submitted": p.submitted.isoformat(),
        "authors": list(p.authors),
        "categories": list(p.categories),
    }
    if score is not None:
        obj["score"] = score
    return obj


def current_user_vector(
    store: Repository,
    name: str,
    category: str,
    model_version: str | None,
    now: datetime,
    config: RankingConfig,
    cache: dict | None = None,
) -> np.ndarray:
    """The user's decayed vector for one category as of ``now``,
    replayed from their events on papers listed in that category
    (cached per event count, aged per call)."""
    events = store.list_events(name)
    key = (name, category)
    cached = cache.get(key) if cache is not None else None
    if cached is not None and cached[0] == len(events):
        _, u_ref, ref_time = cached
    else:
        thetas: dict[str, TopicVector] = {}
        cat_events = []
        for ev in events:
            paper = store.get_paper(ev.paper_id)
            if paper is None or category not in paper.categories:
                continue
            if ev.paper_id not in thetas:
                vec = store.get_paper_vector(ev.paper_id, model_version)
                if vec is None:
                    continue
                thetas[ev.paper_id] = TopicVector(weights=vec.weights)
            cat_events.append(ev)
        ref_time = max((e.timestamp for e in cat_events), default=now)
        if ref_time.tzinfo is None:
            ref_time = ref_time.replace(tzinfo=timezone.utc)
        K = len(next(iter(thetas.values()))) if thetas else 1
        u_ref = user_vector(cat_events, thetas, K, ref_time, config)
        if cache is not None:
            cache[key] = (len(events), u_ref, ref_time)
    if now <= ref_time:
        return u_ref.copy()
    return u_ref * decay_factor(ref_time, now, config)


def score_listing(
    papers: Sequence[PaperRecord],
    store: Repository,
    query_categories: Sequence[str],
    vectors: Mapping[str, np.ndarray],
    versions: Mapping[str, str],
) -> list[ScoredPaper]:
    """Scalar-product scores, each paper scored with the vector of the
    first query category it is listed under; papers with no stored
    vector yet score zero rather than failing the whole listing."""
    scored = []
    for p in papers:
        category = next((c for c in query_categories if c in p.categories), None)
        s = 0.0
        if category is not None and category in vectors:
            vec = store.get_paper_vector(p.id, versions.get(category))
            u = vectors[category]
            if vec is not None and len(vec.weights) == len(u):
                s = float(u @ vec.weights)
        scored.append(ScoredPaper(paper=p, score=s))
    scored.sort(key=rank_key)
    return scored


def create_app(
    store: Repository,
    *,
    categories: Sequence[str] = DEFAULT_CATEGORIES,
    ranking_config: RankingConfig | None = None,
    model_map: Mapping[str, str] | None = None,
) -> FastAPI:
    app = FastAPI(title="arxrank", version="1.0")
    state = _AppState(
        store=store,
        categories=tuple(categories),
        ranking=ranking_config or RankingConfig(),
        model_map=model_map,
    )
    app.state.arxrank = state

    def auth(request: Request) -> UserAccount:
        header = request.headers.get("authorization", "")
        scheme, _, token = header.partition(" ")
        account = None
        if scheme.lower() == "bearer" and token.strip():
            account = state.store.get_user_by_token(token.strip())
        if account is None:
            raise HTTPException(
                status_code=401,
                detail="missing or invalid bearer token",
                headers={"WWW-Authenticate": "Bearer"},
            )
        return account

    @app.post("/v1/users", status_code=201)
    def register(body: RegisterBody):
        name = body.name.strip()
        if not name or len(name) > 64:
            raise HTTPException(400, "name must be 1-64 characters")
        if not body.password:
            raise HTTPException(400, "password must be non-empty")
        if state.store.get_user(name) is not None:
            raise HTTPException(409, f"user {name!r} already exists")
        state.store.put_user(make_account(name, body.password))
        return {"name": name}

    @app.post("/v1/sessions")
    def login(body: SessionBody):
        account = state.store.get_user(body.name)
        if account is None or not check_password(account, body.password):
            raise HTTPException(401, "unknown user or wrong password")
        token = new_token()
        state.store.put_user(
            UserAccount(
                name=account.name,
                password_salt=account.password_salt,
                password_hash=account.password_hash,
                token=token,
                categories=account.categories,
            )
        )
        return {"token": token}

    @app.get("/v1/users/me/categories")
    def get_categories(account: UserAccount = Depends(auth)):
        return {
            "categories": list(account.categories),
            "available": list(state.categories),
        }

    @app.put("/v1/users/me/categories")
    def put_categories(body: CategoriesBody, account: UserAccount = Depends(auth)):
        unknown = [c for c in body.categories if c not in state.categories]
        if unknown:
            raise HTTPException(
                400,
                f"unknown categories {unknown}; available: {list(state.categories)}",
            )
        chosen = tuple(dict.fromkeys(body.categories))
        state.store.put_user(
            UserAccount(
                name=account.name,
                password_salt=account.password_salt,
                password_hash=account.password_hash,
                token=account.token,
                categories=chosen,
            )
        )
        return {"categories": list(chosen)}

    def _parse_date(value: str | None, param: str) -> date | None:
        if value is None:
            return None
        try:
            return date.fromisoformat(value)
        except ValueError:
            raise HTTPException(400, f"{param} must be YYYY-MM-DD, got {value!r}")

    @app.get("/v1/papers")
    def list_papers(
        request: Request,
        categories: str | None = None,
        sort: str = "date",
        limit: int = 200,
        offset: int = 0,
        account: UserAccount = Depends(auth),
    ):
        if sort not in ("date", "personal"):
            raise HTTPException(400, f"sort must be 'date' or 'personal', got {sort!r}")
        if limit <= 0 or offset < 0:
            raise HTTPException(400, "limit must be positive and offset non-negative")
        date_from = _parse_date(request.query_params.get("from"), "from")
        date_to = _parse_date(request.query_params.get("to"), "to")
        if date_from and date_to and date_from > date_to:
            raise HTTPException(400, "'from' must not be after 'to'")
        if categories is not None:
            wanted = [c for c in (s.strip() for s in categories.split(",")) if c]
            unknown = [c for c in wanted if c not in state.categories]
            if unknown:
                raise HTTPException(400, f"unknown categories {unknown}")
        elif account.categories:
            wanted = list(account.categories)
        else:
            wanted = list(state.categories)
        papers = state.store.list_papers(
            categories=wanted, date_from=date_from, date_to=date_to
        )
        if sort == "date":
            page = papers[offset : offset + limit]
            return {"papers": [_paper_json(p) for p in page], "total": len(papers)}
        now = datetime.now(timezone.utc)
        versions = state.category_versions()
        vectors = {
            c: current_user_vector(
                state.store,
                account.name,
                c,
                versions.get(c),
                now,
                state.ranking,
                state.user_vecs,
            )
            for c in wanted
        }
        scored = score_listing(papers, state.store, wanted, vectors, versions)
        page = scored[offset : offset + limit]
        return {
            "papers": [_paper_json(sp.paper, sp.score) for sp in page],
            "total": len(scored),
        }

    @app.post("/v1/events")
    def post_event(body: EventBody, account: UserAccount = Depends(auth)):
        if body.kind not in EVENT_KINDS:
            raise HTTPException(
                400, f"kind must be one of {list(EVENT_KINDS)}, got {body.kind!r}"
            )
        if body.timestamp is not None:
            try:
                ts = datetime.fromisoformat(body.timestamp)
            except ValueError:
                raise HTTPException(400, f"bad timestamp {body.timestamp!r}")
        else:
            ts = datetime.now(timezone.utc)
        event = ClickEvent(
            user_id=account.name, paper_id=body.paper_id, kind=body.kind, timestamp=ts
        )
        try:
            event_id = state.store.append_event(event)
        except UnknownPaperError as exc:
            raise HTTPException(404, str(exc))
        if event_id is None:
            return {"status": "duplicate-ignored"}
        for key in [k for k in state.user_vecs if k[0] == account.name]:
            del state.user_vecs[key]
        return JSONResponse({"status": "created", "id": event_id}, status_code=201)

    @app.get("/v1/papers/{paper_id}/related")
    def related(paper_id: str, n: int = 10, account: UserAccount = Depends(auth)):
        if n < 1:
            raise HTTPException(400, "n must be at least 1")
        paper = state.store.get_paper(paper_id)
        if paper is None:
            raise HTTPException(404, f"unknown paper {paper_id!r}")
        versions = state.category_versions()
        version = next(
            (versions[c] for c in paper.categories if c in versions), None
        )
        target = state.store.get_paper_vector(paper_id, version)
        if target is None:
            raise HTTPException(409, f"paper {paper_id!r} has no topic vector yet")
        scored = []
        for p in state.store.list_papers():
            if p.id == paper_id:
                continue
            vec = state.store.get_paper_vector(p.id, version)
            if vec is None or len(vec.weights) != len(target.weights):
                continue
            scored.append(
                ScoredPaper(paper=p, score=float(target.weights @ vec.weights))
            )
        scored.sort(key=rank_key)
        return {"papers": [_paper_json(sp.paper, sp.score) for sp in scored[:n]]}

    return app
