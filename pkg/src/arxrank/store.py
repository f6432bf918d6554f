"""Persistence backends behind one repository interface.

``FileStore`` keeps everything under a single directory: an append-only
paper log (last record per id wins), one atomically-replaced JSON file
per user, a length-prefixed binary event log that survives a torn final
write, and one subdirectory per saved model version.  ``SqliteStore``
keeps the same data in a normalized relational schema.

Paper topic vectors are keyed by (paper id, model version) and carry the
content digest of the text they were inferred from, so a re-ingested
abstract automatically marks its old vector stale.  User vectors are
kept per followed category, each built against that category's model.
"""

from __future__ import annotations

import abc
import json
import os
import sqlite3
import struct
import threading
from dataclasses import dataclass
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .ingest import PaperRecord
from .lda import (
    LdaModel,
    ModelLoadError,
    TopicVector,
    load_model as _load_model_dir,
    model_from_parts,
    model_to_parts,
    save_model as _save_model_dir,
)
from .ranking import ClickEvent, utc_day


class StoreError(RuntimeError):
    pass


class UnknownUserError(StoreError):
    def __init__(self, user_id: str):
        super().__init__(f"unknown user {user_id!r}")
        self.user_id = user_id


class UnknownPaperError(StoreError):
    def __init__(self, paper_id: str):
        super().__init__(f"unknown paper {paper_id!r}")
        self.paper_id = paper_id


@dataclass(frozen=True)
class UserAccount:
    name: str
    password_salt: str  # hex
    password_hash: str  # hex
    token: str | None = None
    categories: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "password_salt": self.password_salt,
            "password_hash": self.password_hash,
            "token": self.token,
            "categories": list(self.categories),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "UserAccount":
        return cls(
            name=obj["name"],
            password_salt=obj["password_salt"],
            password_hash=obj["password_hash"],
            token=obj.get("token"),
            categories=tuple(obj.get("categories", ())),
        )


@dataclass(frozen=True, eq=False)
class PaperVector:
    """A paper's topic mixture plus the provenance needed to detect
    staleness: the model version and the content digest of the text the
    vector was computed from."""

    weights: np.ndarray
    model_version: str
    content_digest: str


@dataclass(frozen=True, eq=False)
class UserVector:
    """One followed category's accumulated (unnormalized) topic vector,
    with the reference time its half-life decay was computed at."""

    weights: np.ndarray
    model_version: str
    ref_time: datetime


def _ts_to_str(ts: datetime) -> str:
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).isoformat()


def _ts_from_str(s: str) -> datetime:
    return datetime.fromisoformat(s)


def _paper_to_json(p: PaperRecord) -> dict:
    return {
        "id": p.id,
        "title": p.title,
        "abstract": p.abstract,
        "submitted": p.submitted.isoformat(),
        "authors": list(p.authors),
        "categories": list(p.categories),
    }


def _paper_from_json(obj: dict) -> PaperRecord:
    return PaperRecord(
        id=obj["id"],
        title=obj["title"],
        abstract=obj["abstract"],
        submitted=date.fromisoformat(obj["submitted"]),
        authors=tuple(obj.get("authors", ())),
        categories=tuple(obj["categories"]),
    )


class Repository(abc.ABC):
    """Storage contract shared by the embedded-file and sqlite backends."""

    # -- papers ------------------------------------------------------
    @abc.abstractmethod
    def upsert_papers(self, records: Iterable[PaperRecord]) -> tuple[int, int]:
        """Insert or update records; returns (new, updated). Re-writing
        an identical record counts as neither."""

    @abc.abstractmethod
    def get_paper(self, paper_id: str) -> PaperRecord | None: ...

    @abc.abstractmethod
    def list_papers(
        self,
        *,
        categories: Sequence[str] | None = None,
        date_from: date | None = None,
        date_to: date | None = None,
    ) -> list[PaperRecord]:
        """Papers filtered by any category match and submission-date
        range (inclusive), newest first, ties by ascending id."""

    # -- topic vectors ----------------------------------------------
    @abc.abstractmethod
    def put_paper_vector(
        self, paper_id: str, theta: TopicVector, model_version: str
    ) -> None:
        """Store the paper's vector under (paper_id, model_version),
        replacing any previous vector for that pair."""

    @abc.abstractmethod
    def get_paper_vector(
        self, paper_id: str, model_version: str | None = None
    ) -> PaperVector | None:
        """The paper's vector under the given model version, or the most
        recently written one when no version is named."""

    def paper_vector_is_stale(
        self, paper_id: str, model_version: str | None = None
    ) -> bool:
        """True when the stored vector predates the paper's current text
        (or no vector exists at all)."""
        vec = self.get_paper_vector(paper_id, model_version)
        if vec is None:
            return True
        paper = self.get_paper(paper_id)
        if paper is None:
            raise UnknownPaperError(paper_id)
        return vec.content_digest != paper.content_digest()

    # -- users -------------------------------------------------------
    @abc.abstractmethod
    def put_user(self, account: UserAccount) -> None: ...

    @abc.abstractmethod
    def get_user(self, name: str) -> UserAccount | None: ...

    @abc.abstractmethod
    def get_user_by_token(self, token: str) -> UserAccount | None: ...

    @abc.abstractmethod
    def list_users(self) -> list[str]: ...

    @abc.abstractmethod
    def put_user_vector(self, name: str, category: str, vector: UserVector) -> None: ...

    @abc.abstractmethod
    def get_user_vector(self, name: str, category: str) -> UserVector | None: ...

    # -- events ------------------------------------------------------
    @abc.abstractmethod
    def append_event(self, event: ClickEvent) -> int | None:
        """Durably append an event and return its id, or None when an
        event with the same (user, paper, kind, UTC day) already exists.
        Unknown users or papers raise errors naming the missing id."""

    @abc.abstractmethod
    def list_events(self, user_id: str | None = None) -> list[ClickEvent]: ...

    # -- models ------------------------------------------------------
    @abc.abstractmethod
    def save_model(self, model: LdaModel, version: str | None = None) -> str:
        """Persist a model under the given version (or the next numeric
        one) and return the version string."""

    @abc.abstractmethod
    def load_model(self, version: str | None = None) -> tuple[LdaModel, str]:
        """Load the given (default: latest) model version."""

    @abc.abstractmethod
    def model_versions(self) -> list[str]: ...

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _next_version(existing: Sequence[str]) -> str:
    best = 0
    for v in existing:
        try:
            best = max(best, int(v))
        except ValueError:
            continue
    return f"{best + 1:04d}"


def _latest_version(existing: Sequence[str]) -> str | None:
    return max(existing) if existing else None


_EVENT_PREFIX = struct.Struct(">I")


class FileStore(Repository):
    """Single-directory embedded store; safe for concurrent use from one
    process via an internal lock."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._lock = threading.RLock()
        (self.root / "papers").mkdir(parents=True, exist_ok=True)
        (self.root / "users").mkdir(exist_ok=True)
        (self.root / "models").mkdir(exist_ok=True)
        self._papers_path = self.root / "papers" / "papers.jsonl"
        self._vectors_path = self.root / "papers" / "vectors.jsonl"
        self._events_path = self.root / "events.log"
        self._papers: dict[str, PaperRecord] = {}
        self._vectors: dict[tuple[str, str], PaperVector] = {}
        self._current_vector: dict[str, str] = {}  # paper -> last-written version
        self._events: list[ClickEvent] = []
        self._event_keys: set[tuple[str, str, str, date]] = set()
        self._load_papers()
        self._load_vectors()
        self._load_events()

    # -- loading -----------------------------------------------------
    def _load_papers(self) -> None:
        if not self._papers_path.exists():
            return
        with self._papers_path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = _paper_from_json(json.loads(line))
                self._papers[rec.id] = rec  # later lines win

    def _load_vectors(self) -> None:
        if not self._vectors_path.exists():
            return
        with self._vectors_path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                pid, ver = obj["paper_id"], obj["model_version"]
                self._vectors[(pid, ver)] = PaperVector(
                    weights=np.asarray(obj["weights"], dtype=np.float64),
                    model_version=ver,
                    content_digest=obj["content_digest"],
                )
                self._current_vector[pid] = ver

    def _load_events(self) -> None:
        """Read the length-prefixed event log, discarding a torn tail."""
        if not self._events_path.exists():
            return
        raw = self._events_path.read_bytes()
        pos = 0
        good = 0
        while pos + _EVENT_PREFIX.size <= len(raw):
            (length,) = _EVENT_PREFIX.unpack_from(raw, pos)
            end = pos + _EVENT_PREFIX.size + length
            if end > len(raw):
                break  # final record was cut short
            try:
                obj = json.loads(raw[pos + _EVENT_PREFIX.size : end])
                ev = ClickEvent(
                    user_id=obj["user"],
                    paper_id=obj["paper"],
                    kind=obj["kind"],
                    timestamp=_ts_from_str(obj["ts"]),
                )
            except (ValueError, KeyError, TypeError):
                break  # anything unparsable marks the torn tail
            self._events.append(ev)
            self._event_keys.add((ev.user_id, ev.paper_id, ev.kind, utc_day(ev.timestamp)))
            pos = end
            good = end
        if good < len(raw):
            with self._events_path.open("r+b") as fh:
                fh.truncate(good)

    # -- papers ------------------------------------------------------
    def upsert_papers(self, records: Iterable[PaperRecord]) -> tuple[int, int]:
        with self._lock:
            new = updated = 0
            lines = []
            for rec in records:
                old = self._papers.get(rec.id)
                if old == rec:
                    continue
                if old is None:
                    new += 1
                else:
                    updated += 1
                self._papers[rec.id] = rec
                lines.append(json.dumps(_paper_to_json(rec), sort_keys=True))
            if lines:
                with self._papers_path.open("a", encoding="utf-8") as fh:
                    fh.write("\n".join(lines) + "\n")
                    fh.flush()
                    os.fsync(fh.fileno())
            return new, updated

    def get_paper(self, paper_id: str) -> PaperRecord | None:
        return self._papers.get(paper_id)

    def list_papers(
        self,
        *,
        categories: Sequence[str] | None = None,
        date_from: date | None = None,
        date_to: date | None = None,
    ) -> list[PaperRecord]:
        wanted = set(categories) if categories is not None else None
        out = []
        for rec in self._papers.values():
            if wanted is not None and not wanted.intersection(rec.categories):
                continue
            if date_from is not None and rec.submitted < date_from:
                continue
            if date_to is not None and rec.submitted > date_to:
                continue
            out.append(rec)
        out.sort(key=lambda r: (-r.submitted.toordinal(), r.id))
        return out

    # -- topic vectors ----------------------------------------------
    def put_paper_vector(
        self, paper_id: str, theta: TopicVector, model_version: str
    ) -> None:
        with self._lock:
            paper = self._papers.get(paper_id)
            if paper is None:
                raise UnknownPaperError(paper_id)
            vec = PaperVector(
                weights=np.asarray(theta.weights, dtype=np.float64).copy(),
                model_version=model_version,
                content_digest=paper.content_digest(),
            )
            self._vectors[(paper_id, model_version)] = vec
            self._current_vector[paper_id] = model_version
            obj = {
                "paper_id": paper_id,
                "model_version": model_version,
                "content_digest": vec.content_digest,
                "weights": [float(x) for x in vec.weights],
            }
            with self._vectors_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(obj, sort_keys=True) + "\n")

    def get_paper_vector(
        self, paper_id: str, model_version: str | None = None
    ) -> PaperVector | None:
        if model_version is None:
            model_version = self._current_vector.get(paper_id)
            if model_version is None:
                return None
        return self._vectors.get((paper_id, model_version))

    # -- users -------------------------------------------------------
    def _user_path(self, name: str) -> Path:
        # user names become hex so arbitrary names stay filesystem-safe
        return self.root / "users" / (name.encode("utf-8").hex() + ".json")

    def _read_user_file(self, path: Path) -> dict | None:
        try:
            return json.loads(path.read_text("utf-8"))
        except FileNotFoundError:
            return None

    def _write_user_file(self, path: Path, obj: dict) -> None:
        tmp = path.with_name(path.name + ".tmp")
        with tmp.open("w", encoding="utf-8") as fh:
            json.dump(obj, fh, sort_keys=True)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)

    def put_user(self, account: UserAccount) -> None:
        with self._lock:
            path = self._user_path(account.name)
            obj = self._read_user_file(path) or {}
            obj.update(account.to_json())
            self._write_user_file(path, obj)

    def get_user(self, name: str) -> UserAccount | None:
        obj = self._read_user_file(self._user_path(name))
        return UserAccount.from_json(obj) if obj else None

    def get_user_by_token(self, token: str) -> UserAccount | None:
        if not token:
            return None
        for name in self.list_users():
            acct = self.get_user(name)
            if acct is not None and acct.token == token:
                return acct
        return None

    def list_users(self) -> list[str]:
        names = []
        for path in (self.root / "users").glob("*.json"):
            try:
                names.append(bytes.fromhex(path.stem).decode("utf-8"))
            except ValueError:
                continue
        return sorted(names)

    def put_user_vector(self, name: str, category: str, vector: UserVector) -> None:
        with self._lock:
            path = self._user_path(name)
            obj = self._read_user_file(path)
            if obj is None:
                raise UnknownUserError(name)
            obj.setdefault("vectors", {})[category] = {
                "weights": [float(x) for x in vector.weights],
                "model_version": vector.model_version,
                "ref_time": _ts_to_str(vector.ref_time),
            }
            self._write_user_file(path, obj)

    def get_user_vector(self, name: str, category: str) -> UserVector | None:
        obj = self._read_user_file(self._user_path(name))
        if not obj:
            return None
        v = obj.get("vectors", {}).get(category)
        if v is None:
            return None
        return UserVector(
            weights=np.asarray(v["weights"], dtype=np.float64),
            model_version=v["model_version"],
            ref_time=_ts_from_str(v["ref_time"]),
        )

    # -- events ------------------------------------------------------
    def append_event(self, event: ClickEvent) -> int | None:
        with self._lock:
            if self.get_user(event.user_id) is None:
                raise UnknownUserError(event.user_id)
            if event.paper_id not in self._papers:
                raise UnknownPaperError(event.paper_id)
            key = (event.user_id, event.paper_id, event.kind, utc_day(event.timestamp))
            if key in self._event_keys:
                return None
            payload = json.dumps(
                {
                    "user": event.user_id,
                    "paper": event.paper_id,
                    "kind": event.kind,
                    "ts": _ts_to_str(event.timestamp),
                },
                sort_keys=True,
            ).encode("utf-8")
            with self._events_path.open("ab") as fh:
                fh.write(_EVENT_PREFIX.pack(len(payload)) + payload)
                fh.flush()
                os.fsync(fh.fileno())
            self._events.append(event)
            self._event_keys.add(key)
            return len(self._events)

    def list_events(self, user_id: str | None = None) -> list[ClickEvent]:
        with self._lock:
            if user_id is None:
                return list(self._events)
            return [e for e in self._events if e.user_id == user_id]

    # -- models ------------------------------------------------------
    def save_model(self, model: LdaModel, version: str | None = None) -> str:
        with self._lock:
            if version is None:
                version = _next_version(self.model_versions())
            _save_model_dir(model, self.root / "models" / version)
            return version

    def load_model(self, version: str | None = None) -> tuple[LdaModel, str]:
        if version is None:
            version = _latest_version(self.model_versions())
            if version is None:
                raise ModelLoadError(f"{self.root}: no saved models")
        return _load_model_dir(self.root / "models" / version), version

    def model_versions(self) -> list[str]:
        return sorted(
            p.name for p in (self.root / "models").iterdir() if p.is_dir()
        )


_SCHEMA = """
CREATE TABLE IF NOT EXISTS papers (
    id TEXT PRIMARY KEY,
    title TEXT NOT NULL,
    abstract TEXT NOT NULL,
    submitted TEXT NOT NULL,
    content_digest TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS paper_authors (
    paper_id TEXT NOT NULL REFERENCES papers(id) ON DELETE CASCADE,
    position INTEGER NOT NULL,
    name TEXT NOT NULL,
    PRIMARY KEY (paper_id, position)
);
CREATE TABLE IF NOT EXISTS paper_categories (
    paper_id TEXT NOT NULL REFERENCES papers(id) ON DELETE CASCADE,
    position INTEGER NOT NULL,
    category TEXT NOT NULL,
    PRIMARY KEY (paper_id, position)
);
CREATE INDEX IF NOT EXISTS idx_paper_categories ON paper_categories(category);
CREATE TABLE IF NOT EXISTS paper_vectors (
    paper_id TEXT NOT NULL REFERENCES papers(id) ON DELETE CASCADE,
    model_version TEXT NOT NULL,
    content_digest TEXT NOT NULL,
    weights BLOB NOT NULL,
    seq INTEGER NOT NULL,
    PRIMARY KEY (paper_id, model_version)
);
CREATE TABLE IF NOT EXISTS users (
    name TEXT PRIMARY KEY,
    password_salt TEXT NOT NULL,
    password_hash TEXT NOT NULL,
    token TEXT
);
CREATE TABLE IF NOT EXISTS user_categories (
    user_name TEXT NOT NULL REFERENCES users(name) ON DELETE CASCADE,
    position INTEGER NOT NULL,
    category TEXT NOT NULL,
    PRIMARY KEY (user_name, position)
);
CREATE TABLE IF NOT EXISTS user_vectors (
    user_name TEXT NOT NULL REFERENCES users(name) ON DELETE CASCADE,
    category TEXT NOT NULL,
    model_version TEXT NOT NULL,
    ref_time TEXT NOT NULL,
    weights BLOB NOT NULL,
    PRIMARY KEY (user_name, category)
);
CREATE TABLE IF NOT EXISTS events (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    user_name TEXT NOT NULL REFERENCES users(name),
    paper_id TEXT NOT NULL REFERENCES papers(id),
    kind TEXT NOT NULL,
    ts TEXT NOT NULL,
    utc_day TEXT NOT NULL,
    UNIQUE (user_name, paper_id, kind, utc_day)
);
CREATE TABLE IF NOT EXISTS models (
    version TEXT PRIMARY KEY,
    meta_json TEXT NOT NULL,
    lam BLOB NOT NULL,
    dictionary_tsv BLOB
);
"""


class SqliteStore(Repository):
    """Relational backend over the standard-library sqlite3 module."""

    def __init__(self, path: str | Path):
        self.path = str(path)
        self._lock = threading.RLock()
        self._conn = sqlite3.connect(self.path, check_same_thread=False)
        self._conn.execute("PRAGMA foreign_keys = ON")
        with self._conn:
            self._conn.executescript(_SCHEMA)

    def close(self) -> None:
        self._conn.close()

    # -- papers ------------------------------------------------------
    def upsert_papers(self, records: Iterable[PaperRecord]) -> tuple[int, int]:
        with self._lock, self._conn:
            new = updated = 0
            for rec in records:
                old = self.get_paper(rec.id)
                if old == rec:
                    continue
                if old is None:
                    new += 1
                else:
                    updated += 1
                self._conn.execute(
                    "INSERT INTO papers (id, title, abstract, submitted, content_digest)"
                    " VALUES (?, ?, ?, ?, ?)"
                    " ON CONFLICT(id) DO UPDATE SET title=excluded.title,"
                    " abstract=excluded.abstract, submitted=excluded.submitted,"
                    " content_digest=excluded.content_digest",
                    (
                        rec.id,
                        rec.title,
                        rec.abstract,
                        rec.submitted.isoformat(),
                        rec.content_digest(),
                    ),
                )
                self._conn.execute(
                    "DELETE FROM paper_authors WHERE paper_id = ?", (rec.id,)
                )
                self._conn.executemany(
                    "INSERT INTO paper_authors (paper_id, position, name) VALUES (?, ?, ?)",
                    [(rec.id, i, a) for i, a in enumerate(rec.authors)],
                )
                self._conn.execute(
                    "DELETE FROM paper_categories WHERE paper_id = ?", (rec.id,)
                )
                self._conn.executemany(
                    "INSERT INTO paper_categories (paper_id, position, category)"
                    " VALUES (?, ?, ?)",
                    [(rec.id, i, c) for i, c in enumerate(rec.categories)],
                )
            return new, updated

    def _row_to_paper(self, row) -> PaperRecord:
        pid, title, abstract, submitted = row
        authors = [
            r[0]
            for r in self._conn.execute(
                "SELECT name FROM paper_authors WHERE paper_id = ? ORDER BY position",
                (pid,),
            )
        ]
        cats = [
            r[0]
            for r in self._conn.execute(
                "SELECT category FROM paper_categories WHERE paper_id = ?"
                " ORDER BY position",
                (pid,),
            )
        ]
        return PaperRecord(
            id=pid,
            title=title,
            abstract=abstract,
            submitted=date.fromisoformat(submitted),
            authors=tuple(authors),
            categories=tuple(cats),
        )

    def get_paper(self, paper_id: str) -> PaperRecord | None:
        row = self._conn.execute(
            "SELECT id, title, abstract, submitted FROM papers WHERE id = ?",
            (paper_id,),
        ).fetchone()
        return self._row_to_paper(row) if row else None

    def list_papers(
        self,
        *,
        categories: Sequence[str] | None = None,
        date_from: date | None = None,
        date_to: date | None = None,
    ) -> list[PaperRecord]:
        clauses = []
        params: list = []
        if categories is not None:
            marks = ",".join("?" for _ in categories)
            clauses.append(
                f"id IN (SELECT paper_id FROM paper_categories WHERE category IN ({marks}))"
            )
            params.extend(categories)
        if date_from is not None:
            clauses.append("submitted >= ?")
            params.append(date_from.isoformat())
        if date_to is not None:
            clauses.append("submitted <= ?")
            params.append(date_to.isoformat())
        where = (" WHERE " + " AND ".join(clauses)) if clauses else ""
        rows = self._conn.execute(
            "SELECT id, title, abstract, submitted FROM papers"
            + where
            + " ORDER BY submitted DESC, id ASC",
            params,
        ).fetchall()
        return [self._row_to_paper(r) for r in rows]

    # -- topic vectors ----------------------------------------------
    def put_paper_vector(
        self, paper_id: str, theta: TopicVector, model_version: str
    ) -> None:
        with self._lock, self._conn:
            paper = self.get_paper(paper_id)
            if paper is None:
                raise UnknownPaperError(paper_id)
            blob = np.ascontiguousarray(theta.weights, dtype="<f8").tobytes()
            (seq,) = self._conn.execute(
                "SELECT COALESCE(MAX(seq), 0) + 1 FROM paper_vectors"
            ).fetchone()
            self._conn.execute(
                "INSERT INTO paper_vectors"
                " (paper_id, model_version, content_digest, weights, seq)"
                " VALUES (?, ?, ?, ?, ?)"
                " ON CONFLICT(paper_id, model_version) DO UPDATE SET"
                " content_digest=excluded.content_digest, weights=excluded.weights,"
                " seq=excluded.seq",
                (paper_id, model_version, paper.content_digest(), blob, seq),
            )

    def get_paper_vector(
        self, paper_id: str, model_version: str | None = None
    ) -> PaperVector | None:
        if model_version is None:
            row = self._conn.execute(
                "SELECT model_version, content_digest, weights FROM paper_vectors"
                " WHERE paper_id = ? ORDER BY seq DESC LIMIT 1",
                (paper_id,),
            ).fetchone()
        else:
            row = self._conn.execute(
                "SELECT model_version, content_digest, weights FROM paper_vectors"
                " WHERE paper_id = ? AND model_version = ?",
                (paper_id, model_version),
            ).fetchone()
        if row is None:
            return None
        return PaperVector(
            weights=np.frombuffer(row[2], dtype="<f8").copy(),
            model_version=row[0],
            content_digest=row[1],
        )

    # -- users -------------------------------------------------------
    def put_user(self, account: UserAccount) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT INTO users (name, password_salt, password_hash, token)"
                " VALUES (?, ?, ?, ?)"
                " ON CONFLICT(name) DO UPDATE SET password_salt=excluded.password_salt,"
                " password_hash=excluded.password_hash, token=excluded.token",
                (
                    account.name,
                    account.password_salt,
                    account.password_hash,
                    account.token,
                ),
            )
            self._conn.execute(
                "DELETE FROM user_categories WHERE user_name = ?", (account.name,)
            )
            self._conn.executemany(
                "INSERT INTO user_categories (user_name, position, category)"
                " VALUES (?, ?, ?)",
                [(account.name, i, c) for i, c in enumerate(account.categories)],
            )

    def _account_from_row(self, row) -> UserAccount:
        name, salt, pw_hash, token = row
        cats = [
            r[0]
            for r in self._conn.execute(
                "SELECT category FROM user_categories WHERE user_name = ?"
                " ORDER BY position",
                (name,),
            )
        ]
        return UserAccount(
            name=name,
            password_salt=salt,
            password_hash=pw_hash,
            token=token,
            categories=tuple(cats),
        )

    def get_user(self, name: str) -> UserAccount | None:
        row = self._conn.execute(
            "SELECT name, password_salt, password_hash, token FROM users WHERE name = ?",
            (name,),
        ).fetchone()
        return self._account_from_row(row) if row else None

    def get_user_by_token(self, token: str) -> UserAccount | None:
        if not token:
            return None
        row = self._conn.execute(
            "SELECT name, password_salt, password_hash, token FROM users WHERE token = ?",
            (token,),
        ).fetchone()
        return self._account_from_row(row) if row else None

    def list_users(self) -> list[str]:
        return [
            r[0]
            for r in self._conn.execute("SELECT name FROM users ORDER BY name")
        ]

    def put_user_vector(self, name: str, category: str, vector: UserVector) -> None:
        with self._lock, self._conn:
            if self.get_user(name) is None:
                raise UnknownUserError(name)
            blob = np.ascontiguousarray(vector.weights, dtype="<f8").tobytes()
            self._conn.execute(
                "INSERT INTO user_vectors (user_name, category, model_version, ref_time, weights)"
                " VALUES (?, ?, ?, ?, ?)"
                " ON CONFLICT(user_name, category) DO UPDATE SET"
                " model_version=excluded.model_version, ref_time=excluded.ref_time,"
                " weights=excluded.weights",
                (name, category, vector.model_version, _ts_to_str(vector.ref_time), blob),
            )

    def get_user_vector(self, name: str, category: str) -> UserVector | None:
        row = self._conn.execute(
            "SELECT model_version, ref_time, weights FROM user_vectors"
            " WHERE user_name = ? AND category = ?",
            (name, category),
        ).fetchone()
        if row is None:
            return None
        return UserVector(
            weights=np.frombuffer(row[2], dtype="<f8").copy(),
            model_version=row[0],
            ref_time=_ts_from_str(row[1]),
        )

    # -- events ------------------------------------------------------
    def append_event(self, event: ClickEvent) -> int | None:
        with self._lock, self._conn:
            if self.get_user(event.user_id) is None:
                raise UnknownUserError(event.user_id)
            if self.get_paper(event.paper_id) is None:
                raise UnknownPaperError(event.paper_id)
            try:
                cur = self._conn.execute(
                    "INSERT INTO events (user_name, paper_id, kind, ts, utc_day)"
                    " VALUES (?, ?, ?, ?, ?)",
                    (
                        event.user_id,
                        event.paper_id,
                        event.kind,
                        _ts_to_str(event.timestamp),
                        utc_day(event.timestamp).isoformat(),
                    ),
                )
            except sqlite3.IntegrityError:
                return None
            return int(cur.lastrowid)

    def list_events(self, user_id: str | None = None) -> list[ClickEvent]:
        if user_id is None:
            rows = self._conn.execute(
                "SELECT user_name, paper_id, kind, ts FROM events ORDER BY id"
            ).fetchall()
        else:
            rows = self._conn.execute(
                "SELECT user_name, paper_id, kind, ts FROM events"
                " WHERE user_name = ? ORDER BY id",
                (user_id,),
            ).fetchall()
        return [
            ClickEvent(
                user_id=r[0], paper_id=r[1], kind=r[2], timestamp=_ts_from_str(r[3])
            )
            for r in rows
        ]

    # -- models ------------------------------------------------------
    def save_model(self, model: LdaModel, version: str | None = None) -> str:
        with self._lock, self._conn:
            if version is None:
                version = _next_version(self.model_versions())
            meta_json, lam_bytes, dict_tsv = model_to_parts(model)
            self._conn.execute(
                "INSERT INTO models (version, meta_json, lam, dictionary_tsv)"
                " VALUES (?, ?, ?, ?)"
                " ON CONFLICT(version) DO UPDATE SET meta_json=excluded.meta_json,"
                " lam=excluded.lam, dictionary_tsv=excluded.dictionary_tsv",
                (version, meta_json, lam_bytes, dict_tsv),
            )
            return version

    def load_model(self, version: str | None = None) -> tuple[LdaModel, str]:
        if version is None:
            version = _latest_version(self.model_versions())
            if version is None:
                raise ModelLoadError(f"{self.path}: no saved models")
        row = self._conn.execute(
            "SELECT meta_json, lam, dictionary_tsv FROM models WHERE version = ?",
            (version,),
        ).fetchone()
        if row is None:
            raise ModelLoadError(f"{self.path}: no model version {version!r}")
        return (
            model_from_parts(row[0], row[1], row[2], where=f"model {version}"),
            version,
        )

    def model_versions(self) -> list[str]:
        return sorted(
            r[0] for r in self._conn.execute("SELECT version FROM models")
        )


def open_store(path: str | Path) -> Repository:
    """Open a store by path: ``*.db`` / ``*.sqlite`` paths get the
    relational backend, anything else the directory backend."""
    p = Path(path)
    if p.suffix in (".db", ".sqlite", ".sqlite3"):
        return SqliteStore(p)
    return FileStore(p)
