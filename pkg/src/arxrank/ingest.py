"""Parse paper metadata from local files into canonical records.

Two documented input formats: newline-delimited JSON (the canonical
fixture/interchange format) and a small arXiv-OAI-style XML subset.
Both produce the same ``Corpus`` of ``PaperRecord`` values.  Network
harvesting is out of scope; ``ReleaseSource`` is the pluggable seam.
"""

from __future__ import annotations

import hashlib
import json
import re
import xml.parsers.expat
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import Iterable, Protocol

CATEGORY_RE = re.compile(r"[a-z-]+(\.[A-Z]{2})?")


class IngestError(ValueError):
    """Malformed or inconsistent input data."""


class XmlParseError(IngestError):
    """Structural XML error; carries the byte offset of the failure."""

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset


@dataclass(frozen=True)
class PaperRecord:
    """One paper's metadata as harvested: identity, text, date, authorship."""

    id: str
    title: str
    abstract: str
    submitted: date
    authors: tuple[str, ...]
    categories: tuple[str, ...]

    def __post_init__(self):
        if not self.id:
            raise IngestError("paper id must be non-empty")
        if not self.title.strip():
            raise IngestError(f"paper {self.id!r}: title empty after trimming")
        if not self.abstract.strip():
            raise IngestError(f"paper {self.id!r}: abstract empty after trimming")
        if not self.categories:
            raise IngestError(f"paper {self.id!r}: categories must be non-empty")
        for code in self.categories:
            if not CATEGORY_RE.fullmatch(code):
                raise IngestError(f"paper {self.id!r}: invalid category code {code!r}")

    @property
    def text(self) -> str:
        """Title and abstract joined with a single space (modeling input)."""
        return f"{self.title} {self.abstract}"

    def content_digest(self) -> str:
        """Digest of the fields that feed topic inference."""
        h = hashlib.sha256()
        h.update(self.title.encode("utf-8"))
        h.update(b"\x00")
        h.update(self.abstract.encode("utf-8"))
        return h.hexdigest()


@dataclass(frozen=True)
class Corpus:
    """An ordered, duplicate-free collection of paper records."""

    records: tuple[PaperRecord, ...]
    source_digest: str = ""

    def __post_init__(self):
        seen = set()
        for rec in self.records:
            if rec.id in seen:
                raise IngestError(f"duplicate paper id {rec.id!r}")
            seen.add(rec.id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _parse_date(value: str, where: str) -> date:
    try:
        return date.fromisoformat(value)
    except ValueError:
        pass
    try:
        return datetime.fromisoformat(value).date()
    except ValueError:
        raise IngestError(f"{where}: invalid ISO-8601 date {value!r}") from None


_JSONL_KEYS = ("id", "title", "abstract", "submitted", "authors", "categories")


def parse_jsonl(data: bytes) -> Corpus:
    """Parse a newline-delimited JSON corpus.

    One object per line with keys id, title, abstract, submitted
    (ISO-8601 date), authors (array), categories (array).  Input order
    is preserved; the digest is computed over the raw bytes.
    """
    records = []
    seen: set[str] = set()
    for lineno, raw in enumerate(data.split(b"\n"), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise IngestError(f"line {lineno}: malformed JSON ({exc})") from None
        if not isinstance(obj, dict):
            raise IngestError(f"line {lineno}: expected a JSON object")
        for key in _JSONL_KEYS:
            if key not in obj:
                raise IngestError(f"line {lineno}: missing key {key!r}")
        rec = PaperRecord(
            id=str(obj["id"]),
            title=str(obj["title"]),
            abstract=str(obj["abstract"]),
            submitted=_parse_date(str(obj["submitted"]), f"line {lineno}"),
            authors=tuple(str(a) for a in obj["authors"]),
            categories=tuple(str(c) for c in obj["categories"]),
        )
        if rec.id in seen:
            raise IngestError(f"line {lineno}: duplicate paper id {rec.id!r}")
        seen.add(rec.id)
        records.append(rec)
    return Corpus(records=tuple(records), source_digest=_digest(data))


def to_jsonl(corpus: Corpus) -> bytes:
    """Serialize a corpus back to the canonical JSONL format (LF endings)."""
    lines = []
    for rec in corpus:
        lines.append(
            json.dumps(
                {
                    "id": rec.id,
                    "title": rec.title,
                    "abstract": rec.abstract,
                    "submitted": rec.submitted.isoformat(),
                    "authors": list(rec.authors),
                    "categories": list(rec.categories),
                },
                ensure_ascii=False,
            )
        )
    return ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8")


_WS_RUN = re.compile(r"\s+")

_RECORD_FIELDS = ("id", "title", "abstract", "created", "authors", "categories")


class _OaiHandler:
    """Expat callbacks building records from the documented XML subset."""

    def __init__(self, parser: xml.parsers.expat.XMLParserType):
        self.parser = parser
        self.records: list[PaperRecord] = []
        self.stack: list[str] = []
        self.current: dict | None = None
        self.text_parts: list[str] = []
        self.record_offset = 0

    def start(self, name: str, attrs: dict):
        if not self.stack:
            if name != "records":
                raise XmlParseError(
                    f"unknown root element <{name}> (expected <records>)",
                    self.parser.CurrentByteIndex,
                )
        elif name == "record":
            self.current = {"authors": []}
            self.record_offset = self.parser.CurrentByteIndex
        self.stack.append(name)
        self.text_parts = []

    def chars(self, content: str):
        self.text_parts.append(content)

    def end(self, name: str):
        self.stack.pop()
        text = "".join(self.text_parts)
        self.text_parts = []
        if self.current is None:
            return
        if name in ("id", "title", "abstract", "created"):
            self.current[name] = _WS_RUN.sub(" ", text).strip()
        elif name == "author":
            self.current["authors"].append(_WS_RUN.sub(" ", text).strip())
        elif name == "categories":
            codes = text.split()
            if not codes:
                raise XmlParseError(
                    f"record {len(self.records)}: empty <categories>",
                    self.parser.CurrentByteIndex,
                )
            self.current["categories"] = codes
        elif name == "record":
            rec = self._finish(self.current, len(self.records))
            self.records.append(rec)
            self.current = None

    def _finish(self, raw: dict, index: int) -> PaperRecord:
        for key in ("id", "title", "abstract", "created", "categories"):
            if key not in raw:
                raise IngestError(f"record {index}: missing element <{key}>")
        return PaperRecord(
            id=raw["id"],
            title=raw["title"],
            abstract=raw["abstract"],
            submitted=_parse_date(raw["created"], f"record {index}"),
            authors=tuple(raw["authors"]),
            categories=tuple(raw["categories"]),
        )


def parse_oai_xml(data: bytes) -> Corpus:
    """Parse the documented OAI-style XML subset.

    ``<records>`` root holding ``<record>`` elements with ``<id>``,
    ``<title>``, ``<abstract>``, ``<created>``, ``<authors>`` (list of
    ``<author>``) and ``<categories>`` (space-separated codes).  Entity
    references are decoded; whitespace runs in text fields collapse to
    single spaces.  Structural errors report a byte offset.
    """
    parser = xml.parsers.expat.ParserCreate("UTF-8")
    handler = _OaiHandler(parser)
    parser.StartElementHandler = handler.start
    parser.EndElementHandler = handler.end
    parser.CharacterDataHandler = handler.chars
    try:
        parser.Parse(data, True)
    except xml.parsers.expat.ExpatError as exc:
        raise XmlParseError(
            xml.parsers.expat.errors.messages[exc.code], max(parser.ErrorByteIndex, 0)
        ) from None
    seen: set[str] = set()
    for rec in handler.records:
        if rec.id in seen:
            raise IngestError(f"duplicate paper id {rec.id!r}")
        seen.add(rec.id)
    return Corpus(records=tuple(handler.records), source_digest=_digest(data))


def load_corpus(path: str | Path, format: str = "jsonl") -> Corpus:
    """Load a corpus file in one of the documented formats."""
    data = Path(path).read_bytes()
    if format == "jsonl":
        return parse_jsonl(data)
    if format == "oai-xml":
        return parse_oai_xml(data)
    raise ValueError(f"unknown corpus format {format!r}")


class ReleaseSource(Protocol):
    """Pluggable provider of daily releases (tests never touch the network)."""

    def fetch(self, day: date) -> Corpus:
        """Return the papers released on ``day``."""
        ...


@dataclass
class DirectoryReleaseSource:
    """Reads releases from ``<dir>/<YYYY-MM-DD>.jsonl`` files.

    A missing file is an empty release, matching days with no postings.
    """

    root: Path
    format: str = "jsonl"

    def fetch(self, day: date) -> Corpus:
        suffix = "jsonl" if self.format == "jsonl" else "xml"
        path = Path(self.root) / f"{day.isoformat()}.{suffix}"
        if not path.exists():
            return Corpus(records=(), source_digest=_digest(b""))
        return load_corpus(path, self.format)


@dataclass
class StaticReleaseSource:
    """In-memory release source keyed by day (test double)."""

    releases: dict[date, Corpus] = field(default_factory=dict)

    def fetch(self, day: date) -> Corpus:
        return self.releases.get(day, Corpus(records=(), source_digest=_digest(b"")))
