"""Append-only per-agent memory stream."""

from __future__ import annotations

import enum
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from genagents.errors import ClockSkew, CorruptRecord, InvalidCitation, UnknownId
from genagents.llm import LLMBackend, TemplateId, render

log = logging.getLogger(__name__)

IMPORTANCE_FALLBACK = 3
FIELDS = ("id", "kind", "text", "created_at", "last_accessed_at", "importance", "embedding", "citations")

_INTEGER = re.compile(r"-?\d+")


class MemoryKind(str, enum.Enum):
    OBSERVATION = "observation"
    REFLECTION = "reflection"
    PLAN = "plan"


@dataclass(eq=False)
class MemoryRecord:
    id: int
    kind: MemoryKind
    text: str
    created_at: int
    last_accessed_at: int
    importance: int
    embedding: np.ndarray = field(repr=False)
    citations: tuple[int, ...] = ()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MemoryRecord):
            return NotImplemented
        return (
            self.id == other.id
            and self.kind == other.kind
            and self.text == other.text
            and self.created_at == other.created_at
            and self.last_accessed_at == other.last_accessed_at
            and self.importance == other.importance
            and self.citations == other.citations
            and np.array_equal(self.embedding, other.embedding)
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "id": self.id,
                "kind": self.kind.value,
                "text": self.text,
                "created_at": self.created_at,
                "last_accessed_at": self.last_accessed_at,
                "importance": self.importance,
                "embedding": [float(x) for x in self.embedding],
                "citations": list(self.citations),
            },
            ensure_ascii=False,
        )


def parse_importance(text: str) -> int | None:
    match = _INTEGER.search(text)
    if match is None:
        return None
    return max(1, min(10, int(match.group(0))))


def rate_importance(backend: LLMBackend, text: str) -> int:
    """Ask the backend for a 1-10 significance rating of ``text``."""
    if not text.strip():
        raise ValueError("cannot rate empty text")
    request = render(TemplateId.IMPORTANCE_RATING, memory=text)
    for _ in range(2):
        rating = parse_importance(backend.complete(request))
        if rating is not None:
            return rating
    log.warning("unparseable importance rating for %r; using %d", text[:60], IMPORTANCE_FALLBACK)
    return IMPORTANCE_FALLBACK


class MemoryStream:
    """Records for one agent, ids ``0..len-1`` in append order.

    Only ``last_accessed_at`` ever changes after a record is appended. Numeric
    columns are mirrored into numpy buffers so retrieval can score the whole
    stream without walking Python objects.
    """

    def __init__(self, owner: str, backend: LLMBackend | None = None):
        self.owner = owner
        self.backend = backend
        self._records: list[MemoryRecord] = []
        self._capacity = 0
        self._embeddings = np.empty((0, 0))
        self._importance = np.empty(0)
        self._accessed = np.empty(0)
        self._created = np.empty(0)

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[MemoryRecord]:
        return iter(self._records)

    def __getitem__(self, record_id: int) -> MemoryRecord:
        if not 0 <= record_id < len(self._records):
            raise UnknownId(f"{self.owner} has no memory {record_id}")
        return self._records[record_id]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MemoryStream):
            return NotImplemented
        return self.owner == other.owner and self._records == other._records

    def _reserve(self, dim: int) -> None:
        n = len(self._records)
        if n < self._capacity:
            return
        capacity = max(16, self._capacity * 2)
        embeddings = np.zeros((capacity, dim))
        if n:
            embeddings[:n] = self._embeddings[:n]
        self._embeddings = embeddings
        for name in ("_importance", "_accessed", "_created"):
            column = np.zeros(capacity)
            column[:n] = getattr(self, name)[:n]
            setattr(self, name, column)
        self._capacity = capacity

    def _store(self, record: MemoryRecord) -> MemoryRecord:
        dim = record.embedding.shape[0]
        if self._records and dim != self._embeddings.shape[1]:
            raise ValueError(f"embedding dimension {dim} != {self._embeddings.shape[1]}")
        self._reserve(dim)
        n = len(self._records)
        self._embeddings[n] = record.embedding
        self._importance[n] = record.importance
        self._accessed[n] = record.last_accessed_at
        self._created[n] = record.created_at
        self._records.append(record)
        return record

    def append(
        self,
        kind: MemoryKind | str,
        text: str,
        created_at: int,
        citations: Iterable[int] = (),
        *,
        importance: int | None = None,
        embedding: np.ndarray | None = None,
    ) -> MemoryRecord:
        kind = MemoryKind(kind)
        if not text or not text.strip():
            raise ValueError("memory text must be non-empty")
        new_id = len(self._records)
        cited = tuple(sorted(set(int(c) for c in citations)))
        if cited and kind is not MemoryKind.REFLECTION:
            raise InvalidCitation(f"only reflections carry citations, got {kind.value}")
        if kind is MemoryKind.REFLECTION and not cited:
            raise InvalidCitation("a reflection needs at least one citation")
        for c in cited:
            if not 0 <= c < new_id:
                raise InvalidCitation(f"citation {c} does not refer to an earlier record")
        if importance is None or embedding is None:
            if self.backend is None:
                raise ValueError("stream has no backend to rate or embed new records")
            if importance is None:
                importance = rate_importance(self.backend, text)
            if embedding is None:
                embedding = self.backend.embed(text)
        if not 1 <= importance <= 10:
            raise ValueError(f"importance {importance} outside [1, 10]")
        record = MemoryRecord(
            id=new_id,
            kind=kind,
            text=text,
            created_at=int(created_at),
            last_accessed_at=int(created_at),
            importance=int(importance),
            embedding=np.asarray(embedding, dtype=np.float64),
            citations=cited,
        )
        return self._store(record)

    def recent(self, n: int) -> list[MemoryRecord]:
        if n < 1:
            raise ValueError("n must be at least 1")
        return self._records[-n:]

    def by_kind(self, kind: MemoryKind | str) -> list[MemoryRecord]:
        kind = MemoryKind(kind)
        return [r for r in self._records if r.kind is kind]

    def mark_accessed(self, ids: Iterable[int], now: int) -> None:
        ids = list(ids)
        for record_id in ids:
            if self[record_id].created_at > now:
                raise ClockSkew(f"memory {record_id} was created after {now}")
        for record_id in ids:
            self._records[record_id].last_accessed_at = int(now)
            self._accessed[record_id] = int(now)

    def columns(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(embeddings, importance, last_accessed_at, created_at) views."""
        n = len(self._records)
        return self._embeddings[:n], self._importance[:n], self._accessed[:n], self._created[:n]

    def last_reflection_id(self) -> int:
        for record in reversed(self._records):
            if record.kind is MemoryKind.REFLECTION:
                return record.id
        return -1

    def persist(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as fh:
            for record in self._records:
                fh.write(record.to_json())
                fh.write("\n")

    @classmethod
    def load(cls, path: str | Path, owner: str | None = None, backend: LLMBackend | None = None) -> "MemoryStream":
        path = Path(path)
        stream = cls(owner if owner is not None else path.stem, backend)
        with path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                stream._store(_parse_line(line, lineno, len(stream)))
        return stream


def _parse_line(line: str, lineno: int, expected_id: int) -> MemoryRecord:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorruptRecord(lineno, f"invalid JSON ({exc.msg})") from None
    if not isinstance(raw, dict) or set(raw) != set(FIELDS):
        raise CorruptRecord(lineno, f"expected fields {list(FIELDS)}")
    try:
        record = MemoryRecord(
            id=int(raw["id"]),
            kind=MemoryKind(raw["kind"]),
            text=str(raw["text"]),
            created_at=int(raw["created_at"]),
            last_accessed_at=int(raw["last_accessed_at"]),
            importance=int(raw["importance"]),
            embedding=np.asarray(raw["embedding"], dtype=np.float64),
            citations=tuple(int(c) for c in raw["citations"]),
        )
    except (TypeError, ValueError) as exc:
        raise CorruptRecord(lineno, str(exc)) from None
    if record.id != expected_id:
        raise CorruptRecord(lineno, f"id {record.id} out of sequence (expected {expected_id})")
    if record.last_accessed_at < record.created_at:
        raise CorruptRecord(lineno, "last_accessed_at precedes created_at")
    if not 1 <= record.importance <= 10:
        raise CorruptRecord(lineno, "importance outside [1, 10]")
    if record.embedding.ndim != 1 or not record.text:
        raise CorruptRecord(lineno, "malformed embedding or empty text")
    if any(not 0 <= c < record.id for c in record.citations):
        raise CorruptRecord(lineno, "citation does not refer to an earlier record")
    return record
