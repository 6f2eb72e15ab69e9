"""Memory retrieval by a weighted sum of recency, importance and relevance."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from genagents.errors import ClockSkew
from genagents.llm import LLMBackend, cosine
from genagents.memory import MemoryRecord, MemoryStream


@dataclass(frozen=True)
class RetrievalWeights:
    alpha_recency: float = 1.0
    alpha_importance: float = 1.0
    alpha_relevance: float = 1.0
    decay: float = 0.995  # per elapsed hour
    k: int = 5

    def __post_init__(self) -> None:
        alphas = (self.alpha_recency, self.alpha_importance, self.alpha_relevance)
        if any(a < 0 for a in alphas) or not any(a > 0 for a in alphas):
            raise ValueError("alphas must be non-negative with at least one positive")
        if not 0.0 < self.decay < 1.0:
            raise ValueError("decay must lie in (0, 1)")
        if self.k < 1:
            raise ValueError("k must be positive")


@dataclass(frozen=True)
class ScoreBreakdown:
    recency: float
    importance: float
    relevance: float
    total: float


@dataclass(frozen=True)
class ScoredMemory:
    record: MemoryRecord
    breakdown: ScoreBreakdown


def raw_components(
    record: MemoryRecord, query_embedding: np.ndarray, now: int, decay: float = 0.995
) -> tuple[float, float, float]:
    """Unnormalized (recency, importance, relevance) for one record."""
    if now < record.last_accessed_at:
        raise ClockSkew(f"now={now} precedes last access {record.last_accessed_at}")
    recency = decay ** ((now - record.last_accessed_at) / 60.0)
    relevance = (cosine(record.embedding, query_embedding) + 1.0) / 2.0
    return recency, float(record.importance), relevance


def _minmax(column: np.ndarray) -> np.ndarray:
    lo, hi = column.min(), column.max()
    if lo == hi:
        return np.full_like(column, 0.5)
    return (column - lo) / (hi - lo)


def normalize(candidates: Sequence[tuple[float, float, float]]) -> list[tuple[float, float, float]]:
    """Min-max scale each component over the candidate set.

    A component that is constant across candidates maps to 0.5.
    """
    if not candidates:
        raise ValueError("cannot normalize an empty candidate set")
    columns = np.asarray(candidates, dtype=np.float64).T
    scaled = [_minmax(col) for col in columns]
    return [tuple(float(c[i]) for c in scaled) for i in range(len(candidates))]


def score(
    stream: MemoryStream,
    query_embedding: np.ndarray,
    weights: RetrievalWeights,
    now: int,
    where: Callable[[MemoryRecord], bool] | None = None,
) -> list[ScoredMemory]:
    """Score and rank every candidate record; best first."""
    embeddings, importance, accessed, _ = stream.columns()
    ids = np.arange(len(stream))
    if where is not None:
        ids = np.array([r.id for r in stream if where(r)], dtype=np.int64)
    if ids.size == 0:
        return []
    embeddings, importance, accessed = embeddings[ids], importance[ids], accessed[ids]
    if accessed.max() > now:
        raise ClockSkew(f"now={now} precedes a last access at {int(accessed.max())}")

    recency = weights.decay ** ((now - accessed) / 60.0)
    query = np.asarray(query_embedding, dtype=np.float64)
    norms = np.sqrt(np.sum(embeddings * embeddings, axis=1)) * np.sqrt(np.sum(query * query))
    cos = np.clip(np.sum(embeddings * query, axis=1) / norms, -1.0, 1.0)
    relevance = (cos + 1.0) / 2.0

    rec_n, imp_n, rel_n = _minmax(recency), _minmax(importance), _minmax(relevance)
    total = (
        weights.alpha_recency * rec_n
        + weights.alpha_importance * imp_n
        + weights.alpha_relevance * rel_n
    )
    # Best total first; ties go to the more recently accessed, then higher id.
    order = np.lexsort((-ids, -accessed, -total))
    return [
        ScoredMemory(
            stream[int(ids[i])],
            ScoreBreakdown(float(rec_n[i]), float(imp_n[i]), float(rel_n[i]), float(total[i])),
        )
        for i in order
    ]


def retrieve(
    stream: MemoryStream,
    query_text: str,
    weights: RetrievalWeights,
    now: int,
    backend: LLMBackend | None = None,
    k: int | None = None,
    where: Callable[[MemoryRecord], bool] | None = None,
    mark_accessed: bool = True,
) -> list[ScoredMemory]:
    """Top-k memories for ``query_text``; returned records count as accessed at ``now``."""
    if not query_text or not query_text.strip():
        raise ValueError("query_text must be non-empty")
    if len(stream) == 0:
        return []
    backend = backend or stream.backend
    if backend is None:
        raise ValueError("no backend available to embed the query")
    ranked = score(stream, backend.embed(query_text), weights, now, where)
    top = ranked[: k or weights.k]
    if mark_accessed and top:
        stream.mark_accessed([m.record.id for m in top], now)
    return top
