from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from genagents.errors import ClockSkew
from genagents.memory import MemoryStream
from genagents.retrieval import RetrievalWeights, normalize, raw_components, retrieve, score
from tests.conftest import scripted


def brute_force_rank(records, query, weights, now):
    """Independent re-implementation of the weighted-sum score, in plain Python."""
    raw = []
    for r in records:
        hours = (now - r.last_accessed_at) / 60.0
        dot = sum(float(a) * float(b) for a, b in zip(r.embedding, query))
        na = math.sqrt(sum(float(a) ** 2 for a in r.embedding))
        nb = math.sqrt(sum(float(b) ** 2 for b in query))
        cos = max(-1.0, min(1.0, dot / (na * nb)))
        raw.append((weights.decay ** hours, float(r.importance), (cos + 1) / 2))

    def scale(values):
        lo, hi = min(values), max(values)
        return [0.5] * len(values) if lo == hi else [(v - lo) / (hi - lo) for v in values]

    rec, imp, rel = (scale([row[i] for row in raw]) for i in range(3))
    totals = [
        weights.alpha_recency * a + weights.alpha_importance * b + weights.alpha_relevance * c
        for a, b, c in zip(rec, imp, rel)
    ]
    order = sorted(
        range(len(records)), key=lambda i: (-totals[i], -records[i].last_accessed_at, -records[i].id)
    )
    return [records[i].id for i in order], [totals[i] for i in order]


def random_stream(rng, n, dim=16, duplicates=0):
    stream = MemoryStream("A")
    for i in range(n):
        created = int(rng.integers(0, 5000))
        stream.append(
            "observation", f"m{i}", created, importance=int(rng.integers(1, 11)), embedding=rng.standard_normal(dim)
        )
        stream.mark_accessed([i], created + int(rng.integers(0, 3000)))
    for j in range(duplicates):
        src = stream[int(rng.integers(0, n))]
        stream.append("observation", f"dup{j}", src.created_at, importance=src.importance, embedding=src.embedding)
        stream.mark_accessed([len(stream) - 1], src.last_accessed_at)
    return stream


def test_matches_brute_force_with_ties():
    rng = np.random.default_rng(3)
    stream = random_stream(rng, 200, duplicates=20)
    weights = RetrievalWeights(1.0, 0.7, 1.3)
    for _ in range(5):
        query = rng.standard_normal(16)
        ids, totals = brute_force_rank(list(stream), query, weights, 9000)
        ranked = score(stream, query, weights, 9000)
        assert [m.record.id for m in ranked] == ids
        assert np.allclose([m.breakdown.total for m in ranked], totals, atol=1e-12)


def test_recency_is_decay_to_the_hours_since_access(backend):
    stream = MemoryStream("A", backend)
    stream.append("observation", "x", 0)
    rec, imp, rel = raw_components(stream[0], backend.embed("x"), 24 * 60)
    assert rec == pytest.approx(0.995**24, abs=1e-12)
    assert imp == 3.0
    assert rel == pytest.approx(1.0)


def test_raw_components_rejects_clock_skew(backend):
    stream = MemoryStream("A", backend)
    stream.append("observation", "x", 100)
    with pytest.raises(ClockSkew):
        raw_components(stream[0], backend.embed("x"), 99)


def test_normalize_constant_columns_map_to_half():
    assert normalize([(1.0, 5.0, 0.2), (1.0, 7.0, 0.2)]) == [(0.5, 0.0, 0.5), (0.5, 1.0, 0.5)]
    with pytest.raises(ValueError):
        normalize([])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(*(st.floats(-1e6, 1e6, allow_nan=False),) * 3), min_size=1, max_size=30))
def test_normalize_bounds(triples):
    for row in normalize(triples):
        assert all(0.0 <= v <= 1.0 for v in row)


def test_retrieve_returns_top_k_and_marks_access(backend):
    stream = MemoryStream("A", backend)
    for text in ["coffee at the cafe", "research paper", "cafe counter coffee", "jog in the park"]:
        stream.append("observation", text, 60)
    top = retrieve(stream, "coffee cafe", RetrievalWeights(k=2), 600)
    assert len(top) == 2
    assert {m.record.text for m in top} == {"coffee at the cafe", "cafe counter coffee"}
    assert all(m.record.last_accessed_at == 600 for m in top)
    assert stream[1].last_accessed_at == 60  # not returned, not touched
    totals = [m.breakdown.total for m in top]
    assert totals == sorted(totals, reverse=True)


def test_retrieve_without_marking_leaves_stream_untouched(backend):
    stream = MemoryStream("A", backend)
    stream.append("observation", "a", 0)
    retrieve(stream, "a", RetrievalWeights(), 100, mark_accessed=False)
    assert stream[0].last_accessed_at == 0


def test_retrieve_filter_and_empty(backend):
    stream = MemoryStream("A", backend)
    assert retrieve(stream, "q", RetrievalWeights(), 0) == []
    stream.append("observation", "a", 0)
    stream.append("plan", "b", 0)
    got = retrieve(stream, "q", RetrievalWeights(), 0, where=lambda r: r.kind.value == "plan")
    assert [m.record.text for m in got] == ["b"]
    with pytest.raises(ValueError):
        retrieve(stream, " ", RetrievalWeights(), 0)


def test_single_candidate_scores_half_on_every_component(backend):
    stream = MemoryStream("A", backend)
    stream.append("observation", "only", 0)
    (m,) = retrieve(stream, "anything", RetrievalWeights(), 10)
    assert (m.breakdown.recency, m.breakdown.importance, m.breakdown.relevance) == (0.5, 0.5, 0.5)
    assert m.breakdown.total == 1.5


@pytest.mark.parametrize(
    "kwargs", [{"alpha_recency": -1}, {"alpha_recency": 0, "alpha_importance": 0, "alpha_relevance": 0}, {"decay": 1.0}, {"k": 0}]
)
def test_weights_validation(kwargs):
    with pytest.raises(ValueError):
        RetrievalWeights(**kwargs)


def test_zero_alpha_removes_a_component():
    rng = np.random.default_rng(11)
    stream = random_stream(rng, 50)
    query = rng.standard_normal(16)
    only_importance = score(stream, query, RetrievalWeights(0, 1, 0), 9000)
    imps = [m.record.importance for m in only_importance]
    assert imps == sorted(imps, reverse=True)
