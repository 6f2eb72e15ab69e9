"""Two-step reflection: focal questions, then cited insights stored as memories."""

from __future__ import annotations

import re
from dataclasses import dataclass

from genagents.errors import InvalidEvidenceIndex, MalformedCompletion, MissingCitationClause
from genagents.llm import LLMBackend, TemplateId, complete_parsed, render
from genagents.llm.prompts import numbered
from genagents.memory import MemoryKind, MemoryRecord, MemoryStream
from genagents.retrieval import RetrievalWeights, retrieve

FOCAL_WINDOW = 100
QUESTION_COUNT = 3
MAX_INSIGHTS = 5
DEFAULT_THRESHOLD = 150
DEFAULT_INSIGHT_K = 15

_LIST_MARKER = re.compile(r"^\s*(?:\d+\s*[.):]|[-*•])\s*")
_CLAUSE = re.compile(r"\(\s*because\s+of\s*([^()]*)\)\s*\.?\s*$", re.IGNORECASE)


@dataclass(frozen=True)
class FocalQuestion:
    text: str


@dataclass(frozen=True)
class Insight:
    text: str
    evidence: tuple[int, ...]  # memory ids, in cited order
    prompt_indices: tuple[int, ...]  # 1-based positions in the insight prompt
    shown: tuple[int, ...] = ()  # memory ids listed in the insight prompt
    record_id: int | None = None


def should_reflect(stream: MemoryStream, threshold: float = DEFAULT_THRESHOLD) -> bool:
    """True once importance accumulated since the last reflection reaches ``threshold``."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    _, importance, _, _ = stream.columns()
    since = stream.last_reflection_id() + 1
    return float(importance[since:].sum()) >= threshold


def parse_questions(text: str) -> list[FocalQuestion]:
    questions = []
    for line in text.splitlines():
        line = _LIST_MARKER.sub("", line).strip()
        if not line:
            continue
        if not line.endswith("?"):
            line = line.rstrip(".") + "?"
        questions.append(FocalQuestion(line))
    if len(questions) != QUESTION_COUNT:
        raise MalformedCompletion(f"expected {QUESTION_COUNT} questions, got {len(questions)}")
    return questions


def focal_question_request(stream: MemoryStream):
    statements = "\n".join(r.text for r in stream.recent(FOCAL_WINDOW))
    return render(TemplateId.FOCAL_QUESTIONS, statements=statements)


def generate_focal_questions(stream: MemoryStream, backend: LLMBackend | None = None) -> list[FocalQuestion]:
    if len(stream) == 0:
        raise ValueError("cannot reflect on an empty stream")
    backend = backend or stream.backend
    return complete_parsed(backend, focal_question_request(stream), parse_questions)


def parse_citations(line: str) -> tuple[str, list[int]]:
    """Split ``"insight (because of 1, 5, 3)"`` into text and indices."""
    match = _CLAUSE.search(line)
    if match is None:
        raise MissingCitationClause(f"no '(because of ...)' clause in {line!r}")
    indices = [int(tok) for tok in re.findall(r"\d+", match.group(1))]
    if not indices:
        raise MissingCitationClause(f"citation clause lists no indices in {line!r}")
    text = _LIST_MARKER.sub("", line[: match.start()]).strip()
    if not text:
        raise MalformedCompletion(f"insight text is empty in {line!r}")
    return text, indices


def parse_insights(completion: str, shown: list[MemoryRecord]) -> list[Insight]:
    insights = []
    for line in completion.splitlines():
        if not line.strip():
            continue
        try:
            text, indices = parse_citations(line)
        except MissingCitationClause:
            continue
        bad = [i for i in indices if not 1 <= i <= len(shown)]
        if bad:
            raise InvalidEvidenceIndex(f"indices {bad} outside 1..{len(shown)}")
        insights.append(
            Insight(
                text=text,
                evidence=tuple(shown[i - 1].id for i in indices),
                prompt_indices=tuple(indices),
                shown=tuple(r.id for r in shown),
            )
        )
        if len(insights) == MAX_INSIGHTS:
            break
    if not insights:
        raise MalformedCompletion("no cited insights in completion")
    return insights


def generate_insights(
    stream: MemoryStream,
    question: FocalQuestion | str,
    weights: RetrievalWeights,
    now: int,
    backend: LLMBackend | None = None,
    k: int = DEFAULT_INSIGHT_K,
) -> list[Insight]:
    """Ask for cited insights about the memories relevant to ``question`` and store them."""
    text = question.text if isinstance(question, FocalQuestion) else question
    if not text.strip():
        raise ValueError("question must be non-empty")
    backend = backend or stream.backend
    shown = [m.record for m in retrieve(stream, text, weights, now, backend, k=k)]
    if not shown:
        return []
    request = render(
        TemplateId.INSIGHTS,
        name=stream.owner,
        statements=numbered([r.text for r in shown]),
        n_statements=len(shown),
    )
    insights = complete_parsed(backend, request, lambda c: parse_insights(c, shown))
    stored = []
    for insight in insights:
        record = stream.append(MemoryKind.REFLECTION, insight.text, now, insight.evidence)
        stored.append(
            Insight(insight.text, insight.evidence, insight.prompt_indices, insight.shown, record.id)
        )
    return stored


def reflect(
    stream: MemoryStream,
    weights: RetrievalWeights,
    now: int,
    backend: LLMBackend | None = None,
    k: int = DEFAULT_INSIGHT_K,
) -> list[Insight]:
    """Full pipeline: three focal questions, then insights for each."""
    backend = backend or stream.backend
    insights: list[Insight] = []
    for question in generate_focal_questions(stream, backend):
        insights.extend(generate_insights(stream, question, weights, now, backend, k))
    return insights
