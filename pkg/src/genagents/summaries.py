"""Query-conditioned summaries that feed planning and reactions, plus emoji status."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Callable

import regex

from genagents.agent import Agent
from genagents.errors import GenAgentError, MalformedCompletion
from genagents.llm import LLMBackend, TemplateId, complete_parsed, render
from genagents.llm.prompts import (
    CORE_CHARACTERISTICS_QUERY,
    DAILY_OCCUPATION_QUERY,
    PREVIOUS_DAY_QUERY,
    RECENT_PROGRESS_QUERY,
    RELATIONSHIP_QUERY,
    STATUS_QUERY,
    numbered,
)
from genagents.memory import MemoryRecord
from genagents.retrieval import RetrievalWeights, retrieve
from genagents.simtime import day_start

log = logging.getLogger(__name__)

FALLBACK_EMOJI = "\U0001F4AC"  # speech balloon
MAX_EMOJI = 2

_EMOJI_CLUSTER = regex.compile(
    r"^(?:\p{Extended_Pictographic}|\p{Regional_Indicator}|\p{Emoji_Modifier}"
    r"|[️︎‍⃣\U000E0020-\U000E007F])+$"
)
_PICTOGRAPH = regex.compile(r"\p{Extended_Pictographic}|\p{Regional_Indicator}")
_NO = re.compile(r"^\W*no\b", re.IGNORECASE)
_YES = re.compile(r"^\W*yes\b", re.IGNORECASE)
_LEADING_PUNCT = re.compile(r"^[\s,.:;!\-–—]+")


@dataclass(frozen=True)
class AgentSummaryDescription:
    name: str
    identity_core: str
    occupation: str
    self_assessment: str
    combined: str
    as_of: int


@dataclass(frozen=True)
class ReactionDecision:
    react: bool
    reaction_text: str = ""

    def __post_init__(self) -> None:
        if self.react != bool(self.reaction_text):
            raise ValueError("reaction_text must be empty exactly when react is false")


def no_information(query: str) -> str:
    return f"No information about {query}."


def _summarize(
    agent: Agent,
    query: str,
    template: TemplateId,
    weights: RetrievalWeights,
    now: int,
    backend: LLMBackend,
    where: Callable[[MemoryRecord], bool] | None = None,
    **variables,
) -> str | None:
    memories = retrieve(agent.stream, query, weights, now, backend, where=where)
    if not memories:
        return None
    request = render(
        template,
        query=query,
        statements=numbered([m.record.text for m in memories]),
        **variables,
    )
    return backend.complete(request).strip()


def identity_queries(agent: Agent) -> tuple[str, str, str]:
    name = agent.name
    return (
        CORE_CHARACTERISTICS_QUERY.format(name=name),
        DAILY_OCCUPATION_QUERY.format(name=name),
        RECENT_PROGRESS_QUERY.format(name=name, possessive=agent.profile.possessive),
    )


def agent_summary_description(
    agent: Agent, now: int, backend: LLMBackend, weights: RetrievalWeights
) -> AgentSummaryDescription:
    """Identity, occupation and self-assessment sections, combined in that order."""
    sections = []
    for query in identity_queries(agent):
        text = _summarize(agent, query, TemplateId.AGENT_SUMMARY_PART, weights, now, backend, name=agent.name)
        sections.append(text if text else no_information(query))
    header = f"Name: {agent.name}\nInnate traits: {agent.profile.traits}"
    return AgentSummaryDescription(
        name=agent.name,
        identity_core=sections[0],
        occupation=sections[1],
        self_assessment=sections[2],
        combined="\n".join([header, *sections]),
        as_of=now,
    )


def previous_day_summary(
    agent: Agent, date: int, now: int, backend: LLMBackend, weights: RetrievalWeights
) -> str:
    """Summary of the day before ``date``; day 1 uses the scenario's bootstrap text."""
    if date < 1:
        raise ValueError("simulation days start at 1")
    if date == 1:
        return agent.profile.yesterday
    lo, hi = day_start(date - 1), day_start(date)
    query = PREVIOUS_DAY_QUERY.format(name=agent.name)
    text = _summarize(
        agent,
        query,
        TemplateId.PREVIOUS_DAY_SUMMARY,
        weights,
        now,
        backend,
        where=lambda r: lo <= r.created_at < hi,
        name=agent.name,
        day=date - 1,
    )
    return text if text else no_information(query)


def observed_entity_summary(
    observer: Agent,
    entity: str,
    status: str,
    now: int,
    backend: LLMBackend,
    weights: RetrievalWeights,
) -> str:
    """Relationship section followed by a status section grounded in perception."""
    rel_query = RELATIONSHIP_QUERY.format(observer=observer.name, entity=entity)
    relationship = _summarize(
        observer, rel_query, TemplateId.ENTITY_SUMMARY_PART, weights, now, backend, observer=observer.name
    )
    status_query = STATUS_QUERY.format(entity=entity, status=status)
    recalled = _summarize(
        observer, status_query, TemplateId.ENTITY_SUMMARY_PART, weights, now, backend, observer=observer.name
    )
    status_section = f"{status_query}."
    if recalled:
        status_section = f"{status_section} {recalled}"
    return "\n".join([relationship or no_information(rel_query), status_section])


def parse_reaction(text: str) -> ReactionDecision:
    text = text.strip()
    if not text:
        raise MalformedCompletion("empty reaction completion")
    if _NO.match(text):
        return ReactionDecision(False, "")
    yes = _YES.match(text)
    remainder = text[yes.end():] if yes else text
    remainder = _LEADING_PUNCT.sub("", remainder).strip()
    if not remainder:
        raise MalformedCompletion(f"reaction without content: {text!r}")
    return ReactionDecision(True, remainder)


def reaction_request(summary: AgentSummaryDescription, entity_summary: str, observation_text: str):
    return render(
        TemplateId.REACTION,
        agent_summary=summary.combined,
        entity_summary=entity_summary,
        observation=observation_text,
        name=summary.name,
    )


def decide_reaction(
    summary: AgentSummaryDescription, entity_summary: str, observation_text: str, backend: LLMBackend
) -> ReactionDecision:
    if not observation_text.strip():
        raise ValueError("observation_text must be non-empty")
    request = reaction_request(summary, entity_summary, observation_text)
    return complete_parsed(backend, request, parse_reaction)


def emoji_clusters(text: str) -> list[str]:
    return [c for c in regex.findall(r"\X", text) if not c.isspace()]


def is_emoji_status(text: str) -> bool:
    """True for one or two emoji grapheme clusters (whitespace ignored)."""
    clusters = emoji_clusters(text)
    return 1 <= len(clusters) <= MAX_EMOJI and all(
        _EMOJI_CLUSTER.match(c) and _PICTOGRAPH.search(c) for c in clusters
    )


def emojify(action_text: str, backend: LLMBackend) -> str:
    """Map an action to one or two emoji, falling back to a speech balloon."""
    if not action_text.strip():
        raise ValueError("action_text must be non-empty")
    try:
        raw = backend.complete(render(TemplateId.EMOJI, action=action_text))
    except GenAgentError as exc:
        log.warning("emoji backend failure for %r: %s", action_text, exc)
        return FALLBACK_EMOJI
    if not is_emoji_status(raw):
        log.warning("rejected emoji status %r for %r", raw, action_text)
        return FALLBACK_EMOJI
    return "".join(emoji_clusters(raw))
