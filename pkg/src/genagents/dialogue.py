"""Two-party conversations with rolling summarization of long histories."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping

from genagents.errors import DialogueError, GenAgentError, MalformedCompletion
from genagents.llm import LLMBackend, TemplateId, complete_parsed, render
from genagents.memory import MemoryKind, MemoryStream

log = logging.getLogger(__name__)

END_MARKER = "[END]"
DEFAULT_MAX_TURNS = 24
DEFAULT_BUDGET_CHARS = 2000
DIALOGUE_VERBS = ("greet", "ask", "tell", "talk", "chat", "invite", "say", "discuss")


@dataclass
class DialogueState:
    participants: tuple[str, str]
    turns: list[tuple[str, str]] = field(default_factory=list)
    rolling_summary: str = ""
    open: bool = True
    compacted: int = 0  # number of leading turns folded into rolling_summary
    opened_at: int = 0
    closed_at: int | None = None
    summary: str = ""
    finalized: bool = False
    id: int = 0

    def uncompacted(self) -> list[tuple[str, str]]:
        return self.turns[self.compacted:]

    def transcript(self, turns: list[tuple[str, str]] | None = None) -> str:
        return "\n".join(f"{speaker}: {text}" for speaker, text in (self.turns if turns is None else turns))

    def other(self, name: str) -> str:
        first, second = self.participants
        if name == first:
            return second
        if name == second:
            return first
        raise DialogueError(f"{name} is not part of this dialogue")

    def close(self, now: int | None = None) -> None:
        self.open = False
        self.closed_at = self.opened_at if now is None else now

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "participants": list(self.participants),
            "turns": [list(t) for t in self.turns],
            "rolling_summary": self.rolling_summary,
            "compacted": self.compacted,
            "opened_at": self.opened_at,
            "closed_at": self.closed_at,
            "summary": self.summary,
        }


def is_dialogue_reaction(reaction_text: str, verbs=DIALOGUE_VERBS) -> bool:
    words = reaction_text.strip().lower().split()
    return bool(words) and words[0].strip(".,:;!") in verbs


def _clean_utterance(text: str, speaker: str) -> str:
    text = text.strip()
    if text.lower().startswith(f"{speaker.lower()}:"):
        text = text[len(speaker) + 1:].strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        text = text[1:-1].strip()
    return text


def _utterance_request(state: DialogueState, speaker: str, summary_text: str, context: str):
    rolling = f"Summary of the conversation so far: {state.rolling_summary}\n" if state.rolling_summary else ""
    recent = state.uncompacted()
    transcript = state.transcript(recent) if recent else "(nobody has spoken yet)"
    return render(
        TemplateId.UTTERANCE,
        summary=summary_text,
        context=f"{context}\n\n" if context else "",
        speaker=speaker,
        listener=state.other(speaker),
        rolling=rolling,
        transcript=transcript,
        turn_number=len(state.turns) + 1,
    )


def open_dialogue(
    initiator: str,
    partner: str,
    reaction_text: str,
    initiator_summary: str,
    entity_summary: str,
    backend: LLMBackend,
    now: int = 0,
    dialogue_id: int = 0,
) -> DialogueState:
    """Start a conversation with the initiator's first utterance."""
    state = DialogueState((initiator, partner), opened_at=now, id=dialogue_id)
    context = f"{entity_summary}\n{initiator} has decided to {reaction_text}."
    request = _utterance_request(state, initiator, initiator_summary, context)

    def parse(text: str) -> str:
        text = _clean_utterance(text, initiator)
        if not text or text.upper() == END_MARKER:
            raise MalformedCompletion("a dialogue needs an opening utterance")
        return text

    state.turns.append((initiator, complete_parsed(backend, request, parse)))
    return state


def next_utterance(
    state: DialogueState,
    speaker: str,
    speaker_summary: str,
    backend: LLMBackend,
    max_turns: int = DEFAULT_MAX_TURNS,
    now: int | None = None,
    context: str = "",
) -> str:
    """Generate ``speaker``'s next turn, or close the dialogue and return END_MARKER."""
    if not state.open:
        raise DialogueError("dialogue is closed")
    state.other(speaker)
    if state.turns and state.turns[-1][0] == speaker:
        raise DialogueError(f"{speaker} spoke last; turns must alternate")
    if len(state.turns) >= max_turns:
        state.close(now)
        return END_MARKER
    text = _clean_utterance(
        backend.complete(_utterance_request(state, speaker, speaker_summary, context)), speaker
    )
    if not text:
        raise MalformedCompletion("empty utterance")
    if text.upper() == END_MARKER:
        state.close(now)
        return END_MARKER
    state.turns.append((speaker, text))
    return text


def _summary_request(state: DialogueState, turns: list[tuple[str, str]]):
    prior = f"Summary of the earlier conversation: {state.rolling_summary}\n\n" if state.rolling_summary else ""
    first, second = state.participants
    return render(
        TemplateId.DIALOGUE_SUMMARY,
        prior=prior,
        transcript=state.transcript(turns) or "(no further turns)",
        first=first,
        second=second,
    )


def maybe_compact(state: DialogueState, backend: LLMBackend, budget_chars: int = DEFAULT_BUDGET_CHARS) -> DialogueState:
    """Fold uncompacted turns into the rolling summary once they exceed the budget."""
    pending = state.uncompacted()
    if sum(len(text) for _, text in pending) <= budget_chars:
        return state
    try:
        summary = backend.complete(_summary_request(state, pending)).strip()
    except GenAgentError as exc:
        log.warning("dialogue %d compaction skipped: %s", state.id, exc)
        return state
    state.rolling_summary = summary
    state.compacted = len(state.turns)
    return state


def finalize(state: DialogueState, streams: Mapping[str, MemoryStream], backend: LLMBackend) -> str:
    """Summarize a closed dialogue and write it back to both participants' memories."""
    if state.open:
        raise DialogueError("finalize requires a closed dialogue")
    if state.finalized:
        raise DialogueError("dialogue already finalized")
    summary = backend.complete(_summary_request(state, state.uncompacted())).strip()
    state.summary = summary
    state.finalized = True
    at = state.closed_at if state.closed_at is not None else state.opened_at
    first, second = state.participants
    for name in state.participants:
        stream = streams[name]
        stream.append(MemoryKind.OBSERVATION, f"Conversation between {first} and {second}: {summary}", at)
        listener = state.other(name)
        for speaker, text in state.turns:
            if speaker == name:
                stream.append(MemoryKind.OBSERVATION, f'{name} said to {listener}: "{text}"', at)
    return summary
