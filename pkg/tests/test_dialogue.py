from __future__ import annotations

import pytest

from genagents.dialogue import (
    END_MARKER,
    DialogueState,
    finalize,
    is_dialogue_reaction,
    maybe_compact,
    next_utterance,
    open_dialogue,
)
from genagents.errors import DialogueError, MalformedCompletion
from genagents.memory import MemoryStream
from tests.conftest import scripted

CHATTY = [{"regex": "This is turn \\d+ of", "response": "{speaker} says something to {listener}."}]


def _open(backend, **kw):
    return open_dialogue("Isabella", "Klaus", "greet Klaus", "summary", "entity", backend, **kw)


def test_open_records_the_first_turn():
    state = _open(scripted(utterance=CHATTY), now=600, dialogue_id=4)
    assert state.turns == [("Isabella", "Isabella says something to Klaus.")]
    assert state.open and state.opened_at == 600 and state.id == 4


def test_opening_cannot_be_end():
    with pytest.raises(MalformedCompletion):
        _open(scripted())


def test_end_marker_closes():
    backend = scripted(utterance=[{"contains": "turn 1 of", "response": "Isabella: \"Hello!\""}])
    state = _open(backend)
    assert state.turns[0][1] == "Hello!"
    assert next_utterance(state, "Klaus", "s", backend, now=615) == END_MARKER
    assert not state.open and state.closed_at == 615
    with pytest.raises(DialogueError):
        next_utterance(state, "Isabella", "s", backend)


def test_turns_must_alternate_between_participants():
    backend = scripted(utterance=CHATTY)
    state = _open(backend)
    with pytest.raises(DialogueError):
        next_utterance(state, "Isabella", "s", backend)
    with pytest.raises(DialogueError):
        next_utterance(state, "Maria", "s", backend)


def test_hard_cap_terminates():
    backend = scripted(utterance=CHATTY)
    state = _open(backend)
    speaker = "Klaus"
    while next_utterance(state, speaker, "s", backend, max_turns=5) != END_MARKER:
        speaker = state.other(speaker)
    assert len(state.turns) == 5 and not state.open


def test_compaction_is_lossless_for_the_transcript():
    backend = scripted(utterance=CHATTY)
    state = _open(backend)
    speaker = "Klaus"
    for _ in range(9):
        next_utterance(state, speaker, "s", backend)
        maybe_compact(state, backend, budget_chars=70)
        speaker = state.other(speaker)
    assert len(state.turns) == 10
    assert state.rolling_summary == "Isabella and Klaus talked."
    assert sum(len(t) for _, t in state.uncompacted()) <= 70
    assert 0 < state.compacted <= len(state.turns)


def test_compaction_context_reaches_the_prompt():
    seen = []
    inner = scripted(utterance=CHATTY, dialogue_summary=["They discussed the party."])

    class Spy:
        def complete(self, request):
            seen.append(request.rendered_text)
            return inner.complete(request)

        def embed(self, text):  # pragma: no cover
            return inner.embed(text)

    state = _open(Spy())
    state.turns.append(("Klaus", "x" * 50))
    maybe_compact(state, Spy(), budget_chars=10)
    next_utterance(state, "Isabella", "s", Spy())
    assert "Summary of the conversation so far: They discussed the party." in seen[-1]
    assert "x" * 50 not in seen[-1]


def test_under_budget_is_untouched():
    backend = scripted(utterance=CHATTY)
    state = _open(backend)
    maybe_compact(state, backend, budget_chars=10_000)
    assert state.rolling_summary == "" and state.compacted == 0


def test_finalize_writes_both_memories():
    backend = scripted(utterance=CHATTY)
    state = _open(backend, now=700)
    next_utterance(state, "Klaus", "s", backend)
    state.close(715)
    streams = {"Isabella": MemoryStream("Isabella", backend), "Klaus": MemoryStream("Klaus", backend)}
    summary = finalize(state, streams, backend)
    assert summary == "Isabella and Klaus talked."
    for name, stream in streams.items():
        texts = [r.text for r in stream]
        assert texts[0] == "Conversation between Isabella and Klaus: Isabella and Klaus talked."
        assert texts[1].startswith(f"{name} said to {state.other(name)}:")
        assert all(r.created_at == 715 for r in stream)
    with pytest.raises(DialogueError):
        finalize(state, streams, backend)


def test_finalize_requires_closed():
    state = DialogueState(("A", "B"))
    with pytest.raises(DialogueError):
        finalize(state, {}, scripted())


@pytest.mark.parametrize(
    "text, verbs, expected",
    [
        ("greet Klaus", None, True),
        ("Ask about the party", None, True),
        ("prepare a sandwich", None, False),
        ("", None, False),
        ("wave at Klaus", ("wave",), True),
    ],
)
def test_is_dialogue_reaction(text, verbs, expected):
    args = (text,) if verbs is None else (text, verbs)
    assert is_dialogue_reaction(*args) is expected
