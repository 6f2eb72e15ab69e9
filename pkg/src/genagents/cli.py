"""Command-line interface: run, inspect, replay, interview and reflect.

Exit codes: 0 success, 2 usage error, 3 config error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections import defaultdict
from pathlib import Path
from typing import Sequence, TextIO

from genagents.agent import Agent
from genagents.config import load_scenario
from genagents.dialogue import END_MARKER, DialogueState, maybe_compact, next_utterance
from genagents.engine import EVENTS_FILE, SNAPSHOT_DIR, EventKind, SimEvent, Simulation, read_events, run
from genagents.errors import ConfigInvalid, GenAgentError, UnknownAgent
from genagents.llm.prompts import numbered
from genagents.memory import MemoryKind
from genagents.reflection import reflect
from genagents.retrieval import retrieve
from genagents.simtime import MINUTES_PER_DAY, day_of, parse_clock, stamp
from genagents.summaries import agent_summary_description

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_RUNTIME = 4

INTERVIEWER = "Interviewer"
QUIT = "/quit"


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="genagents", description="Deterministic generative-agent simulations.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log warnings from the engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario and write events.jsonl plus a snapshot")
    p.add_argument("scenario", type=Path)
    p.add_argument("--ticks", type=int, default=None, help="ticks to run (default: two simulated days)")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--out", type=Path, default=Path("run"), help="output directory (default: ./run)")

    p = sub.add_parser("inspect", help="list an agent's memories or score them against a query")
    p.add_argument("snapshot", type=Path)
    p.add_argument("query", nargs="?", default=None, help="ad-hoc retrieval query")
    p.add_argument("--agent", required=True)
    p.add_argument("--kind", choices=[k.value for k in MemoryKind], default=None)
    p.add_argument("--top-k", type=int, default=None, dest="top_k")

    p = sub.add_parser("replay", help="pretty-print an event log")
    p.add_argument("log", type=Path, help="events.jsonl or a run directory")
    p.add_argument("--from", dest="start", default=None, help="tick index or 'day D HH:MM'")
    p.add_argument("--to", dest="stop", default=None, help="tick index or 'day D HH:MM' (inclusive)")
    p.add_argument("--kind", action="append", choices=[k.value for k in EventKind], default=None)

    p = sub.add_parser("interview", help="talk to an agent from a snapshot")
    p.add_argument("snapshot", type=Path)
    p.add_argument("--agent", required=True)
    p.add_argument("--persist", action="store_true", help="write the interview back to the agent's memory")

    p = sub.add_parser("reflect", help="run the reflection pipeline for one agent")
    p.add_argument("snapshot", type=Path)
    p.add_argument("--agent", required=True)
    p.add_argument("--persist", action="store_true", help="store the new reflections in the snapshot")
    return parser


def _snapshot_dir(path: Path) -> Path:
    if (path / SNAPSHOT_DIR).is_dir():
        path = path / SNAPSHOT_DIR
    if not path.is_dir():
        raise FileNotFoundError(f"no snapshot directory at {path}")
    return path


def _find_agent(sim: Simulation, name: str) -> Agent:
    try:
        return sim.by_name[name]
    except KeyError:
        raise UnknownAgent(f"{name!r}; known agents: {', '.join(sim.by_name)}") from None


# -- run ---------------------------------------------------------------------


def day_digest(events: Sequence[SimEvent], agents: Sequence[str]) -> list[str]:
    """Per-day counts of reflections, dialogues and action changes for each agent."""
    counts: dict[int, dict[str, dict[str, int]]] = defaultdict(lambda: defaultdict(lambda: defaultdict(int)))
    for event in events:
        day = day_of(event.time)
        if event.kind is EventKind.REFLECTION:
            counts[day][event.agent]["reflections"] += 1
        elif event.kind is EventKind.DIALOGUE_SUMMARY:
            for name in (event.data or {}).get("participants", [event.agent]):
                counts[day][name]["dialogues"] += 1
        elif event.kind is EventKind.ACTION_CHANGE:
            counts[day][event.agent]["actions"] += 1
    lines = []
    for day in sorted(counts):
        lines.append(f"day {day}")
        for name in agents:
            c = counts[day][name]
            lines.append(
                f"  {name}: {c['reflections']} reflections, {c['dialogues']} dialogues, {c['actions']} action changes"
            )
    return lines


def cmd_run(args: argparse.Namespace, out: TextIO) -> int:
    config = load_scenario(args.scenario)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    ticks = args.ticks if args.ticks is not None else 2 * MINUTES_PER_DAY // config.tick_minutes
    if ticks < 0:
        raise UsageError("--ticks must be non-negative")
    sim = run(config, ticks, args.out)
    print(f"{config.name}: {ticks} ticks, {len(sim.events)} events -> {args.out / EVENTS_FILE}", file=out)
    for line in day_digest(sim.events, [a.name for a in sim.agents]):
        print(line, file=out)
    return EXIT_OK


# -- inspect -----------------------------------------------------------------


def cmd_inspect(args: argparse.Namespace, out: TextIO) -> int:
    if args.top_k is not None and args.top_k < 1:
        raise UsageError("--top-k must be at least 1")
    sim = Simulation.restore(_snapshot_dir(args.snapshot))
    agent = _find_agent(sim, args.agent)
    where = None if args.kind is None else (lambda r: r.kind.value == args.kind)
    if args.query is None:
        records = [r for r in agent.stream if where is None or where(r)]
        if args.top_k is not None:
            records = records[-args.top_k:]
        print(f"{'id':>5}  {'kind':<11} {'created':<12} {'imp':>3}  text", file=out)
        for r in records:
            print(f"{r.id:>5}  {r.kind.value:<11} {stamp(r.created_at):<12} {r.importance:>3}  {r.text}", file=out)
        return EXIT_OK
    # Nothing is written back, so scoring leaves the snapshot untouched.
    scored = retrieve(
        agent.stream, args.query, sim.weights, sim.now, sim.backend, k=args.top_k, where=where, mark_accessed=False
    )
    print(f"{'id':>5}  {'kind':<11} {'recency':>8} {'importance':>10} {'relevance':>9} {'total':>7}  text", file=out)
    for item in scored:
        r, b = item.record, item.breakdown
        print(
            f"{r.id:>5}  {r.kind.value:<11} {b.recency:>8.4f} {b.importance:>10.4f} {b.relevance:>9.4f} {b.total:>7.4f}  {r.text}",
            file=out,
        )
    return EXIT_OK


# -- replay ------------------------------------------------------------------


def _bound(text: str | None) -> tuple[str, int] | None:
    """A --from/--to value: a tick index or a 'day D HH:MM' stamp."""
    if text is None:
        return None
    text = text.strip()
    if text.lstrip("-").isdigit():
        return "tick", int(text)
    parts = text.split()
    if len(parts) == 3 and parts[0] == "day" and parts[1].isdigit():
        try:
            return "time", (int(parts[1]) - 1) * MINUTES_PER_DAY + parse_clock(parts[2])
        except ValueError:
            pass
    raise UsageError(f"bad bound {text!r}: use a tick index or 'day D HH:MM'")


def _within(event: SimEvent, start, stop) -> bool:
    for bound, is_lower in ((start, True), (stop, False)):
        if bound is None:
            continue
        kind, value = bound
        here = event.tick if kind == "tick" else event.time
        if (here < value) if is_lower else (here > value):
            return False
    return True


def format_events(events: Sequence[SimEvent]) -> list[str]:
    """Readable lines; dialogue turns are grouped under their conversation."""
    lines = []
    open_dialogue = None
    for event in events:
        data = event.data or {}
        when = "init" if event.tick < 0 else stamp(event.time)
        prefix = f"[{when:>12}] {event.agent}"
        if event.kind is EventKind.DIALOGUE_TURN:
            if data.get("dialogue") != open_dialogue:
                open_dialogue = data.get("dialogue")
                lines.append(f"{prefix} starts conversation #{open_dialogue}")
            lines.append(f"    {event.payload}")
            continue
        if event.kind is EventKind.DIALOGUE_SUMMARY:
            if data.get("dialogue") != open_dialogue:
                lines.append(f"{prefix} conversation #{data.get('dialogue')}")
            open_dialogue = None
            lines.append(f"    summary: {event.payload}")
            if data.get("rolling_summary"):
                lines.append(f"    (compacted context: {data['rolling_summary']})")
            continue
        open_dialogue = None
        if event.kind is EventKind.ACTION_CHANGE:
            continue  # shown with its emoji on the status line that follows
        if event.kind is EventKind.STATUS_EMOJI:
            lines.append(f"{prefix} {event.payload} {data.get('action', '')}")
        elif event.kind is EventKind.PLAN:
            lines.append(f"{prefix} plan:")
            lines.extend(f"    {line}" for line in event.payload.splitlines())
        else:
            lines.append(f"{prefix} {event.kind.value}: {event.payload}")
    return lines


def cmd_replay(args: argparse.Namespace, out: TextIO) -> int:
    path = args.log / EVENTS_FILE if args.log.is_dir() else args.log
    start, stop = _bound(args.start), _bound(args.stop)
    events = [e for e in read_events(path) if _within(e, start, stop)]
    if args.kind:
        wanted = set(args.kind)
        if EventKind.STATUS_EMOJI.value in wanted:
            wanted.add(EventKind.ACTION_CHANGE.value)
        events = [e for e in events if e.kind.value in wanted]
    for line in format_events(events):
        print(line, file=out)
    return EXIT_OK


# -- interview ---------------------------------------------------------------


def interview_reply(sim: Simulation, agent: Agent, state: DialogueState, question: str) -> str:
    """The agent's answer to one interviewer line, or END_MARKER."""
    now = sim.now
    state.turns.append((INTERVIEWER, question))
    memories = retrieve(agent.stream, question, sim.weights, now, sim.backend)
    context = "Relevant memories:\n" + numbered([m.record.text for m in memories]) if memories else ""
    summary = agent_summary_description(agent, now, sim.backend, sim.weights)
    reply = next_utterance(state, agent.name, summary.combined, sim.backend, sim.config.dialogue.max_turns, now, context)
    maybe_compact(state, sim.backend, sim.config.dialogue.budget_chars)
    return reply


def cmd_interview(args: argparse.Namespace, out: TextIO, inp: TextIO) -> int:
    directory = _snapshot_dir(args.snapshot)
    sim = Simulation.restore(directory)
    agent = _find_agent(sim, args.agent)
    state = DialogueState((INTERVIEWER, agent.name), opened_at=sim.now)
    print(f"Interviewing {agent.name} at {stamp(sim.now)}. Type {QUIT} to leave.", file=out)
    for line in inp:
        question = line.strip()
        if question == QUIT:
            break
        if not question:
            continue
        reply = interview_reply(sim, agent, state, question)
        if reply == END_MARKER:
            print(f"({agent.name} ends the conversation)", file=out)
            break
        print(f"{agent.name}: {reply}", file=out)
    if args.persist and state.turns:
        for speaker, text in state.turns:
            agent.stream.append(MemoryKind.OBSERVATION, f'{speaker} said to {state.other(speaker)}: "{text}"', sim.now)
        sim.snapshot(directory)
        print(f"saved {len(state.turns)} turns to {agent.name}'s memory", file=out)
    return EXIT_OK


# -- reflect -----------------------------------------------------------------


def cmd_reflect(args: argparse.Namespace, out: TextIO) -> int:
    directory = _snapshot_dir(args.snapshot)
    sim = Simulation.restore(directory)
    agent = _find_agent(sim, args.agent)
    insights = reflect(agent.stream, sim.weights, sim.now, sim.backend, sim.config.insight_k)
    for insight in insights:
        print(f"{insight.text} (because of {', '.join(map(str, insight.evidence))})", file=out)
    if not insights:
        print(f"{agent.name} has nothing to reflect on", file=out)
    if args.persist:
        sim.snapshot(directory)
    return EXIT_OK


def main(argv: Sequence[str] | None = None, out: TextIO | None = None, inp: TextIO | None = None) -> int:
    out = out or sys.stdout
    inp = inp or sys.stdin
    parser = _parser()
    try:
        args, extra = parser.parse_known_args(argv)
        # argparse binds an optional positional before later options are seen,
        # so `inspect SNAP --top-k 3 "query"` leaves the query over.
        if args.command == "inspect" and args.query is None and len(extra) == 1 and not extra[0].startswith("-"):
            args.query, extra = extra[0], []
        if extra:
            parser.error(f"unrecognized arguments: {' '.join(extra)}")
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    handlers = {
        "run": lambda: cmd_run(args, out),
        "inspect": lambda: cmd_inspect(args, out),
        "replay": lambda: cmd_replay(args, out),
        "interview": lambda: cmd_interview(args, out, inp),
        "reflect": lambda: cmd_reflect(args, out),
    }
    try:
        return handlers[args.command]()
    except (UsageError, FileNotFoundError, UnknownAgent) as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GenAgentError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
