"""Deterministic tick loop: perceive, remember, react, follow the plan, move, reflect.

Every effect is recorded as a :class:`SimEvent`. Agents act in scenario order
and all backend calls happen sequentially, so a scripted backend yields a
byte-identical event log for a given scenario and seed, including across a
snapshot/resume boundary.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from genagents.agent import SLEEPING, Agent
from genagents.config import ScenarioConfig, parse_scenario
from genagents.dialogue import (
    END_MARKER,
    DialogueState,
    finalize,
    is_dialogue_reaction,
    maybe_compact,
    next_utterance,
    open_dialogue,
)
from genagents.errors import GenAgentError
from genagents.llm import LLMBackend
from genagents.memory import MemoryKind, MemoryStream
from genagents.planning import (
    DayPlan,
    PlanNode,
    check_tiling,
    current_action,
    decompose_all,
    plan_day,
    replan,
)
from genagents.reflection import reflect, should_reflect
from genagents.simtime import day_of, day_start, stamp
from genagents.summaries import (
    AgentSummaryDescription,
    agent_summary_description,
    decide_reaction,
    emojify,
    observed_entity_summary,
    previous_day_summary,
)
from genagents.world import NodeKind, choose_destination, find_path, update_object_state

log = logging.getLogger(__name__)

EVENTS_FILE = "events.jsonl"
SNAPSHOT_DIR = "snapshot"
STATE_FILE = "state.json"
IDLE = "idle"


class EventKind(str, enum.Enum):
    OBSERVATION = "observation"
    ACTION_CHANGE = "action_change"
    MOVEMENT = "movement"
    REFLECTION = "reflection"
    PLAN = "plan"
    DIALOGUE_TURN = "dialogue_turn"
    DIALOGUE_SUMMARY = "dialogue_summary"
    STATUS_EMOJI = "status_emoji"
    WORLD_CHANGE = "world_change"
    HEARTBEAT = "heartbeat"
    ERROR = "error"


# Kinds that trace the agent architecture itself; heartbeat and error are engine bookkeeping.
ARCHITECTURE_KINDS = tuple(EventKind)[:9]


@dataclass(frozen=True)
class SimEvent:
    tick: int  # -1 for initialization
    time: int
    agent: str
    kind: EventKind
    payload: str
    data: dict[str, Any] | None = None

    def to_json(self) -> str:
        raw: dict[str, Any] = {
            "tick": self.tick,
            "time": self.time,
            "stamp": stamp(self.time),
            "agent": self.agent,
            "kind": self.kind.value,
            "payload": self.payload,
        }
        if self.data:
            raw["data"] = self.data
        return json.dumps(raw, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> SimEvent:
        raw = json.loads(line)
        return cls(raw["tick"], raw["time"], raw["agent"], EventKind(raw["kind"]), raw["payload"], raw.get("data"))


@dataclass(frozen=True)
class Observation:
    entity: str
    status: str
    is_agent: bool

    @property
    def text(self) -> str:
        return f"{self.entity} is {self.status}"


class Simulation:
    def __init__(self, config: ScenarioConfig, backend: LLMBackend | None = None):
        self.config = config
        self.backend = backend or config.build_backend()
        self.world = config.build_world()
        self.agents: list[Agent] = []
        for profile in config.agents:
            agent = Agent(profile, MemoryStream(profile.name, self.backend), profile.start_area)
            agent.visited.update(self.world.lineage(profile.start_area))
            self.agents.append(agent)
        self.by_name = {a.name: a for a in self.agents}
        self.tick_index = 0
        self.dialogues: list[DialogueState] = []
        self.events: list[SimEvent] = []
        self._summaries: dict[str, AgentSummaryDescription] = {}
        self._current_tick = -1

    @classmethod
    def start(cls, config: ScenarioConfig, backend: LLMBackend | None = None) -> Simulation:
        """Build a simulation and emit its initialization events (day-1 plans)."""
        sim = cls(config, backend)
        sim._summaries = {}
        for agent in sim.agents:
            sim._guard(agent, "plan", sim._ensure_plan, agent, 0)
        return sim

    @property
    def now(self) -> int:
        return self.tick_index * self.config.tick_minutes

    @property
    def weights(self):
        return self.config.retrieval

    def _visibility(self, agent: Agent) -> set[str] | None:
        return None if self.config.full_visibility else agent.visited

    def _emit(self, agent: Agent, kind: EventKind, payload: str, data: dict[str, Any] | None = None) -> None:
        time = self.now if self._current_tick >= 0 else 0
        self.events.append(SimEvent(self._current_tick, time, agent.name, kind, payload, data))

    def _guard(self, agent: Agent, step: str, fn: Callable, *args) -> Any:
        try:
            return fn(*args)
        except (GenAgentError, ValueError) as exc:
            log.warning("%s %s failed: %s", agent.name, step, exc)
            self._emit(agent, EventKind.ERROR, f"{step}: {type(exc).__name__}: {exc}")
            return None

    def summary(self, agent: Agent, now: int) -> AgentSummaryDescription:
        """Agent summary description, computed at most once per tick."""
        cached = self._summaries.get(agent.name)
        if cached is None:
            cached = agent_summary_description(agent, now, self.backend, self.weights)
            self._summaries[agent.name] = cached
        return cached

    # -- perception ---------------------------------------------------------

    def perceive(self, agent: Agent) -> list[Observation]:
        """Co-located agents (scenario order) then objects in the area (scenario order)."""
        seen = [
            Observation(other.name, other.action, True)
            for other in self.agents
            if other is not agent and other.location == agent.location
        ]
        for key in self.world.objects_in(agent.location):
            node = self.world.nodes[key]
            seen.append(Observation(node.name, node.status, False))
        return seen

    # -- the tick -----------------------------------------------------------

    def tick(self) -> list[SimEvent]:
        now = self.now
        self._current_tick = self.tick_index
        self._summaries = {}
        first = len(self.events)
        for agent in self.agents:
            before = len(self.events)
            self._guard(agent, "turn", self._agent_turn, agent, now)
            if len(self.events) == before:
                self._emit(agent, EventKind.HEARTBEAT, agent.action, {"location": agent.location})
        self.tick_index += 1
        return self.events[first:]

    def _agent_turn(self, agent: Agent, now: int) -> None:
        if agent.plan is None or agent.plan.date != day_of(now):
            self._guard(agent, "plan", self._ensure_plan, agent, now)
        if not agent.is_awake(now):
            if agent.action != SLEEPING:
                self._guard(agent, "act", self._set_action, agent, SLEEPING, now)
            agent.seen = []
            return
        observations = self.perceive(agent)
        for obs in observations:
            agent.stream.append(MemoryKind.OBSERVATION, obs.text, now)
            self._emit(agent, EventKind.OBSERVATION, obs.text)
        previous = set(agent.seen)
        agent.seen = [o.text for o in observations]
        novel = [o for o in observations if o.text not in previous]
        self._guard(agent, "react", self._react, agent, novel, now)
        self._guard(agent, "act", self._follow_plan, agent, now)
        self._guard(agent, "move", self._move, agent)
        self._guard(agent, "reflect", self._maybe_reflect, agent, now)

    # -- planning -----------------------------------------------------------

    def _ensure_plan(self, agent: Agent, now: int) -> None:
        date = day_of(now)
        profile = agent.profile
        try:
            summary = self.summary(agent, now)
            yesterday = previous_day_summary(agent, date, now, self.backend, self.weights)
            plan = plan_day(
                agent.name, summary.combined, yesterday, date, profile.wake, profile.sleep,
                self.backend, agent.stream, now,
            )
        except GenAgentError as exc:
            self._emit(agent, EventKind.ERROR, f"plan: {type(exc).__name__}: {exc}")
            start = day_start(date)
            plan = DayPlan(
                agent.name, date,
                [PlanNode("go about the usual routine", start + profile.wake, profile.sleep - profile.wake)],
            )
        for failure in decompose_all(plan.roots, self.backend, agent.name, self.config.granularities):
            self._emit(agent, EventKind.ERROR, f"decompose: {failure}")
        check_tiling(plan, day_start(date) + profile.wake, day_start(date) + profile.sleep)
        agent.plan = plan
        self._emit(agent, EventKind.PLAN, plan.render(), {"date": date, "depth": plan.depth()})

    def _replan(self, agent: Agent, reaction: str, entity_summary: str, summary: AgentSummaryDescription, now: int) -> None:
        agent.plan = replan(
            agent.plan, now, reaction, entity_summary, summary.combined, self.backend,
            self.config.granularities, agent.stream,
        )
        self._emit(agent, EventKind.PLAN, agent.plan.render(), {"date": agent.plan.date, "revised_from": now, "reaction": reaction})

    # -- reacting -----------------------------------------------------------

    def _react(self, agent: Agent, novel: list[Observation], now: int) -> None:
        """Consider novel observations in order; at most one reaction per tick."""
        for obs in novel:
            summary = self.summary(agent, now)
            entity_summary = observed_entity_summary(agent, obs.entity, obs.status, now, self.backend, self.weights)
            decision = decide_reaction(summary, entity_summary, obs.text, self.backend)
            if not decision.react:
                continue
            if obs.is_agent and is_dialogue_reaction(decision.reaction_text, self.config.dialogue.verbs):
                partner = self.by_name[obs.entity]
                if self._can_talk(agent, partner, now):
                    self._converse(agent, partner, decision.reaction_text, summary, entity_summary, now)
                    return
                continue
            self._replan(agent, decision.reaction_text, entity_summary, summary, now)
            return

    def _can_talk(self, agent: Agent, partner: Agent, now: int) -> bool:
        if not partner.is_awake(now) or partner.location != agent.location:
            return False
        cooldown = self.config.dialogue.cooldown_minutes
        last = max(agent.last_talk.get(partner.name, -10**9), partner.last_talk.get(agent.name, -10**9))
        return now - last >= cooldown

    def _converse(
        self,
        agent: Agent,
        partner: Agent,
        reaction: str,
        summary: AgentSummaryDescription,
        entity_summary: str,
        now: int,
    ) -> None:
        cfg = self.config.dialogue
        did = len(self.dialogues)
        agent.last_talk[partner.name] = now
        partner.last_talk[agent.name] = now
        state = open_dialogue(
            agent.name, partner.name, reaction, summary.combined, entity_summary, self.backend, now, did
        )
        self.dialogues.append(state)
        self._emit_turn(agent, state)
        try:
            maybe_compact(state, self.backend, cfg.budget_chars)
            while state.open:
                speaker = state.other(state.turns[-1][0])
                speaker_summary = self.summary(self.by_name[speaker], now).combined
                said = next_utterance(state, speaker, speaker_summary, self.backend, cfg.max_turns, now)
                if said == END_MARKER:
                    break
                self._emit_turn(agent, state)
                maybe_compact(state, self.backend, cfg.budget_chars)
        except GenAgentError:
            state.close(now)
            raise
        text = finalize(state, {agent.name: agent.stream, partner.name: partner.stream}, self.backend)
        self._emit(
            agent,
            EventKind.DIALOGUE_SUMMARY,
            text,
            {
                "dialogue": did,
                "participants": list(state.participants),
                "turns": len(state.turns),
                "transcript_chars": sum(len(t) for _, t in state.turns),
                "rolling_summary": state.rolling_summary,
            },
        )

    def _emit_turn(self, agent: Agent, state: DialogueState) -> None:
        speaker, text = state.turns[-1]
        self._emit(
            agent,
            EventKind.DIALOGUE_TURN,
            f"{speaker}: {text}",
            {"dialogue": state.id, "turn": len(state.turns), "speaker": speaker},
        )

    # -- acting and moving --------------------------------------------------

    def _follow_plan(self, agent: Agent, now: int) -> None:
        action = current_action(agent.plan, now)
        if action != agent.action:
            self._set_action(agent, action, now)

    def _set_action(self, agent: Agent, action: str, now: int) -> None:
        previous = agent.action
        agent.action = action
        self._emit(agent, EventKind.ACTION_CHANGE, action, {"previous": previous})
        agent.emoji = emojify(action, self.backend)
        self._emit(agent, EventKind.STATUS_EMOJI, agent.emoji, {"action": action})
        self._release_object(agent, now)
        if action == SLEEPING:
            agent.destination, agent.path = agent.location, []
            return
        destination = choose_destination(
            agent.name, agent.location, action, self.world, self.backend, self._visibility(agent)
        )
        agent.destination = destination
        agent.path = find_path(self.world, agent.location, destination)[1:]
        if not agent.path:
            self._claim_object(agent, now)

    def _move(self, agent: Agent) -> None:
        if not agent.path:
            return
        origin = agent.location
        agent.location = agent.path.pop(0)
        agent.visited.update(self.world.lineage(agent.location))
        self._emit(
            agent,
            EventKind.MOVEMENT,
            f"{origin} -> {agent.location}",
            {"from": origin, "to": agent.location, "destination": agent.destination},
        )
        if not agent.path:
            self._claim_object(agent, self.now)

    def _claim_object(self, agent: Agent, now: int) -> None:
        """Occupy the first object in the area that the current action names."""
        action = agent.action.lower()
        for key in self.world.objects_in(agent.location):
            node = self.world.nodes[key]
            if node.name.lower() in action:
                status = f"being used by {agent.name}"
                update_object_state(self.world, key, status, now)
                agent.using = key
                self._emit(agent, EventKind.WORLD_CHANGE, f"{node.name} is {status}", {"object": key, "status": status})
                return

    def _release_object(self, agent: Agent, now: int) -> None:
        if agent.using is None:
            return
        key, agent.using = agent.using, None
        update_object_state(self.world, key, IDLE, now)
        self._emit(agent, EventKind.WORLD_CHANGE, f"{self.world.nodes[key].name} is {IDLE}", {"object": key, "status": IDLE})

    # -- reflecting ---------------------------------------------------------

    def _maybe_reflect(self, agent: Agent, now: int) -> None:
        if not should_reflect(agent.stream, self.config.reflection_threshold):
            return
        for insight in reflect(agent.stream, self.weights, now, self.backend, self.config.insight_k):
            self._emit(
                agent,
                EventKind.REFLECTION,
                insight.text,
                {"record": insight.record_id, "citations": list(insight.evidence), "shown": list(insight.shown)},
            )

    # -- persistence --------------------------------------------------------

    def snapshot(self, directory: str | Path) -> None:
        """Write config, agent state, world state, dialogues and memory streams."""
        directory = Path(directory)
        (directory / "memory").mkdir(parents=True, exist_ok=True)
        agents = []
        for i, agent in enumerate(self.agents):
            memory_file = f"memory/agent_{i}.jsonl"
            agent.stream.persist(directory / memory_file)
            agents.append(
                {
                    "name": agent.name,
                    "memory": memory_file,
                    "location": agent.location,
                    "action": agent.action,
                    "emoji": agent.emoji,
                    "plan": agent.plan.to_dict() if agent.plan else None,
                    "destination": agent.destination,
                    "path": agent.path,
                    "visited": sorted(agent.visited),
                    "seen": agent.seen,
                    "last_talk": agent.last_talk,
                    "using": agent.using,
                }
            )
        state = {
            "tick_index": self.tick_index,
            "time": self.now,
            "config": _plain(self.config.raw),
            "agents": agents,
            "objects": self.world.statuses(),
            "dialogues": [d.to_dict() for d in self.dialogues],
        }
        (directory / STATE_FILE).write_text(json.dumps(state, ensure_ascii=False, indent=1), encoding="utf-8")

    @classmethod
    def restore(cls, directory: str | Path, backend: LLMBackend | None = None) -> Simulation:
        directory = Path(directory)
        state = json.loads((directory / STATE_FILE).read_text(encoding="utf-8"))
        sim = cls(parse_scenario(state["config"]), backend)
        sim.tick_index = state["tick_index"]
        for agent, raw in zip(sim.agents, state["agents"]):
            agent.stream = MemoryStream.load(directory / raw["memory"], agent.name, sim.backend)
            agent.location = raw["location"]
            agent.action = raw["action"]
            agent.emoji = raw["emoji"]
            agent.plan = DayPlan.from_dict(raw["plan"]) if raw["plan"] else None
            agent.destination = raw["destination"]
            agent.path = list(raw["path"])
            agent.visited = set(raw["visited"])
            agent.seen = list(raw["seen"])
            agent.last_talk = {k: int(v) for k, v in raw["last_talk"].items()}
            agent.using = raw["using"]
        for key, status in state["objects"].items():
            node = sim.world.node(key)
            if node.kind is NodeKind.OBJECT:
                node.status = status
        for raw in state["dialogues"]:
            dialogue = DialogueState(
                tuple(raw["participants"]),
                [tuple(t) for t in raw["turns"]],
                raw["rolling_summary"],
                open=False,
                compacted=raw["compacted"],
                opened_at=raw["opened_at"],
                closed_at=raw["closed_at"],
                summary=raw["summary"],
                finalized=bool(raw["summary"]),
                id=raw["id"],
            )
            sim.dialogues.append(dialogue)
        return sim


def _plain(value: Any) -> Any:
    if isinstance(value, dict) or hasattr(value, "items"):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _append_events(path: Path, events: list[SimEvent]) -> None:
    with path.open("a", encoding="utf-8") as fh:
        for event in events:
            fh.write(event.to_json())
            fh.write("\n")


def run(config: ScenarioConfig, n_ticks: int, out_dir: str | Path, backend: LLMBackend | None = None) -> Simulation:
    """Fresh run: writes ``events.jsonl`` and a final ``snapshot/`` under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / EVENTS_FILE
    log_path.write_text("", encoding="utf-8")
    sim = Simulation.start(config, backend)
    _append_events(log_path, sim.events)
    for _ in range(n_ticks):
        _append_events(log_path, sim.tick())
    sim.snapshot(out / SNAPSHOT_DIR)
    return sim


def resume(snapshot_dir: str | Path, n_ticks: int, out_dir: str | Path, backend: LLMBackend | None = None) -> Simulation:
    """Continue from a snapshot, appending to ``out_dir/events.jsonl``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / EVENTS_FILE
    sim = Simulation.restore(snapshot_dir, backend)
    for _ in range(n_ticks):
        _append_events(log_path, sim.tick())
    sim.snapshot(out / SNAPSHOT_DIR)
    return sim


def read_events(path: str | Path) -> list[SimEvent]:
    with Path(path).open(encoding="utf-8") as fh:
        return [SimEvent.from_json(line) for line in fh if line.strip()]
