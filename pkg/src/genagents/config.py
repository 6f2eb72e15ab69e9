"""Scenario files: YAML describing agents, world, tuning knobs and the backend."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from genagents.agent import AgentProfile
from genagents.dialogue import DEFAULT_BUDGET_CHARS, DEFAULT_MAX_TURNS, DIALOGUE_VERBS
from genagents.errors import ConfigInvalid
from genagents.llm import EMBEDDING_DIM, HTTPBackend, LLMBackend, ScriptedBackend
from genagents.planning import DEFAULT_GRANULARITIES
from genagents.reflection import DEFAULT_INSIGHT_K, DEFAULT_THRESHOLD
from genagents.retrieval import RetrievalWeights
from genagents.simtime import parse_clock
from genagents.world import WorldTree

_TOP_LEVEL = {
    "name", "seed", "tick_minutes", "agents", "world", "retrieval", "reflection",
    "planning", "dialogue", "backend",
}


@dataclass(frozen=True)
class DialogueConfig:
    max_turns: int = DEFAULT_MAX_TURNS
    budget_chars: int = DEFAULT_BUDGET_CHARS
    verbs: tuple[str, ...] = DIALOGUE_VERBS
    cooldown_minutes: int = 180


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    seed: int
    tick_minutes: int
    agents: tuple[AgentProfile, ...]
    world: Mapping[str, Any]
    retrieval: RetrievalWeights
    reflection_threshold: float
    insight_k: int
    granularities: tuple[int, ...]
    dialogue: DialogueConfig
    backend: Mapping[str, Any]
    full_visibility: bool = False
    raw: Mapping[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def build_world(self) -> WorldTree:
        return WorldTree.from_spec(self.world["name"], self.world["nodes"], self.world["adjacency"])

    def build_backend(self) -> LLMBackend:
        spec = self.backend
        if spec["kind"] == "scripted":
            return ScriptedBackend.from_mapping(spec["script"], seed=self.seed, dim=spec.get("dim", EMBEDDING_DIM), path="backend.script")
        return HTTPBackend(
            base_url=spec["base_url"],
            model=spec["model"],
            embedding_model=spec["embedding_model"],
            api_key=spec.get("api_key"),
            api_key_env=spec.get("api_key_env", "OPENAI_API_KEY"),
            attempts=int(spec.get("attempts", 3)),
            backoff=float(spec.get("backoff", 0.5)),
        )

    def with_seed(self, seed: int) -> ScenarioConfig:
        raw = copy.deepcopy(dict(self.raw))
        raw["seed"] = seed
        return parse_scenario(raw)


def _section(raw: Mapping[str, Any], key: str) -> Mapping[str, Any]:
    value = raw.get(key, {}) or {}
    if not isinstance(value, Mapping):
        raise ConfigInvalid(key, "must be a mapping")
    return value


def _int(value: Any, path: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigInvalid(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigInvalid(path, f"must be at least {minimum}")
    return value


def _clock(value: Any, path: str) -> int:
    try:
        return parse_clock(str(value))
    except ValueError as exc:
        raise ConfigInvalid(path, str(exc)) from None


def _agents(raw: Any) -> tuple[AgentProfile, ...]:
    if not isinstance(raw, list) or not raw:
        raise ConfigInvalid("agents", "at least one agent is required")
    profiles = []
    for i, entry in enumerate(raw):
        path = f"agents[{i}]"
        if not isinstance(entry, Mapping):
            raise ConfigInvalid(path, "must be a mapping")
        for required in ("name", "start_area"):
            if not entry.get(required):
                raise ConfigInvalid(f"{path}.{required}", "is required")
        wake = _clock(entry.get("wake", "07:00"), f"{path}.wake")
        sleep = _clock(entry.get("sleep", "22:00"), f"{path}.sleep")
        if wake >= sleep:
            raise ConfigInvalid(f"{path}.sleep", "must be later than wake")
        profiles.append(
            AgentProfile(
                name=str(entry["name"]),
                traits=str(entry.get("traits", "")),
                start_area=str(entry["start_area"]),
                possessive=str(entry.get("possessive", "their")),
                wake=wake,
                sleep=sleep,
                yesterday=str(entry.get("yesterday") or "No record of the previous day."),
            )
        )
    names = [p.name for p in profiles]
    if len(set(names)) != len(names):
        raise ConfigInvalid("agents", "agent names must be unique")
    return tuple(profiles)


def _backend(raw: Mapping[str, Any], base_dir: Path | None) -> dict[str, Any]:
    spec = dict(raw)
    kind = spec.get("kind", "scripted")
    if kind == "scripted":
        if "script_path" in spec:
            path = Path(spec.pop("script_path"))
            if not path.is_absolute() and base_dir is not None:
                path = base_dir / path
            try:
                spec["script"] = yaml.safe_load(path.read_text(encoding="utf-8"))
            except OSError as exc:
                raise ConfigInvalid("backend.script_path", str(exc)) from None
        if not isinstance(spec.get("script"), Mapping):
            raise ConfigInvalid("backend.script", "a scripted backend needs a script table")
        _int(spec.get("dim", EMBEDDING_DIM), "backend.dim", 1)
    elif kind == "http":
        for required in ("base_url", "model", "embedding_model"):
            if not spec.get(required):
                raise ConfigInvalid(f"backend.{required}", "is required for the http backend")
    else:
        raise ConfigInvalid("backend.kind", f"unknown backend kind {kind!r}")
    spec["kind"] = kind
    return spec


def parse_scenario(raw: Mapping[str, Any], base_dir: Path | None = None) -> ScenarioConfig:
    if not isinstance(raw, Mapping):
        raise ConfigInvalid("<root>", "scenario must be a mapping")
    unknown = set(raw) - _TOP_LEVEL
    if unknown:
        raise ConfigInvalid(sorted(unknown)[0], "unknown field")
    seed = _int(raw.get("seed", 0), "seed")
    tick = _int(raw.get("tick_minutes", 15), "tick_minutes", 1)
    agents = _agents(raw.get("agents"))

    world = _section(raw, "world")
    if "name" not in world or "nodes" not in world:
        raise ConfigInvalid("world", "needs name and nodes")
    world = {
        "name": str(world["name"]),
        "nodes": list(world["nodes"]),
        "adjacency": [list(pair) for pair in world.get("adjacency", [])],
        "full_visibility": bool(world.get("full_visibility", False)),
    }
    tree = WorldTree.from_spec(world["name"], world["nodes"], world["adjacency"])
    for i, profile in enumerate(agents):
        if profile.start_area not in tree.adjacency:
            raise ConfigInvalid(f"agents[{i}].start_area", f"unknown area {profile.start_area!r}")

    r = _section(raw, "retrieval")
    try:
        weights = RetrievalWeights(
            alpha_recency=float(r.get("alpha_recency", 1.0)),
            alpha_importance=float(r.get("alpha_importance", 1.0)),
            alpha_relevance=float(r.get("alpha_relevance", 1.0)),
            decay=float(r.get("decay", 0.995)),
            k=_int(r.get("k", 5), "retrieval.k", 1),
        )
    except ValueError as exc:
        raise ConfigInvalid("retrieval", str(exc)) from None

    refl = _section(raw, "reflection")
    threshold = float(refl.get("threshold", DEFAULT_THRESHOLD))
    if threshold <= 0:
        raise ConfigInvalid("reflection.threshold", "must be positive")
    insight_k = _int(refl.get("insight_k", DEFAULT_INSIGHT_K), "reflection.insight_k", 1)

    plan = _section(raw, "planning")
    granularities = tuple(plan.get("granularities", DEFAULT_GRANULARITIES))
    for j, g in enumerate(granularities):
        _int(g, f"planning.granularities[{j}]", 1)
    if list(granularities) != sorted(set(granularities), reverse=True):
        raise ConfigInvalid("planning.granularities", "must be strictly decreasing")
    if granularities and granularities[-1] % tick:
        raise ConfigInvalid("tick_minutes", f"must divide the finest plan granularity {granularities[-1]}")

    d = _section(raw, "dialogue")
    dialogue = DialogueConfig(
        max_turns=_int(d.get("max_turns", DEFAULT_MAX_TURNS), "dialogue.max_turns", 1),
        budget_chars=_int(d.get("budget_chars", DEFAULT_BUDGET_CHARS), "dialogue.budget_chars", 1),
        verbs=tuple(str(v).lower() for v in d.get("verbs", DIALOGUE_VERBS)),
        cooldown_minutes=_int(d.get("cooldown_minutes", 180), "dialogue.cooldown_minutes", 0),
    )

    backend = _backend(_section(raw, "backend"), base_dir)
    config = ScenarioConfig(
        name=str(raw.get("name", "scenario")),
        seed=seed,
        tick_minutes=tick,
        agents=agents,
        world=world,
        retrieval=weights,
        reflection_threshold=threshold,
        insight_k=insight_k,
        granularities=granularities,
        dialogue=dialogue,
        backend=backend,
        full_visibility=world["full_visibility"],
        raw={**raw, "backend": backend},
    )
    if backend["kind"] == "scripted":
        config.build_backend()  # validates the script table
    return config


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except yaml.YAMLError as exc:
        raise ConfigInvalid(str(path), f"invalid YAML: {exc}") from None
    return parse_scenario(raw, path.parent)
