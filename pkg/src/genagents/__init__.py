"""Deterministic generative-agent simulation engine."""

from pathlib import Path

from genagents.config import ScenarioConfig, load_scenario, parse_scenario
from genagents.engine import EventKind, SimEvent, Simulation, read_events, resume, run
from genagents.memory import MemoryKind, MemoryRecord, MemoryStream
from genagents.retrieval import RetrievalWeights, ScoreBreakdown, retrieve

REFERENCE_SCENARIO = Path(__file__).parent / "scenarios" / "reference.yaml"

__all__ = [
    "EventKind",
    "MemoryKind",
    "MemoryRecord",
    "MemoryStream",
    "REFERENCE_SCENARIO",
    "RetrievalWeights",
    "ScenarioConfig",
    "ScoreBreakdown",
    "SimEvent",
    "Simulation",
    "load_scenario",
    "parse_scenario",
    "read_events",
    "resume",
    "retrieve",
    "run",
]
