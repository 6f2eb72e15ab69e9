"""Agent identity plus the mutable state the engine advances each tick."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from genagents.memory import MemoryStream

if TYPE_CHECKING:
    from genagents.planning import DayPlan

SLEEPING = "sleeping"


@dataclass(frozen=True)
class AgentProfile:
    name: str
    traits: str
    start_area: str
    possessive: str = "their"
    wake: int = 7 * 60  # minute of day
    sleep: int = 22 * 60
    yesterday: str = ""  # stands in for the previous-day summary on day 1


@dataclass
class Agent:
    profile: AgentProfile
    stream: MemoryStream
    location: str
    action: str = SLEEPING
    emoji: str = ""
    plan: DayPlan | None = None
    destination: str | None = None
    path: list[str] = field(default_factory=list)
    visited: set[str] = field(default_factory=set)
    seen: list[str] = field(default_factory=list)  # observation texts from the previous tick
    last_talk: dict[str, int] = field(default_factory=dict)
    using: str | None = None  # qualified name of the object this agent occupies

    @property
    def name(self) -> str:
        return self.profile.name

    def is_awake(self, now: int) -> bool:
        minute = now % 1440
        return self.profile.wake <= minute < self.profile.sleep
