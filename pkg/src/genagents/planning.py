"""Coarse-to-fine day planning.

Plans are written in a fixed line grammar, ``HH:MM (Nm): activity``. A day
plan's entries must tile the waking window exactly and every decomposition
must tile its parent.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Any, Iterator, Sequence

from genagents.errors import MalformedCompletion, NonTilingPlan, OutsidePlanWindow
from genagents.llm import LLMBackend, TemplateId, complete_parsed, render
from genagents.memory import MemoryKind, MemoryStream
from genagents.simtime import clock, day_of, day_start

log = logging.getLogger(__name__)

DEFAULT_GRANULARITIES = (60, 15)
REACTION_MINUTES = 30

_PLAN_LINE = re.compile(
    r"^\s*(?:[-*•]\s*|\d+[.)]\s+)?(\d{1,2}):(\d{2})\s*\(\s*(\d+)\s*m(?:in(?:ute)?s?)?\s*\)\s*:?\s*(.+?)\s*$"
)


@dataclass
class PlanNode:
    description: str
    start: int
    duration: int
    children: list[PlanNode] = field(default_factory=list)

    @property
    def end(self) -> int:
        return self.start + self.duration

    def covers(self, minute: int) -> bool:
        return self.start <= minute < self.end

    def line(self) -> str:
        return f"{clock(self.start)} ({self.duration}m): {self.description}"

    def walk(self, depth: int = 0) -> Iterator[tuple[int, PlanNode]]:
        yield depth, self
        for child in self.children:
            yield from child.walk(depth + 1)

    def to_dict(self) -> dict[str, Any]:
        return {
            "description": self.description,
            "start": self.start,
            "duration": self.duration,
            "children": [c.to_dict() for c in self.children],
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> PlanNode:
        return cls(
            raw["description"],
            int(raw["start"]),
            int(raw["duration"]),
            [cls.from_dict(c) for c in raw.get("children", [])],
        )


@dataclass
class DayPlan:
    agent: str
    date: int
    roots: list[PlanNode]

    @property
    def start(self) -> int:
        return self.roots[0].start

    @property
    def end(self) -> int:
        return self.roots[-1].end

    def walk(self) -> Iterator[tuple[int, PlanNode]]:
        for root in self.roots:
            yield from root.walk()

    def depth(self) -> int:
        return max(d for d, _ in self.walk())

    def render(self) -> str:
        return "\n".join(root.line() for root in self.roots)

    def to_dict(self) -> dict[str, Any]:
        return {"agent": self.agent, "date": self.date, "roots": [r.to_dict() for r in self.roots]}

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> DayPlan:
        return cls(raw["agent"], int(raw["date"]), [PlanNode.from_dict(r) for r in raw["roots"]])


def parse_plan(text: str, day: int) -> list[PlanNode]:
    """Parse plan lines into nodes timed on ``day``; other lines are ignored."""
    nodes = []
    for line in text.splitlines():
        match = _PLAN_LINE.match(line)
        if not match:
            continue
        hours, minutes, duration, description = match.groups()
        if int(minutes) >= 60 or int(hours) > 23:
            raise MalformedCompletion(f"bad time in plan line {line!r}")
        start = day_start(day) + int(hours) * 60 + int(minutes)
        nodes.append(PlanNode(description.rstrip("."), start, int(duration)))
    if not nodes:
        raise MalformedCompletion("no 'HH:MM (Nm): activity' lines in completion")
    return nodes


def tiling_problem(nodes: Sequence[PlanNode], start: int, end: int) -> str | None:
    """Describe why ``nodes`` fail to tile [start, end), or None if they do."""
    if not nodes:
        return "plan is empty"
    cursor = start
    for node in nodes:
        if node.duration <= 0:
            return f"{node.line()} has a non-positive duration"
        if node.start > cursor:
            return f"gap from {clock(cursor)} to {clock(node.start)}"
        if node.start < cursor:
            return f"{node.line()} overlaps the previous entry"
        cursor = node.end
    if cursor != end:
        return f"entries end at {clock(cursor)} instead of {clock(end)}"
    return None


def check_tiling(plan: DayPlan, wake: int | None = None, sleep: int | None = None) -> None:
    """Raise NonTilingPlan unless roots tile the window and every level tiles its parent."""
    wake = plan.start if wake is None else wake
    sleep = plan.end if sleep is None else sleep
    problem = tiling_problem(plan.roots, wake, sleep)
    if problem:
        raise NonTilingPlan(problem)
    for _, node in plan.walk():
        if node.children:
            problem = tiling_problem(node.children, node.start, node.end)
            if problem:
                raise NonTilingPlan(f"children of {node.line()}: {problem}")


def _plan_request(name: str, summary_text: str, context: str, start: int, end: int, count_hint: str, **extra):
    return render(
        TemplateId.DAY_PLAN,
        agent_summary=summary_text,
        context=context,
        day=day_of(start),
        name=name,
        start=clock(start),
        end=clock(end),
        count_hint=count_hint,
        window_minutes=end - start,
        **extra,
    )


def _request_tiling(backend: LLMBackend, request, name: str, summary_text: str, context: str,
                    start: int, end: int, count_hint: str, **extra) -> list[PlanNode]:
    day = day_of(start)
    nodes = complete_parsed(backend, request, lambda text: parse_plan(text, day))
    problem = tiling_problem(nodes, start, end)
    if problem is None:
        return nodes
    draft = "\n".join(n.line() for n in nodes)
    repair_context = (
        f"{context}\n\nA previous draft was rejected ({problem}):\n{draft}\n"
        "Rewrite the plan so that it covers the window exactly."
    )
    repair = _plan_request(name, summary_text, repair_context, start, end, count_hint, **extra)
    nodes = complete_parsed(backend, repair, lambda text: parse_plan(text, day))
    problem = tiling_problem(nodes, start, end)
    if problem:
        raise NonTilingPlan(problem)
    return nodes


def store_plan(stream: MemoryStream, plan: DayPlan, now: int, heading: str) -> None:
    lines = "; ".join(root.line() for root in plan.roots)
    stream.append(MemoryKind.PLAN, f"{heading}: {lines}", now)


def plan_day(
    name: str,
    summary_text: str,
    prev_day_summary: str,
    date: int,
    wake: int,
    sleep: int,
    backend: LLMBackend,
    stream: MemoryStream | None = None,
    now: int | None = None,
) -> DayPlan:
    """Broad-stroke plan for ``date`` covering the minutes-of-day [wake, sleep)."""
    start, end = day_start(date) + wake, day_start(date) + sleep
    context = f"Summary of the previous day: {prev_day_summary}"
    request = _plan_request(name, summary_text, context, start, end, "5 to 8")
    roots = _request_tiling(backend, request, name, summary_text, context, start, end, "5 to 8")
    plan = DayPlan(name, date, roots)
    if stream is not None:
        store_plan(stream, plan, start if now is None else now, f"{name}'s plan for day {date}")
    return plan


def decompose(node: PlanNode, granularity: int, backend: LLMBackend, name: str) -> PlanNode:
    """Split ``node`` into children of roughly ``granularity`` minutes."""
    if node.duration <= granularity:
        return node
    request = render(
        TemplateId.DECOMPOSE,
        name=name,
        description=node.description,
        start=clock(node.start),
        end=clock(node.end),
        duration=node.duration,
        granularity=granularity,
    )
    day = day_of(node.start)
    children = complete_parsed(backend, request, lambda text: parse_plan(text, day))
    problem = tiling_problem(children, node.start, node.end)
    if problem:
        raise NonTilingPlan(f"decomposing {node.line()}: {problem}")
    node.children = children
    return node


def decompose_all(
    nodes: Sequence[PlanNode],
    backend: LLMBackend,
    name: str,
    granularities: Sequence[int] = DEFAULT_GRANULARITIES,
) -> list[str]:
    """Refine level by level: the frontier is split at each granularity in turn.

    A node whose decomposition fails stays a leaf; the failures are returned.
    """
    failures = []
    frontier = list(nodes)
    for granularity in granularities:
        next_frontier = []
        for node in frontier:
            try:
                decompose(node, granularity, backend, name)
            except (MalformedCompletion, NonTilingPlan) as exc:
                failures.append(str(exc))
            next_frontier.extend(node.children or [node])
        frontier = next_frontier
    return failures


def action_path(plan: DayPlan, now: int) -> list[PlanNode]:
    """Root-to-leaf chain of nodes whose half-open interval holds ``now``."""
    if not plan.roots or not plan.start <= now < plan.end:
        raise OutsidePlanWindow(f"{clock(now)} is outside {plan.agent}'s plan window")
    chain = []
    level = plan.roots
    while level:
        node = next((n for n in level if n.covers(now)), None)
        if node is None:
            break
        chain.append(node)
        level = node.children
    return chain


def current_action(plan: DayPlan, now: int) -> str:
    return action_path(plan, now)[-1].description


def clip_before(nodes: Sequence[PlanNode], cut: int) -> list[PlanNode]:
    """Copy of the part of ``nodes`` that lies before ``cut``.

    Nodes that end at or before the cut are kept as they are; a node spanning
    the cut is shortened (recursively) to end there.
    """
    kept = []
    for node in nodes:
        if node.end <= cut:
            kept.append(node)
        elif node.start < cut:
            kept.append(PlanNode(node.description, node.start, cut - node.start, clip_before(node.children, cut)))
    return kept


def clip_after(nodes: Sequence[PlanNode], cut: int) -> list[PlanNode]:
    """Undecomposed copies of the part of ``nodes`` from ``cut`` on."""
    return [
        PlanNode(n.description, max(n.start, cut), n.end - max(n.start, cut))
        for n in nodes
        if n.end > cut
    ]


def spliced_remainder(plan: DayPlan, now: int, reaction: str, minutes: int = REACTION_MINUTES) -> list[PlanNode]:
    """The reaction first, then whatever the original plan had left."""
    end = plan.end
    length = min(minutes, end - now)
    return [PlanNode(reaction, now, length)] + clip_after(plan.roots, now + length)


def replan(
    plan: DayPlan,
    now: int,
    reaction: str,
    entity_summary: str,
    summary_text: str,
    backend: LLMBackend,
    granularities: Sequence[int] = DEFAULT_GRANULARITIES,
    stream: MemoryStream | None = None,
) -> DayPlan:
    """Rewrite the rest of the day from ``now`` around a reaction.

    Everything before ``now`` survives; nodes that end by ``now`` are untouched.
    If the backend cannot produce a tiling, the reaction is spliced in front of
    the original remainder.
    """
    if not plan.start <= now < plan.end:
        raise OutsidePlanWindow(f"{clock(now)} is outside {plan.agent}'s plan window")
    name = plan.agent
    suggested = spliced_remainder(plan, now, reaction)
    remaining = "\n".join(n.line() for n in clip_after(plan.roots, now))
    suggested_text = "\n".join(n.line() for n in suggested)
    context = (
        f"{entity_summary}\n\n{name} has decided to react: {reaction}.\n"
        f"The rest of the original plan:\n{remaining}"
    )
    request = _plan_request(
        name, summary_text, context, now, plan.end, "1 to 8", suggested_plan=suggested_text
    )
    try:
        future = _request_tiling(
            backend, request, name, summary_text, context, now, plan.end, "1 to 8",
            suggested_plan=suggested_text,
        )
    except (MalformedCompletion, NonTilingPlan) as exc:
        log.warning("replan for %s fell back to splicing: %s", name, exc)
        future = suggested
    for failure in decompose_all(future, backend, name, granularities):
        log.warning("decomposition failed for %s: %s", name, failure)
    revised = DayPlan(name, plan.date, clip_before(plan.roots, now) + future)
    if stream is not None:
        store_plan(stream, revised, now, f"{name}'s revised plan for day {plan.date} from {clock(now)}")
    return revised
