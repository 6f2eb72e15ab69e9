"""The world tree (world -> areas -> objects), its rendering, and area movement."""

from __future__ import annotations

import enum
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from genagents.errors import ConfigInvalid, NotAnObject, UnknownAreaAnswer, UnknownNode, Unreachable
from genagents.llm import LLMBackend, TemplateId, render

log = logging.getLogger(__name__)


class NodeKind(str, enum.Enum):
    WORLD = "world"
    AREA = "area"
    OBJECT = "object"


@dataclass
class WorldNode:
    name: str
    kind: NodeKind
    parent: str | None
    status: str = ""
    children: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class WorldEvent:
    object: str
    status: str
    time: int | None = None


def object_key(area: str, name: str) -> str:
    return f"{area}/{name}"


class WorldTree:
    """Areas are keyed by their (globally unique) name, objects by ``area/object``."""

    def __init__(self, root: str):
        self.root = root
        self.nodes: dict[str, WorldNode] = {root: WorldNode(root, NodeKind.WORLD, None)}
        self.adjacency: dict[str, set[str]] = {}
        self.events: list[WorldEvent] = []

    @classmethod
    def from_spec(cls, name: str, nodes: Sequence[dict[str, Any]], adjacency: Iterable[Sequence[str]], path: str = "world") -> WorldTree:
        tree = cls(name)
        for i, raw in enumerate(nodes):
            where = f"{path}.nodes[{i}]"
            try:
                kind = NodeKind(raw.get("kind", "area"))
                node_name = str(raw["name"])
            except (KeyError, ValueError) as exc:
                raise ConfigInvalid(where, f"bad node: {exc}") from None
            parent = raw.get("parent", name)
            if kind is NodeKind.WORLD:
                raise ConfigInvalid(where, "only the root may be a world node")
            if "/" in node_name or not node_name.strip():
                raise ConfigInvalid(f"{where}.name", "names must be non-empty and contain no '/'")
            if parent not in tree.nodes or tree.nodes[parent].kind is NodeKind.OBJECT:
                raise ConfigInvalid(f"{where}.parent", f"{parent!r} is not a declared world or area node")
            siblings = {tree.nodes[c].name for c in tree.nodes[parent].children}
            if node_name in siblings:
                raise ConfigInvalid(f"{where}.name", f"duplicate sibling name {node_name!r}")
            if kind is NodeKind.AREA:
                if node_name in tree.nodes:
                    raise ConfigInvalid(f"{where}.name", f"area name {node_name!r} is not unique")
                key = node_name
                tree.adjacency[key] = set()
            else:
                if tree.nodes[parent].kind is not NodeKind.AREA:
                    raise ConfigInvalid(f"{where}.parent", "objects must sit inside an area")
                key = object_key(parent, node_name)
            tree.nodes[key] = WorldNode(node_name, kind, parent, str(raw.get("status", "idle")) if kind is NodeKind.OBJECT else "")
            tree.nodes[parent].children.append(key)
        for j, pair in enumerate(adjacency):
            if len(pair) != 2 or any(a not in tree.adjacency for a in pair) or pair[0] == pair[1]:
                raise ConfigInvalid(f"{path}.adjacency[{j}]", f"{list(pair)} must join two distinct areas")
            a, b = pair
            tree.adjacency[a].add(b)
            tree.adjacency[b].add(a)
        if not tree.adjacency:
            raise ConfigInvalid(f"{path}.nodes", "the world needs at least one area")
        first = next(iter(tree.adjacency))
        reached = _bfs_order(tree.adjacency, first)
        missing = [a for a in tree.adjacency if a not in reached]
        if missing:
            raise ConfigInvalid(f"{path}.adjacency", f"areas not connected: {missing}")
        return tree

    def node(self, key: str) -> WorldNode:
        try:
            return self.nodes[key]
        except KeyError:
            raise UnknownNode(key) from None

    def areas(self) -> list[str]:
        return list(self.adjacency)

    def child_areas(self, key: str) -> list[str]:
        return [c for c in self.node(key).children if self.nodes[c].kind is NodeKind.AREA]

    def objects_in(self, area: str) -> list[str]:
        return [c for c in self.node(area).children if self.nodes[c].kind is NodeKind.OBJECT]

    def lineage(self, key: str) -> list[str]:
        """``key`` and its ancestors up to, excluding, the root."""
        chain = []
        while key is not None and key != self.root:
            chain.append(key)
            key = self.node(key).parent
        return chain

    def resolve_object(self, name: str) -> str:
        if name in self.nodes:
            return name
        matches = [k for k, n in self.nodes.items() if n.kind is NodeKind.OBJECT and n.name == name]
        if len(matches) != 1:
            raise UnknownNode(name)
        return matches[0]

    def statuses(self) -> dict[str, str]:
        return {k: n.status for k, n in self.nodes.items() if n.kind is NodeKind.OBJECT}


def render_subtree(tree: WorldTree, node: str, visited: set[str] | None = None) -> str:
    """Indented outline of ``node``.

    With ``visited`` given, only visited areas (and the root) expand into
    their contents.
    """
    lines: list[str] = []

    def visit(key: str, depth: int) -> None:
        n = tree.nodes[key]
        pad = "  " * depth
        if n.kind is NodeKind.OBJECT:
            lines.append(f"{pad}- {n.name}: {n.status}")
            return
        lines.append(f"{pad}{n.name}")
        if visited is not None and n.kind is NodeKind.AREA and key not in visited:
            return
        for child in n.children:
            visit(child, depth + 1)

    tree.node(node)
    visit(node, 0)
    return "\n".join(lines)


def _match_area(answer: str, candidates: Sequence[str]) -> str | None:
    cleaned = answer.strip().strip("\"'`.").strip().lower()
    for candidate in candidates:
        if candidate.lower() == cleaned:
            return candidate
    return None


def descend_to_area(
    name: str,
    current_area: str,
    action_text: str,
    tree: WorldTree,
    backend: LLMBackend,
    visited: set[str] | None = None,
) -> str:
    """Descend from the root asking which child area suits ``action_text``.

    Levels with a single candidate are decided without the backend. Raises
    UnknownAreaAnswer when an answer names no candidate twice in a row.
    """
    tree.node(current_area)
    current_line = set(tree.lineage(current_area))
    level = tree.root
    while True:
        if visited is not None and level != tree.root and level not in visited:
            return level
        candidates = tree.child_areas(level)
        if not candidates:
            return level
        if len(candidates) == 1:
            level = candidates[0]
            continue
        default = next((c for c in candidates if c in current_line), candidates[0])
        request = render(
            TemplateId.DESTINATION,
            name=name,
            current_area=current_area,
            action=action_text,
            world_text=render_subtree(tree, level, visited),
            candidates=", ".join(candidates),
            default_choice=default,
        )
        choice = None
        for _ in range(2):
            answer = backend.complete(request)
            choice = _match_area(answer, candidates)
            if choice is not None:
                break
        if choice is None:
            raise UnknownAreaAnswer(f"{answer!r} is not one of {candidates}")
        level = choice


def choose_destination(
    name: str,
    current_area: str,
    action_text: str,
    tree: WorldTree,
    backend: LLMBackend,
    visited: set[str] | None = None,
) -> str:
    """Total version of :func:`descend_to_area`: unusable answers keep the agent in place."""
    try:
        return descend_to_area(name, current_area, action_text, tree, backend, visited)
    except UnknownAreaAnswer as exc:
        log.warning("%s: %s; staying in %s", name, exc, current_area)
        return current_area


def _bfs_order(adjacency: dict[str, set[str]], start: str) -> dict[str, str | None]:
    parents: dict[str, str | None] = {start: None}
    queue = deque([start])
    while queue:
        here = queue.popleft()
        for nxt in sorted(adjacency[here]):
            if nxt not in parents:
                parents[nxt] = here
                queue.append(nxt)
    return parents


def find_path(tree: WorldTree, from_area: str, to_area: str) -> list[str]:
    """Fewest-hop area path; neighbours are expanded in name order."""
    for area in (from_area, to_area):
        if area not in tree.adjacency:
            raise UnknownNode(area)
    parents = _bfs_order(tree.adjacency, from_area)
    if to_area not in parents:
        raise Unreachable(f"{to_area} cannot be reached from {from_area}")
    path = [to_area]
    while path[-1] != from_area:
        path.append(parents[path[-1]])
    return path[::-1]


def update_object_state(tree: WorldTree, obj: str, status_text: str, time: int | None = None) -> WorldEvent:
    key = tree.resolve_object(obj) if obj not in tree.nodes else obj
    node = tree.node(key)
    if node.kind is not NodeKind.OBJECT:
        raise NotAnObject(obj)
    node.status = status_text
    event = WorldEvent(key, status_text, time)
    tree.events.append(event)
    return event
