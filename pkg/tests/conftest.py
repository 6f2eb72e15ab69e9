from __future__ import annotations

import copy
from pathlib import Path

import pytest
import yaml

from genagents import REFERENCE_SCENARIO
from genagents.config import parse_scenario
from genagents.engine import run
from genagents.llm import ScriptedBackend

# One default row per template; tests prepend the rows they care about.
DEFAULT_SCRIPT = {
    "importance_rating": ["3"],
    "focal_questions": ["1. What does {name} care about?\n2. Who does {name} meet?\n3. What is changing?"],
    "insights": ["Something stands out (because of 1)"],
    "agent_summary_part": ["{name} is fine."],
    "previous_day_summary": ["{name} had an ordinary day {day}."],
    "entity_summary_part": ["{observer} has no strong opinion."],
    "day_plan": ["{start} ({window_minutes}m): go about the day"],
    "decompose": [{"builtin": "split_evenly"}],
    "reaction": ["No"],
    "destination": ["{default_choice}"],
    "emoji": ["🙂"],
    "utterance": ["[END]"],
    "dialogue_summary": ["{first} and {second} talked."],
}


def script(**rows) -> dict:
    table = copy.deepcopy(DEFAULT_SCRIPT)
    for key, extra in rows.items():
        table[key] = list(extra) + table[key]
    return table


def scripted(seed: int = 0, **rows) -> ScriptedBackend:
    return ScriptedBackend.from_mapping(script(**rows), seed=seed)


@pytest.fixture
def backend() -> ScriptedBackend:
    return scripted()


@pytest.fixture(scope="session")
def reference_raw() -> dict:
    return yaml.safe_load(Path(REFERENCE_SCENARIO).read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def reference_config(reference_raw):
    return parse_scenario(reference_raw)


@pytest.fixture(scope="session")
def reference_run(reference_config, tmp_path_factory):
    """The shipped scenario run for two simulated days."""
    out = tmp_path_factory.mktemp("reference")
    ticks = 2 * 1440 // reference_config.tick_minutes
    sim = run(reference_config, ticks, out)
    return sim, out


# One line per acceptance criterion, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
