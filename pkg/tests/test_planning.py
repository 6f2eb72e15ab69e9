from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from genagents.errors import MalformedCompletion, NonTilingPlan, OutsidePlanWindow
from genagents.memory import MemoryKind, MemoryStream
from genagents.planning import (
    DayPlan,
    PlanNode,
    action_path,
    check_tiling,
    clip_before,
    current_action,
    decompose,
    decompose_all,
    parse_plan,
    plan_day,
    replan,
    spliced_remainder,
    tiling_problem,
)
from tests.conftest import scripted

WAKE, SLEEP = 7 * 60, 22 * 60

GOOD_DAY = """Here is the plan:
07:00 (60m): wake up and complete the morning routine
08:00 (240m): work on the new music composition
12:00 (60m): have lunch
13:00 (540m): keep composing and relax in the evening"""


def test_parse_plan_grammar():
    nodes = parse_plan("1. 07:00 (60 min): wake up.\n- 8:00 (30m) read\nnot a line", 2)
    assert [(n.start, n.duration, n.description) for n in nodes] == [(1440 + 420, 60, "wake up"), (1440 + 480, 30, "read")]
    with pytest.raises(MalformedCompletion):
        parse_plan("no plan here", 1)
    with pytest.raises(MalformedCompletion):
        parse_plan("07:75 (5m): x", 1)


@pytest.mark.parametrize(
    "spec, problem",
    [
        ([(0, 30), (30, 30)], None),
        ([(0, 30), (40, 20)], "gap"),
        ([(0, 40), (30, 30)], "overlaps"),
        ([(0, 30)], "instead of"),
        ([(0, 0), (0, 60)], "non-positive"),
        ([], "empty"),
    ],
)
def test_tiling_problem(spec, problem):
    nodes = [PlanNode("x", s, d) for s, d in spec]
    got = tiling_problem(nodes, 0, 60)
    assert (got is None) if problem is None else (problem in got)


def test_plan_day_accepts_a_tiling_plan_and_stores_it():
    backend = scripted(day_plan=[{"contains": "Eddy", "response": GOOD_DAY}])
    stream = MemoryStream("Eddy Lin", backend)
    plan = plan_day("Eddy Lin", "summary", "yesterday", 1, WAKE, SLEEP, backend, stream)
    assert [r.duration for r in plan.roots] == [60, 240, 60, 540]
    check_tiling(plan, WAKE, SLEEP)
    (record,) = stream.by_kind(MemoryKind.PLAN)
    assert record.text.startswith("Eddy Lin's plan for day 1: 07:00 (60m): wake up")


def test_plan_day_repairs_once():
    bad = "07:00 (60m): wake up\n09:00 (780m): everything else"
    backend = scripted(
        day_plan=[
            {"contains": "previous draft was rejected", "response": GOOD_DAY},
            {"contains": "Eddy", "response": bad},
        ]
    )
    assert len(plan_day("Eddy Lin", "s", "y", 1, WAKE, SLEEP, backend).roots) == 4


def test_plan_day_gives_up_after_repair():
    backend = scripted(day_plan=["07:00 (60m): wake up"])
    with pytest.raises(NonTilingPlan):
        plan_day("Eddy Lin", "s", "y", 1, WAKE, SLEEP, backend)


def test_decompose_and_failure_leaves_a_leaf():
    backend = scripted(decompose=[{"contains": "broken", "response": "08:00 (10m): oops"}])
    node = decompose(PlanNode("compose music", 480, 240), 60, backend, "Eddy Lin")
    assert [c.duration for c in node.children] == [60, 60, 60, 60]
    roots = [PlanNode("compose music", 480, 120), PlanNode("broken thing", 600, 120)]
    failures = decompose_all(roots, backend, "Eddy Lin", (60, 15))
    # the failed node is offered again at the finer level, and fails again
    assert len(failures) == 2 and all("broken thing" in f for f in failures)
    assert roots[1].children == []
    assert [len(c.children) for c in roots[0].children] == [4, 4]


def test_current_action_half_open_intervals():
    plan = DayPlan("A", 1, [PlanNode("a", 420, 60), PlanNode("b", 480, 60, [PlanNode("b1", 480, 15), PlanNode("b2", 495, 45)])])
    assert current_action(plan, 479) == "a"
    assert current_action(plan, 480) == "b1"
    assert current_action(plan, 495) == "b2"
    assert [n.description for n in action_path(plan, 500)] == ["b", "b2"]
    with pytest.raises(OutsidePlanWindow):
        current_action(plan, 540)
    with pytest.raises(OutsidePlanWindow):
        current_action(plan, 419)


def test_round_trip_dict():
    plan = DayPlan("A", 1, [PlanNode("b", 480, 60, [PlanNode("b1", 480, 60)])])
    assert DayPlan.from_dict(plan.to_dict()) == plan


def _plan(backend) -> DayPlan:
    plan = plan_day("Eddy Lin", "s", "y", 1, WAKE, SLEEP, backend)
    decompose_all(plan.roots, backend, "Eddy Lin")
    return plan


def test_replan_keeps_the_past_and_tiles():
    backend = scripted(day_plan=[{"contains": "has decided to react", "response": "{suggested_plan}"}, {"contains": "Eddy", "response": GOOD_DAY}])
    plan = _plan(backend)
    now = 9 * 60 + 15
    stream = MemoryStream("Eddy Lin", backend)
    new = replan(plan, now, "talk to John", "John is here", "s", backend, stream=stream)
    check_tiling(new, WAKE, SLEEP)
    assert current_action(new, now) == "talk to John"
    assert current_action(new, now + 30) == "work on the new music composition"
    for minute in range(WAKE, now):
        assert current_action(new, minute) == current_action(plan, minute)
    assert new.roots[0] == plan.roots[0]  # untouched: ended before the cut
    assert "revised plan" in stream.by_kind(MemoryKind.PLAN)[0].text


def test_replan_falls_back_to_splicing():
    backend = scripted(day_plan=[{"contains": "has decided to react", "response": "garbage"}, {"contains": "Eddy", "response": GOOD_DAY}])
    plan = _plan(backend)
    new = replan(plan, 600, "help John", "", "s", backend)
    check_tiling(new, WAKE, SLEEP)
    assert [n.description for n in new.roots[2:4]] == ["help John", "work on the new music composition"]
    with pytest.raises(OutsidePlanWindow):
        replan(plan, SLEEP, "x", "", "s", backend)


def test_spliced_remainder_near_the_end_is_clipped():
    plan = DayPlan("A", 1, [PlanNode("a", 420, 60)])
    assert [(n.description, n.duration) for n in spliced_remainder(plan, 465, "react")] == [("react", 15)]


durations = st.lists(st.integers(1, 12).map(lambda q: q * 15), min_size=1, max_size=10)


@settings(max_examples=60, deadline=None)
@given(durations, st.integers(0, 1000))
def test_decomposition_always_tiles_and_covers(parts, offset):
    start = 360
    roots, t = [], start
    for d in parts:
        roots.append(PlanNode("task", t, d))
        t += d
    plan = DayPlan("A", 1, roots)
    decompose_all(plan.roots, scripted(), "A", (60, 15))
    check_tiling(plan, start, t)
    for minute in range(start, t):
        assert current_action(plan, minute) == "task"
    cut = start + offset % (t - start)
    past = clip_before(plan.roots, cut)
    assert tiling_problem(past, start, cut) is None or cut == start
