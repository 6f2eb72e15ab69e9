from __future__ import annotations

import io
import json

import pytest

from genagents import REFERENCE_SCENARIO
from genagents.cli import EXIT_CONFIG, EXIT_OK, EXIT_USAGE, main
from genagents.engine import Simulation
from genagents.retrieval import retrieve


def call(*argv, stdin=""):
    out = io.StringIO()
    code = main(list(map(str, argv)), out=out, inp=io.StringIO(stdin))
    return code, out.getvalue()


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli")
    code, text = call("run", REFERENCE_SCENARIO, "--ticks", 192, "--out", out)
    assert code == EXIT_OK
    return out, text


def _snapshot_bytes(directory):
    return {p.name: p.read_bytes() for p in sorted((directory / "snapshot").rglob("*")) if p.is_file()}


def test_run_prints_a_day_digest(run_dir):
    _, text = run_dir
    lines = text.splitlines()
    assert lines[1:2] == ["day 1"] and "day 2" in lines
    assert any(l.startswith("  Klaus Mueller:") and "reflections" in l and "dialogues" in l for l in lines)


def test_run_without_scenario_is_a_usage_error(capsys):
    code, _ = call("run")
    assert code == EXIT_USAGE
    assert "usage:" in capsys.readouterr().err


def test_unknown_flag_is_rejected(capsys):
    assert call("replay", "x", "--bogus")[0] == EXIT_USAGE
    assert "unrecognized arguments" in capsys.readouterr().err


def test_missing_file_is_a_usage_error(tmp_path, capsys):
    assert call("run", tmp_path / "nope.yaml")[0] == EXIT_USAGE
    assert "nope.yaml" in capsys.readouterr().err


def test_invalid_config_exits_3(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: x\nagents: []\n")
    assert call("run", bad, "--out", tmp_path / "o")[0] == EXIT_CONFIG
    assert "agents" in capsys.readouterr().err


def test_run_with_seed_override(tmp_path):
    code, text = call("run", REFERENCE_SCENARIO, "--ticks", 0, "--seed", 3, "--out", tmp_path)
    assert code == EXIT_OK
    state = json.loads((tmp_path / "snapshot" / "state.json").read_text())
    assert state["config"]["seed"] == 3


def test_inspect_top_k_matches_retrieve(run_dir):
    out, _ = run_dir
    before = _snapshot_bytes(out)
    code, text = call("inspect", out, "--agent", "Klaus Mueller", "--top-k", 3, "core characteristics")
    assert code == EXIT_OK
    header, *rows = text.splitlines()
    assert header.split()[:6] == ["id", "kind", "recency", "importance", "relevance", "total"]
    assert 1 <= len(rows) <= 3
    totals = [float(r.split()[5]) for r in rows]
    assert totals == sorted(totals, reverse=True)
    sim = Simulation.restore(out / "snapshot")
    agent = sim.by_name["Klaus Mueller"]
    expected = retrieve(agent.stream, "core characteristics", sim.weights, sim.now, sim.backend, k=3)
    assert [int(r.split()[0]) for r in rows] == [m.record.id for m in expected]
    assert _snapshot_bytes(out) == before


def test_inspect_lists_by_kind(run_dir):
    out, _ = run_dir
    code, text = call("inspect", out, "--agent", "Maria Lopez", "--kind", "plan")
    assert code == EXIT_OK
    rows = text.splitlines()[1:]
    assert rows and all(r.split()[1] == "plan" for r in rows)


def test_inspect_unknown_agent(run_dir, capsys):
    out, _ = run_dir
    assert call("inspect", out, "--agent", "Nobody")[0] == EXIT_USAGE
    assert "Klaus Mueller" in capsys.readouterr().err


def test_replay_shows_the_email_status_line(run_dir):
    out, _ = run_dir
    code, text = call("replay", out, "--from", "day 1 12:45", "--to", "day 1 13:00")
    assert code == EXIT_OK
    assert "[ day 1 13:00] Isabella Rodriguez 💻✉️ checking her emails" in text.splitlines()
    assert "day 1 14:00" not in text


def test_replay_groups_dialogues(run_dir):
    out, _ = run_dir
    code, text = call("replay", out / "events.jsonl", "--kind", "dialogue_turn", "--kind", "dialogue_summary")
    assert code == EXIT_OK
    lines = text.splitlines()
    starts = [i for i, l in enumerate(lines) if "starts conversation #" in l]
    summaries = [i for i, l in enumerate(lines) if l.startswith("    summary:")]
    assert len(starts) == len(summaries) > 0
    for s, e in zip(starts, summaries):
        assert s < e and all(l.startswith("    ") for l in lines[s + 1 : e + 1])


def test_replay_tick_bounds_and_bad_bound(run_dir):
    out, _ = run_dir
    code, text = call("replay", out, "--from", -1, "--to", -1)
    assert code == EXIT_OK and text.count(" plan:") == 3
    assert call("replay", out, "--from", "noon")[0] == EXIT_USAGE


def test_interview_is_not_persisted_by_default(run_dir):
    out, _ = run_dir
    before = _snapshot_bytes(out)
    code, text = call("interview", out, "--agent", "Klaus Mueller", stdin="What are you working on?\n\n/quit\nignored\n")
    assert code == EXIT_OK
    assert text.splitlines()[1] == "Klaus Mueller: I'm doing well, Interviewer. It's good to see you."
    assert len(text.splitlines()) == 2
    assert _snapshot_bytes(out) == before


def test_interview_persist_writes_back(tmp_path):
    call("run", REFERENCE_SCENARIO, "--ticks", 40, "--out", tmp_path)
    before = len(Simulation.restore(tmp_path / "snapshot").by_name["Maria Lopez"].stream)
    code, text = call("interview", tmp_path, "--agent", "Maria Lopez", "--persist", stdin="Hello?\n")
    assert code == EXIT_OK and "saved 2 turns" in text
    stream = Simulation.restore(tmp_path / "snapshot").by_name["Maria Lopez"].stream
    assert len(stream) == before + 2
    assert stream[len(stream) - 2].text == 'Interviewer said to Maria Lopez: "Hello?"'


def test_reflect_is_dry_unless_persisted(tmp_path):
    call("run", REFERENCE_SCENARIO, "--ticks", 60, "--out", tmp_path)
    before = _snapshot_bytes(tmp_path)
    code, text = call("reflect", tmp_path, "--agent", "Klaus Mueller")
    assert code == EXIT_OK and "(because of" in text
    assert _snapshot_bytes(tmp_path) == before
    assert call("reflect", tmp_path, "--agent", "Klaus Mueller", "--persist")[0] == EXIT_OK
    assert _snapshot_bytes(tmp_path) != before
