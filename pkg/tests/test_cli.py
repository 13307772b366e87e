"""CLI tests: exit codes, replay comparison, metrics output formats."""

from __future__ import annotations

import json
from importlib import resources

import pytest

from reflectbot.cli import (
    EXIT_FAILURE,
    EXIT_IO,
    EXIT_OK,
    cmd_metrics,
    cmd_replay,
    cmd_validate,
    main,
    replay_record,
)
from reflectbot.llm import ScriptedBackend, ScriptedPolicy
from reflectbot.scenario import load_scenario_file
from reflectbot.store import load_record

from conftest import FIG2_FOLLOWUP, FIXTURES, MINIMAL_SCENARIO, golden_policy


@pytest.fixture(scope="module")
def scenario_path() -> str:
    return str(resources.files("reflectbot").joinpath("scenarios/robot_camp.json"))


GOLDEN_TRANSCRIPT = str(FIXTURES / "golden_session.jsonl")
GOLDEN_POLICY = str(FIXTURES / "golden_policy.json")


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def test_validate_fixture_ok(scenario_path, capsys):
    assert cmd_validate(scenario_path) == EXIT_OK
    assert "OK" in capsys.readouterr().out


def test_validate_broken_graph_exits_one(tmp_path, capsys):
    doc = json.loads(MINIMAL_SCENARIO)
    doc["nodes"]["hello"]["next"] = "nowhere"
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(doc))
    assert cmd_validate(str(path)) == EXIT_FAILURE
    out = capsys.readouterr().out
    assert "DANGLING_EDGE" in out


def test_validate_missing_file_exits_two():
    assert cmd_validate("/nonexistent/scenario.json") == EXIT_IO


def test_validate_malformed_json_exits_two(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{nope")
    assert cmd_validate(str(path)) == EXIT_IO


def test_main_dispatches_validate(scenario_path):
    assert main(["validate", scenario_path]) == EXIT_OK


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------


def test_golden_replay_matches(scenario_path, capsys):
    assert cmd_replay(GOLDEN_TRANSCRIPT, scenario_path, GOLDEN_POLICY) == EXIT_OK
    assert "replay matched" in capsys.readouterr().out


def test_policy_consistent_with_conftest():
    from_file = ScriptedPolicy.from_file(GOLDEN_POLICY)
    assert from_file == golden_policy()


def test_altered_generation_diverges_at_generated_turn(scenario_path, tmp_path, capsys):
    policy = json.loads((FIXTURES / "golden_policy.json").read_text())
    policy["rules"][1]["reply"] = "What color will it be?"
    path = tmp_path / "altered.json"
    path.write_text(json.dumps(policy))
    assert cmd_replay(GOLDEN_TRANSCRIPT, scenario_path, str(path)) == EXIT_FAILURE
    out = capsys.readouterr().out
    assert "divergence at turn 11" in out

    record = load_record(GOLDEN_TRANSCRIPT)
    result = replay_record(
        record,
        load_scenario_file(scenario_path),
        ScriptedBackend(ScriptedPolicy.from_dict(policy)),
    )
    assert not result.matched
    assert result.first_divergence.expected == FIG2_FOLLOWUP
    assert result.first_divergence.actual == "What color will it be?"


def test_fuzzy_replay_tolerates_text_changes(scenario_path, tmp_path):
    policy = json.loads((FIXTURES / "golden_policy.json").read_text())
    policy["rules"][1]["reply"] = "What color will it be?"
    path = tmp_path / "altered.json"
    path.write_text(json.dumps(policy))
    assert (
        cmd_replay(GOLDEN_TRANSCRIPT, scenario_path, str(path), fuzzy=True) == EXIT_OK
    )


def test_transcript_from_other_scenario_diverges_at_zero(tmp_path, scenario_path, capsys):
    lines = [
        {"kind": "header", "session_id": "other", "scenario_id": "minimal",
         "started_at": "2025-01-01T00:00:00+00:00"},
        {"kind": "turn", "index": 0, "speaker": "system", "origin": "scripted",
         "text": "Hello!", "node_id": "hello", "timestamp": "t"},
        {"kind": "turn", "index": 1, "speaker": "system", "origin": "scripted",
         "text": "Bye!", "node_id": "bye", "timestamp": "t"},
        {"kind": "status", "status": "completed", "ended_at": "t"},
    ]
    path = tmp_path / "other.jsonl"
    path.write_text("".join(json.dumps(l) + "\n" for l in lines))
    assert cmd_replay(str(path), scenario_path, GOLDEN_POLICY) == EXIT_FAILURE
    assert "divergence at turn 0" in capsys.readouterr().out


def test_replay_missing_file_exits_two(scenario_path):
    assert cmd_replay("/nonexistent.jsonl", scenario_path, GOLDEN_POLICY) == EXIT_IO


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def test_metrics_json_matches_oracle(capsys):
    code = cmd_metrics(
        str(FIXTURES / "store_corpus"),
        gold_path=str(FIXTURES / "gold_labels.json"),
        fmt="json",
    )
    assert code == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    expected = json.loads((FIXTURES / "metrics_oracle.json").read_text())
    for key, value in expected["pooled"].items():
        if isinstance(value, float):
            assert payload[key] == pytest.approx(value, abs=1e-9), key
        else:
            assert payload[key] == value, key
    assert payload["confusion_matrix"] == expected["confusion_matrix"]
    assert any(e["ratio"] == 4.0 for e in payload["expansion_events"])


def test_metrics_table_renders(capsys):
    code = cmd_metrics(str(FIXTURES / "store_corpus"), fmt="table")
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "Dialogue turns" in out
    assert "45" in out
    # aligned columns: every row shares the same value column offset
    lines = [l for l in out.splitlines() if l.strip()]
    assert len({len(l) - len(l.lstrip()) for l in lines}) <= 2


def test_metrics_empty_dir_zeroed(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert cmd_metrics(str(empty), fmt="json") == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["session_count"] == 0
    assert payload["total_turns"] == 0


def test_metrics_bad_gold_exits_one(tmp_path):
    gold = tmp_path / "gold.json"
    gold.write_text(json.dumps(
        [{"session_id": "fixture-a", "turn_index": 2, "human_relevant": True}]
    ))
    assert (
        cmd_metrics(str(FIXTURES / "store_corpus"), gold_path=str(gold), fmt="json")
        == EXIT_FAILURE
    )


def test_metrics_missing_dir_exits_two():
    assert cmd_metrics("/nonexistent/store") == EXIT_IO


def test_main_metrics_invocation(capsys):
    code = main(["metrics", "--store-dir", str(FIXTURES / "store_corpus"),
                 "--format", "json"])
    assert code == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["llm_triggers"] == 5
