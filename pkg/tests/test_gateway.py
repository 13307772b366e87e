"""Gateway tests: frame schemas, session lifecycle, malformed-input
resilience, and cross-session isolation, over the in-process test client."""

from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from reflectbot.engine import SessionStatus
from reflectbot.gateway import GatewayConfig, create_app
from reflectbot.llm import ScriptedBackend
from reflectbot.store import TranscriptStore

from conftest import FIG2_FOLLOWUP, golden_policy


@pytest.fixture()
def store(tmp_path):
    return TranscriptStore(tmp_path / "store")


@pytest.fixture()
def client(camp_scenario, store):
    app = create_app(
        {camp_scenario.id: camp_scenario},
        ScriptedBackend(golden_policy()),
        store,
        GatewayConfig(idle_timeout=5.0),
    )
    with TestClient(app) as test_client:
        yield test_client


def recv_until(ws, frame_type, limit=20):
    """Collect frames until one of `frame_type` arrives; returns all frames."""
    frames = []
    for _ in range(limit):
        frame = ws.receive_json()
        frames.append(frame)
        if frame["type"] == frame_type:
            return frames
    raise AssertionError(f"no {frame_type} frame within {limit} frames")


def send_text(ws, text):
    ws.send_json({"type": "learner_message", "payload": {"text": text}})


def send_option(ws, option_id):
    ws.send_json({"type": "learner_message", "payload": {"option_id": option_id}})


# ---------------------------------------------------------------------------
# session opening
# ---------------------------------------------------------------------------


def test_open_session_emits_start_then_prompts(client):
    with client.websocket_connect("/ws") as ws:
        start = ws.receive_json()
        assert start["type"] == "session_start"
        assert start["payload"]["session_id"]
        assert start["payload"]["scenario_id"] == "robot-camp-reflection"
        greeting = ws.receive_json()
        assert greeting["type"] == "system_message"
        assert greeting["payload"]["node_id"] == "rapport_greeting"
        assert greeting["payload"]["input_mode"] == "none"
        assert "options" not in greeting["payload"]
        day = ws.receive_json()
        assert day["payload"]["input_mode"] == "options"
        assert day["payload"]["options"] == [
            {"option_id": "yes", "label": "Yes"},
            {"option_id": "no", "label": "No"},
        ]
        assert day["payload"]["tts"] is True


def test_unknown_scenario_errors(client):
    with client.websocket_connect("/ws?scenario=nope") as ws:
        frame = ws.receive_json()
        assert frame["type"] == "error"
        assert frame["payload"]["code"] == "UNKNOWN_SCENARIO"


def test_concurrent_sessions_are_isolated(client):
    with client.websocket_connect("/ws") as ws1, client.websocket_connect("/ws") as ws2:
        id1 = ws1.receive_json()["payload"]["session_id"]
        id2 = ws2.receive_json()["payload"]["session_id"]
        assert id1 != id2
        # drain the two prompt frames on both
        for ws in (ws1, ws2):
            ws.receive_json()
            ws.receive_json()
        # advance only session 1
        send_option(ws1, "yes")
        frame = ws1.receive_json()
        assert frame["payload"]["node_id"] == "goals_remember"
        # session 2 still sits at the first decision
        send_option(ws2, "no")
        frame = ws2.receive_json()
        assert frame["payload"]["node_id"] == "rapport_cheer"


# ---------------------------------------------------------------------------
# learner message routing
# ---------------------------------------------------------------------------


def walk_to_plans(ws):
    ws.receive_json()  # session_start
    ws.receive_json()  # greeting
    ws.receive_json()  # rapport_day prompt
    send_option(ws, "yes")
    ws.receive_json()  # goals_remember
    send_option(ws, "yes")
    ws.receive_json()  # goals_what (open)
    send_text(ws, "walk and ctalk")
    ws.receive_json()  # plans_have
    send_option(ws, "yes")
    frame = ws.receive_json()  # plans_how
    assert frame["payload"]["node_id"] == "plans_how"
    assert frame["payload"]["input_mode"] == "open"


def test_option_click_advances(client):
    with client.websocket_connect("/ws") as ws:
        ws.receive_json()
        ws.receive_json()
        ws.receive_json()
        send_option(ws, "yes")
        frame = ws.receive_json()
        assert frame["type"] == "system_message"
        assert frame["payload"]["node_id"] == "goals_remember"


def test_gated_text_gets_generated_followup(client):
    with client.websocket_connect("/ws") as ws:
        walk_to_plans(ws)
        send_text(ws, "by coding")
        frame = ws.receive_json()
        assert frame["type"] == "system_message"
        assert frame["payload"]["text"] == FIG2_FOLLOWUP
        assert frame["payload"]["input_mode"] == "open"
        assert frame["payload"]["node_id"] == "plans_how"


def test_typed_text_on_decision_rejected_and_options_resent(client):
    with client.websocket_connect("/ws") as ws:
        ws.receive_json()
        ws.receive_json()
        ws.receive_json()
        send_text(ws, "hello")
        error = ws.receive_json()
        assert error["type"] == "error"
        assert error["payload"]["code"] == "INPUT_KIND_MISMATCH"
        resent = ws.receive_json()
        assert resent["type"] == "system_message"
        assert resent["payload"]["input_mode"] == "options"
        assert resent["payload"]["node_id"] == "rapport_day"
        # the session is still usable
        send_option(ws, "yes")
        assert ws.receive_json()["payload"]["node_id"] == "goals_remember"


def test_unknown_option_rejected(client):
    with client.websocket_connect("/ws") as ws:
        ws.receive_json()
        ws.receive_json()
        ws.receive_json()
        send_option(ws, "perhaps")
        assert ws.receive_json()["payload"]["code"] == "UNKNOWN_OPTION"
        assert ws.receive_json()["payload"]["input_mode"] == "options"


def test_completion_sends_session_end(client, store):
    with client.websocket_connect("/ws") as ws:
        start = ws.receive_json()
        session_id = start["payload"]["session_id"]
        frames = [ws.receive_json(), ws.receive_json()]
        send_option(ws, "yes")
        ws.receive_json()
        send_option(ws, "yes")
        ws.receive_json()
        send_text(ws, "walk and ctalk")
        ws.receive_json()
        send_option(ws, "yes")
        ws.receive_json()
        send_text(ws, "I will code it to walk and talk")
        ws.receive_json()  # activities
        send_text(ws, "added googly eyes")
        ws.receive_json()  # changes_any
        send_option(ws, "no")
        ws.receive_json()  # feelings_showcase
        send_text(ws, "so excited")
        ws.receive_json()  # feelings_why
        send_text(ws, "because i love robots")
        ws.receive_json()  # identity_creator
        send_text(ws, "yes i can code now")
        frames = recv_until(ws, "session_end")
        node_ids = [
            f["payload"]["node_id"] for f in frames if f["type"] == "system_message"
        ]
        assert node_ids == ["wrapup", "farewell"]
        assert frames[-1]["payload"]["status"] == "completed"
    record = store.load(session_id)
    assert record.status is SessionStatus.COMPLETED
    assert record.turns[-1].node_id == "farewell"


def test_disconnect_persists_aborted(client, store):
    with client.websocket_connect("/ws") as ws:
        start = ws.receive_json()
        session_id = start["payload"]["session_id"]
        ws.receive_json()
        ws.receive_json()
        send_option(ws, "yes")
        ws.receive_json()
    record = store.load(session_id)
    assert record.status is SessionStatus.ABORTED
    assert len(record.turns) == 4  # greeting, day prompt, choice, goals prompt


# ---------------------------------------------------------------------------
# resilience
# ---------------------------------------------------------------------------

MALFORMED_FRAMES = [
    "not json at all",
    "42",
    "{}",
    json.dumps({"type": "mystery"}),
    json.dumps({"type": "learner_message"}),
    json.dumps({"type": "learner_message", "payload": {}}),
    json.dumps({"type": "learner_message", "payload": {"text": "x", "option_id": "y"}}),
    json.dumps({"type": "learner_message", "payload": {"text": 7}}),
    json.dumps({"type": "learner_message", "payload": {"option_id": None}}),
    json.dumps({"type": "session_start", "payload": {}}),
]


def test_malformed_frames_answered_not_fatal(client):
    with client.websocket_connect("/ws") as ws:
        ws.receive_json()
        ws.receive_json()
        ws.receive_json()
        for raw in MALFORMED_FRAMES:
            ws.send_text(raw)
            frame = ws.receive_json()
            assert frame["type"] == "error"
            assert frame["payload"]["code"] == "MALFORMED_FRAME"
        # still alive and correct afterwards
        send_option(ws, "yes")
        assert ws.receive_json()["payload"]["node_id"] == "goals_remember"


def test_fuzzing_session_does_not_contaminate_healthy_one(client, store):
    with client.websocket_connect("/ws") as healthy, client.websocket_connect("/ws") as fuzzer:
        healthy_id = healthy.receive_json()["payload"]["session_id"]
        fuzzer.receive_json()
        for ws in (healthy, fuzzer):
            ws.receive_json()
            ws.receive_json()
        for i, raw in enumerate(MALFORMED_FRAMES):
            fuzzer.send_text(raw)
            assert fuzzer.receive_json()["type"] == "error"
            if i == 4:
                send_option(healthy, "yes")
                assert healthy.receive_json()["payload"]["node_id"] == "goals_remember"
        send_option(healthy, "yes")
        assert healthy.receive_json()["payload"]["node_id"] == "goals_what"
        send_text(healthy, "dance and sing")
        assert healthy.receive_json()["payload"]["node_id"] == "plans_have"
    record = store.load(healthy_id)
    assert record.status is SessionStatus.ABORTED
    assert any(t.node_id == "plans_have" for t in record.turns)


def test_options_present_iff_options_mode(client):
    """Widget-visible contract, checked over a whole session's frame log."""
    with client.websocket_connect("/ws") as ws:
        frames = [ws.receive_json(), ws.receive_json(), ws.receive_json()]
        send_option(ws, "no")   # rapport_cheer branch
        frames.append(ws.receive_json())
        frames.append(ws.receive_json())
        send_option(ws, "no")   # goals_new branch
        frames.append(ws.receive_json())
        send_text(ws, "a dog robot that barks")
        frames.append(ws.receive_json())
    for frame in frames:
        if frame["type"] != "system_message":
            continue
        payload = frame["payload"]
        if payload["input_mode"] == "options":
            assert payload.get("options"), "options mode must list options"
        else:
            assert "options" not in payload


def test_idle_timeout_aborts(camp_scenario, tmp_path):
    store = TranscriptStore(tmp_path / "idle-store")
    app = create_app(
        {camp_scenario.id: camp_scenario},
        ScriptedBackend(golden_policy()),
        store,
        GatewayConfig(idle_timeout=0.3),
    )
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            session_id = ws.receive_json()["payload"]["session_id"]
            ws.receive_json()
            ws.receive_json()
            end = ws.receive_json()  # server times out waiting for input
            assert end["type"] == "session_end"
            assert end["payload"]["status"] == "aborted"
    assert store.load(session_id).status is SessionStatus.ABORTED
