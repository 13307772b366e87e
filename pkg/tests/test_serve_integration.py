"""End-to-end check of the serve command: a real uvicorn process, a real
websocket client, transcripts on disk afterwards."""

from __future__ import annotations

import json
import socket
import subprocess
import sys
import time
from importlib import resources

import pytest
from websockets.sync.client import connect

from reflectbot.engine import SessionStatus
from reflectbot.store import load_record

from conftest import FIXTURES


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def wait_for_port(port: int, timeout: float = 10.0) -> None:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        try:
            with socket.create_connection(("127.0.0.1", port), timeout=0.2):
                return
        except OSError:
            time.sleep(0.05)
    raise RuntimeError(f"server on port {port} never came up")


@pytest.fixture()
def live_server(tmp_path):
    port = free_port()
    store_dir = tmp_path / "store"
    scenario = str(resources.files("reflectbot").joinpath("scenarios/robot_camp.json"))
    process = subprocess.Popen(
        [
            sys.executable, "-m", "reflectbot.cli", "serve",
            "--listen", f"127.0.0.1:{port}",
            "--scenario", scenario,
            "--mock-llm", str(FIXTURES / "golden_policy.json"),
            "--store-dir", str(store_dir),
        ],
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
    )
    try:
        wait_for_port(port)
        yield port, store_dir
    finally:
        process.terminate()
        process.wait(timeout=10)


def test_serve_speaks_the_wire_protocol(live_server):
    port, store_dir = live_server
    with connect(f"ws://127.0.0.1:{port}/ws") as ws:
        start = json.loads(ws.recv())
        assert start["type"] == "session_start"
        session_id = start["payload"]["session_id"]
        greeting = json.loads(ws.recv())
        assert greeting["payload"]["node_id"] == "rapport_greeting"
        day = json.loads(ws.recv())
        assert day["payload"]["input_mode"] == "options"
        ws.send(json.dumps({"type": "learner_message", "payload": {"option_id": "yes"}}))
        goals = json.loads(ws.recv())
        assert goals["payload"]["node_id"] == "goals_remember"
        ws.send(json.dumps({"type": "learner_message", "payload": {"option_id": "yes"}}))
        what = json.loads(ws.recv())
        assert what["payload"]["input_mode"] == "open"
        ws.send(json.dumps({"type": "learner_message", "payload": {"text": "walk and ctalk"}}))
        plans = json.loads(ws.recv())
        assert plans["payload"]["node_id"] == "plans_have"
    # disconnect aborts and persists
    deadline = time.monotonic() + 5.0
    while time.monotonic() < deadline:
        try:
            record = load_record(store_dir / f"{session_id}.jsonl")
            if record.status is SessionStatus.ABORTED:
                break
        except Exception:
            pass
        time.sleep(0.1)
    record = load_record(store_dir / f"{session_id}.jsonl")
    assert record.status is SessionStatus.ABORTED
    assert any(t.text == "walk and ctalk" for t in record.turns)
