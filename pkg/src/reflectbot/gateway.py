"""Websocket gateway: exposes engine sessions to chat clients.

Protocol: JSON text frames of shape {"type": ..., "payload": {...}} with
types session_start, system_message, learner_message, session_end, error.
A system_message payload carries {text, node_id, input_mode, tts} and, when
input_mode is "options", the option list; a learner_message payload carries
exactly one of {text} or {option_id}. Malformed frames are answered with an
error frame and never take the connection down; one connection owns one
session, so frames for a session are processed strictly in order while
distinct connections progress independently.
"""

from __future__ import annotations

import asyncio
import json
import logging
from dataclasses import dataclass

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from starlette.concurrency import run_in_threadpool

from .engine import (
    DialogueEngine,
    EngineOutcome,
    OpenText,
    SessionState,
    SessionStatus,
    Turn,
    TurnOrigin,
)
from .errors import (
    InputKindMismatch,
    SessionNotActive,
    StorageError,
    UnknownOption,
)
from .llm import CompletionBackend
from .scenario import NodeKind, OptionChoice, Scenario
from .store import GateEvent, TranscriptStore

logger = logging.getLogger(__name__)

WS_PATH = "/ws"
DEFAULT_IDLE_TIMEOUT_S = 900.0


@dataclass(frozen=True)
class GatewayConfig:
    idle_timeout: float = DEFAULT_IDLE_TIMEOUT_S
    default_scenario: str | None = None


def input_mode_for(node_kind: NodeKind) -> str:
    if node_kind is NodeKind.DECISION:
        return "options"
    if node_kind is NodeKind.REFLECTION:
        return "open"
    return "none"


def system_message_frame(scenario: Scenario, turn: Turn) -> dict:
    node = scenario.nodes[turn.node_id]
    mode = "open" if turn.origin is TurnOrigin.GENERATED else input_mode_for(node.kind)
    payload: dict = {
        "text": turn.text,
        "node_id": turn.node_id,
        "input_mode": mode,
        "tts": node.tts_enabled,
    }
    if mode == "options":
        payload["options"] = [
            {"option_id": o.option_id, "label": o.label} for o in node.options
        ]
    return {"type": "system_message", "payload": payload}


def node_prompt_frame(scenario: Scenario, node_id: str) -> dict:
    """Frame re-presenting the current node without touching the transcript
    (used to re-display options after a rejected input)."""
    node = scenario.nodes[node_id]
    payload: dict = {
        "text": node.prompt_text,
        "node_id": node.id,
        "input_mode": input_mode_for(node.kind),
        "tts": node.tts_enabled,
    }
    if node.kind is NodeKind.DECISION:
        payload["options"] = [
            {"option_id": o.option_id, "label": o.label} for o in node.options
        ]
    return {"type": "system_message", "payload": payload}


def error_frame(code: str, message: str) -> dict:
    return {"type": "error", "payload": {"code": code, "message": message}}


def parse_learner_message(raw: str) -> OpenText | OptionChoice:
    """Validate one inbound frame; raises ValueError with a reason on any
    malformation so the caller can answer with an error frame."""
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValueError(f"not valid JSON: {exc.msg}") from exc
    if not isinstance(data, dict) or data.get("type") != "learner_message":
        raise ValueError("expected a learner_message frame")
    payload = data.get("payload")
    if not isinstance(payload, dict):
        raise ValueError("learner_message requires an object payload")
    has_text = "text" in payload
    has_option = "option_id" in payload
    if has_text == has_option:
        raise ValueError("payload must carry exactly one of 'text' or 'option_id'")
    if has_text:
        if not isinstance(payload["text"], str):
            raise ValueError("'text' must be a string")
        return OpenText(payload["text"])
    if not isinstance(payload["option_id"], str):
        raise ValueError("'option_id' must be a string")
    return OptionChoice(payload["option_id"])


class SessionRuntime:
    """Live session bookkeeping: engine state, store cursor, send lock."""

    def __init__(self, engine: DialogueEngine, state: SessionState):
        self.engine = engine
        self.state = state
        self.persisted_through = -1
        self.lock = asyncio.Lock()
        self.closed = False


def persist_new_turns(
    store: TranscriptStore, runtime: SessionRuntime, outcome: EngineOutcome | None
) -> None:
    """Append every not-yet-persisted turn; the gate event (if any) rides on
    the turn it references last."""
    state = runtime.state
    trace = outcome.gate_trace if outcome else None
    event: GateEvent | None = None
    attach_at: int | None = None
    if trace is not None:
        event = GateEvent(
            turn_index=trace.learner_turn_index,
            final=trace.final,
            stage_a=trace.decision.stage_a_verdict if trace.decision else None,
            interrogative=trace.decision.interrogative_verdict if trace.decision else None,
            local_short_circuit=trace.decision.local_short_circuit if trace.decision else None,
            generated_turn_index=trace.generated_turn_index,
            backend_failed=trace.backend_failed,
        )
        attach_at = (
            trace.generated_turn_index
            if trace.generated_turn_index is not None
            else trace.learner_turn_index
        )
    try:
        for turn in state.transcript[runtime.persisted_through + 1 :]:
            store.append_turn(
                state.session_id,
                turn,
                gate_event=event if turn.index == attach_at else None,
            )
            runtime.persisted_through = turn.index
    except StorageError as exc:
        logger.error("persistence failed for %s: %s", state.session_id, exc)


def close_session(store: TranscriptStore, runtime: SessionRuntime, reason: str) -> None:
    """Abort if still active and seal the stored transcript; idempotent."""
    if runtime.closed:
        return
    runtime.closed = True
    state = runtime.state
    if state.status is SessionStatus.ACTIVE:
        try:
            runtime.engine.abort_session(state)
        except SessionNotActive:
            pass
        logger.info("session %s aborted (%s)", state.session_id, reason)
    try:
        store.finish(state.session_id, state.status)
    except StorageError as exc:
        logger.error("could not seal session %s: %s", state.session_id, exc)


def create_app(
    scenarios: dict[str, Scenario],
    backend: CompletionBackend,
    store: TranscriptStore,
    config: GatewayConfig | None = None,
) -> FastAPI:
    """Build the gateway application over pre-validated scenarios."""
    config = config or GatewayConfig()
    engines = {
        scenario_id: DialogueEngine.with_backend(scenario, backend)
        for scenario_id, scenario in scenarios.items()
    }
    default_scenario = config.default_scenario or next(iter(scenarios), None)
    app = FastAPI(title="reflectbot gateway")

    @app.websocket(WS_PATH)
    async def websocket_session(websocket: WebSocket):
        await websocket.accept()
        scenario_id = websocket.query_params.get("scenario") or default_scenario
        engine = engines.get(scenario_id or "")
        if engine is None:
            await websocket.send_json(
                error_frame("UNKNOWN_SCENARIO", f"no scenario {scenario_id!r}")
            )
            await websocket.close()
            return

        scenario = engine.scenario
        state, outcome = engine.start_session()
        runtime = SessionRuntime(engine, state)
        try:
            store.create(state.session_id, scenario.id)
        except StorageError as exc:
            logger.error("store rejected new session: %s", exc)
        await websocket.send_json(
            {
                "type": "session_start",
                "payload": {"session_id": state.session_id, "scenario_id": scenario.id},
            }
        )
        try:
            await _send_outcome(websocket, scenario, store, runtime, outcome)
            while state.status is SessionStatus.ACTIVE:
                try:
                    raw = await asyncio.wait_for(
                        websocket.receive_text(), timeout=config.idle_timeout
                    )
                except asyncio.TimeoutError:
                    logger.info("session %s idle timeout", state.session_id)
                    break
                await _handle_frame(websocket, scenario, store, runtime, raw)
        except WebSocketDisconnect:
            pass
        finally:
            close_session(store, runtime, "connection closed")
        if state.status is not SessionStatus.ACTIVE:
            try:
                await websocket.send_json(
                    {
                        "type": "session_end",
                        "payload": {
                            "session_id": state.session_id,
                            "status": state.status.value,
                        },
                    }
                )
                await websocket.close()
            except (WebSocketDisconnect, RuntimeError):
                pass

    return app


async def _send_outcome(
    websocket: WebSocket,
    scenario: Scenario,
    store: TranscriptStore,
    runtime: SessionRuntime,
    outcome: EngineOutcome,
) -> None:
    persist_new_turns(store, runtime, outcome)
    for turn in outcome.emitted:
        await websocket.send_json(system_message_frame(scenario, turn))
    if runtime.state.status is SessionStatus.COMPLETED:
        close_session(store, runtime, "reached terminal")


async def _handle_frame(
    websocket: WebSocket,
    scenario: Scenario,
    store: TranscriptStore,
    runtime: SessionRuntime,
    raw: str,
) -> None:
    state = runtime.state
    try:
        learner_input = parse_learner_message(raw)
    except ValueError as exc:
        await websocket.send_json(error_frame("MALFORMED_FRAME", str(exc)))
        return
    async with runtime.lock:
        try:
            outcome = await run_in_threadpool(
                runtime.engine.handle_learner_input, state, learner_input
            )
        except InputKindMismatch as exc:
            await websocket.send_json(error_frame("INPUT_KIND_MISMATCH", str(exc)))
            await websocket.send_json(node_prompt_frame(scenario, state.current_node))
            return
        except UnknownOption as exc:
            await websocket.send_json(error_frame("UNKNOWN_OPTION", str(exc)))
            await websocket.send_json(node_prompt_frame(scenario, state.current_node))
            return
        except SessionNotActive as exc:
            await websocket.send_json(error_frame("SESSION_NOT_ACTIVE", str(exc)))
            return
    await _send_outcome(websocket, scenario, store, runtime, outcome)
