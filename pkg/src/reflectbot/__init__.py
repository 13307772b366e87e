"""Reflective-dialogue engine: a scripted dialogue state machine with an
LLM relevance gate and follow-up generator, a websocket gateway, transcript
persistence, and corpus analytics."""

from .engine import (
    DialogueEngine,
    EngineOutcome,
    OpenText,
    SessionConfig,
    SessionState,
    SessionStatus,
    Speaker,
    Turn,
    TurnOrigin,
)
from .scenario import (
    ADVANCE,
    NodeKind,
    OptionChoice,
    Scenario,
    ScenarioNode,
    load_scenario,
    load_scenario_file,
    next_node,
    to_document,
    validate,
)

__all__ = [
    "ADVANCE",
    "DialogueEngine",
    "EngineOutcome",
    "NodeKind",
    "OpenText",
    "OptionChoice",
    "Scenario",
    "ScenarioNode",
    "SessionConfig",
    "SessionState",
    "SessionStatus",
    "Speaker",
    "Turn",
    "TurnOrigin",
    "load_scenario",
    "load_scenario_file",
    "next_node",
    "to_document",
    "validate",
]
