"""Session engine: drives one dialogue through the scenario state machine.

Scripted prompts come straight from the scenario. Open responses on
reflection nodes pass through the relevance gate; rejected ones trigger a
generated follow-up, at most three per node, after which the dialogue
advances regardless so a strict gate can never deadlock a learner. Backend
failures and unusable generations fail open: the response is treated as
relevant and the dialogue moves forward.

Each session is a strictly sequential state machine; callers must serialize
inputs per session id. Distinct sessions are independent.
"""

from __future__ import annotations

import logging
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Callable, Sequence

from . import generation, relevance
from .errors import (
    BackendError,
    ExtractionError,
    InputKindMismatch,
    InvalidScenario,
    SessionNotActive,
)
from .llm import CompletionBackend
from .relevance import Relevance, RelevanceDecision
from .scenario import ADVANCE, NodeKind, OptionChoice, Scenario, ScenarioNode, next_node, validate

logger = logging.getLogger(__name__)

MAX_REPROMPTS = 3


class Speaker(str, Enum):
    SYSTEM = "system"
    LEARNER = "learner"


class TurnOrigin(str, Enum):
    SCRIPTED = "scripted"
    GENERATED = "generated"
    LEARNER_OPEN = "learner_open"
    LEARNER_OPTION = "learner_option"


class SessionStatus(str, Enum):
    ACTIVE = "active"
    COMPLETED = "completed"
    ABORTED = "aborted"


@dataclass(frozen=True)
class Turn:
    index: int
    speaker: Speaker
    origin: TurnOrigin
    text: str
    node_id: str
    option_id: str | None = None
    timestamp: str = ""


@dataclass(frozen=True)
class OpenText:
    text: str


LearnerInput = OpenText | OptionChoice


@dataclass(frozen=True)
class SessionConfig:
    session_id: str | None = None
    # After the re-prompt budget is spent, the default is to advance to the
    # next node on the following answer; alternatively the original scripted
    # prompt is read out once more before that unconditional advance.
    repeat_prompt_after_budget: bool = False


@dataclass
class SessionState:
    session_id: str
    scenario_id: str
    current_node: str
    reprompt_count: int = 0
    transcript: list[Turn] = field(default_factory=list)
    status: SessionStatus = SessionStatus.ACTIVE
    config: "SessionConfig" = None  # type: ignore[assignment]
    # Set when the budget ran out and the scripted prompt was re-read; the
    # next answer advances without consulting the gate.
    awaiting_unconditional_advance: bool = False

    def __post_init__(self):
        if self.config is None:
            self.config = SessionConfig()


@dataclass(frozen=True)
class GateTrace:
    """What the gate decided for one learner turn, and what it led to."""

    final: Relevance
    decision: RelevanceDecision | None
    reprompt_issued: bool
    learner_turn_index: int
    generated_turn_index: int | None = None
    backend_failed: bool = False
    extraction_failed: bool = False

    @property
    def verdict(self) -> Relevance:
        return self.final


@dataclass(frozen=True)
class EngineOutcome:
    emitted: list[Turn]
    new_state: SessionState
    gate_trace: GateTrace | None = None


GateFn = Callable[[ScenarioNode, str], RelevanceDecision]
GeneratorFn = Callable[[ScenarioNode, Sequence[Turn], str], generation.FollowUp]


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class DialogueEngine:
    """Runs sessions over one validated scenario.

    The engine holds no per-session state; SessionState is passed in and out,
    so one engine instance serves any number of concurrent sessions.
    """

    def __init__(self, scenario: Scenario, gate: GateFn, generator: GeneratorFn):
        report = validate(scenario)
        if not report.ok:
            raise InvalidScenario(
                "scenario failed validation: "
                + "; ".join(f.code for f in report.errors)
            )
        self.scenario = scenario
        self._gate = gate
        self._generator = generator

    @classmethod
    def with_backend(cls, scenario: Scenario, backend: CompletionBackend) -> "DialogueEngine":
        """Wire the gate and generator to a single completion backend."""

        def gate(node: ScenarioNode, response: str) -> RelevanceDecision:
            return relevance.assess_relevance(node, response, backend)

        def generator(
            node: ScenarioNode, transcript: Sequence[Turn], response: str
        ) -> generation.FollowUp:
            return generation.generate_followup(node, transcript, response, backend)

        return cls(scenario, gate, generator)

    # -- session lifecycle --------------------------------------------------

    def start_session(
        self, config: SessionConfig | None = None
    ) -> tuple[SessionState, EngineOutcome]:
        config = config or SessionConfig()
        state = SessionState(
            session_id=config.session_id or uuid.uuid4().hex,
            scenario_id=self.scenario.id,
            current_node=self.scenario.start_node,
            config=config,
        )
        emitted = self._emit_from(state, self.scenario.start_node)
        return state, EngineOutcome(emitted=emitted, new_state=state)

    def handle_learner_input(
        self, state: SessionState, learner_input: LearnerInput
    ) -> EngineOutcome:
        """Feed one learner input through the state machine.

        Decision nodes transition on the chosen option. Reflection nodes run
        the gate: a relevant answer advances, a rejected one triggers a
        generated follow-up while the budget lasts, and once three follow-ups
        have been issued for the node the next answer advances regardless.
        """
        if state.status is not SessionStatus.ACTIVE:
            raise SessionNotActive(f"session {state.session_id} is {state.status.value}")
        node = self.scenario.nodes[state.current_node]

        if node.kind is NodeKind.DECISION:
            return self._handle_decision(state, node, learner_input)
        if node.kind is NodeKind.REFLECTION:
            return self._handle_reflection(state, node, learner_input)
        raise InputKindMismatch(f"node {node.id!r} does not take learner input")

    def abort_session(self, state: SessionState) -> SessionState:
        if state.status is not SessionStatus.ACTIVE:
            raise SessionNotActive(f"session {state.session_id} is {state.status.value}")
        state.status = SessionStatus.ABORTED
        return state

    # -- internals ----------------------------------------------------------

    def _handle_decision(
        self, state: SessionState, node: ScenarioNode, learner_input: LearnerInput
    ) -> EngineOutcome:
        if not isinstance(learner_input, OptionChoice):
            raise InputKindMismatch(
                f"decision node {node.id!r} expects an option choice"
            )
        target = next_node(self.scenario, node.id, learner_input)
        label = next(
            o.label for o in node.options if o.option_id == learner_input.option_id
        )
        self._append(
            state,
            speaker=Speaker.LEARNER,
            origin=TurnOrigin.LEARNER_OPTION,
            text=label,
            node_id=node.id,
            option_id=learner_input.option_id,
        )
        emitted = self._emit_from(state, target)
        return EngineOutcome(emitted=emitted, new_state=state)

    def _handle_reflection(
        self, state: SessionState, node: ScenarioNode, learner_input: LearnerInput
    ) -> EngineOutcome:
        if not isinstance(learner_input, OpenText):
            raise InputKindMismatch(
                f"reflection node {node.id!r} expects open text"
            )
        learner_turn = self._append(
            state,
            speaker=Speaker.LEARNER,
            origin=TurnOrigin.LEARNER_OPEN,
            text=learner_input.text,
            node_id=node.id,
        )

        if state.awaiting_unconditional_advance:
            state.awaiting_unconditional_advance = False
            emitted = self._advance(state, node)
            return EngineOutcome(emitted=emitted, new_state=state)

        decision: RelevanceDecision | None = None
        backend_failed = False
        try:
            decision = self._gate(node, learner_input.text)
            final = decision.final
        except BackendError as exc:
            logger.warning("gate backend failed, failing open: %s", exc)
            backend_failed = True
            final = Relevance.RELEVANT

        if final is Relevance.RELEVANT:
            emitted = self._advance(state, node)
            trace = GateTrace(
                final=Relevance.RELEVANT,
                decision=decision,
                reprompt_issued=False,
                learner_turn_index=learner_turn.index,
                backend_failed=backend_failed,
            )
            return EngineOutcome(emitted=emitted, new_state=state, gate_trace=trace)

        # Gate rejected the response.
        if state.reprompt_count < MAX_REPROMPTS:
            try:
                followup = self._generator(
                    node, state.transcript[:-1], learner_input.text
                )
            except (BackendError, ExtractionError) as exc:
                logger.warning("follow-up generation failed, failing open: %s", exc)
                emitted = self._advance(state, node)
                trace = GateTrace(
                    final=Relevance.RELEVANT,
                    decision=decision,
                    reprompt_issued=False,
                    learner_turn_index=learner_turn.index,
                    backend_failed=isinstance(exc, BackendError),
                    extraction_failed=isinstance(exc, ExtractionError),
                )
                return EngineOutcome(emitted=emitted, new_state=state, gate_trace=trace)
            generated = self._append(
                state,
                speaker=Speaker.SYSTEM,
                origin=TurnOrigin.GENERATED,
                text=followup.text,
                node_id=node.id,
            )
            state.reprompt_count += 1
            trace = GateTrace(
                final=Relevance.NOT_RELEVANT,
                decision=decision,
                reprompt_issued=True,
                learner_turn_index=learner_turn.index,
                generated_turn_index=generated.index,
            )
            return EngineOutcome(emitted=[generated], new_state=state, gate_trace=trace)

        # Budget exhausted.
        if state.config.repeat_prompt_after_budget:
            reread = self._append(
                state,
                speaker=Speaker.SYSTEM,
                origin=TurnOrigin.SCRIPTED,
                text=node.prompt_text,
                node_id=node.id,
            )
            state.awaiting_unconditional_advance = True
            trace = GateTrace(
                final=Relevance.NOT_RELEVANT,
                decision=decision,
                reprompt_issued=False,
                learner_turn_index=learner_turn.index,
            )
            return EngineOutcome(emitted=[reread], new_state=state, gate_trace=trace)

        emitted = self._advance(state, node)
        trace = GateTrace(
            final=Relevance.NOT_RELEVANT,
            decision=decision,
            reprompt_issued=False,
            learner_turn_index=learner_turn.index,
        )
        return EngineOutcome(emitted=emitted, new_state=state, gate_trace=trace)

    def _advance(self, state: SessionState, node: ScenarioNode) -> list[Turn]:
        target = next_node(self.scenario, node.id, ADVANCE)
        return self._emit_from(state, target)

    def _emit_from(self, state: SessionState, node_id: str) -> list[Turn]:
        """Emit the prompt at node_id, auto-advancing through statements
        until a node that waits for input (or a terminal) is reached."""
        state.reprompt_count = 0
        emitted = []
        current = self.scenario.nodes[node_id]
        while True:
            emitted.append(
                self._append(
                    state,
                    speaker=Speaker.SYSTEM,
                    origin=TurnOrigin.SCRIPTED,
                    text=current.prompt_text,
                    node_id=current.id,
                )
            )
            state.current_node = current.id
            if current.kind is NodeKind.TERMINAL:
                state.status = SessionStatus.COMPLETED
                break
            if current.kind is NodeKind.STATEMENT:
                current = self.scenario.nodes[current.next]  # type: ignore[index]
                continue
            break
        return emitted

    def _append(
        self,
        state: SessionState,
        *,
        speaker: Speaker,
        origin: TurnOrigin,
        text: str,
        node_id: str,
        option_id: str | None = None,
    ) -> Turn:
        turn = Turn(
            index=len(state.transcript),
            speaker=speaker,
            origin=origin,
            text=text,
            node_id=node_id,
            option_id=option_id,
            timestamp=_now(),
        )
        state.transcript.append(turn)
        return turn
