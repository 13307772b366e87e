"""Relevance gate: decide whether an open learner response is reflective
enough for the current prompt.

Two-step pipeline over a completion backend:

1. Field check: does the response contain at least a hint of the node's
   target information? Few-shot prompt built from the node's gate metadata.
2. Question detector: responses that pass the field check but are themselves
   questions are rejected, so the dialogue does not advance on a counter-
   question.

Blank responses are rejected locally without any backend call. Malformed
model output fails open (treated as relevant) so a flaky backend cannot trap
the learner in re-prompts.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from enum import Enum
from importlib import resources

from .errors import MissingGate
from .llm import CompletionBackend, CompletionRequest
from .scenario import NodeKind, ScenarioNode


def _load_template(name: str) -> str:
    return resources.files("reflectbot").joinpath(f"prompts/{name}").read_text(
        encoding="utf-8"
    )


FIELD_CHECK_TEMPLATE = _load_template("relevance_check.txt")
QUESTION_DETECTOR_TEMPLATE = _load_template("question_detector.txt")

# Stable template fragments used to tell pipeline stages apart in scripted
# policies and logs.
FIELD_CHECK_MARKER = "evaluating whether a user response"
QUESTION_DETECTOR_MARKER = "interrogative constructions"


class Relevance(str, Enum):
    RELEVANT = "relevant"
    NOT_RELEVANT = "not_relevant"
    MALFORMED = "malformed"


@dataclass(frozen=True)
class Verdict:
    value: Relevance
    raw: str


@dataclass(frozen=True)
class GatePromptBundle:
    """Fully rendered field-check input: the template with the node's field
    description and formatted exemplars, plus the response under test."""

    system_text: str
    field_desc: str
    examples_section: str
    candidate_response: str

    def user_text(self) -> str:
        # The rendered template ends at the task slot; the candidate response
        # fills it. Sent as one user message so scripted policies can match
        # on both the stage marker and the response.
        return self.system_text + self.candidate_response


@dataclass(frozen=True)
class RelevanceDecision:
    final: Relevance  # RELEVANT or NOT_RELEVANT only
    stage_a_verdict: Verdict | None = None
    interrogative_verdict: Verdict | None = None
    local_short_circuit: str | None = None  # "blank"


def format_examples_section(node: ScenarioNode) -> str:
    assert node.gate is not None
    blocks = []
    for exemplar in node.gate.exemplars:
        blocks.append(
            f"Response: {exemplar.sample_response}\n"
            f"Verdict: {exemplar.verdict}\n"
            f"Reasoning: {exemplar.reasoning}"
        )
    return "\n\n".join(blocks)


def build_gate_prompt(node: ScenarioNode, response: str) -> GatePromptBundle:
    """Render the field-check prompt for one node and candidate response."""
    if node.kind is not NodeKind.REFLECTION or node.gate is None:
        raise MissingGate(f"node {node.id!r} has no gate")
    examples_section = format_examples_section(node)
    system_text = FIELD_CHECK_TEMPLATE.format(
        field_desc=node.gate.field_desc,
        examples_section=examples_section,
    )
    return GatePromptBundle(
        system_text=system_text,
        field_desc=node.gate.field_desc,
        examples_section=examples_section,
        candidate_response=response,
    )


def build_interrogative_prompt(response: str) -> str:
    """Render the question-detector prompt with the message under test."""
    if not response:
        raise ValueError("response must be non-empty")
    return QUESTION_DETECTOR_TEMPLATE + response


_VERDICT_STRIP = string.punctuation


def parse_verdict(raw: str) -> Verdict:
    """Map raw model output onto a verdict.

    Only the first whitespace-delimited token counts, case-folded and with
    surrounding punctuation stripped: YES means relevant, NO not relevant,
    anything else is malformed. Total: never raises.
    """
    tokens = raw.split()
    if not tokens:
        return Verdict(Relevance.MALFORMED, raw)
    token = tokens[0].strip(_VERDICT_STRIP).casefold()
    if token == "yes":
        return Verdict(Relevance.RELEVANT, raw)
    if token == "no":
        return Verdict(Relevance.NOT_RELEVANT, raw)
    return Verdict(Relevance.MALFORMED, raw)


def assess_relevance(
    node: ScenarioNode, response: str, backend: CompletionBackend
) -> RelevanceDecision:
    """Run the full gate pipeline for one open response.

    Makes at most two backend calls: the field check, then the question
    detector only if the field check passed. Blank input short-circuits to
    not-relevant with zero calls. Backend exceptions propagate so the caller
    can apply its fail-open policy.
    """
    if not response.strip():
        return RelevanceDecision(
            final=Relevance.NOT_RELEVANT, local_short_circuit="blank"
        )

    bundle = build_gate_prompt(node, response)
    stage_a = parse_verdict(
        backend.complete(CompletionRequest(system_text="", user_text=bundle.user_text()))
    )
    if stage_a.value is Relevance.NOT_RELEVANT:
        return RelevanceDecision(final=Relevance.NOT_RELEVANT, stage_a_verdict=stage_a)
    if stage_a.value is Relevance.MALFORMED:
        # Fail open: an unreadable verdict must not trap the learner.
        return RelevanceDecision(final=Relevance.RELEVANT, stage_a_verdict=stage_a)

    interrogative = parse_verdict(
        backend.complete(
            CompletionRequest(
                system_text="", user_text=build_interrogative_prompt(response)
            )
        )
    )
    if interrogative.value is Relevance.RELEVANT:
        # The detector answered YES: the response is itself a question.
        final = Relevance.NOT_RELEVANT
    else:
        # NO or malformed both let the response through.
        final = Relevance.RELEVANT
    return RelevanceDecision(
        final=final, stage_a_verdict=stage_a, interrogative_verdict=interrogative
    )
