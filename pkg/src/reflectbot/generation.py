"""Follow-up generation: produce one encouraging, on-topic question when the
relevance gate rejects a learner response.

The prompt grounds the model in a sliding window of recent dialogue turns
(default 10) rather than the whole history, the node's scripted request, and
the node's generation exemplars. Output extraction enforces the single-
question contract: at most one non-question lead-in sentence plus exactly one
question, truncated at the first question mark.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from typing import Protocol, Sequence

from .errors import ExtractionError, MissingGate
from .llm import CompletionBackend, CompletionRequest
from .scenario import NodeKind, ScenarioNode

HISTORY_WINDOW = 10

GENERATION_TEMPLATE = (
    resources.files("reflectbot")
    .joinpath("prompts/followup_generation.txt")
    .read_text(encoding="utf-8")
)

# Stable template fragment for telling generation calls apart in scripted
# policies and logs.
GENERATION_MARKER = "kid-friendly"


class HistoryTurn(Protocol):
    """Anything with a speaker and text renders into the history block."""

    speaker: str
    text: str


@dataclass(frozen=True)
class _Line:
    speaker: str
    text: str


@dataclass(frozen=True)
class GenPromptBundle:
    system_text: str
    history_block: str
    prompt_text: str
    examples_block: str

    def user_text(self) -> str:
        return self.system_text


@dataclass(frozen=True)
class FollowUp:
    text: str
    raw: str


def render_history_block(transcript: Sequence[HistoryTurn], k: int = HISTORY_WINDOW) -> str:
    """Render the last min(k, len) turns, one per line, oldest first."""
    if k < 1:
        raise ValueError("k must be >= 1")
    lines = []
    for turn in transcript[-k:]:
        prefix = "Robot" if turn.speaker == "system" else "Learner"
        lines.append(f"{prefix}: {turn.text}")
    return "\n".join(lines)


def format_examples_block(node: ScenarioNode) -> str:
    assert node.gate is not None
    blocks = []
    for exemplar in node.gate.gen_exemplars:
        blocks.append(f"Situation: {exemplar.situation}\nFollow-up: {exemplar.followup}")
    return "\n\n".join(blocks)


def build_generation_prompt(
    node: ScenarioNode,
    transcript: Sequence[HistoryTurn],
    learner_response: str,
    k: int = HISTORY_WINDOW,
) -> GenPromptBundle:
    """Render the generation prompt for one rejected response.

    `transcript` is the dialogue before the offending response; the response
    itself is appended as the final history line so the model sees exactly
    what it must follow up on.
    """
    if node.kind is not NodeKind.REFLECTION or node.gate is None:
        raise MissingGate(f"node {node.id!r} has no gate")
    history = list(transcript) + [_Line(speaker="learner", text=learner_response)]
    history_block = render_history_block(history, k)
    examples_block = format_examples_block(node)
    system_text = GENERATION_TEMPLATE.format(
        history_block=history_block,
        prompt_text=node.prompt_text,
        examples_block=examples_block,
    )
    return GenPromptBundle(
        system_text=system_text,
        history_block=history_block,
        prompt_text=node.prompt_text,
        examples_block=examples_block,
    )


_QUOTES = "\"'“”‘’"


def extract_followup(raw: str) -> FollowUp:
    """Extract the follow-up question from raw model output.

    Keeps at most one lead-in sentence before the question, drops everything
    after the first question mark, and rejects output with no question at all.
    """
    text = raw.strip().strip(_QUOTES).strip()
    cut = text.find("?")
    if cut == -1:
        raise ExtractionError(f"no question in output: {raw[:80]!r}")
    text = text[: cut + 1]
    ends = [m.end() for m in re.finditer(r"[.!?]", text)]
    # ends[-1] is the question mark itself; keep from at most one sentence
    # boundary earlier.
    if len(ends) > 2:
        text = text[ends[-3]:]
    return FollowUp(text=text.strip(), raw=raw)


def generate_followup(
    node: ScenarioNode,
    transcript: Sequence[HistoryTurn],
    learner_response: str,
    backend: CompletionBackend,
) -> FollowUp:
    """Build the prompt, call the backend, extract the question."""
    bundle = build_generation_prompt(node, transcript, learner_response)
    raw = backend.complete(
        CompletionRequest(system_text="", user_text=bundle.user_text())
    )
    return extract_followup(raw)
