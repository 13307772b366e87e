"""Dialogue scenario graph: node types, JSON parsing, validation, transitions.

A scenario is a finite state machine over four node kinds:

* ``reflection`` nodes ask an open-ended question and carry gate metadata
  (what a relevant answer should mention, plus worked examples).
* ``decision`` nodes present a fixed option menu and branch on the choice.
* ``statement`` nodes are system-only lines that auto-advance.
* ``terminal`` nodes end the dialogue.

Scenario objects are immutable after load and safe to share across sessions.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import KindMismatch, ParseError, SchemaError, UnknownOption


class NodeKind(str, Enum):
    REFLECTION = "reflection"
    DECISION = "decision"
    STATEMENT = "statement"
    TERMINAL = "terminal"


@dataclass(frozen=True)
class GateExemplar:
    """One worked example for the relevance gate: a sample learner response,
    the desired YES/NO verdict, and the reasoning behind it."""

    sample_response: str
    verdict: str  # "YES" or "NO"
    reasoning: str


@dataclass(frozen=True)
class GenExemplar:
    """One worked example for follow-up generation."""

    situation: str
    followup: str


@dataclass(frozen=True)
class GateSpec:
    """Per-node gate metadata.

    field_desc describes, in keywords, what a relevant answer to this node's
    prompt should contain. exemplars feed the relevance check; gen_exemplars
    feed follow-up generation.
    """

    field_desc: str
    exemplars: tuple[GateExemplar, ...]
    gen_exemplars: tuple[GenExemplar, ...] = ()


@dataclass(frozen=True)
class Option:
    option_id: str
    label: str
    target: str


@dataclass(frozen=True)
class ScenarioNode:
    id: str
    kind: NodeKind
    prompt_text: str
    tts_enabled: bool = True
    options: tuple[Option, ...] = ()
    next: str | None = None
    gate: GateSpec | None = None


@dataclass(frozen=True)
class Scenario:
    id: str
    version: str
    start_node: str
    nodes: dict[str, ScenarioNode] = field(default_factory=dict)


@dataclass(frozen=True)
class Finding:
    code: str
    message: str
    node_id: str | None = None


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    errors: tuple[Finding, ...] = ()
    warnings: tuple[Finding, ...] = ()

    def error_codes(self) -> set[str]:
        return {f.code for f in self.errors}


# Transition outcomes for next_node().


@dataclass(frozen=True)
class Advance:
    """Move along the node's single outgoing edge (non-decision nodes)."""


ADVANCE = Advance()


@dataclass(frozen=True)
class OptionChoice:
    option_id: str


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOP_LEVEL_KEYS = {"id", "version", "start_node", "nodes"}
_NODE_KEYS = {"kind", "prompt_text", "tts_enabled", "options", "next", "gate"}
_OPTION_KEYS = {"option_id", "label", "target"}
_GATE_KEYS = {"field_desc", "exemplars", "gen_exemplars"}
_EXEMPLAR_KEYS = {"sample_response", "verdict", "reasoning"}
_GEN_EXEMPLAR_KEYS = {"situation", "followup"}

# Keys starting with "_" (e.g. "_comment") are ignored inside nested objects
# so fixtures can annotate themselves; the top level stays strict.


def _reject_duplicate_keys(pairs):
    seen = set()
    for key, _ in pairs:
        if key in seen:
            raise SchemaError(f"duplicate key {key!r} in object")
        seen.add(key)
    return dict(pairs)


def _require_str(obj: dict, key: str, where: str, node_id: str | None = None) -> str:
    value = obj.get(key)
    if not isinstance(value, str):
        raise SchemaError(f"{where}: {key!r} must be a string", node_id=node_id)
    return value


def _check_keys(obj: dict, allowed: set[str], where: str, node_id: str | None,
                strict: bool = False) -> None:
    for key in obj:
        if key in allowed:
            continue
        if not strict and key.startswith("_"):
            continue
        raise SchemaError(f"{where}: unknown key {key!r}", node_id=node_id)


def _parse_gate(raw: dict, node_id: str) -> GateSpec:
    if not isinstance(raw, dict):
        raise SchemaError("gate must be an object", node_id=node_id)
    _check_keys(raw, _GATE_KEYS, "gate", node_id)
    field_desc = _require_str(raw, "field_desc", "gate", node_id)
    raw_exemplars = raw.get("exemplars")
    if not isinstance(raw_exemplars, list) or not raw_exemplars:
        raise SchemaError("gate requires a non-empty 'exemplars' list", node_id=node_id)
    exemplars = []
    for ex in raw_exemplars:
        if not isinstance(ex, dict):
            raise SchemaError("exemplar must be an object", node_id=node_id)
        _check_keys(ex, _EXEMPLAR_KEYS, "exemplar", node_id)
        verdict = _require_str(ex, "verdict", "exemplar", node_id)
        if verdict not in ("YES", "NO"):
            raise SchemaError(
                f"exemplar verdict must be YES or NO, got {verdict!r}", node_id=node_id
            )
        exemplars.append(
            GateExemplar(
                sample_response=_require_str(ex, "sample_response", "exemplar", node_id),
                verdict=verdict,
                reasoning=_require_str(ex, "reasoning", "exemplar", node_id),
            )
        )
    gen_exemplars = []
    for gx in raw.get("gen_exemplars", []):
        if not isinstance(gx, dict):
            raise SchemaError("gen_exemplar must be an object", node_id=node_id)
        _check_keys(gx, _GEN_EXEMPLAR_KEYS, "gen_exemplar", node_id)
        gen_exemplars.append(
            GenExemplar(
                situation=_require_str(gx, "situation", "gen_exemplar", node_id),
                followup=_require_str(gx, "followup", "gen_exemplar", node_id),
            )
        )
    return GateSpec(
        field_desc=field_desc,
        exemplars=tuple(exemplars),
        gen_exemplars=tuple(gen_exemplars),
    )


def _parse_node(node_id: str, raw: dict) -> ScenarioNode:
    if not isinstance(raw, dict):
        raise SchemaError("node must be an object", node_id=node_id)
    _check_keys(raw, _NODE_KEYS, "node", node_id)
    kind_raw = _require_str(raw, "kind", "node", node_id)
    try:
        kind = NodeKind(kind_raw)
    except ValueError:
        raise SchemaError(f"unknown node kind {kind_raw!r}", node_id=node_id) from None
    prompt_text = _require_str(raw, "prompt_text", "node", node_id)
    tts_enabled = raw.get("tts_enabled", True)
    if not isinstance(tts_enabled, bool):
        raise SchemaError("'tts_enabled' must be a boolean", node_id=node_id)

    options: tuple[Option, ...] = ()
    next_id: str | None = None
    gate: GateSpec | None = None

    if kind is NodeKind.DECISION:
        raw_options = raw.get("options")
        if not isinstance(raw_options, list) or not raw_options:
            raise SchemaError(
                "decision node requires a non-empty 'options' list", node_id=node_id
            )
        if "next" in raw:
            raise SchemaError("decision node must not have 'next'", node_id=node_id)
        if "gate" in raw:
            raise SchemaError("decision node must not have 'gate'", node_id=node_id)
        parsed = []
        for opt in raw_options:
            if not isinstance(opt, dict):
                raise SchemaError("option must be an object", node_id=node_id)
            _check_keys(opt, _OPTION_KEYS, "option", node_id)
            parsed.append(
                Option(
                    option_id=_require_str(opt, "option_id", "option", node_id),
                    label=_require_str(opt, "label", "option", node_id),
                    target=_require_str(opt, "target", "option", node_id),
                )
            )
        options = tuple(parsed)
    elif kind is NodeKind.REFLECTION:
        if "options" in raw:
            raise SchemaError("reflection node must not have 'options'", node_id=node_id)
        next_id = _require_str(raw, "next", "node", node_id)
        if "gate" not in raw:
            raise SchemaError("reflection node requires 'gate'", node_id=node_id)
        gate = _parse_gate(raw["gate"], node_id)
    elif kind is NodeKind.STATEMENT:
        if "options" in raw or "gate" in raw:
            raise SchemaError(
                "statement node must not have 'options' or 'gate'", node_id=node_id
            )
        next_id = _require_str(raw, "next", "node", node_id)
    else:  # terminal
        for key in ("options", "next", "gate"):
            if key in raw:
                raise SchemaError(
                    f"terminal node must not have {key!r}", node_id=node_id
                )

    return ScenarioNode(
        id=node_id,
        kind=kind,
        prompt_text=prompt_text,
        tts_enabled=tts_enabled,
        options=options,
        next=next_id,
        gate=gate,
    )


def load_scenario(document: str) -> Scenario:
    """Parse a scenario from its JSON document text.

    Raises ParseError on malformed JSON and SchemaError when the document
    does not match the scenario file schema (missing fields, unknown
    top-level keys, kind/field mismatches, duplicate ids).
    """
    try:
        data = json.loads(document, object_pairs_hook=_reject_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc
    if not isinstance(data, dict):
        raise SchemaError("scenario document must be a JSON object")
    _check_keys(data, _TOP_LEVEL_KEYS, "scenario", None, strict=True)
    for key in _TOP_LEVEL_KEYS:
        if key not in data:
            raise SchemaError(f"scenario: missing required key {key!r}")
    scenario_id = _require_str(data, "id", "scenario")
    version = _require_str(data, "version", "scenario")
    start_node = _require_str(data, "start_node", "scenario")
    raw_nodes = data["nodes"]
    if not isinstance(raw_nodes, dict) or not raw_nodes:
        raise SchemaError("'nodes' must be a non-empty object keyed by node id")
    nodes = {nid: _parse_node(nid, raw) for nid, raw in raw_nodes.items()}
    return Scenario(id=scenario_id, version=version, start_node=start_node, nodes=nodes)


def load_scenario_file(path: str | Path) -> Scenario:
    return load_scenario(Path(path).read_text(encoding="utf-8"))


def to_document(scenario: Scenario) -> dict:
    """Serialize back to the file schema. load(dumps(to_document(s))) == s."""
    nodes: dict[str, dict] = {}
    for nid, node in scenario.nodes.items():
        raw: dict = {"kind": node.kind.value, "prompt_text": node.prompt_text,
                     "tts_enabled": node.tts_enabled}
        if node.kind is NodeKind.DECISION:
            raw["options"] = [
                {"option_id": o.option_id, "label": o.label, "target": o.target}
                for o in node.options
            ]
        elif node.kind in (NodeKind.REFLECTION, NodeKind.STATEMENT):
            raw["next"] = node.next
        if node.gate is not None:
            raw["gate"] = {
                "field_desc": node.gate.field_desc,
                "exemplars": [
                    {
                        "sample_response": e.sample_response,
                        "verdict": e.verdict,
                        "reasoning": e.reasoning,
                    }
                    for e in node.gate.exemplars
                ],
                "gen_exemplars": [
                    {"situation": g.situation, "followup": g.followup}
                    for g in node.gate.gen_exemplars
                ],
            }
        nodes[nid] = raw
    return {
        "id": scenario.id,
        "version": scenario.version,
        "start_node": scenario.start_node,
        "nodes": nodes,
    }


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

RECOMMENDED_MIN_EXEMPLARS = 5


def _node_targets(node: ScenarioNode) -> list[str]:
    if node.kind is NodeKind.DECISION:
        return [o.target for o in node.options]
    if node.next is not None:
        return [node.next]
    return []


def validate(scenario: Scenario) -> ValidationReport:
    """Structural validation of a scenario graph.

    Collects every defect instead of stopping at the first: dangling edges,
    nodes unreachable from the start, nodes with no path to a terminal,
    shape violations (missing options/next/gate), empty gates, and node ids
    that disagree with their map key. ok is true iff there are no errors.
    """
    errors: list[Finding] = []
    warnings: list[Finding] = []

    def err(code: str, message: str, node_id: str | None = None) -> None:
        errors.append(Finding(code=code, message=message, node_id=node_id))

    for key, node in scenario.nodes.items():
        if node.id != key:
            err("NODE_ID_MISMATCH",
                f"node stored under key {key!r} has id {node.id!r}", node_id=key)

    for node in scenario.nodes.values():
        if node.kind is NodeKind.DECISION:
            if not node.options:
                err("MISSING_OPTIONS", "decision node has no options", node.id)
            if node.next is not None:
                err("UNEXPECTED_NEXT", "decision node must not have next", node.id)
            option_ids = [o.option_id for o in node.options]
            if len(option_ids) != len(set(option_ids)):
                err("DUPLICATE_OPTION", "option ids not unique", node.id)
        elif node.kind in (NodeKind.REFLECTION, NodeKind.STATEMENT):
            if node.next is None:
                err("MISSING_NEXT", f"{node.kind.value} node has no next", node.id)
            if node.options:
                err("UNEXPECTED_OPTIONS",
                    f"{node.kind.value} node must not have options", node.id)
        else:  # terminal
            if node.next is not None or node.options:
                err("TERMINAL_WITH_EXIT", "terminal node has outgoing edges", node.id)
        if node.kind is NodeKind.REFLECTION:
            if node.gate is None:
                err("EMPTY_GATE", "reflection node has no gate", node.id)
            else:
                if not node.gate.exemplars:
                    err("EMPTY_GATE", "gate has no exemplars", node.id)
                elif len(node.gate.exemplars) < RECOMMENDED_MIN_EXEMPLARS:
                    warnings.append(Finding(
                        code="FEW_EXEMPLARS",
                        message=(f"gate has {len(node.gate.exemplars)} exemplars; "
                                 f"{RECOMMENDED_MIN_EXEMPLARS}-10 recommended"),
                        node_id=node.id,
                    ))
                if not node.gate.field_desc.strip():
                    err("EMPTY_FIELD_DESC", "gate field_desc is empty", node.id)
        elif node.gate is not None:
            err("UNEXPECTED_GATE",
                f"{node.kind.value} node must not have a gate", node.id)

        for target in _node_targets(node):
            if target not in scenario.nodes:
                err("DANGLING_EDGE",
                    f"transition target {target!r} does not exist", node.id)

    terminals = {n.id for n in scenario.nodes.values() if n.kind is NodeKind.TERMINAL}
    if not terminals:
        err("NO_TERMINAL", "scenario has no terminal node")

    if scenario.start_node not in scenario.nodes:
        err("UNKNOWN_START", f"start_node {scenario.start_node!r} does not exist")
    else:
        reachable = _reachable_from(scenario, scenario.start_node)
        for nid in sorted(set(scenario.nodes) - reachable):
            err("UNREACHABLE_NODE", "node not reachable from start", nid)

    if terminals:
        # Walk the reversed graph from all terminals; anything not visited
        # can loop forever without an exit.
        reaches_terminal = _reverse_reachable(scenario, terminals)
        for nid in sorted(set(scenario.nodes) - reaches_terminal):
            err("NO_TERMINAL_PATH", "no terminal reachable from node", nid)

    return ValidationReport(ok=not errors, errors=tuple(errors), warnings=tuple(warnings))


def _reachable_from(scenario: Scenario, start: str) -> set[str]:
    seen = {start}
    queue = deque([start])
    while queue:
        node = scenario.nodes.get(queue.popleft())
        if node is None:
            continue
        for target in _node_targets(node):
            if target in scenario.nodes and target not in seen:
                seen.add(target)
                queue.append(target)
    return seen


def _reverse_reachable(scenario: Scenario, roots: set[str]) -> set[str]:
    incoming: dict[str, set[str]] = {nid: set() for nid in scenario.nodes}
    for node in scenario.nodes.values():
        for target in _node_targets(node):
            if target in incoming:
                incoming[target].add(node.id)
    seen = set(roots)
    queue = deque(roots)
    while queue:
        for source in incoming.get(queue.popleft(), ()):
            if source not in seen:
                seen.add(source)
                queue.append(source)
    return seen


# ---------------------------------------------------------------------------
# Transitions
# ---------------------------------------------------------------------------


def next_node(scenario: Scenario, current: str, outcome: Advance | OptionChoice) -> str:
    """Pure transition function: the id of the node that follows `current`.

    Advance follows the single outgoing edge of reflection/statement nodes;
    OptionChoice selects a decision branch. Raises KindMismatch when the
    outcome type does not fit the node kind and UnknownOption for an
    undefined option id.
    """
    node = scenario.nodes[current]
    if node.kind is NodeKind.DECISION:
        if not isinstance(outcome, OptionChoice):
            raise KindMismatch(f"decision node {current!r} requires an option choice")
        for option in node.options:
            if option.option_id == outcome.option_id:
                return option.target
        raise UnknownOption(
            f"node {current!r} has no option {outcome.option_id!r}"
        )
    if isinstance(outcome, OptionChoice):
        raise KindMismatch(f"{node.kind.value} node {current!r} takes no options")
    if node.next is None:
        raise KindMismatch(f"{node.kind.value} node {current!r} has no next node")
    return node.next
