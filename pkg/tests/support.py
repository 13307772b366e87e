"""Shared test helpers: independent graph oracles and session drivers.

The graph helpers derive edges straight from node fields so they stay
independent of the validator's internals.
"""

from __future__ import annotations

import random

from reflectbot.engine import (
    DialogueEngine,
    OpenText,
    SessionConfig,
    SessionState,
    SessionStatus,
)
from reflectbot.scenario import NodeKind, OptionChoice, Scenario


def graph_edges(scenario: Scenario) -> set[tuple[str, str]]:
    edges = set()
    for node in scenario.nodes.values():
        if node.kind is NodeKind.DECISION:
            for option in node.options:
                edges.add((node.id, option.target))
        elif node.next is not None:
            edges.add((node.id, node.next))
    return edges


def bfs_reachable(edges: set[tuple[str, str]], start: str) -> set[str]:
    adjacency: dict[str, list[str]] = {}
    for src, dst in edges:
        adjacency.setdefault(src, []).append(dst)
    seen = {start}
    frontier = [start]
    while frontier:
        node = frontier.pop()
        for nxt in adjacency.get(node, []):
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return seen


def reaches_any(edges: set[tuple[str, str]], targets: set[str], all_nodes: set[str]) -> set[str]:
    """Nodes from which at least one of `targets` is reachable."""
    reverse: dict[str, list[str]] = {}
    for src, dst in edges:
        reverse.setdefault(dst, []).append(src)
    seen = set(targets)
    frontier = list(targets)
    while frontier:
        node = frontier.pop()
        for prev in reverse.get(node, []):
            if prev in seen or prev not in all_nodes:
                continue
            seen.add(prev)
            frontier.append(prev)
    return seen


WORDS = [
    "robot", "dance", "code", "lights", "idk", "because", "walk", "talk",
    "sensor", "glitter", "maybe", "spin", "arm", "wig", "fur", "song",
]


def random_open_text(rng: random.Random) -> str:
    if rng.random() < 0.08:
        return rng.choice(["", "   ", "\t"])
    return " ".join(rng.choice(WORDS) for _ in range(rng.randint(1, 6)))


def drive_random_session(
    engine: DialogueEngine,
    rng: random.Random,
    session_id: str | None = None,
    max_steps: int = 200,
) -> SessionState:
    """Feed random but type-correct inputs until the session completes."""
    state, _ = engine.start_session(SessionConfig(session_id=session_id))
    steps = 0
    while state.status is SessionStatus.ACTIVE:
        steps += 1
        if steps > max_steps:
            raise AssertionError("session did not terminate within the step budget")
        node = engine.scenario.nodes[state.current_node]
        if node.kind is NodeKind.DECISION:
            choice = rng.choice(node.options)
            engine.handle_learner_input(state, OptionChoice(choice.option_id))
        else:
            engine.handle_learner_input(state, OpenText(random_open_text(rng)))
    return state


def scripted_node_path(state: SessionState) -> list[str]:
    """Node ids of scripted system turns, consecutive repeats collapsed."""
    path: list[str] = []
    for turn in state.transcript:
        if turn.origin.value == "scripted":
            if not path or path[-1] != turn.node_id:
                path.append(turn.node_id)
    return path
