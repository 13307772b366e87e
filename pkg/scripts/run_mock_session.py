#!/usr/bin/env python3
"""Drive one full dialogue session against the scripted mock backend and
print the transcript, including the generated follow-up drawn by the vague
planning answer. Handy as a smoke test and as a worked example of the
engine API.

Usage: python scripts/run_mock_session.py [--seed N]
"""

from __future__ import annotations

import argparse
import random
from importlib import resources

from reflectbot.engine import DialogueEngine, OpenText, SessionConfig, SessionStatus
from reflectbot.llm import ScriptedBackend, ScriptedPolicy, ScriptedRule
from reflectbot.scenario import NodeKind, OptionChoice, load_scenario

ANSWERS = {
    "goals_what": "walk and ctalk",
    "goals_new": "a robot that dances",
    "plans_how": "by coding",
    "activities_today": "I coded my robot to move and say word problems",
    "changes_what": "swapped the braids for a ponytail",
    "changes_why": "my friend said it would look cooler",
    "feelings_showcase": "happy and excited",
    "feelings_why": "because i love robots",
    "identity_creator": "yes because i can code robots now",
}

POLICY = ScriptedPolicy(
    rules=(
        ScriptedRule(match="interrogative", reply="NO"),
        ScriptedRule(
            match="kid-friendly",
            reply=(
                "That's a great starting point! What specific coding skills or "
                "tools do you think you'll use to make your robot walk and talk?"
            ),
        ),
        ScriptedRule(match="by coding", reply="NO"),
    ),
    default_reply="YES",
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=1, help="option-choice seed")
    args = parser.parse_args()
    rng = random.Random(args.seed)

    scenario = load_scenario(
        resources.files("reflectbot")
        .joinpath("scenarios/robot_camp.json")
        .read_text(encoding="utf-8")
    )
    engine = DialogueEngine.with_backend(scenario, ScriptedBackend(POLICY))
    state, outcome = engine.start_session(SessionConfig(session_id="demo"))

    retried: set[str] = set()
    while state.status is SessionStatus.ACTIVE:
        node = scenario.nodes[state.current_node]
        if node.kind is NodeKind.DECISION:
            choice = rng.choice(node.options)
            engine.handle_learner_input(state, OptionChoice(choice.option_id))
        else:
            answer = ANSWERS.get(node.id, "hmm")
            if node.id in retried:
                answer = "I will code it to walk and talk"
            retried.add(node.id)
            engine.handle_learner_input(state, OpenText(answer))

    for turn in state.transcript:
        who = "robot " if turn.speaker.value == "system" else "child "
        marker = "*" if turn.origin.value == "generated" else " "
        print(f"{turn.index:3d} {who}{marker} {turn.text}")
    generated = sum(1 for t in state.transcript if t.origin.value == "generated")
    print(f"\nsession {state.session_id}: {state.status.value}, "
          f"{len(state.transcript)} turns, {generated} generated follow-up(s)")


if __name__ == "__main__":
    main()
