#!/usr/bin/env python3
"""Record the golden replay fixture: one full session over the packaged
scenario, driven by the canned learner inputs and the scripted backend
policy, persisted as tests/fixtures/golden_session.jsonl (plus the policy
file the replay command needs).

The recorded exchange includes the vague planning answer "by coding", which
fails the relevance gate and draws exactly one generated follow-up before
the learner elaborates.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from reflectbot.engine import DialogueEngine, OpenText, SessionConfig
from reflectbot.gateway import SessionRuntime, persist_new_turns
from reflectbot.llm import ScriptedBackend, ScriptedPolicy
from reflectbot.scenario import OptionChoice, load_scenario
from reflectbot.store import TranscriptStore

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

FIG2_FOLLOWUP = (
    "That's a great starting point! What specific coding skills or tools do "
    "you think you'll use to make your robot walk and talk?"
)

POLICY = {
    "rules": [
        {"match": "interrogative", "reply": "NO"},
        {"match": "kid-friendly", "reply": FIG2_FOLLOWUP},
        {"match": "by coding", "reply": "NO"},
    ],
    "default_reply": "YES",
}

INPUTS = [
    OptionChoice("yes"),                                   # good day
    OptionChoice("yes"),                                   # remembers goals
    OpenText("walk and ctalk"),                            # goal
    OptionChoice("yes"),                                   # has a plan
    OpenText("by coding"),                                 # vague -> follow-up
    OpenText("I will code it to walk and talk"),           # elaboration
    OpenText("I coded my robot to move and say word problems"),
    OptionChoice("no"),                                    # nothing changed
    OpenText("happy and excited"),
    OpenText("because i love robots"),
    OpenText("yes because i can code robots now"),
]


def main() -> None:
    policy_path = FIXTURES / "golden_policy.json"
    policy_path.write_text(json.dumps(POLICY, indent=2) + "\n", encoding="utf-8")

    session_path = FIXTURES / "golden_session.jsonl"
    session_path.unlink(missing_ok=True)

    scenario = load_scenario(
        resources.files("reflectbot")
        .joinpath("scenarios/robot_camp.json")
        .read_text(encoding="utf-8")
    )
    backend = ScriptedBackend(ScriptedPolicy.from_dict(POLICY))
    engine = DialogueEngine.with_backend(scenario, backend)
    store = TranscriptStore(FIXTURES)

    state, outcome = engine.start_session(SessionConfig(session_id="golden_session"))
    store.create(state.session_id, scenario.id)
    runtime = SessionRuntime(engine, state)
    persist_new_turns(store, runtime, outcome)
    for learner_input in INPUTS:
        outcome = engine.handle_learner_input(state, learner_input)
        persist_new_turns(store, runtime, outcome)
    store.finish(state.session_id, state.status)

    generated = [t for t in state.transcript if t.origin.value == "generated"]
    assert state.status.value == "completed", state.status
    assert len(generated) == 1 and generated[0].text == FIG2_FOLLOWUP
    print(f"wrote {session_path} ({len(state.transcript)} turns, "
          f"{len(generated)} generated)")
    print(f"wrote {policy_path}")


if __name__ == "__main__":
    main()
