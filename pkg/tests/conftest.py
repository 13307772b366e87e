from __future__ import annotations

from importlib import resources
from pathlib import Path

import pytest

from reflectbot.llm import ScriptedBackend, ScriptedPolicy, ScriptedRule
from reflectbot.scenario import Scenario, load_scenario

FIXTURES = Path(__file__).parent / "fixtures"

FIG2_FOLLOWUP = (
    "That's a great starting point! What specific coding skills or tools do "
    "you think you'll use to make your robot walk and talk?"
)

MINIMAL_SCENARIO = """
{
  "id": "minimal",
  "version": "1",
  "start_node": "hello",
  "nodes": {
    "hello": {"kind": "statement", "prompt_text": "Hello!", "tts_enabled": false,
              "next": "bye"},
    "bye": {"kind": "terminal", "prompt_text": "Bye!", "tts_enabled": false}
  }
}
"""


def scenario_text() -> str:
    return (
        resources.files("reflectbot")
        .joinpath("scenarios/robot_camp.json")
        .read_text(encoding="utf-8")
    )


@pytest.fixture(scope="session")
def camp_scenario() -> Scenario:
    return load_scenario(scenario_text())


@pytest.fixture()
def minimal_scenario() -> Scenario:
    return load_scenario(MINIMAL_SCENARIO)


def golden_policy() -> ScriptedPolicy:
    """Policy reproducing the recorded exchange: the question detector always
    clears, generation returns the canned follow-up, and only the exact
    answer "by coding" fails the field check."""
    return ScriptedPolicy(
        rules=(
            ScriptedRule(match="interrogative", reply="NO"),
            ScriptedRule(match="kid-friendly", reply=FIG2_FOLLOWUP),
            ScriptedRule(match="by coding", reply="NO"),
        ),
        default_reply="YES",
    )


def always_no_policy(followup: str = "Can you tell me a little more?") -> ScriptedPolicy:
    """Field check always says NO; generation still produces a question."""
    return ScriptedPolicy(
        rules=(ScriptedRule(match="kid-friendly", reply=followup),),
        default_reply="NO",
    )


def always_yes_policy() -> ScriptedPolicy:
    return ScriptedPolicy(
        rules=(ScriptedRule(match="interrogative", reply="NO"),),
        default_reply="YES",
    )


@pytest.fixture()
def golden_backend() -> ScriptedBackend:
    return ScriptedBackend(golden_policy())
