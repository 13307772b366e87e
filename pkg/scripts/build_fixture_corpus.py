#!/usr/bin/env python3
"""Write the two hand-built fixture sessions used by the metrics tests.

The turn sequences below are authored by hand (texts, origins, gate events);
this script only formats them into the session JSONL layout. The companion
oracle file (tests/fixtures/metrics_oracle.json) holds independently
hand-computed statistics for exactly this corpus, so regenerating the files
must never change their content.
"""

from __future__ import annotations

import json
from pathlib import Path

OUT_DIR = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "store_corpus"

FIG2_FOLLOWUP = (
    "That's a great starting point! What specific coding skills or tools do "
    "you think you'll use to make your robot walk and talk?"
)


def turn(index, speaker, origin, text, node_id, option_id=None, ts=None):
    out = {
        "kind": "turn",
        "index": index,
        "speaker": speaker,
        "origin": origin,
        "text": text,
        "node_id": node_id,
        "timestamp": ts or f"2025-07-15T14:{index // 60:02d}:{index % 60:02d}+00:00",
    }
    if option_id is not None:
        out["option_id"] = option_id
    return out


def verdict(value, raw):
    return {"value": value, "raw": raw}


def gate_event(turn_index, final, stage_a=None, interrogative=None,
               short_circuit=None, generated=None):
    return {
        "kind": "gate_event",
        "turn_index": turn_index,
        "final": final,
        "stage_a": stage_a,
        "interrogative": interrogative,
        "local_short_circuit": short_circuit,
        "generated_turn_index": generated,
        "backend_failed": False,
    }


YES = verdict("relevant", "YES")
NO = verdict("not_relevant", "NO")
NOT_Q = verdict("not_relevant", "NO")  # detector says: not a question


def session_a() -> list[dict]:
    lines: list[dict] = [
        {"kind": "header", "session_id": "fixture-a",
         "scenario_id": "robot-camp-reflection",
         "started_at": "2025-07-15T14:00:00+00:00"},
        turn(0, "system", "scripted",
             "Hi! I'm your robot buddy. It's so nice to chat with you today!",
             "rapport_greeting"),
        turn(1, "system", "scripted",
             "Are you having a good day at camp so far?", "rapport_day"),
        turn(2, "learner", "learner_option", "Yes", "rapport_day", option_id="yes"),
        turn(3, "system", "scripted",
             "Do you remember the goals you set for your robot for the showcase?",
             "goals_remember"),
        turn(4, "learner", "learner_option", "Yes", "goals_remember", option_id="yes"),
        turn(5, "system", "scripted",
             "Nice! What do you want your robot to do?", "goals_what"),
        turn(6, "learner", "learner_open", "walk and ctalk", "goals_what"),
        gate_event(6, "relevant", stage_a=YES, interrogative=NOT_Q),
        turn(7, "system", "scripted",
             "Do you have a plan for how to make that happen?", "plans_have"),
        turn(8, "learner", "learner_option", "Yes", "plans_have", option_id="yes"),
        turn(9, "system", "scripted",
             "Yay! How do you think you'll do it?", "plans_how"),
        turn(10, "learner", "learner_open", "by coding", "plans_how"),
        turn(11, "system", "generated", FIG2_FOLLOWUP, "plans_how"),
        gate_event(10, "not_relevant", stage_a=NO, generated=11),
        turn(12, "learner", "learner_open", "I will code it to walk and talk",
             "plans_how"),
        gate_event(12, "relevant", stage_a=YES, interrogative=NOT_Q),
        turn(13, "system", "scripted", "What did you get done today?",
             "activities_today"),
        turn(14, "learner", "learner_open",
             "I coded my robot to move and say word problems", "activities_today"),
        gate_event(14, "relevant", stage_a=YES, interrogative=NOT_Q),
        turn(15, "system", "scripted",
             "Did your goals or plans change while you were working?", "changes_any"),
        turn(16, "learner", "learner_option", "No", "changes_any", option_id="no"),
        turn(17, "system", "scripted",
             "The robot runway is coming up! How are you feeling about showing your robot?",
             "feelings_showcase"),
        turn(18, "learner", "learner_open", "happy and excited", "feelings_showcase"),
        gate_event(18, "relevant", stage_a=YES, interrogative=NOT_Q),
        turn(19, "system", "scripted", "Why do you feel that way?", "feelings_why"),
        # The permissive pass: a bare connective sails through the gate.
        turn(20, "learner", "learner_open", "because", "feelings_why"),
        gate_event(20, "relevant", stage_a=YES, interrogative=NOT_Q),
        turn(21, "system", "scripted",
             "Do you feel more like a technology creator now than when camp started?",
             "identity_creator"),
        turn(22, "learner", "learner_open", "yes because i can code robots now",
             "identity_creator"),
        gate_event(22, "relevant", stage_a=YES, interrogative=NOT_Q),
        turn(23, "system", "scripted",
             "Thank you for sharing with me today! I loved hearing about your work. "
             "See you on the runway!", "wrapup"),
        turn(24, "system", "scripted", "Bye for now! Keep creating amazing things!",
             "farewell"),
        {"kind": "status", "status": "completed",
         "ended_at": "2025-07-15T14:09:00+00:00"},
    ]
    return lines


def session_b() -> list[dict]:
    lines: list[dict] = [
        {"kind": "header", "session_id": "fixture-b",
         "scenario_id": "robot-camp-reflection",
         "started_at": "2025-07-15T15:00:00+00:00"},
        turn(0, "system", "scripted",
             "Hi! I'm your robot buddy. It's so nice to chat with you today!",
             "rapport_greeting"),
        turn(1, "system", "scripted",
             "Are you having a good day at camp so far?", "rapport_day"),
        turn(2, "learner", "learner_option", "No", "rapport_day", option_id="no"),
        turn(3, "system", "scripted",
             "Aw, I'm sorry to hear that. I hope talking with me makes your day a "
             "little better!", "rapport_cheer"),
        turn(4, "system", "scripted",
             "Do you remember the goals you set for your robot for the showcase?",
             "goals_remember"),
        turn(5, "learner", "learner_option", "No", "goals_remember", option_id="no"),
        turn(6, "system", "scripted",
             "No worries! What would you like to do instead?", "goals_new"),
        turn(7, "learner", "learner_open", "idk", "goals_new"),
        turn(8, "system", "generated",
             "That's okay! Can you think of one fun thing you'd love your robot to do?",
             "goals_new"),
        gate_event(7, "not_relevant", stage_a=NO, generated=8),
        turn(9, "learner", "learner_open", "maybe dancing", "goals_new"),
        turn(10, "system", "generated",
             "Dancing sounds awesome! What moves do you want your robot to show off?",
             "goals_new"),
        gate_event(9, "not_relevant", stage_a=NO, generated=10),
        turn(11, "learner", "learner_open", "spin and wave its arms", "goals_new"),
        gate_event(11, "relevant", stage_a=YES, interrogative=NOT_Q),
        turn(12, "system", "scripted",
             "Do you have a plan for how to make that happen?", "plans_have"),
        turn(13, "learner", "learner_option", "No", "plans_have", option_id="no"),
        turn(14, "system", "scripted",
             "I'm really into fashion! Beyoncé has blown me away with her Cowboy "
             "Carter look. We could definitely work on something in time for her tour "
             "in D.C.!", "cocreate_idea"),
        turn(15, "system", "scripted",
             "Yay! How do you think you'll do it?", "plans_how"),
        # Blank answer: rejected locally, still stored and re-prompted.
        turn(16, "learner", "learner_open", "", "plans_how"),
        turn(17, "system", "generated",
             "No rush! What's one step you might try first to make the dancing happen?",
             "plans_how"),
        gate_event(16, "not_relevant", short_circuit="blank", generated=17),
        turn(18, "learner", "learner_open", "leave me alone", "plans_how"),
        turn(19, "system", "generated",
             "I'm still here to help. Want to tell me just one small thing about your "
             "plan?", "plans_how"),
        gate_event(18, "not_relevant", stage_a=NO, generated=19),
        {"kind": "status", "status": "aborted",
         "ended_at": "2025-07-15T15:06:30+00:00"},
    ]
    return lines


def main() -> None:
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    for name, lines in (("fixture-a", session_a()), ("fixture-b", session_b())):
        path = OUT_DIR / f"{name}.jsonl"
        path.write_text(
            "".join(json.dumps(line, ensure_ascii=False) + "\n" for line in lines),
            encoding="utf-8",
        )
        print(f"wrote {path} ({len(lines)} lines)")


if __name__ == "__main__":
    main()
