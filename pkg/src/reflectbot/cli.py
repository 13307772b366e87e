"""Operator command line: serve the gateway, validate scenarios, replay
recorded sessions against a scripted backend, and compute corpus metrics.

Exit codes are stable: 0 success, 1 semantic failure (invalid scenario,
replay divergence, dangling gold label), 2 environment or IO failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from .engine import DialogueEngine, OpenText, SessionConfig, Speaker, TurnOrigin
from .errors import (
    DanglingLabel,
    InputKindMismatch,
    KindMismatch,
    ParseError,
    SchemaError,
    SessionNotActive,
    StorageError,
    UnknownOption,
)
from .gateway import GatewayConfig, create_app
from .llm import (
    CompletionBackend,
    HttpCompletionClient,
    ScriptedBackend,
    ScriptedPolicy,
)
from .scenario import OptionChoice, Scenario, load_scenario_file, validate
from .store import (
    MetricsReport,
    TranscriptRecord,
    TranscriptStore,
    compute_metrics,
    confusion_matrix,
    load_gold_labels,
    load_record,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_IO = 2


@dataclass(frozen=True)
class Divergence:
    turn_index: int
    expected: str | None
    actual: str | None


@dataclass(frozen=True)
class ReplayResult:
    matched: bool
    first_divergence: Divergence | None = None


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def cmd_validate(path: str) -> int:
    try:
        scenario = load_scenario_file(path)
    except OSError as exc:
        print(f"cannot read {path}: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ParseError, SchemaError) as exc:
        print(f"cannot parse {path}: {exc}", file=sys.stderr)
        return EXIT_IO
    report = validate(scenario)
    for finding in report.errors:
        where = f" [{finding.node_id}]" if finding.node_id else ""
        print(f"ERROR {finding.code}{where}: {finding.message}")
    for finding in report.warnings:
        where = f" [{finding.node_id}]" if finding.node_id else ""
        print(f"WARNING {finding.code}{where}: {finding.message}")
    if report.ok:
        print(f"{scenario.id}: OK ({len(scenario.nodes)} nodes, "
              f"{len(report.warnings)} warnings)")
        return EXIT_OK
    print(f"{scenario.id}: INVALID ({len(report.errors)} errors)")
    return EXIT_FAILURE


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------


def replay_record(
    record: TranscriptRecord,
    scenario: Scenario,
    backend: CompletionBackend,
    fuzzy: bool = False,
) -> ReplayResult:
    """Re-drive the engine with the recorded learner inputs and compare the
    system turns it emits against the recording, in order.

    Exact mode compares turn text; fuzzy mode compares structure only
    (origin and node id), which is the right check for transcripts recorded
    against a live, non-deterministic model.
    """
    engine = DialogueEngine.with_backend(scenario, backend)
    expected = [t for t in record.turns if t.speaker is Speaker.SYSTEM]
    learner_turns = [t for t in record.turns if t.speaker is Speaker.LEARNER]
    cursor = 0

    def compare(emitted) -> Divergence | None:
        nonlocal cursor
        for turn in emitted:
            if cursor >= len(expected):
                return Divergence(turn_index=turn.index, expected=None, actual=turn.text)
            want = expected[cursor]
            if fuzzy:
                same = want.origin is turn.origin and want.node_id == turn.node_id
            else:
                same = want.text == turn.text
            if not same:
                return Divergence(
                    turn_index=want.index, expected=want.text, actual=turn.text
                )
            cursor += 1
        return None

    state, outcome = engine.start_session(SessionConfig())
    divergence = compare(outcome.emitted)
    for learner_turn in learner_turns:
        if divergence is not None:
            break
        if learner_turn.origin is TurnOrigin.LEARNER_OPTION:
            learner_input: OpenText | OptionChoice = OptionChoice(
                learner_turn.option_id or ""
            )
        else:
            learner_input = OpenText(learner_turn.text)
        try:
            outcome = engine.handle_learner_input(state, learner_input)
        except (InputKindMismatch, UnknownOption, KindMismatch, SessionNotActive) as exc:
            divergence = Divergence(
                turn_index=learner_turn.index,
                expected="<input accepted>",
                actual=f"{type(exc).__name__}: {exc}",
            )
            break
        divergence = compare(outcome.emitted)
    if divergence is None and cursor < len(expected):
        want = expected[cursor]
        divergence = Divergence(turn_index=want.index, expected=want.text, actual=None)
    return ReplayResult(matched=divergence is None, first_divergence=divergence)


def cmd_replay(
    transcript_path: str, scenario_path: str, policy_path: str, fuzzy: bool = False
) -> int:
    try:
        record = load_record(transcript_path)
        scenario = load_scenario_file(scenario_path)
        policy = ScriptedPolicy.from_file(policy_path)
    except (OSError, StorageError, ParseError, SchemaError, json.JSONDecodeError, KeyError) as exc:
        print(f"cannot load replay inputs: {exc}", file=sys.stderr)
        return EXIT_IO
    result = replay_record(record, scenario, ScriptedBackend(policy), fuzzy=fuzzy)
    if result.matched:
        print(f"{record.session_id}: replay matched ({len(record.turns)} turns)")
        return EXIT_OK
    d = result.first_divergence
    assert d is not None
    print(f"{record.session_id}: divergence at turn {d.turn_index}")
    print(f"  expected: {d.expected!r}")
    print(f"  actual:   {d.actual!r}")
    return EXIT_FAILURE


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def _fmt(value: float | None, digits: int = 2) -> str:
    return "-" if value is None else f"{value:.{digits}f}"


def _mean_sd(mean: float | None, sd: float | None) -> str:
    return f"{_fmt(mean)} ({_fmt(sd)})"


def render_metrics_table(report: MetricsReport, matrix: dict[str, int] | None) -> str:
    rows: list[tuple[str, str]] = [
        ("Sessions", str(report.session_count)),
        ("Dialogue turns", str(report.total_turns)),
        ("  per session mean (SD)",
         _mean_sd(report.turns_per_session_mean, report.turns_per_session_sd)),
        ("System turns", str(report.system_turns)),
        ("  per session mean (SD)",
         _mean_sd(report.system_turns_per_session_mean, report.system_turns_per_session_sd)),
        ("Learner turns", str(report.learner_turns)),
        ("  per session mean (SD)",
         _mean_sd(report.learner_turns_per_session_mean, report.learner_turns_per_session_sd)),
        ("  open-ended", str(report.open_turns)),
        ("  option-based", str(report.option_turns)),
        ("System words per turn (SD)",
         _mean_sd(report.system_words_per_turn_mean, report.system_words_per_turn_sd)),
        ("Learner words per open turn (SD)",
         _mean_sd(report.learner_words_per_open_turn_mean,
                  report.learner_words_per_open_turn_sd)),
        ("Follow-up generations", str(report.llm_triggers)),
        ("  per session mean (SD)",
         _mean_sd(report.llm_triggers_per_session_mean, report.llm_triggers_per_session_sd)),
        ("Repeat follow-ups on one prompt", str(report.followup_triggers)),
        ("  per session mean (SD)",
         _mean_sd(report.followup_triggers_per_session_mean,
                  report.followup_triggers_per_session_sd)),
        ("Session duration seconds mean (SD)",
         _mean_sd(report.duration_seconds_mean, report.duration_seconds_sd)),
        ("Expansion events", str(len(report.expansion_events))),
        ("  pre words mean", _fmt(report.pre_words_mean)),
        ("  post words mean", _fmt(report.post_words_mean)),
        ("  expansion factor mean (SD)",
         _mean_sd(report.expansion_factor_mean, report.expansion_factor_sd)),
        ("  blank-pre events excluded", str(report.zero_pre_expansion_events)),
    ]
    if matrix is not None:
        rows += [
            ("Gate triggered, human insufficient (TP)", str(matrix["tp"])),
            ("Gate triggered, human sufficient (FP)", str(matrix["fp"])),
            ("Gate silent, human sufficient (TN)", str(matrix["tn"])),
            ("Gate silent, human insufficient (FN)", str(matrix["fn"])),
        ]
    width = max(len(label) for label, _ in rows) + 2
    lines = [f"{label:<{width}}{value}" for label, value in rows]
    return "\n".join(lines)


def cmd_metrics(store_dir: str, gold_path: str | None = None, fmt: str = "table") -> int:
    directory = Path(store_dir)
    if not directory.is_dir():
        print(f"not a directory: {store_dir}", file=sys.stderr)
        return EXIT_IO
    try:
        records = [load_record(p) for p in sorted(directory.glob("*.jsonl"))]
    except StorageError as exc:
        print(f"cannot load store: {exc}", file=sys.stderr)
        return EXIT_IO
    report = compute_metrics(records)
    matrix: dict[str, int] | None = None
    if gold_path is not None:
        try:
            gold = load_gold_labels(gold_path)
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            print(f"cannot load gold labels: {exc}", file=sys.stderr)
            return EXIT_IO
        try:
            matrix = confusion_matrix(records, gold)
        except DanglingLabel as exc:
            print(f"gold labels do not match the corpus: {exc}", file=sys.stderr)
            return EXIT_FAILURE
    payload = report.to_dict()
    if matrix is not None:
        payload["confusion_matrix"] = matrix
    if fmt in ("table", "both"):
        print(render_metrics_table(report, matrix))
    if fmt in ("json", "both"):
        print(json.dumps(payload, indent=2, ensure_ascii=False))
    return EXIT_OK


# ---------------------------------------------------------------------------
# serve
# ---------------------------------------------------------------------------


def build_backend(args: argparse.Namespace) -> CompletionBackend:
    if args.mock_llm:
        return ScriptedBackend(ScriptedPolicy.from_file(args.mock_llm))
    if args.llm_endpoint:
        return HttpCompletionClient(
            args.llm_endpoint,
            model=args.llm_model,
            allow_remote=args.allow_remote_llm,
            timeout=HttpCompletionClient.timeout_from_env(),
        )
    return HttpCompletionClient.from_env(allow_remote=args.allow_remote_llm)


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    try:
        scenario = load_scenario_file(args.scenario)
    except (OSError, ParseError, SchemaError) as exc:
        print(f"cannot load scenario: {exc}", file=sys.stderr)
        return EXIT_IO
    report = validate(scenario)
    if not report.ok:
        print(f"scenario {scenario.id} is invalid; run the validate command",
              file=sys.stderr)
        return EXIT_FAILURE
    try:
        backend = build_backend(args)
    except (OSError, ValueError, json.JSONDecodeError, KeyError) as exc:
        print(f"cannot configure LLM backend: {exc}", file=sys.stderr)
        return EXIT_IO
    store = TranscriptStore(args.store_dir)
    app = create_app(
        {scenario.id: scenario},
        backend,
        store,
        GatewayConfig(idle_timeout=args.idle_timeout),
    )
    host, _, port = args.listen.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="info")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reflectbot",
        description="Reflective-dialogue engine: serve, validate, replay, metrics.",
    )
    parser.add_argument("--log-level", default="WARNING",
                        help="logging level (DEBUG, INFO, WARNING, ERROR)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="run the websocket gateway")
    p_serve.add_argument("--listen", default="127.0.0.1:8020", help="addr:port to bind")
    p_serve.add_argument("--scenario", required=True, help="scenario JSON file")
    p_serve.add_argument("--llm-endpoint", help="chat-completions endpoint URL")
    p_serve.add_argument("--llm-model", default="local-model", help="model name to request")
    p_serve.add_argument("--mock-llm", help="scripted policy JSON file (offline backend)")
    p_serve.add_argument("--store-dir", required=True, help="transcript directory")
    p_serve.add_argument("--idle-timeout", type=float, default=900.0,
                         help="seconds of silence before a session aborts")
    p_serve.add_argument("--allow-remote-llm", action="store_true",
                         help="permit non-loopback LLM endpoints")

    p_validate = sub.add_parser("validate", help="check a scenario file")
    p_validate.add_argument("path", help="scenario JSON file")

    p_replay = sub.add_parser("replay", help="re-drive a recorded session")
    p_replay.add_argument("--transcript", required=True, help="session JSONL file")
    p_replay.add_argument("--scenario", required=True, help="scenario JSON file")
    p_replay.add_argument("--policy", required=True, help="scripted policy JSON file")
    p_replay.add_argument("--fuzzy", action="store_true",
                          help="compare structure instead of exact text")

    p_metrics = sub.add_parser("metrics", help="compute corpus metrics")
    p_metrics.add_argument("--store-dir", required=True, help="transcript directory")
    p_metrics.add_argument("--gold", help="gold relevance labels JSON file")
    p_metrics.add_argument("--format", choices=("table", "json", "both"),
                           default="table")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper(), logging.WARNING))
    if args.command == "serve":
        return cmd_serve(args)
    if args.command == "validate":
        return cmd_validate(args.path)
    if args.command == "replay":
        return cmd_replay(args.transcript, args.scenario, args.policy, fuzzy=args.fuzzy)
    if args.command == "metrics":
        return cmd_metrics(args.store_dir, args.gold, fmt=args.format)
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
