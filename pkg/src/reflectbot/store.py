"""Transcript persistence and descriptive analytics.

Each session is one append-friendly JSONL file under the store directory:
a header line, then one line per turn or gate event, and a final status
line when the session completes or aborts. Analytics reduce a corpus of
records to per-session and pooled statistics: turn counts by speaker and
input kind, words per turn, follow-up trigger counts, and expansion events
measuring how learner responses grow after a generated follow-up. A gold
labelling of open turns yields the gate's confusion matrix.

Conventions, fixed so the committed oracle fixtures stay exact:
  * a word is a whitespace-delimited token, no punctuation stripping;
  * means/SDs are sample statistics (n-1), absent when undefined;
  * turn-count aggregates are mean/SD across sessions, word statistics are
    pooled across all turns, expansion statistics pooled across all events;
  * expansion events with an empty pre-response are excluded from ratios
    and reported separately.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .engine import SessionStatus, Speaker, Turn, TurnOrigin
from .errors import DanglingLabel, StorageError
from .relevance import Relevance, Verdict

# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GateEvent:
    """Gate outcome for one open learner turn."""

    turn_index: int
    final: Relevance
    stage_a: Verdict | None = None
    interrogative: Verdict | None = None
    local_short_circuit: str | None = None
    generated_turn_index: int | None = None
    backend_failed: bool = False


@dataclass
class TranscriptRecord:
    session_id: str
    scenario_id: str
    status: SessionStatus = SessionStatus.ACTIVE
    turns: list[Turn] = field(default_factory=list)
    gate_events: list[GateEvent] = field(default_factory=list)
    started_at: str = ""


@dataclass(frozen=True)
class GoldLabel:
    session_id: str
    turn_index: int
    human_relevant: bool


def load_gold_labels(path: str | Path) -> list[GoldLabel]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [
        GoldLabel(
            session_id=item["session_id"],
            turn_index=item["turn_index"],
            human_relevant=bool(item["human_relevant"]),
        )
        for item in data
    ]


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def turn_to_dict(turn: Turn) -> dict:
    out = {
        "kind": "turn",
        "index": turn.index,
        "speaker": turn.speaker.value,
        "origin": turn.origin.value,
        "text": turn.text,
        "node_id": turn.node_id,
        "timestamp": turn.timestamp,
    }
    if turn.option_id is not None:
        out["option_id"] = turn.option_id
    return out


def turn_from_dict(data: dict) -> Turn:
    return Turn(
        index=data["index"],
        speaker=Speaker(data["speaker"]),
        origin=TurnOrigin(data["origin"]),
        text=data["text"],
        node_id=data["node_id"],
        option_id=data.get("option_id"),
        timestamp=data.get("timestamp", ""),
    )


def _verdict_to_dict(verdict: Verdict | None) -> dict | None:
    if verdict is None:
        return None
    return {"value": verdict.value.value, "raw": verdict.raw}


def _verdict_from_dict(data: dict | None) -> Verdict | None:
    if data is None:
        return None
    return Verdict(value=Relevance(data["value"]), raw=data["raw"])


def gate_event_to_dict(event: GateEvent) -> dict:
    return {
        "kind": "gate_event",
        "turn_index": event.turn_index,
        "final": event.final.value,
        "stage_a": _verdict_to_dict(event.stage_a),
        "interrogative": _verdict_to_dict(event.interrogative),
        "local_short_circuit": event.local_short_circuit,
        "generated_turn_index": event.generated_turn_index,
        "backend_failed": event.backend_failed,
    }


def gate_event_from_dict(data: dict) -> GateEvent:
    return GateEvent(
        turn_index=data["turn_index"],
        final=Relevance(data["final"]),
        stage_a=_verdict_from_dict(data.get("stage_a")),
        interrogative=_verdict_from_dict(data.get("interrogative")),
        local_short_circuit=data.get("local_short_circuit"),
        generated_turn_index=data.get("generated_turn_index"),
        backend_failed=bool(data.get("backend_failed", False)),
    )


# ---------------------------------------------------------------------------
# Store
# ---------------------------------------------------------------------------


class TranscriptStore:
    """One JSONL file per session under a directory; appends are flushed
    line-by-line so a crash loses at most the in-flight line."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._status: dict[str, SessionStatus] = {}
        self._origins: dict[str, dict[int, TurnOrigin]] = {}

    def _path(self, session_id: str) -> Path:
        return self.directory / f"{session_id}.jsonl"

    def _hydrate(self, session_id: str) -> None:
        """Prime in-memory state from disk for sessions opened elsewhere."""
        if session_id in self._origins:
            return
        if not self._path(session_id).exists():
            raise StorageError(f"unknown session {session_id!r}")
        record = self.load(session_id)
        self._origins[session_id] = {t.index: t.origin for t in record.turns}
        self._status[session_id] = record.status

    def _append_line(self, session_id: str, payload: dict) -> None:
        try:
            with self._path(session_id).open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(payload, ensure_ascii=False) + "\n")
        except OSError as exc:
            raise StorageError(str(exc)) from exc

    def create(self, session_id: str, scenario_id: str) -> None:
        if self._path(session_id).exists():
            raise StorageError(f"session {session_id!r} already exists")
        self._append_line(
            session_id,
            {
                "kind": "header",
                "session_id": session_id,
                "scenario_id": scenario_id,
                "started_at": datetime.now(timezone.utc).isoformat(),
            },
        )
        self._status[session_id] = SessionStatus.ACTIVE
        self._origins[session_id] = {}

    def append_turn(
        self, session_id: str, turn: Turn, gate_event: GateEvent | None = None
    ) -> None:
        """Durable ordered append of one turn, optionally with the gate event
        that judged it. The session must still be active, and an event's
        generated_turn_index must point at a generated turn (this one or an
        earlier one)."""
        self._hydrate(session_id)
        status = self._status[session_id]
        if status is not SessionStatus.ACTIVE:
            raise StorageError(
                f"session {session_id!r} is {status.value}; no further appends"
            )
        origins = self._origins[session_id]
        if gate_event is not None and gate_event.generated_turn_index is not None:
            target_index = gate_event.generated_turn_index
            origin = turn.origin if target_index == turn.index else origins.get(target_index)
            if origin is not TurnOrigin.GENERATED:
                raise StorageError(
                    "gate_event.generated_turn_index does not point at a generated turn"
                )
        self._append_line(session_id, turn_to_dict(turn))
        origins[turn.index] = turn.origin
        if gate_event is not None:
            self._append_line(session_id, gate_event_to_dict(gate_event))

    def finish(self, session_id: str, status: SessionStatus) -> None:
        """Seal the session with its final status; idempotent."""
        if status is SessionStatus.ACTIVE:
            raise StorageError("finish requires completed or aborted")
        self._hydrate(session_id)
        if self._status[session_id] is not SessionStatus.ACTIVE:
            return
        self._append_line(
            session_id,
            {
                "kind": "status",
                "status": status.value,
                "ended_at": datetime.now(timezone.utc).isoformat(),
            },
        )
        self._status[session_id] = status

    def load(self, session_id: str) -> TranscriptRecord:
        return load_record(self._path(session_id))

    def load_all(self) -> list[TranscriptRecord]:
        return [load_record(p) for p in sorted(self.directory.glob("*.jsonl"))]


def load_record(path: str | Path) -> TranscriptRecord:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise StorageError(str(exc)) from exc
    record: TranscriptRecord | None = None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise StorageError(f"{path.name}:{lineno}: bad JSON: {exc.msg}") from exc
        kind = data.get("kind")
        if kind == "header":
            record = TranscriptRecord(
                session_id=data["session_id"],
                scenario_id=data["scenario_id"],
                started_at=data.get("started_at", ""),
            )
        elif record is None:
            raise StorageError(f"{path.name}: first line must be the header")
        elif kind == "turn":
            record.turns.append(turn_from_dict(data))
        elif kind == "gate_event":
            record.gate_events.append(gate_event_from_dict(data))
        elif kind == "status":
            record.status = SessionStatus(data["status"])
        else:
            raise StorageError(f"{path.name}:{lineno}: unknown record kind {kind!r}")
    if record is None:
        raise StorageError(f"{path.name}: empty session file")
    return record


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def word_count(text: str) -> int:
    return len(text.split())


@dataclass(frozen=True)
class ExpansionEvent:
    session_id: str
    generated_turn_index: int
    pre_len: int
    post_len: int

    @property
    def ratio(self) -> float:
        return self.post_len / self.pre_len


@dataclass(frozen=True)
class SessionMetrics:
    session_id: str
    status: str
    total_turns: int
    system_turns: int
    learner_turns: int
    open_turns: int
    option_turns: int
    llm_triggers: int
    followup_triggers: int
    learner_words_mean: float | None
    learner_words_sd: float | None
    system_words_mean: float | None
    system_words_sd: float | None
    # Wall-clock first-to-last turn; depends on human pacing, so reported
    # but never pinned by fixtures.
    duration_seconds: float | None


@dataclass(frozen=True)
class MetricsReport:
    sessions: tuple[SessionMetrics, ...]
    session_count: int
    total_turns: int
    system_turns: int
    learner_turns: int
    open_turns: int
    option_turns: int
    llm_triggers: int
    followup_triggers: int
    turns_per_session_mean: float | None
    turns_per_session_sd: float | None
    system_turns_per_session_mean: float | None
    system_turns_per_session_sd: float | None
    learner_turns_per_session_mean: float | None
    learner_turns_per_session_sd: float | None
    open_turns_per_session_mean: float | None
    open_turns_per_session_sd: float | None
    option_turns_per_session_mean: float | None
    option_turns_per_session_sd: float | None
    llm_triggers_per_session_mean: float | None
    llm_triggers_per_session_sd: float | None
    followup_triggers_per_session_mean: float | None
    followup_triggers_per_session_sd: float | None
    learner_words_per_open_turn_mean: float | None
    learner_words_per_open_turn_sd: float | None
    system_words_per_turn_mean: float | None
    system_words_per_turn_sd: float | None
    expansion_events: tuple[ExpansionEvent, ...]
    expansion_factor_mean: float | None
    expansion_factor_sd: float | None
    pre_words_mean: float | None
    post_words_mean: float | None
    zero_pre_expansion_events: int
    duration_seconds_mean: float | None
    duration_seconds_sd: float | None

    def to_dict(self) -> dict:
        out = {
            k: v
            for k, v in self.__dict__.items()
            if k not in ("sessions", "expansion_events")
        }
        out["sessions"] = [dict(s.__dict__) for s in self.sessions]
        out["expansion_events"] = [
            {
                "session_id": e.session_id,
                "generated_turn_index": e.generated_turn_index,
                "pre_len": e.pre_len,
                "post_len": e.post_len,
                "ratio": e.ratio,
            }
            for e in self.expansion_events
        ]
        return out


def _mean(values: list[float]) -> float | None:
    return statistics.mean(values) if values else None


def _sd(values: list[float]) -> float | None:
    return statistics.stdev(values) if len(values) >= 2 else None


def _duration_seconds(turns: list[Turn]) -> float | None:
    if len(turns) < 2:
        return None
    try:
        first = datetime.fromisoformat(turns[0].timestamp)
        last = datetime.fromisoformat(turns[-1].timestamp)
    except ValueError:
        return None
    return (last - first).total_seconds()


def _followup_triggers(turns: list[Turn]) -> int:
    """Generated turns beyond the first within one visit to a node.

    A visit begins when the node's scripted prompt is emitted, so revisits
    (in graphs with loops) count separately.
    """
    count = 0
    per_node: dict[str, int] = {}
    for turn in turns:
        if turn.origin is TurnOrigin.SCRIPTED:
            per_node[turn.node_id] = 0
        elif turn.origin is TurnOrigin.GENERATED:
            per_node[turn.node_id] = per_node.get(turn.node_id, 0) + 1
            if per_node[turn.node_id] > 1:
                count += 1
    return count


def _expansion_events(record: TranscriptRecord) -> tuple[list[ExpansionEvent], int]:
    """Pair each generated turn with the open learner turn just before it and
    the first open learner turn after it; both must exist for an event."""
    events: list[ExpansionEvent] = []
    zero_pre = 0
    turns = record.turns
    for i, turn in enumerate(turns):
        if turn.origin is not TurnOrigin.GENERATED:
            continue
        pre = next(
            (t for t in reversed(turns[:i]) if t.origin is TurnOrigin.LEARNER_OPEN),
            None,
        )
        post = next(
            (t for t in turns[i + 1 :] if t.origin is TurnOrigin.LEARNER_OPEN), None
        )
        if pre is None or post is None:
            continue
        pre_len = word_count(pre.text)
        post_len = word_count(post.text)
        if pre_len == 0:
            zero_pre += 1
            continue
        events.append(
            ExpansionEvent(
                session_id=record.session_id,
                generated_turn_index=turn.index,
                pre_len=pre_len,
                post_len=post_len,
            )
        )
    return events, zero_pre


def session_metrics(record: TranscriptRecord) -> SessionMetrics:
    turns = record.turns
    system = [t for t in turns if t.speaker is Speaker.SYSTEM]
    learner = [t for t in turns if t.speaker is Speaker.LEARNER]
    opens = [t for t in learner if t.origin is TurnOrigin.LEARNER_OPEN]
    options = [t for t in learner if t.origin is TurnOrigin.LEARNER_OPTION]
    generated = [t for t in turns if t.origin is TurnOrigin.GENERATED]
    open_words = [float(word_count(t.text)) for t in opens]
    system_words = [float(word_count(t.text)) for t in system]
    return SessionMetrics(
        session_id=record.session_id,
        status=record.status.value,
        total_turns=len(turns),
        system_turns=len(system),
        learner_turns=len(learner),
        open_turns=len(opens),
        option_turns=len(options),
        llm_triggers=len(generated),
        followup_triggers=_followup_triggers(turns),
        learner_words_mean=_mean(open_words),
        learner_words_sd=_sd(open_words),
        system_words_mean=_mean(system_words),
        system_words_sd=_sd(system_words),
        duration_seconds=_duration_seconds(turns),
    )


def compute_metrics(records: list[TranscriptRecord]) -> MetricsReport:
    """Reduce a corpus of transcript records to a metrics report.

    Deterministic and permutation-invariant across sessions (sessions are
    ordered by session id in the output). An empty corpus yields zero counts
    with all means absent.
    """
    records = sorted(records, key=lambda r: r.session_id)
    per_session = tuple(session_metrics(r) for r in records)

    all_events: list[ExpansionEvent] = []
    zero_pre_total = 0
    for record in records:
        events, zero_pre = _expansion_events(record)
        all_events.extend(events)
        zero_pre_total += zero_pre

    open_words = [
        float(word_count(t.text))
        for r in records
        for t in r.turns
        if t.origin is TurnOrigin.LEARNER_OPEN
    ]
    system_words = [
        float(word_count(t.text))
        for r in records
        for t in r.turns
        if t.speaker is Speaker.SYSTEM
    ]
    ratios = [e.ratio for e in all_events]
    pre_lens = [float(e.pre_len) for e in all_events]
    post_lens = [float(e.post_len) for e in all_events]
    durations = [s.duration_seconds for s in per_session if s.duration_seconds is not None]

    def across(getter) -> tuple[float | None, float | None]:
        values = [float(getter(s)) for s in per_session]
        return _mean(values), _sd(values)

    turns_mean, turns_sd = across(lambda s: s.total_turns)
    system_mean, system_sd = across(lambda s: s.system_turns)
    learner_mean, learner_sd = across(lambda s: s.learner_turns)
    open_mean, open_sd = across(lambda s: s.open_turns)
    option_mean, option_sd = across(lambda s: s.option_turns)
    triggers_mean, triggers_sd = across(lambda s: s.llm_triggers)
    followups_mean, followups_sd = across(lambda s: s.followup_triggers)

    return MetricsReport(
        sessions=per_session,
        session_count=len(per_session),
        total_turns=sum(s.total_turns for s in per_session),
        system_turns=sum(s.system_turns for s in per_session),
        learner_turns=sum(s.learner_turns for s in per_session),
        open_turns=sum(s.open_turns for s in per_session),
        option_turns=sum(s.option_turns for s in per_session),
        llm_triggers=sum(s.llm_triggers for s in per_session),
        followup_triggers=sum(s.followup_triggers for s in per_session),
        turns_per_session_mean=turns_mean,
        turns_per_session_sd=turns_sd,
        system_turns_per_session_mean=system_mean,
        system_turns_per_session_sd=system_sd,
        learner_turns_per_session_mean=learner_mean,
        learner_turns_per_session_sd=learner_sd,
        open_turns_per_session_mean=open_mean,
        open_turns_per_session_sd=open_sd,
        option_turns_per_session_mean=option_mean,
        option_turns_per_session_sd=option_sd,
        llm_triggers_per_session_mean=triggers_mean,
        llm_triggers_per_session_sd=triggers_sd,
        followup_triggers_per_session_mean=followups_mean,
        followup_triggers_per_session_sd=followups_sd,
        learner_words_per_open_turn_mean=_mean(open_words),
        learner_words_per_open_turn_sd=_sd(open_words),
        system_words_per_turn_mean=_mean(system_words),
        system_words_per_turn_sd=_sd(system_words),
        expansion_events=tuple(all_events),
        expansion_factor_mean=_mean(ratios),
        expansion_factor_sd=_sd(ratios),
        pre_words_mean=_mean(pre_lens),
        post_words_mean=_mean(post_lens),
        zero_pre_expansion_events=zero_pre_total,
        duration_seconds_mean=_mean(durations),
        duration_seconds_sd=_sd(durations),
    )


def confusion_matrix(
    records: list[TranscriptRecord], gold: list[GoldLabel]
) -> dict[str, int]:
    """Gate verdicts against human judgments.

    A "trigger" is the gate rejecting a response (which causes a follow-up):
    tp = triggered and the human also found the response insufficient;
    fp = triggered on a response the human found sufficient;
    tn = silent on a sufficient response; fn = silent on an insufficient one.
    """
    by_session = {r.session_id: r for r in records}
    counts = {"tp": 0, "fp": 0, "tn": 0, "fn": 0}
    for label in gold:
        record = by_session.get(label.session_id)
        if record is None:
            raise DanglingLabel(f"unknown session {label.session_id!r}")
        turn = next((t for t in record.turns if t.index == label.turn_index), None)
        if turn is None or turn.origin is not TurnOrigin.LEARNER_OPEN:
            raise DanglingLabel(
                f"label {label.session_id}:{label.turn_index} is not an open learner turn"
            )
        event = next(
            (e for e in record.gate_events if e.turn_index == label.turn_index), None
        )
        if event is None:
            raise DanglingLabel(
                f"no gate event for {label.session_id}:{label.turn_index}"
            )
        triggered = event.final is Relevance.NOT_RELEVANT
        if triggered and not label.human_relevant:
            counts["tp"] += 1
        elif triggered and label.human_relevant:
            counts["fp"] += 1
        elif not triggered and label.human_relevant:
            counts["tn"] += 1
        else:
            counts["fn"] += 1
    return counts
