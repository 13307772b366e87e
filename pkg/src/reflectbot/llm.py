"""Completion backends: an HTTP chat-completions client and a scripted mock.

Both speak the same tiny interface: ``complete(request) -> str``. The HTTP
client targets any endpoint accepting ``{model, messages, max_tokens,
temperature}`` and returning ``choices[0].message.content``. The scripted
backend replays canned replies by matching rules against the request's user
text, which makes whole sessions deterministic for tests and offline runs.
"""

from __future__ import annotations

import ipaddress
import json
import logging
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol
from urllib.parse import urlsplit

import httpx

from .errors import BackendError

logger = logging.getLogger(__name__)

ENV_ENDPOINT_URL = "LLM_ENDPOINT_URL"
ENV_MODEL_NAME = "LLM_MODEL_NAME"
ENV_TIMEOUT_MS = "LLM_TIMEOUT_MS"

DEFAULT_MODEL = "local-model"
DEFAULT_TIMEOUT_S = 10.0


@dataclass(frozen=True)
class CompletionRequest:
    system_text: str
    user_text: str
    max_tokens: int = 256
    temperature: float = 0.0
    timeout: float = DEFAULT_TIMEOUT_S

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")

    def messages(self) -> list[dict[str, str]]:
        msgs = []
        if self.system_text:
            msgs.append({"role": "system", "content": self.system_text})
        msgs.append({"role": "user", "content": self.user_text})
        return msgs


class CompletionBackend(Protocol):
    def complete(self, request: CompletionRequest) -> str: ...


def _is_loopback_host(host: str) -> bool:
    if host in ("localhost", ""):
        return True
    try:
        return ipaddress.ip_address(host).is_loopback
    except ValueError:
        return False


class HttpCompletionClient:
    """Client for a chat-completions style HTTP endpoint.

    Session transcripts are private, so by default only loopback endpoints
    are accepted; pass allow_remote=True to talk to anything else. Timeouts
    get one retry, then surface as BackendError(kind="timeout").
    """

    def __init__(self, url: str, model: str = DEFAULT_MODEL, *,
                 allow_remote: bool = False, retries: int = 1,
                 timeout: float | None = None):
        host = urlsplit(url).hostname or ""
        if not allow_remote and not _is_loopback_host(host):
            raise ValueError(
                f"endpoint host {host!r} is not loopback; pass allow_remote=True "
                "to send dialogue content off-machine"
            )
        self.url = url
        self.model = model
        self.retries = retries
        self.timeout = timeout if timeout is not None else DEFAULT_TIMEOUT_S

    @classmethod
    def from_env(cls, **kwargs) -> "HttpCompletionClient":
        url = os.environ.get(ENV_ENDPOINT_URL)
        if not url:
            raise ValueError(f"{ENV_ENDPOINT_URL} is not set")
        model = os.environ.get(ENV_MODEL_NAME, DEFAULT_MODEL)
        kwargs.setdefault("timeout", cls.timeout_from_env())
        return cls(url, model, **kwargs)

    @staticmethod
    def timeout_from_env() -> float:
        raw = os.environ.get(ENV_TIMEOUT_MS)
        return float(raw) / 1000.0 if raw else DEFAULT_TIMEOUT_S

    def complete(self, request: CompletionRequest) -> str:
        body = {
            "model": self.model,
            "messages": request.messages(),
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        }
        # A request may shorten the wait but never exceed the client's bound.
        timeout = min(request.timeout, self.timeout)
        last_timeout: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                response = httpx.post(self.url, json=body, timeout=timeout)
            except httpx.TimeoutException as exc:
                last_timeout = exc
                logger.warning("completion timeout (attempt %d): %s", attempt + 1, exc)
                continue
            except httpx.HTTPError as exc:
                raise BackendError("remote", str(exc)) from exc
            if response.status_code // 100 != 2:
                raise BackendError("remote", f"HTTP {response.status_code}")
            try:
                payload = response.json()
                content = payload["choices"][0]["message"]["content"]
            except (json.JSONDecodeError, LookupError, TypeError) as exc:
                raise BackendError("protocol", f"unexpected response shape: {exc}") from exc
            if not isinstance(content, str):
                raise BackendError("protocol", "message content is not text")
            return content
        raise BackendError("timeout", str(last_timeout))


@dataclass(frozen=True)
class ScriptedRule:
    """One reply rule: fires when `match` is found in the request user text,
    as a plain substring by default or a regex when regex=True."""

    match: str
    reply: str
    regex: bool = False

    def matches(self, user_text: str) -> bool:
        if self.regex:
            return re.search(self.match, user_text) is not None
        return self.match in user_text


@dataclass(frozen=True)
class ScriptedPolicy:
    """Ordered reply rules plus a default; first matching rule wins."""

    rules: tuple[ScriptedRule, ...] = ()
    default_reply: str = "YES"

    def reply_for(self, user_text: str) -> str:
        for rule in self.rules:
            if rule.matches(user_text):
                return rule.reply
        return self.default_reply

    @classmethod
    def from_dict(cls, data: dict) -> "ScriptedPolicy":
        rules = tuple(
            ScriptedRule(
                match=r["match"], reply=r["reply"], regex=bool(r.get("regex", False))
            )
            for r in data.get("rules", [])
        )
        return cls(rules=rules, default_reply=data.get("default_reply", "YES"))

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedPolicy":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


class ScriptedBackend:
    """Deterministic offline backend driven by a ScriptedPolicy.

    Never performs I/O: identical request sequences produce identical reply
    sequences, and no dialogue content leaves the process.
    """

    def __init__(self, policy: ScriptedPolicy):
        self.policy = policy

    def complete(self, request: CompletionRequest) -> str:
        return self.policy.reply_for(request.user_text)


class RecordingBackend:
    """Wrapper that records every request/reply pair passing through."""

    def __init__(self, inner: CompletionBackend):
        self.inner = inner
        self.requests: list[CompletionRequest] = []
        self.replies: list[str] = []

    def complete(self, request: CompletionRequest) -> str:
        self.requests.append(request)
        reply = self.inner.complete(request)
        self.replies.append(reply)
        return reply

    @property
    def call_count(self) -> int:
        return len(self.requests)


@dataclass
class FailingBackend:
    """Backend that always raises; exercises fail-open paths."""

    kind: str = "timeout"
    calls: int = field(default=0)

    def complete(self, request: CompletionRequest) -> str:
        self.calls += 1
        raise BackendError(self.kind, "scripted failure")
