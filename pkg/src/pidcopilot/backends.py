"""Text-completion backends: a scripted replay backend for tests/demos and
an HTTP chat-completions client."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import requests

DEFAULT_API_KEY_ENV = "ACPID_API_KEY"
DEFAULT_TIMEOUT = 120.0


class BackendError(Exception):
    """Transport-level failure: network, HTTP status, malformed response."""


class CompletionBackend(Protocol):
    name: str

    def complete(self, system_text: str, user_text: str,
                 temperature: float = 0.0) -> str: ...


@dataclass
class ScriptedResponse:
    turn: int
    step: int | str
    text: str


@dataclass
class ScriptedBackend:
    """Replays canned responses in call order.

    The fixture file is JSON: ``{"version": "1", "name": ..., "responses":
    [{"turn": 0, "step": "plan", "text": ...}, {"turn": 0, "step": 0,
    "text": ...}, ...]}``.  The turn/step keys document which call each
    entry answers; consumption is strictly sequential, which makes replay
    exact.  Calls are recorded for test assertions.
    """

    responses: list[ScriptedResponse]
    name: str = "scripted"
    cursor: int = 0
    calls: list[tuple[str, str]] = field(default_factory=list)

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict) or data.get("version") != "1":
            raise ValueError(f"unsupported fixture file {path}")
        responses = [
            ScriptedResponse(entry.get("turn", 0), entry.get("step", "plan"),
                             entry["text"])
            for entry in data.get("responses", [])
        ]
        return cls(responses, name=str(data.get("name", "scripted")))

    @classmethod
    def from_texts(cls, texts: list[str], name: str = "scripted") -> "ScriptedBackend":
        return cls([ScriptedResponse(0, i, t) for i, t in enumerate(texts)], name=name)

    def reset(self) -> None:
        self.cursor = 0
        self.calls.clear()

    def complete(self, system_text: str, user_text: str,
                 temperature: float = 0.0) -> str:
        self.calls.append((system_text, user_text))
        if self.cursor >= len(self.responses):
            raise BackendError(
                f"scripted fixture {self.name!r} exhausted after "
                f"{len(self.responses)} responses")
        response = self.responses[self.cursor]
        self.cursor += 1
        return response.text


PostFunc = Callable[[str, dict, dict, float], dict]


def _requests_post(url: str, headers: dict, payload: dict, timeout: float) -> dict:
    reply = requests.post(url, headers=headers, json=payload, timeout=timeout)
    if reply.status_code != 200:
        raise BackendError(f"backend returned HTTP {reply.status_code}: "
                           f"{reply.text[:200]}")
    return reply.json()


@dataclass
class HttpBackend:
    """POSTs to ``{base_url}/chat/completions`` with a bearer token taken
    from the configured environment variable."""

    base_url: str
    model: str = "gpt-4-turbo"
    api_key_env: str = DEFAULT_API_KEY_ENV
    timeout: float = DEFAULT_TIMEOUT
    name: str = "http"
    post: PostFunc = _requests_post

    def complete(self, system_text: str, user_text: str,
                 temperature: float = 0.0) -> str:
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": system_text},
                {"role": "user", "content": user_text},
            ],
            "temperature": temperature,
        }
        url = self.base_url.rstrip("/") + "/chat/completions"
        try:
            data = self.post(url, headers, payload, self.timeout)
        except BackendError:
            raise
        except Exception as exc:
            raise BackendError(f"backend transport failure: {exc}") from exc
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed backend response: {data!r:.200}") from exc


def make_backend(spec: str, model: str = "gpt-4-turbo",
                 api_key_env: str = DEFAULT_API_KEY_ENV,
                 timeout: float = DEFAULT_TIMEOUT) -> CompletionBackend:
    """Build a backend from a `scripted:<file>` or `http:<base_url>` spec."""
    kind, _, arg = spec.partition(":")
    if kind == "scripted" and arg:
        return ScriptedBackend.from_file(arg)
    if kind == "http" and arg:
        return HttpBackend(base_url=arg, model=model, api_key_env=api_key_env,
                           timeout=timeout)
    raise ValueError(f"unknown backend spec {spec!r} "
                     "(expected scripted:<file> or http:<base_url>)")
