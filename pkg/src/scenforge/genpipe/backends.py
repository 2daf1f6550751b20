"""Text-generation backends: a chat-completion HTTP client and an offline
replay backend that serves canned fixture files.

Replay fixtures are the files of a directory in lexicographic order. The
backend keeps a cursor and hands out the next n files per complete()
call, so multi-attempt flows (voting, repair) consume fixtures in a
predictable sequence and runs are bit-deterministic.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import requests

from ..errors import ConfigError, ProtocolError, ReplayError, TransportError

API_KEY_ENV = "SCENFORGE_API_KEY"


@dataclass
class BackendConfig:
    mode: str = "replay"  # replay | http_chat
    endpoint: str = ""
    model: str = "deepseek-chat"
    temperature: float = 0.8
    sample_count: int = 5
    timeout: float = 30.0
    replay_dir: str | None = None
    api_key_env: str = API_KEY_ENV


class LlmBackend:
    """Interface: complete(prompt, n) -> n completion texts."""

    def complete(self, prompt: str, n: int) -> list[str]:
        raise NotImplementedError


class HttpChatBackend(LlmBackend):
    """Chat-completion JSON over HTTP.

    Request: {model, messages, temperature, n}; response:
    choices[i].message.content. A bearer token is attached from the
    configured environment variable when set.
    """

    def __init__(self, config: BackendConfig, session: requests.Session | None = None):
        if not config.endpoint:
            raise ConfigError("http_chat backend needs an endpoint")
        self.config = config
        self._session = session or requests.Session()

    def complete(self, prompt: str, n: int) -> list[str]:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.config.api_key_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        body = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "n": n,
        }
        try:
            response = self._session.post(
                self.config.endpoint, json=body, headers=headers, timeout=self.config.timeout
            )
        except requests.RequestException as exc:
            raise TransportError(f"backend request failed: {exc}") from exc
        if response.status_code != 200:
            raise TransportError(
                f"backend HTTP {response.status_code}: {response.text[:200]}"
            )
        try:
            payload = response.json()
        except ValueError as exc:
            raise ProtocolError(f"backend returned non-JSON body: {exc}") from exc
        try:
            texts = [choice["message"]["content"] for choice in payload["choices"]]
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"unexpected completion shape: missing {exc}") from exc
        if not texts:
            raise ProtocolError("backend returned zero choices")
        return [str(t) for t in texts]


class ReplayBackend(LlmBackend):
    """Serves fixture files instead of calling a model.

    complete(prompt, n) returns the next n files; prompts are recorded for
    inspection. Exhausting the fixtures raises ReplayError naming the
    fixture directory and the first missing position.
    """

    def __init__(self, fixture_dir: str | Path):
        self.fixture_dir = Path(fixture_dir)
        if not self.fixture_dir.is_dir():
            raise ReplayError(f"replay fixture directory missing: {self.fixture_dir}")
        self.files = sorted(p for p in self.fixture_dir.iterdir() if p.is_file())
        self.cursor = 0
        self.prompts: list[str] = []

    def remaining(self) -> int:
        return len(self.files) - self.cursor

    def complete(self, prompt: str, n: int) -> list[str]:
        self.prompts.append(prompt)
        if self.cursor + n > len(self.files):
            raise ReplayError(
                f"replay fixtures exhausted: wanted file #{self.cursor + n} of "
                f"{len(self.files)} in {self.fixture_dir}"
            )
        texts = [p.read_text() for p in self.files[self.cursor : self.cursor + n]]
        self.cursor += n
        return texts


def make_backend(config: BackendConfig) -> LlmBackend:
    if config.mode == "replay":
        if not config.replay_dir:
            raise ConfigError("replay backend needs replay_dir")
        return ReplayBackend(config.replay_dir)
    if config.mode == "http_chat":
        return HttpChatBackend(config)
    raise ConfigError(f"unknown backend mode {config.mode!r}")
