"""Model backends: ``propose(messages) -> (text, cost)``.

``ScriptedBackend`` replays a fixed list of turns (tests, demos).
``HttpBackend`` talks to an OpenAI-compatible chat-completions endpoint.
"""

from __future__ import annotations

import json
import os
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

from .history import estimate_tokens


class BackendStop(Exception):
    """The backend has nothing more to say; the session should end."""


class BackendError(RuntimeError):
    pass


class Backend(Protocol):
    name: str

    def propose(self, messages: Sequence[dict]) -> tuple[str, float]: ...

    def quote(self, messages: Sequence[dict]) -> float: ...


@dataclass
class ScriptedBackend:
    """Replay ``turns`` in order at a fixed ``cost_per_turn`` each.

    A turn may be a string or ``{"text": ..., "cost": ...}``.
    """

    turns: list
    cost_per_turn: float = 0.01
    name: str = "scripted"
    position: int = 0

    def __post_init__(self):
        if self.cost_per_turn < 0:
            raise ValueError("cost_per_turn must be >= 0")

    @classmethod
    def from_file(cls, path: Path | str, cost_per_turn: float | None = None,
                  task_id: str | None = None) -> "ScriptedBackend":
        """Load ``[turn, ...]``, ``{"turns": [...]}`` or ``{"tasks": {task_id: [...]}}``."""
        data = json.loads(Path(path).read_text())
        if isinstance(data, list):
            data = {"turns": data}
        if "tasks" in data:
            data["turns"] = data["tasks"].get(task_id, []) if task_id else []
        if cost_per_turn is not None:
            data["cost_per_turn"] = cost_per_turn
        return cls(turns=list(data["turns"]), cost_per_turn=float(data.get("cost_per_turn", 0.01)),
                   name=data.get("name", "scripted"))

    def _cost(self, turn) -> float:
        if isinstance(turn, dict) and "cost" in turn:
            return float(turn["cost"])
        return self.cost_per_turn

    def quote(self, messages: Sequence[dict]) -> float:
        if self.position >= len(self.turns):
            return 0.0
        return self._cost(self.turns[self.position])

    def propose(self, messages: Sequence[dict]) -> tuple[str, float]:
        if self.position >= len(self.turns):
            raise BackendStop("script exhausted")
        turn = self.turns[self.position]
        self.position += 1
        text = turn["text"] if isinstance(turn, dict) else str(turn)
        return text, self._cost(turn)


@dataclass
class HttpBackend:
    """OpenAI-compatible chat endpoint; cost = tokens x per-token rates."""

    endpoint: str
    model: str
    token_env: str = "OPTFORGE_API_KEY"
    input_rate: float = 0.0
    output_rate: float = 0.0
    temperature: float = 0.0
    top_p: float = 0.95
    max_tokens: int = 4096
    timeout: float = 600.0
    name: str = field(default="")

    def __post_init__(self):
        if not self.name:
            self.name = self.model

    def quote(self, messages: Sequence[dict]) -> float:
        prompt_tokens = sum(estimate_tokens(m["content"]) for m in messages)
        return prompt_tokens * self.input_rate

    def propose(self, messages: Sequence[dict]) -> tuple[str, float]:
        body = {
            "model": self.model,
            "messages": [{"role": m["role"], "content": m["content"]} for m in messages],
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_tokens": self.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        req = urllib.request.Request(self.endpoint, json.dumps(body).encode(), headers, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                data = json.loads(resp.read())
        except (urllib.error.URLError, OSError, json.JSONDecodeError) as exc:
            raise BackendError(f"request to {self.endpoint} failed: {exc}") from exc
        try:
            text = data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed response: {str(data)[:200]}") from exc
        usage = data.get("usage") or {}
        p_tok = usage.get("prompt_tokens", sum(estimate_tokens(m["content"]) for m in messages))
        c_tok = usage.get("completion_tokens", estimate_tokens(text))
        return text, p_tok * self.input_rate + c_tok * self.output_rate
