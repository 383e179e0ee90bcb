"""Utterance parsing and response backends.

Three interchangeable modes: `rules` (deterministic pattern table, no
network), `remote` (OpenAI-style chat-completions endpoint) and `stub`
(scripted transport for tests).  All parse output flows through one line
grammar, `task=<name>; slots=<k:v,...>`, so the remote and rule paths are
drop-in replacements for each other.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass
from typing import Any

import requests


class BackendError(Exception):
    pass


class BackendUnavailable(BackendError):
    """Transport kept failing after the retry budget."""


class ProtocolError(BackendError):
    """The endpoint answered with a body we cannot use."""


class TransportError(Exception):
    """Retryable transport-level failure (connection, timeout, 5xx, 429)."""


@dataclass(frozen=True)
class BackendConfig:
    mode: str = "rules"  # rules | remote | stub
    endpoint: str = ""
    model: str = ""
    temperature: float = 0.0
    timeout_s: float = 10.0
    max_retries: int = 3  # retries after the first attempt
    api_key_env: str = "LLM_API_KEY"
    backoff_s: float = 0.25

    def __post_init__(self) -> None:
        if self.mode not in ("rules", "remote", "stub"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "remote" and (not self.endpoint or not self.model):
            raise ValueError("remote mode requires endpoint and model")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")


@dataclass(frozen=True)
class MenuItem:
    name: str
    description: str


class Menu:
    """Item names must be unique after case-folding and trimming."""

    def __init__(self, items: list[MenuItem]):
        seen = set()
        for item in items:
            key = item.name.strip().casefold()
            if key in seen:
                raise ValueError(f"duplicate menu item {item.name!r}")
            seen.add(key)
        self.items = list(items)

    def names(self) -> list[str]:
        return [i.name for i in self.items]

    def description_text(self) -> str:
        parts = [f"{i.name} ({i.description})" for i in self.items]
        return "We have " + ", ".join(parts) + "."

    @classmethod
    def from_json(cls, entries: list[dict[str, str]]) -> "Menu":
        return cls([MenuItem(e["name"], e.get("description", "")) for e in entries])


class HttpTransport:
    """requests-backed transport; raises TransportError on retryable failures."""

    def post(self, url: str, headers: dict[str, str], body: dict[str, Any],
             timeout: float) -> dict[str, Any]:
        try:
            resp = requests.post(url, headers=headers, json=body, timeout=timeout)
        except requests.RequestException as e:
            raise TransportError(str(e)) from e
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransportError(f"status {resp.status_code}")
        if resp.status_code != 200:
            raise ProtocolError(f"status {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as e:
            raise ProtocolError(f"non-JSON body: {e}") from None


class StubTransport:
    """Scripted transport: pops canned bodies (or exceptions) and records requests."""

    def __init__(self, script: list[Any]):
        self.script = list(script)
        self.requests: list[dict[str, Any]] = []

    def post(self, url, headers, body, timeout):
        self.requests.append({"url": url, "headers": headers, "body": body})
        if not self.script:
            raise TransportError("script exhausted")
        item = self.script.pop(0)
        if isinstance(item, Exception):
            raise item
        return item

    @staticmethod
    def reply(content: str) -> dict[str, Any]:
        return {"choices": [{"message": {"content": content}}]}


def complete(config: BackendConfig, messages: list[dict[str, str]],
             transport=None, sleep=time.sleep) -> str:
    """One chat completion; bounded retries with exponential backoff."""
    if config.mode == "rules":
        raise BackendError("rules mode has no completion endpoint")
    if transport is None:
        if config.mode == "stub":
            raise BackendError("stub mode needs an explicit transport")
        transport = HttpTransport()
    url = config.endpoint.rstrip("/") + "/v1/chat/completions"
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(config.api_key_env)
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    body = {"model": config.model, "messages": messages, "temperature": config.temperature}

    attempts = 1 + max(0, config.max_retries)
    last: Exception | None = None
    for attempt in range(attempts):
        try:
            doc = transport.post(url, headers, body, config.timeout_s)
            break
        except TransportError as e:
            last = e
            if attempt + 1 < attempts and config.backoff_s > 0:
                sleep(config.backoff_s * 2**attempt)
    else:
        raise BackendUnavailable(f"gave up after {attempts} attempts: {last}")

    try:
        content = doc["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise ProtocolError(f"malformed completion body: {doc!r}") from None
    if not isinstance(content, str):
        raise ProtocolError(f"content is not text: {content!r}")
    return content


# --- rule-based parsing -----------------------------------------------------

SERVE_TRIGGERS = ("bring", "serve", "can i have", "i'd like")
CLEAN_TRIGGERS = ("clean", "clear", "take away")
MENU_TRIGGERS = ("menu", "what do you have", "recommend")


def _normalize(text: str) -> str:
    return text.replace("’", "'").casefold()


def _match_item(normalized: str, menu: Menu) -> str | None:
    """Longest menu item appearing in the utterance; ties keep menu order."""
    best: str | None = None
    for name in menu.names():
        if name.strip().casefold() in normalized:
            if best is None or len(name) > len(best):
                best = name
    return best


def rule_parse(utterance: str, menu: Menu, registry) -> "ParsedTask":
    """Deterministic pattern-table parser; total (falls back to casual_chat)."""
    from .tasks import ParsedTask

    u = _normalize(utterance)
    if any(t in u for t in SERVE_TRIGGERS):
        item = _match_item(u, menu)
        if item is not None and "serve_order" in registry:
            return ParsedTask("serve_order", {"item": item}, 1.0)
    if any(t in u for t in CLEAN_TRIGGERS) and "clean_table" in registry:
        return ParsedTask("clean_table", {}, 1.0)
    if any(t in u for t in MENU_TRIGGERS) and "describe_menu" in registry:
        return ParsedTask("describe_menu", {}, 1.0)
    return ParsedTask("casual_chat", {}, 0.5)


def format_understand_line(parsed: "ParsedTask") -> str:
    slots = ",".join(f"{k}:{v}" for k, v in sorted(parsed.slots.items()))
    return f"task={parsed.name}; slots={slots}"


def parse_understand_line(text: str, registry) -> "ParsedTask":
    """Decode `task=<name>; slots=<k:v,...>`; anything malformed -> casual_chat."""
    from .tasks import ParsedTask

    fallback = ParsedTask("casual_chat", {}, 0.0)
    line = text.strip().splitlines()[0].strip() if text.strip() else ""
    if not line.startswith("task="):
        return fallback
    body = line[len("task="):]
    name, sep, slot_text = body.partition(";")
    name = name.strip()
    if not sep or name not in registry:
        return fallback
    slot_text = slot_text.strip()
    if not slot_text.startswith("slots="):
        return fallback
    slots: dict[str, str] = {}
    for pair in slot_text[len("slots="):].split(","):
        pair = pair.strip()
        if not pair:
            continue
        key, sep2, value = pair.partition(":")
        if not sep2 or not key.strip() or not value.strip():
            return fallback
        slots[key.strip()] = value.strip()
    schema = registry[name].param_schema
    slots = {k: v for k, v in slots.items() if k in schema}
    if set(slots) != set(schema):
        return fallback
    return ParsedTask(name, slots, 1.0)


# --- backends ---------------------------------------------------------------

class RuleBackend:
    """Offline backend; understanding and responses from fixed rules."""

    mode = "rules"

    def __init__(self, registry, menu: Menu):
        self.registry = registry
        self.menu = menu

    def understand(self, utterance: str) -> str:
        return format_understand_line(rule_parse(utterance, self.menu, self.registry))

    def respond(self, utterance: str, parsed=None) -> str:
        if parsed is not None:
            return self._respond_with(parsed)
        guess = rule_parse(utterance, self.menu, self.registry)
        if guess.name == "serve_order":
            return "Sure! I will be right back with your order."
        return self._respond_with(guess)

    def _respond_with(self, parsed) -> str:
        if parsed.name == "serve_order":
            return f"Sure, one {parsed.slots['item']} coming right up."
        if parsed.name == "clean_table":
            return "Of course, I will clear the table."
        if parsed.name == "describe_menu":
            return self.menu.description_text()
        return "Happy to chat! Let me know if you need anything."


class RemoteBackend:
    """Chat-completions backend built on a prompt pair with a shared base."""

    mode = "remote"

    def __init__(self, config: BackendConfig, prompts, transport=None):
        self.config = config
        self.prompts = prompts
        self.transport = transport

    def understand(self, utterance: str) -> str:
        messages = [
            {"role": "system", "content": self.prompts.understand_prompt},
            {"role": "user", "content": utterance},
        ]
        return complete(self.config, messages, transport=self.transport)

    def respond(self, utterance: str, parsed=None) -> str:
        content = utterance
        if parsed is not None:
            content += "\n[understood: " + format_understand_line(parsed) + "]"
        messages = [
            {"role": "system", "content": self.prompts.respond_prompt},
            {"role": "user", "content": content},
        ]
        return complete(self.config, messages, transport=self.transport)
