"""Completion backends: an HTTP chat-completions client and a deterministic mock.

Both expose the same ``complete(messages, config)`` surface, so the runners
never know which one they are talking to. The mock exists to make the whole
pipeline verifiable at desk scale: it is loaded with question -> answer
knowledge derived from the records under test and answers nothing else.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import requests

from .model import RunConfig, SourceRecord
from .scoring import normalize

logger = logging.getLogger(__name__)

MOCK_ENDPOINT = "mock"
API_KEY_ENV = "MHOP_API_KEY"
UNKNOWN_ANSWER = "UNKNOWN"

_TRANSIENT_STATUSES = frozenset({429, 500, 502, 503, 504})


class BackendError(Exception):
    """A completion request failed; ``case_id`` is attached by the runners."""

    case_id: str | None = None


class RetriesExhaustedError(BackendError):
    def __init__(self, attempts: int, last_error: Exception | None) -> None:
        super().__init__(f"gave up after {attempts} attempts: {last_error}")
        self.attempts = attempts
        self.last_error = last_error


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system, user, or assistant
    content: str


def system(content: str) -> ChatMessage:
    return ChatMessage("system", content)


def user(content: str) -> ChatMessage:
    return ChatMessage("user", content)


def assistant(content: str) -> ChatMessage:
    return ChatMessage("assistant", content)


def last_user_content(messages: Sequence[ChatMessage]) -> str:
    for message in reversed(messages):
        if message.role == "user":
            return message.content
    raise ValueError("no user message present")


@dataclass(frozen=True)
class MockKnowledge:
    """Total question -> answer map: unmapped queries get the fallback answer.

    Keys are stored scorer-normalized; use the builders below rather than
    constructing the dict by hand.
    """

    answers: dict[str, str] = field(default_factory=dict)
    fallback: str = UNKNOWN_ANSWER

    def lookup(self, question: str) -> str:
        return self.answers.get(normalize(question), self.fallback)

    def __len__(self) -> int:
        return len(self.answers)


def knowledge_from_pairs(
    pairs: Iterable[tuple[str, str]], fallback: str = UNKNOWN_ANSWER
) -> MockKnowledge:
    answers = {normalize(question): answer for question, answer in pairs}
    return MockKnowledge(answers, fallback)


def build_mock_from_records(records: Sequence[SourceRecord], scope: str) -> MockKnowledge:
    """Build mock knowledge from records at one scope, never both.

    ``hops`` maps each hop question to its hop answer; ``direct`` maps each
    top-level question variant to the final answer. Keeping the scopes
    disjoint is what lets a mock-backed run separate chain-following from
    one-shot answering.
    """
    if scope == "hops":
        return knowledge_from_pairs(
            (hop.question, hop.answer) for record in records for hop in record.hop_chain
        )
    if scope == "direct":
        return knowledge_from_pairs(
            (question, record.final_answer)
            for record in records
            for question in record.question_variants
        )
    raise ValueError(f"unknown mock scope {scope!r}, expected 'hops' or 'direct'")


class MockChatBackend:
    """Deterministic stand-in model: answers the last user message from its map."""

    def __init__(self, knowledge: MockKnowledge | None = None) -> None:
        self.knowledge = knowledge if knowledge is not None else MockKnowledge()

    def complete(self, messages: Sequence[ChatMessage], config: RunConfig) -> str:
        if not messages:
            raise ValueError("messages must be non-empty")
        return self.knowledge.lookup(last_user_content(messages))


def build_payload(messages: Sequence[ChatMessage], config: RunConfig) -> dict:
    """Request body for the chat-completions wire format (pure function)."""
    return {
        "model": config.model_name,
        "messages": [{"role": m.role, "content": m.content} for m in messages],
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
    }


def _headers() -> dict[str, str]:
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(API_KEY_ENV, "").strip()
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    return headers


def _extract_content(response: requests.Response) -> str:
    try:
        content = response.json()["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise BackendError(f"malformed completion response: {exc}") from exc
    if not isinstance(content, str):
        raise BackendError("completion content is not text")
    return content


class HttpChatBackend:
    """POSTs to <endpoint>/chat/completions with bounded exponential-backoff retries.

    Connection errors, timeouts, and 429/5xx responses are treated as
    transient; other HTTP errors surface immediately. Total attempts never
    exceed 1 + config.max_retries.
    """

    def __init__(self, backoff_base: float = 0.25) -> None:
        self.backoff_base = backoff_base

    def complete(self, messages: Sequence[ChatMessage], config: RunConfig) -> str:
        if not messages:
            raise ValueError("messages must be non-empty")
        url = config.endpoint.rstrip("/") + "/chat/completions"
        payload = build_payload(messages, config)
        headers = _headers()
        delay = self.backoff_base
        attempts = 0
        last_error: Exception | None = None
        for attempt in range(config.max_retries + 1):
            attempts += 1
            try:
                response = requests.post(
                    url, json=payload, headers=headers, timeout=config.timeout_seconds
                )
            except requests.exceptions.Timeout as exc:
                last_error = BackendError(f"timeout after {config.timeout_seconds}s: {exc}")
            except requests.exceptions.ConnectionError as exc:
                last_error = BackendError(f"endpoint unreachable: {exc}")
            else:
                if response.status_code == 200:
                    return _extract_content(response)
                body = response.text[:200]
                if response.status_code in _TRANSIENT_STATUSES:
                    last_error = BackendError(f"http error {response.status_code}: {body}")
                else:
                    raise BackendError(f"http error {response.status_code}: {body}")
            if attempt < config.max_retries:
                logger.debug("attempt %d failed (%s), retrying in %.2fs", attempts, last_error, delay)
                time.sleep(delay)
                delay *= 2
        raise RetriesExhaustedError(attempts, last_error)


def make_backend(config: RunConfig, knowledge: MockKnowledge | None = None):
    """Pick the backend for a run config: the mock marker or a live URL."""
    if config.endpoint == MOCK_ENDPOINT:
        return MockChatBackend(knowledge)
    return HttpChatBackend()
