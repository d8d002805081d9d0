"""Provider contracts for the two external brains: the completion LLM and the TOD system.

Scripted in-memory providers give deterministic replay for tests; HTTP
providers speak a minimal JSON wire shape with retry/backoff. Token
budgeting uses a model-agnostic word-count estimate so nothing here
depends on a specific tokenizer.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import TYPE_CHECKING, Protocol, Sequence

import httpx

if TYPE_CHECKING:  # pragma: no cover
    from .dialogue import Turn

END_TOKEN = "<end_dialog>"

DEFAULT_STOPS = ("\nSystem:", END_TOKEN)

DEFAULT_TOKEN_RATIO = 1.3


class ProviderErrorKind(str, Enum):
    TIMEOUT = "Timeout"
    CONTEXT_OVERFLOW = "ContextOverflow"
    REMOTE = "Remote"
    MALFORMED = "Malformed"


class ProviderError(Exception):
    def __init__(self, kind: ProviderErrorKind, detail: str):
        if not detail:
            raise ValueError("ProviderError requires a non-empty detail")
        super().__init__(f"{kind.value}: {detail}")
        self.kind = kind
        self.detail = detail


@dataclass(frozen=True)
class CompletionParams:
    temperature: float = 0.5
    max_context: int = 2048
    stop_sequences: tuple[str, ...] = DEFAULT_STOPS
    seed: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if self.max_context <= 0:
            raise ValueError("max_context must be positive")

    def as_record(self) -> dict:
        return {
            "temperature": self.temperature,
            "max_context": self.max_context,
            "seed": self.seed,
        }


def estimate_tokens(text: str, ratio: float = DEFAULT_TOKEN_RATIO) -> int:
    """Deterministic token estimate: ceil(word count x ratio).

    Uses exact rational arithmetic so e.g. 10 words at ratio 1.3 is 13,
    not 14 from float drift.
    """
    words = len(text.split())
    if words == 0:
        return 0
    frac = Fraction(str(ratio))
    return -(-words * frac.numerator // frac.denominator)


class CompletionProvider(Protocol):
    def complete(self, prompt: str, params: CompletionParams) -> str: ...


class TODProvider(Protocol):
    def tod_respond(self, history: Sequence["Turn"], user_utterance: str) -> str: ...


def _check_completion_preconditions(prompt: str, params: CompletionParams) -> None:
    if not prompt:
        raise ValueError("prompt must be non-empty")
    estimate = estimate_tokens(prompt)
    if estimate >= params.max_context:
        raise ProviderError(
            ProviderErrorKind.CONTEXT_OVERFLOW,
            f"prompt estimate {estimate} tokens >= max_context {params.max_context}")


def truncate_at_stops(text: str, stops: Sequence[str], end_token: str = END_TOKEN) -> str:
    """Cut a raw continuation at the earliest stop sequence.

    The end-of-dialogue token is kept in the output (everything after it is
    dropped) so downstream end detection still sees it; other stops are
    removed along with what follows.
    """
    cut = len(text)
    keep_through = None
    for stop in stops:
        pos = text.find(stop)
        if pos == -1:
            continue
        if pos < cut:
            cut = pos
            keep_through = len(stop) if stop == end_token else 0
    if keep_through is None:
        return text
    return text[:cut + keep_through]


class ScriptedCompletion:
    """Replays a primed list of utterances verbatim; thread-safe cursor."""

    def __init__(self, script: Sequence[str]):
        self._script = list(script)
        self._pos = 0
        self._lock = threading.Lock()

    def complete(self, prompt: str, params: CompletionParams) -> str:
        _check_completion_preconditions(prompt, params)
        with self._lock:
            if self._pos >= len(self._script):
                raise ProviderError(ProviderErrorKind.REMOTE, "completion script exhausted")
            out = self._script[self._pos]
            self._pos += 1
        return out


class ScriptedTOD:
    """Replays a primed list of system utterances; thread-safe cursor."""

    def __init__(self, script: Sequence[str]):
        self._script = list(script)
        self._pos = 0
        self._lock = threading.Lock()

    def tod_respond(self, history: Sequence["Turn"], user_utterance: str) -> str:
        if not user_utterance:
            raise ValueError("user_utterance must be non-empty")
        with self._lock:
            if self._pos >= len(self._script):
                raise ProviderError(ProviderErrorKind.REMOTE, "TOD script exhausted")
            out = self._script[self._pos]
            self._pos += 1
        return out


class FailingProvider:
    """Always raises; handy for error-path tests."""

    def __init__(self, kind: ProviderErrorKind = ProviderErrorKind.REMOTE,
                 detail: str = "provider configured to fail"):
        self._kind = kind
        self._detail = detail

    def complete(self, prompt: str, params: CompletionParams) -> str:
        raise ProviderError(self._kind, self._detail)

    def tod_respond(self, history, user_utterance: str) -> str:
        raise ProviderError(self._kind, self._detail)


class _HttpBase:
    def __init__(self, url: str, *, token: str | None = None, timeout: float = 30.0,
                 retries: int = 2, backoff: float = 0.5,
                 transport: httpx.BaseTransport | None = None):
        self.url = url
        self.retries = retries
        self.backoff = backoff
        headers = {"Authorization": f"Bearer {token}"} if token else {}
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    def _post(self, payload: dict) -> dict:
        """POST with up to `retries` retries (exponential backoff) on Timeout/Remote."""
        attempt = 0
        while True:
            try:
                response = self._client.post(self.url, json=payload)
            except httpx.TimeoutException as exc:
                err = ProviderError(ProviderErrorKind.TIMEOUT, f"request timed out: {exc}")
            except httpx.HTTPError as exc:
                err = ProviderError(ProviderErrorKind.REMOTE, f"transport failure: {exc}")
            else:
                if response.status_code == 413:
                    raise ProviderError(ProviderErrorKind.CONTEXT_OVERFLOW,
                                        "endpoint rejected prompt length (413)")
                if response.status_code >= 400:
                    err = ProviderError(ProviderErrorKind.REMOTE,
                                        f"endpoint returned {response.status_code}")
                    if response.status_code < 500:
                        raise err
                else:
                    try:
                        return response.json()
                    except (json.JSONDecodeError, ValueError) as exc:
                        raise ProviderError(ProviderErrorKind.MALFORMED,
                                            f"non-JSON response: {exc}") from exc
            if attempt >= self.retries:
                raise err
            time.sleep(self.backoff * (2 ** attempt))
            attempt += 1

    def close(self) -> None:
        self._client.close()


class HTTPCompletion(_HttpBase):
    """Text-completion endpoint client.

    Wire shape: POST {prompt, temperature, max_tokens, stop[]} -> {text}.
    Also accepts the common {choices: [{text}]} response shape.
    """

    def complete(self, prompt: str, params: CompletionParams) -> str:
        _check_completion_preconditions(prompt, params)
        payload = {
            "prompt": prompt,
            "temperature": params.temperature,
            "max_tokens": max(1, params.max_context - estimate_tokens(prompt)),
            "stop": list(params.stop_sequences),
        }
        if params.seed is not None:
            payload["seed"] = params.seed
        body = self._post(payload)
        if "text" in body:
            text = body["text"]
        elif body.get("choices"):
            text = body["choices"][0].get("text")
        else:
            text = None
        if not isinstance(text, str):
            raise ProviderError(ProviderErrorKind.MALFORMED,
                                f"completion response missing text field: {body!r}")
        return truncate_at_stops(text, params.stop_sequences)


class HTTPTOD(_HttpBase):
    """TOD system endpoint client.

    Wire shape: POST {history: [{speaker, text}], user_utterance} -> {system_utterance}.
    """

    def tod_respond(self, history: Sequence["Turn"], user_utterance: str) -> str:
        if not user_utterance:
            raise ValueError("user_utterance must be non-empty")
        payload = {
            "history": [{"speaker": t.speaker.value, "text": t.text} for t in history],
            "user_utterance": user_utterance,
        }
        body = self._post(payload)
        reply = body.get("system_utterance")
        if not isinstance(reply, str):
            raise ProviderError(ProviderErrorKind.MALFORMED,
                                f"TOD response missing system_utterance: {body!r}")
        return reply
