"""Transcript data model, context accumulation, and in-context-learning prompt construction.

The prompt places one or two exemplar goal+dialogue blocks before the target
goal block and the accumulated history, ending in a bare "User:" cue. When
the estimated token count exceeds the budget, the second exemplar is dropped
first, then the oldest history turn pairs (the grounding goal and the most
recent context are kept at all cost).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

from .goals import Goal, goal_as_mapping, goal_from_mapping, render_parsed_logical
from .providers import END_TOKEN, estimate_tokens


class Speaker(str, Enum):
    USER = "user"
    SYSTEM = "system"


class TerminationKind(str, Enum):
    END_TOKEN_COMPLETE = "EndTokenComplete"
    END_TOKEN_PREMATURE = "EndTokenPremature"
    LOOP_DETECTED = "LoopDetected"
    MAX_TURNS_EXCEEDED = "MaxTurnsExceeded"
    PROVIDER_ERROR = "ProviderError"
    HALLUCINATION_FLAGGED = "HallucinationFlagged"


@dataclass(frozen=True)
class TerminationReason:
    kind: TerminationKind
    detail: str = ""


@dataclass(frozen=True)
class Turn:
    speaker: Speaker
    text: str
    raw_text: str
    index: int


def check_alternation(turns: Sequence[Turn], what: str = "turns") -> None:
    """Turns must alternate speakers starting with the user."""
    for i, turn in enumerate(turns):
        expected = Speaker.USER if i % 2 == 0 else Speaker.SYSTEM
        if turn.speaker is not expected:
            raise ValueError(f"{what}: turn {i} is {turn.speaker.value}, expected {expected.value}")
        if turn.index != i:
            raise ValueError(f"{what}: turn {i} carries index {turn.index}")


@dataclass(frozen=True)
class Transcript:
    goal: Goal
    turns: tuple[Turn, ...]
    termination: TerminationReason
    exemplar_ids: tuple[str, ...] = ()
    provider_params: dict = field(default_factory=dict)
    timestamps: dict = field(default_factory=dict)
    annotations: tuple[dict, ...] = ()

    def __post_init__(self):
        check_alternation(self.turns, "transcript")

    def user_turns(self) -> list[Turn]:
        return [t for t in self.turns if t.speaker is Speaker.USER]

    def system_turns(self) -> list[Turn]:
        return [t for t in self.turns if t.speaker is Speaker.SYSTEM]

    def turn_pairs(self) -> int:
        return len(self.turns) // 2

    def to_record(self) -> dict:
        record = {
            "goal": goal_as_mapping(self.goal),
            "source_id": self.goal.source_id,
            "turns": [
                {"speaker": t.speaker.value, "text": t.text, "raw_text": t.raw_text}
                for t in self.turns
            ],
            "termination": {"kind": self.termination.kind.value, "detail": self.termination.detail},
            "provider_params": dict(self.provider_params),
            "exemplar_ids": list(self.exemplar_ids),
            "timestamps": dict(self.timestamps),
        }
        if self.annotations:
            record["annotations"] = [dict(a) for a in self.annotations]
        return record

    @classmethod
    def from_record(cls, record: dict) -> "Transcript":
        goal = goal_from_mapping(record["goal"], source_id=record.get("source_id"))
        turns = tuple(
            Turn(Speaker(t["speaker"]), t["text"], t.get("raw_text", t["text"]), i)
            for i, t in enumerate(record["turns"])
        )
        term = record["termination"]
        return cls(
            goal=goal,
            turns=turns,
            termination=TerminationReason(TerminationKind(term["kind"]), term.get("detail", "")),
            exemplar_ids=tuple(record.get("exemplar_ids", ())),
            provider_params=dict(record.get("provider_params", {})),
            timestamps=dict(record.get("timestamps", {})),
            annotations=tuple(record.get("annotations", ())),
        )


@dataclass(frozen=True)
class Exemplar:
    """A goal plus full dialogue placed in the prompt for in-context learning."""

    goal: Goal
    turns: tuple[Turn, ...]
    exemplar_id: str | None = None

    def __post_init__(self):
        check_alternation(self.turns, "exemplar")
        if not self.turns:
            raise ValueError("exemplar has no turns")
        last = self.turns[-1]
        if last.speaker is not Speaker.USER or END_TOKEN not in last.raw_text:
            raise ValueError("exemplar must end with an end-token user turn")


class BudgetExceeded(ValueError):
    """Prompt cannot fit the token budget even at minimum context."""


def detect_end_token(text: str, token: str = END_TOKEN) -> tuple[bool, str]:
    """Report whether the end-of-dialogue token occurs and strip it.

    The cleaned text has every occurrence of the token removed together
    with surrounding whitespace, so stripping is idempotent.
    """
    if token not in text:
        return False, text
    cleaned = re.sub(r"\s*" + re.escape(token) + r"\s*", " ", text).strip()
    return True, cleaned


_WORDS = re.compile(r"[a-z0-9]+")


def normalize_utterance(text: str) -> str:
    """Lowercase, strip punctuation, collapse whitespace."""
    return " ".join(_WORDS.findall(text.lower()))


def make_turns(texts: Sequence[str], raw_texts: Sequence[str] | None = None) -> tuple[Turn, ...]:
    """Build an alternating turn list (user first) from plain utterance texts."""
    raws = raw_texts if raw_texts is not None else texts
    return tuple(
        Turn(Speaker.USER if i % 2 == 0 else Speaker.SYSTEM, text, raw, i)
        for i, (text, raw) in enumerate(zip(texts, raws))
    )


@dataclass(frozen=True)
class PromptTemplate:
    """Label set for prompt assembly; overridable for other prompt conventions."""

    goal_label: str = "Goal:"
    conversation_label: str = "Conversation:"
    user_prefix: str = "User: "
    system_prefix: str = "System: "
    user_cue: str = "User:"
    block_separator: str = "\n\n"
    include_reqt: bool = True
    end_token: str = END_TOKEN


DEFAULT_TEMPLATE = PromptTemplate()

# Floor for history truncation: the two most recent turn pairs are never dropped.
MIN_HISTORY_PAIRS = 2


def _check_history(history: Sequence[Turn]) -> None:
    check_alternation(history, "history")
    if history and history[-1].speaker is not Speaker.SYSTEM:
        raise ValueError("history must be empty or end with a system turn")


def _turn_line(turn: Turn, template: PromptTemplate, use_raw: bool) -> str:
    prefix = template.user_prefix if turn.speaker is Speaker.USER else template.system_prefix
    return prefix + (turn.raw_text if use_raw else turn.text)


def _goal_block(goal: Goal, template: PromptTemplate) -> str:
    return template.goal_label + "\n" + render_parsed_logical(goal, include_reqt=template.include_reqt)


def _assemble(exemplars: Sequence[Exemplar], goal: Goal, pairs: Sequence[tuple[Turn, Turn]],
              template: PromptTemplate) -> str:
    blocks = []
    for ex in exemplars:
        lines = [_goal_block(ex.goal, template), template.conversation_label]
        lines.extend(_turn_line(t, template, use_raw=True) for t in ex.turns)
        blocks.append("\n".join(lines))
    target = [_goal_block(goal, template), template.conversation_label]
    for user_turn, system_turn in pairs:
        target.append(_turn_line(user_turn, template, use_raw=False))
        target.append(_turn_line(system_turn, template, use_raw=False))
    target.append(template.user_cue)
    blocks.append("\n".join(target))
    return template.block_separator.join(blocks)


def build_prompt(exemplars: Sequence[Exemplar], goal: Goal, history: Sequence[Turn],
                 budget: int, template: PromptTemplate = DEFAULT_TEMPLATE,
                 estimator: Callable[[str], int] = estimate_tokens) -> str:
    """Assemble the in-context-learning prompt within a token budget.

    Raises BudgetExceeded if the prompt is still over budget with a single
    exemplar and only the two most recent history pairs retained.
    """
    if not 1 <= len(exemplars) <= 2:
        raise ValueError(f"need 1-2 exemplars, got {len(exemplars)}")
    _check_history(history)
    pairs = [(history[i], history[i + 1]) for i in range(0, len(history), 2)]

    exs = list(exemplars)
    prompt = _assemble(exs, goal, pairs, template)
    if estimator(prompt) <= budget:
        return prompt
    if len(exs) == 2:
        exs = exs[:1]
        prompt = _assemble(exs, goal, pairs, template)
        if estimator(prompt) <= budget:
            return prompt
    floor = min(MIN_HISTORY_PAIRS, len(pairs))
    while len(pairs) > floor:
        pairs = pairs[1:]
        prompt = _assemble(exs, goal, pairs, template)
        if estimator(prompt) <= budget:
            return prompt
    raise BudgetExceeded(
        f"prompt estimate {estimator(prompt)} tokens exceeds budget {budget} "
        "with one exemplar and minimum history")
