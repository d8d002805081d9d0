"""Conversational goal model and grounding-form rendering.

A goal maps domain names ("hotel", "train") to four constraint sections:
``info`` search constraints, ``book`` booking parameters, ``fail_book``
fallback booking values, and ``reqt`` requested slots. Every simulated
dialogue is grounded on one goal, which can be rendered three ways:

* logical form    -- the structured document itself (``serialize_goal``)
* parsed logical  -- one "- domain section slot value." line per entry
* natural language -- templated instruction text per domain
"""

from __future__ import annotations

import ast
import json
import re
from dataclasses import dataclass, field

SECTIONS = ("info", "book", "fail_book", "reqt")

_DOMAIN_NAME = re.compile(r"^[a-z][a-z0-9_]*$")


class GoalError(ValueError):
    """Base class for goal parsing/rendering failures."""


class MalformedGoal(GoalError):
    pass


class EmptyGoal(GoalError):
    pass


class UnknownSection(GoalError):
    pass


class MissingTemplate(GoalError):
    pass


@dataclass(frozen=True)
class DomainGoal:
    """Constraint sections for one domain. Treated as immutable once built."""

    info: dict[str, str] = field(default_factory=dict)
    book: dict[str, str] = field(default_factory=dict)
    fail_book: dict[str, str] = field(default_factory=dict)
    reqt: tuple[str, ...] = ()

    def __post_init__(self):
        for section in ("info", "book", "fail_book"):
            for slot, value in getattr(self, section).items():
                if not isinstance(slot, str) or not slot.strip():
                    raise MalformedGoal(f"empty slot name in section {section!r}")
                if not isinstance(value, str) or not value.strip():
                    raise MalformedGoal(f"empty value for {section} slot {slot!r}")
        for slot in self.reqt:
            if not isinstance(slot, str) or not slot.strip():
                raise MalformedGoal("empty requested slot name")
        orphans = [s for s in self.fail_book if s not in self.book]
        if orphans:
            raise MalformedGoal(f"fail_book slots {orphans} have no book counterpart")

    def values(self) -> list[str]:
        """All slot values across info/book/fail_book, in section order."""
        out = list(self.info.values())
        out.extend(self.book.values())
        out.extend(self.fail_book.values())
        return out


@dataclass(frozen=True)
class Goal:
    """An ordered set of per-domain goals, optionally tagged with its source dialogue id."""

    domains: dict[str, DomainGoal]
    source_id: str | None = None

    def __post_init__(self):
        if not self.domains:
            raise EmptyGoal("goal has no domains")
        for name in self.domains:
            if not isinstance(name, str) or not _DOMAIN_NAME.match(name):
                raise MalformedGoal(f"domain name {name!r} is not a lowercase token")


def _slot_map(raw, domain: str, section: str) -> dict[str, str]:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise MalformedGoal(f"{domain}.{section} is not a map")
    out: dict[str, str] = {}
    for slot, value in raw.items():
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = str(value)
        if not isinstance(value, str):
            raise MalformedGoal(f"{domain}.{section}.{slot} has non-text value {value!r}")
        out[slot] = value
    return out


def _reqt_list(raw, domain: str) -> tuple[str, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, (list, tuple)):
        raise MalformedGoal(f"{domain}.reqt is not a list")
    return tuple(raw)


def goal_from_mapping(obj: dict, source_id: str | None = None) -> Goal:
    """Build a Goal from an already-parsed nested mapping (strict sections)."""
    if not isinstance(obj, dict):
        raise MalformedGoal("goal document is not a map")
    domains: dict[str, DomainGoal] = {}
    for name, body in obj.items():
        if not isinstance(body, dict):
            raise MalformedGoal(f"domain {name!r} is not a map")
        unknown = [k for k in body if k not in SECTIONS]
        if unknown:
            raise UnknownSection(f"domain {name!r} has unknown sections {unknown}")
        domains[name] = DomainGoal(
            info=_slot_map(body.get("info"), name, "info"),
            book=_slot_map(body.get("book"), name, "book"),
            fail_book=_slot_map(body.get("fail_book"), name, "fail_book"),
            reqt=_reqt_list(body.get("reqt"), name),
        )
    return Goal(domains=domains, source_id=source_id)


def parse_goal(text: str, source_id: str | None = None) -> Goal:
    """Parse a logical-form goal document.

    Accepts both strict double-quoted documents and the single-quoted
    pseudo-structured variant; quote style is normalized by falling back
    from a JSON parse to a Python-literal parse.
    """
    try:
        obj = json.loads(text)
    except (TypeError, json.JSONDecodeError):
        try:
            obj = ast.literal_eval(text)
        except (TypeError, ValueError, SyntaxError, MemoryError, RecursionError) as exc:
            raise MalformedGoal(f"unparseable goal document: {exc}") from exc
    return goal_from_mapping(obj, source_id=source_id)


def goal_as_mapping(goal: Goal) -> dict:
    """Inverse of goal_from_mapping; empty sections are omitted."""
    obj: dict = {}
    for domain, dg in goal.domains.items():
        body: dict = {}
        if dg.info:
            body["info"] = dict(dg.info)
        if dg.book:
            body["book"] = dict(dg.book)
        if dg.fail_book:
            body["fail_book"] = dict(dg.fail_book)
        if dg.reqt:
            body["reqt"] = list(dg.reqt)
        obj[domain] = body
    return obj


def serialize_goal(goal: Goal) -> str:
    """Render the canonical (double-quoted, single-line) logical form."""
    return json.dumps(goal_as_mapping(goal))


def render_parsed_logical(goal: Goal, include_reqt: bool = False) -> str:
    """Render the line-per-slot parsed logical form.

    Emits exactly one "- {domain} {section} {slot} {value}." line per
    info/book/fail_book entry, in source order. Requested slots are off by
    default; with include_reqt=True each adds a "- {domain} reqt {slot}."
    line so the simulator can see what to ask for.
    """
    lines: list[str] = []
    for domain, dg in goal.domains.items():
        for section in ("info", "book", "fail_book"):
            for slot, value in getattr(dg, section).items():
                lines.append(f"- {domain} {section} {slot} {value}.")
        if include_reqt:
            for slot in dg.reqt:
                lines.append(f"- {domain} reqt {slot}.")
    return "\n".join(lines)


def count_intents(goal: Goal) -> int:
    """Number of intents in a goal; one intent per top-level domain."""
    return len(goal.domains)


@dataclass(frozen=True)
class NlTemplates:
    """Phrase templates for natural-language goal rendering.

    slot_phrases maps (domain, slot) or (domain, slot, value) to a predicate
    phrase ("should serve {value} food"); book/fail_book/reqt map a domain to
    a whole-sentence template. Any gap falls back to a generic value-preserving
    phrasing unless allow_generic is False, in which case it raises
    MissingTemplate.
    """

    intro: dict[str, str] = field(default_factory=dict)
    slot_phrases: dict[tuple, str] = field(default_factory=dict)
    info_order: dict[str, tuple[str, ...]] = field(default_factory=dict)
    book: dict[str, str] = field(default_factory=dict)
    fail_book: dict[str, str] = field(default_factory=dict)
    reqt: dict[str, str] = field(default_factory=dict)
    allow_generic: bool = True


GENERIC_TEMPLATES = NlTemplates()

MULTIWOZ_TEMPLATES = NlTemplates(
    intro={
        "hotel": "You are looking for a place to stay.",
        "restaurant": "You are looking for a place to dine.",
        "train": "You are looking for a train.",
        "attraction": "You are looking for places to go in town.",
        "taxi": "You are looking for a taxi.",
    },
    slot_phrases={
        ("hotel", "pricerange"): "should be in the {value} price range",
        ("hotel", "type"): "should be in the type of {value}",
        ("hotel", "parking", "yes"): "should include free parking",
        ("hotel", "parking", "no"): "does not need to include free parking",
        ("hotel", "internet", "yes"): "should include free wifi",
        ("hotel", "internet", "no"): "does not need to include free wifi",
        ("hotel", "area"): "should be in the {value}",
        ("hotel", "stars"): "should have a star rating of {value}",
        ("hotel", "name"): "should be called {value}",
        ("restaurant", "food"): "should serve {value} food",
        ("restaurant", "pricerange"): "should be in the {value} price range",
        ("restaurant", "area"): "should be in the {value}",
        ("restaurant", "name"): "should be called {value}",
        ("train", "destination"): "should go to {value}",
        ("train", "departure"): "should depart from {value}",
        ("train", "day"): "should leave on {value}",
        ("train", "leaveAt"): "should leave after {value}",
        ("train", "arriveBy"): "should arrive by {value}",
        ("attraction", "type"): "should be in the type of {value}",
        ("attraction", "area"): "should be in the {value}",
        ("attraction", "name"): "should be called {value}",
    },
    info_order={
        "hotel": ("pricerange", "type", "parking", "internet", "area", "stars", "name"),
    },
    book={
        "hotel": "Once you find the hotel you want to book it for {people} people and {stay} nights starting from {day}.",
        "restaurant": "Once you find the restaurant you want to book a table for {people} people at {time} on {day}.",
        "train": "Once you find the train you want to make a booking for {people} people.",
    },
    fail_book={
        "hotel": "If the booking fails how about {stay} nights",
    },
)


def _intro_sentence(domain: str, templates: NlTemplates) -> str:
    if domain in templates.intro:
        return templates.intro[domain]
    if not templates.allow_generic:
        raise MissingTemplate(f"no intro template for domain {domain!r}")
    return f"You are looking for a {domain}."


def _slot_phrase(domain: str, slot: str, value: str, templates: NlTemplates) -> str:
    for key in ((domain, slot, value), (domain, slot)):
        if key in templates.slot_phrases:
            return templates.slot_phrases[key].format(value=value)
    if not templates.allow_generic:
        raise MissingTemplate(f"no phrase template for {domain}/{slot}")
    return f"should have {slot} {value}"


def _ordered_info(domain: str, dg: DomainGoal, templates: NlTemplates) -> list[tuple[str, str]]:
    preferred = templates.info_order.get(domain, ())
    first = [(s, dg.info[s]) for s in preferred if s in dg.info]
    rest = [(s, v) for s, v in dg.info.items() if s not in preferred]
    return first + rest


def _info_sentences(domain: str, dg: DomainGoal, templates: NlTemplates) -> list[str]:
    phrases = [_slot_phrase(domain, s, v, templates) for s, v in _ordered_info(domain, dg, templates)]
    sentences = []
    for i in range(0, len(phrases), 2):
        chunk = phrases[i:i + 2]
        sentences.append(f"The {domain} " + " and ".join(chunk) + ".")
    return sentences


def _booking_sentence(domain: str, slots: dict[str, str], template: str | None,
                      templates: NlTemplates, generic_lead: str) -> str:
    if template is not None:
        try:
            return template.format(**slots)
        except (KeyError, IndexError) as exc:
            if not templates.allow_generic:
                raise MissingTemplate(
                    f"template for {domain!r} references missing slot {exc}") from exc
    elif not templates.allow_generic:
        raise MissingTemplate(f"no booking template for domain {domain!r}")
    listed = ", ".join(f"{s} {v}" for s, v in slots.items())
    return f"{generic_lead} {listed}."


def _reqt_sentence(domain: str, reqt: tuple[str, ...], templates: NlTemplates) -> str:
    template = templates.reqt.get(domain)
    if template is not None:
        return template.format(slots=", ".join(reqt))
    if not templates.allow_generic:
        raise MissingTemplate(f"no reqt template for domain {domain!r}")
    return "Make sure you get the " + ", ".join(reqt) + "."


def render_natural_language(goal: Goal, templates: NlTemplates = GENERIC_TEMPLATES) -> str:
    """Render fluent instruction text covering every constraint of the goal."""
    parts: list[str] = []
    for domain, dg in goal.domains.items():
        parts.append(_intro_sentence(domain, templates))
        parts.extend(_info_sentences(domain, dg, templates))
        if dg.book:
            parts.append(_booking_sentence(
                domain, dg.book, templates.book.get(domain), templates,
                generic_lead=f"Once you find the {domain} you want to book it with"))
        if dg.fail_book:
            parts.append(_booking_sentence(
                domain, dg.fail_book, templates.fail_book.get(domain), templates,
                generic_lead="If the booking fails how about"))
        if dg.reqt:
            parts.append(_reqt_sentence(domain, dg.reqt, templates))
    return " ".join(p for p in parts if p)
