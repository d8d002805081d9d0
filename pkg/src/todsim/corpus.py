"""Corpus ingestion and persistence: goals, exemplars, transcripts, gold contexts,
ontologies, and an on-disk cache of dependency parses fetched from an external
parsing service."""

from __future__ import annotations

import hashlib
import json
import random
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import httpx

from .dialogue import Exemplar, Speaker, Transcript, Turn, check_alternation
from .goals import Goal, GoalError, goal_from_mapping, parse_goal
from .providers import ProviderError, ProviderErrorKind
from .success import Ontology


class FileUnreadable(OSError):
    pass


class PoolTooSmall(ValueError):
    pass


# Goal-level keys of raw MultiWOZ bundles that are not domains.
_MULTIWOZ_META_KEYS = {"message", "topic"}


@dataclass
class GoalLoadResult:
    goals: list[Goal] = field(default_factory=list)
    rejects: list[dict] = field(default_factory=list)


def _read_text(path: str | Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FileUnreadable(f"cannot read {path}: {exc}") from exc


def goal_from_multiwoz(entry: dict, source_id: str | None = None) -> Goal:
    """One-way lenient conversion of a raw MultiWOZ goal into a Goal.

    Keeps only the info/book/fail_book/reqt sections with text-valued slots,
    drops empty domains, bookkeeping keys, and fail_book slots that have no
    book counterpart.
    """
    raw_goal = entry.get("goal", entry) if isinstance(entry, dict) else entry
    if not isinstance(raw_goal, dict):
        raise GoalError(f"goal entry for {source_id!r} is not a map")
    mapping: dict = {}
    for domain, body in raw_goal.items():
        if domain in _MULTIWOZ_META_KEYS or not isinstance(body, dict) or not body:
            continue
        sections: dict = {}
        for name in ("info", "book", "fail_book"):
            raw = body.get(name)
            if not isinstance(raw, dict):
                continue
            slots = {s: str(v) for s, v in raw.items()
                     if isinstance(v, (str, int, float)) and not isinstance(v, bool)
                     and str(v).strip()}
            if slots:
                sections[name] = slots
        if "fail_book" in sections:
            book = sections.get("book", {})
            sections["fail_book"] = {s: v for s, v in sections["fail_book"].items() if s in book}
            if not sections["fail_book"]:
                del sections["fail_book"]
        reqt = body.get("reqt")
        if isinstance(reqt, (list, tuple)):
            slots = [str(s) for s in reqt if isinstance(s, str) and s.strip()]
            if slots:
                sections["reqt"] = slots
        if sections:
            mapping[domain] = sections
    return goal_from_mapping(mapping, source_id=source_id)


def load_goals(path: str | Path) -> GoalLoadResult:
    """Load goals from a line-delimited logical-form file or a MultiWOZ bundle.

    Malformed records are collected into the rejects report instead of
    aborting the load. Order is preserved.
    """
    text = _read_text(path)
    result = GoalLoadResult()
    stripped = text.strip()
    if not stripped:
        return result

    # A whole-file parse that succeeds as a single logical goal wins; a
    # single JSON object that is not a goal is treated as a MultiWOZ bundle.
    try:
        result.goals.append(parse_goal(stripped))
        return result
    except GoalError:
        pass
    try:
        document = json.loads(stripped)
    except json.JSONDecodeError:
        document = None
    if isinstance(document, dict):
        for dialogue_id, entry in document.items():
            try:
                result.goals.append(goal_from_multiwoz(entry, source_id=str(dialogue_id)))
            except GoalError as exc:
                result.rejects.append({"id": str(dialogue_id), "error": str(exc)})
        return result

    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            result.goals.append(parse_goal(line))
        except GoalError as exc:
            result.rejects.append({"line": lineno, "error": str(exc)})
    return result


@dataclass
class ExemplarPool:
    exemplars: list[Exemplar]
    source: str = ""

    def __len__(self) -> int:
        return len(self.exemplars)


def load_exemplars(path: str | Path) -> ExemplarPool:
    """Load exemplars from a transcript JSONL file.

    Records whose final turn is not an end-token user turn cannot serve as
    in-context exemplars and are skipped.
    """
    pool = ExemplarPool(exemplars=[], source=str(path))
    for lineno, line in enumerate(_read_text(path).splitlines(), start=1):
        if not line.strip():
            continue
        record = json.loads(line)
        goal = goal_from_mapping(record["goal"], source_id=record.get("source_id"))
        turns = tuple(
            Turn(Speaker(t["speaker"]), t["text"], t.get("raw_text", t["text"]), i)
            for i, t in enumerate(record["turns"]))
        try:
            pool.exemplars.append(Exemplar(
                goal=goal, turns=turns,
                exemplar_id=record.get("source_id") or f"{Path(path).stem}:{lineno}"))
        except ValueError:
            continue
    return pool


def select_exemplars(pool: ExemplarPool | Sequence[Exemplar], k: int = 2,
                     seed: int | None = None, *,
                     rng: random.Random | None = None) -> list[Exemplar]:
    """k distinct exemplars via a seeded draw without replacement."""
    exemplars = list(pool.exemplars if isinstance(pool, ExemplarPool) else pool)
    if len(exemplars) < k:
        raise PoolTooSmall(f"pool of {len(exemplars)} cannot supply {k} exemplars")
    draw = rng if rng is not None else random.Random(seed)
    return draw.sample(exemplars, k)


def write_transcripts(path: str | Path, transcripts: Sequence[Transcript]) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for transcript in transcripts:
            handle.write(json.dumps(transcript.to_record()) + "\n")


def read_transcripts(path: str | Path) -> list[Transcript]:
    return [Transcript.from_record(json.loads(line))
            for line in _read_text(path).splitlines() if line.strip()]


def load_ontology(path: str | Path) -> Ontology:
    return Ontology.from_mapping(json.loads(_read_text(path)))


@dataclass(frozen=True)
class GoldContext:
    """A gold dialogue history plus the reference next user utterance."""

    goal: Goal
    history: tuple[Turn, ...]
    reference: str | None = None

    def __post_init__(self):
        check_alternation(self.history, "gold history")


def load_gold_contexts(path: str | Path) -> list[GoldContext]:
    """Read gold contexts: JSONL of {goal, history: [{speaker, text}], reference}."""
    contexts = []
    for line in _read_text(path).splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        goal = goal_from_mapping(record["goal"], source_id=record.get("source_id"))
        history = tuple(
            Turn(Speaker(t["speaker"]), t["text"], t.get("raw_text", t["text"]), i)
            for i, t in enumerate(record.get("history", ())))
        contexts.append(GoldContext(goal=goal, history=history,
                                    reference=record.get("reference")))
    return contexts


class ParseCache:
    """Disk cache of CoNLL-U blocks keyed by utterance content hash.

    Concurrent readers are safe; writes take an exclusive lock and go
    through a temp-file rename so a crash never leaves a torn entry.
    """

    def __init__(self, directory: str | Path):
        self._dir = Path(directory)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    @staticmethod
    def key(utterance: str) -> str:
        return hashlib.sha256(utterance.encode("utf-8")).hexdigest()

    def _path(self, utterance: str) -> Path:
        return self._dir / f"{self.key(utterance)}.conllu"

    def get(self, utterance: str) -> str | None:
        path = self._path(utterance)
        if not path.exists():
            return None
        return path.read_text(encoding="utf-8")

    def put(self, utterance: str, block: str) -> None:
        path = self._path(utterance)
        with self._lock:
            tmp = path.with_suffix(".tmp")
            tmp.write_text(block, encoding="utf-8")
            tmp.replace(path)


def fetch_parses(utterances: Sequence[str], parser_endpoint: str,
                 cache: ParseCache | None = None, *, timeout: float = 30.0,
                 transport: httpx.BaseTransport | None = None) -> str:
    """Fetch one CoNLL-U block per utterance from an external parsing service.

    Wire shape: POST {text} -> {conllu}. Cached blocks short-circuit the
    endpoint entirely, so metrics stay reproducible offline after one
    online run; a cold-cache endpoint failure raises ProviderError.
    """
    blocks: list[str] = []
    with httpx.Client(timeout=timeout, transport=transport) as client:
        for utterance in utterances:
            cached = cache.get(utterance) if cache is not None else None
            if cached is not None:
                blocks.append(cached.strip("\n"))
                continue
            try:
                response = client.post(parser_endpoint, json={"text": utterance})
            except httpx.TimeoutException as exc:
                raise ProviderError(ProviderErrorKind.TIMEOUT,
                                    f"parser timed out: {exc}") from exc
            except httpx.HTTPError as exc:
                raise ProviderError(ProviderErrorKind.REMOTE,
                                    f"parser unreachable: {exc}") from exc
            if response.status_code >= 400:
                raise ProviderError(ProviderErrorKind.REMOTE,
                                    f"parser returned {response.status_code}")
            try:
                block = response.json()["conllu"]
            except (KeyError, ValueError) as exc:
                raise ProviderError(ProviderErrorKind.MALFORMED,
                                    f"parser response missing conllu: {exc}") from exc
            if cache is not None:
                cache.put(utterance, block)
            blocks.append(block.strip("\n"))
    return "\n\n".join(blocks) + "\n"
