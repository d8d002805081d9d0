"""Interactive simulation loop: user-sim turn -> TOD turn -> accumulate -> repeat.

A dialogue closes on the first of: end-of-dialogue token (classified
complete or premature by whether every goal domain is informed), a detected
conversational loop, the turn-pair cap, or an unrecoverable provider
failure. Provider failures never escape a dialogue; they are recorded as
its termination. Hallucination detection is advisory and lands in the
transcript annotations, never in the termination.
"""

from __future__ import annotations

import hashlib
import json
import random
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

from .dialogue import (
    DEFAULT_TEMPLATE,
    BudgetExceeded,
    Exemplar,
    PromptTemplate,
    Speaker,
    TerminationKind,
    TerminationReason,
    Transcript,
    Turn,
    build_prompt,
    detect_end_token,
    normalize_utterance,
)
from .goals import Goal
from .providers import CompletionParams, CompletionProvider, ProviderError, TODProvider
from .success import Ontology, evaluate_inform

# MultiWOZ-flavored domain keyword lexicon for advisory hallucination flagging.
DEFAULT_LEXICON = {
    "attraction": ["cinema", "museum", "theatre", "gallery", "park", "college",
                   "nightclub", "attraction", "architecture", "swimming pool"],
    "restaurant": ["restaurant", "dine", "dining", "food", "eat"],
    "hotel": ["hotel", "guesthouse", "guest house", "stay", "room"],
    "train": ["train", "railway"],
    "taxi": ["taxi", "cab", "car"],
    "hospital": ["hospital", "doctor"],
    "police": ["police"],
}


@dataclass(frozen=True)
class SessionLimits:
    max_turn_pairs: int = 10
    loop_window: int = 2
    loop_repeats: int = 2

    def __post_init__(self):
        for name in ("max_turn_pairs", "loop_window", "loop_repeats"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass(frozen=True)
class HallucinationFlag:
    turn_index: int
    domain: str
    keyword: str

    def as_record(self) -> dict:
        return {"turn_index": self.turn_index, "domain": self.domain, "keyword": self.keyword}


def detect_loop(turns: Sequence[Turn], window: int = 2, repeats: int = 2) -> bool:
    """True iff the last `window` (user, system) pairs recur identically
    `repeats` more consecutive times immediately before them. Comparison is
    on normalized text, so casing/punctuation changes do not hide a loop."""
    pairs = []
    for i in range(0, len(turns) - 1, 2):
        pairs.append((normalize_utterance(turns[i].text),
                      normalize_utterance(turns[i + 1].text)))
    if len(pairs) < (repeats + 1) * window:
        return False
    tail = pairs[-window:]
    for r in range(1, repeats + 1):
        lo = len(pairs) - (r + 1) * window
        hi = len(pairs) - r * window
        if pairs[lo:hi] != tail:
            return False
    return True


def flag_hallucination(turns: Sequence[Turn], goal: Goal,
                       domain_lexicon: dict[str, Sequence[str]]) -> list[HallucinationFlag]:
    """Advisory flags for user turns that mention keywords of off-goal domains.

    Recall-oriented and bounded by the lexicon: a mention of a domain with no
    keyword entry is never flagged.
    """
    flags = []
    for turn in turns:
        if turn.speaker is not Speaker.USER:
            continue
        padded = f" {normalize_utterance(turn.text)} "
        for domain, keywords in domain_lexicon.items():
            if domain in goal.domains:
                continue
            for keyword in keywords:
                if f" {normalize_utterance(keyword)} " in padded:
                    flags.append(HallucinationFlag(turn.index, domain, keyword))
    return flags


def run_dialogue(goal: Goal, exemplars: Sequence[Exemplar],
                 completion: CompletionProvider, tod: TODProvider,
                 limits: SessionLimits = SessionLimits(), *,
                 params: CompletionParams = CompletionParams(),
                 ontology: Ontology | None = None,
                 template: PromptTemplate = DEFAULT_TEMPLATE,
                 lexicon: dict[str, Sequence[str]] | None = None,
                 clock: Callable[[], float] = time.time) -> Transcript:
    """Drive one interactive dialogue to termination; never raises provider errors."""
    onto = ontology if ontology is not None else Ontology.permissive_default()
    started = clock()
    turns: list[Turn] = []
    termination: TerminationReason

    while True:
        try:
            prompt = build_prompt(exemplars, goal, turns, params.max_context, template)
            raw = completion.complete(prompt, params)
        except (ProviderError, BudgetExceeded) as exc:
            termination = TerminationReason(TerminationKind.PROVIDER_ERROR, str(exc))
            break
        is_end, cleaned = detect_end_token(raw, template.end_token)
        turns.append(Turn(Speaker.USER, cleaned, raw, len(turns)))
        if is_end:
            inform = evaluate_inform(turns, goal, onto)
            if all(inform.values()):
                termination = TerminationReason(
                    TerminationKind.END_TOKEN_COMPLETE, "end token with all domains informed")
            else:
                missing = [d for d, ok in inform.items() if not ok]
                termination = TerminationReason(
                    TerminationKind.END_TOKEN_PREMATURE,
                    "end token with uninformed domains: " + ", ".join(missing))
            break
        try:
            reply = tod.tod_respond(tuple(turns[:-1]), cleaned)
        except ProviderError as exc:
            termination = TerminationReason(TerminationKind.PROVIDER_ERROR, str(exc))
            break
        turns.append(Turn(Speaker.SYSTEM, reply, reply, len(turns)))
        if detect_loop(turns, limits.loop_window, limits.loop_repeats):
            termination = TerminationReason(
                TerminationKind.LOOP_DETECTED,
                f"last {limits.loop_window} turn pairs repeated {limits.loop_repeats} extra times")
            break
        if len(turns) // 2 >= limits.max_turn_pairs:
            termination = TerminationReason(
                TerminationKind.MAX_TURNS_EXCEEDED,
                f"reached {limits.max_turn_pairs} turn pairs")
            break

    annotations: tuple[dict, ...] = ()
    if lexicon:
        annotations = tuple(f.as_record() for f in flag_hallucination(turns, goal, lexicon))
    exemplar_ids = tuple(
        ex.exemplar_id if ex.exemplar_id is not None else f"exemplar-{i}"
        for i, ex in enumerate(exemplars))
    return Transcript(
        goal=goal, turns=tuple(turns), termination=termination,
        exemplar_ids=exemplar_ids, provider_params=params.as_record(),
        timestamps={"started": started, "finished": clock()},
        annotations=annotations)


class GoldTurn(NamedTuple):
    text: str
    is_end: bool


def run_gold_turn(gold_history: Sequence[Turn], goal: Goal,
                  exemplars: Sequence[Exemplar], completion: CompletionProvider, *,
                  params: CompletionParams = CompletionParams(),
                  template: PromptTemplate = DEFAULT_TEMPLATE) -> GoldTurn:
    """Generate a single next user turn from gold history; no TOD call is made."""
    prompt = build_prompt(exemplars, goal, gold_history, params.max_context, template)
    raw = completion.complete(prompt, params)
    is_end, cleaned = detect_end_token(raw, template.end_token)
    return GoldTurn(cleaned, is_end)


@dataclass
class SimulationConfig:
    """Everything run_batch needs beyond the goal list and exemplar pool.

    Provider factories are invoked once per dialogue so scripted providers
    replay from the top for every goal; HTTP factories may return a shared
    client.
    """

    completion_factory: Callable[[], CompletionProvider]
    tod_factory: Callable[[], TODProvider]
    params: CompletionParams = CompletionParams()
    limits: SessionLimits = SessionLimits()
    template: PromptTemplate = DEFAULT_TEMPLATE
    ontology: Ontology | None = None
    lexicon: dict[str, Sequence[str]] | None = None
    out_dir: Path | None = None
    goal_file: str = ""
    exemplar_count: int = 2
    parallelism: int = 1
    clock: Callable[[], float] = time.time


@dataclass(frozen=True)
class RunManifest:
    run_id: str
    goal_file: str
    seed: int
    provider_params: dict
    transcripts: tuple[dict, ...]
    termination_counts: dict[str, int]

    def as_record(self) -> dict:
        return {
            "run_id": self.run_id,
            "goal_file": self.goal_file,
            "seed": self.seed,
            "provider_params": dict(self.provider_params),
            "transcripts": [dict(t) for t in self.transcripts],
            "termination_counts": dict(self.termination_counts),
        }

    @classmethod
    def from_record(cls, record: dict) -> "RunManifest":
        return cls(
            run_id=record["run_id"], goal_file=record.get("goal_file", ""),
            seed=record["seed"], provider_params=dict(record.get("provider_params", {})),
            transcripts=tuple(record.get("transcripts", ())),
            termination_counts=dict(record.get("termination_counts", {})))


def _select_without_replacement(pool: Sequence[Exemplar], k: int,
                                rng: random.Random) -> list[Exemplar]:
    if len(pool) < k:
        raise ValueError(f"exemplar pool of {len(pool)} cannot supply {k} exemplars")
    return rng.sample(list(pool), k)


def _deterministic_run_id(goal_file: str, seed: int, n_goals: int, params: dict) -> str:
    digest = hashlib.sha256(
        json.dumps([goal_file, seed, n_goals, params], sort_keys=True).encode()).hexdigest()
    return f"run-{digest[:12]}"


def run_batch(goals: Sequence[Goal], exemplar_pool: Sequence[Exemplar], seed: int,
              config: SimulationConfig) -> RunManifest:
    """Run one dialogue per goal with seeded exemplar selection and persist results.

    Per-dialogue failures land in the transcripts; the batch always completes.
    With scripted providers and a fixed clock the outputs are bit-deterministic.
    """
    rng = random.Random(seed)
    selections = [
        _select_without_replacement(exemplar_pool, config.exemplar_count, rng)
        for _ in goals
    ]

    def run_one(item: tuple[Goal, list[Exemplar]]) -> Transcript:
        goal, exemplars = item
        return run_dialogue(
            goal, exemplars, config.completion_factory(), config.tod_factory(),
            config.limits, params=config.params, ontology=config.ontology,
            template=config.template, lexicon=config.lexicon, clock=config.clock)

    jobs = list(zip(goals, selections))
    if config.parallelism > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            transcripts = list(pool.map(run_one, jobs))
    else:
        transcripts = [run_one(job) for job in jobs]

    transcript_path = None
    if config.out_dir is not None:
        out_dir = Path(config.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        transcript_path = out_dir / "transcripts.jsonl"
        with transcript_path.open("w", encoding="utf-8") as handle:
            for transcript in transcripts:
                handle.write(json.dumps(transcript.to_record()) + "\n")

    refs = tuple(
        {
            "index": i,
            "source_id": t.goal.source_id,
            "termination": t.termination.kind.value,
            "path": transcript_path.name if transcript_path else None,
            "line": i,
        }
        for i, t in enumerate(transcripts))
    counts = Counter(t.termination.kind.value for t in transcripts)
    manifest = RunManifest(
        run_id=_deterministic_run_id(config.goal_file, seed, len(goals),
                                     config.params.as_record()),
        goal_file=config.goal_file, seed=seed,
        provider_params=config.params.as_record(),
        transcripts=refs, termination_counts=dict(sorted(counts.items())))
    if config.out_dir is not None:
        (Path(config.out_dir) / "manifest.json").write_text(
            json.dumps(manifest.as_record(), indent=2) + "\n", encoding="utf-8")
    return manifest


def with_fixed_clock(config: SimulationConfig, value: float = 0.0) -> SimulationConfig:
    """Copy of the config whose clock always returns `value` (reproducible runs)."""
    return replace(config, clock=lambda: value)
