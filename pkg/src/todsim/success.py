"""Goal-success evaluation and the Inform/Success/BLEU/combined-score pipeline.

A dialogue domain counts as informed when some system turn attributed to it
offers an entity -- via the delexicalized "[value_name]"/"[value_id]"
placeholders or a lexical entity-name match against the ontology -- without
lexically contradicting the goal's info constraints. A dialogue succeeds
when every domain is informed and every requested slot surfaced in a system
turn. Goal success rate (GSR) is the mean success flag over a corpus.

System turns are attributed to the most recently named goal domain; for
single-domain goals every turn belongs to that domain. This is an
operational convention: placeholders carry no domain tag, so some
attribution rule is required.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .dialogue import Speaker, Transcript, Turn, normalize_utterance
from .diversity import DependencyTree, DiversityError, NoEdges, mean_dep_distance, \
    mtld, std_dep_distance, tokenize
from .goals import Goal, count_intents


class EvaluationError(ValueError):
    pass


class UnknownDomain(EvaluationError):
    pass


class LengthMismatch(EvaluationError):
    pass


class EmptyCorpus(EvaluationError):
    pass


OFFER_PLACEHOLDERS = ("[value_name]", "[value_id]")

# MultiWOZ-style delexicalization aliases for requested slots.
DEFAULT_PLACEHOLDERS = {
    "leaveAt": "[value_leave]",
    "arriveBy": "[value_arrive]",
    "trainID": "[value_id]",
    "entrance fee": "[value_price]",
}


@dataclass(frozen=True)
class DomainOntology:
    entities: tuple[dict, ...] = ()
    requestables: tuple[str, ...] = ()


@dataclass(frozen=True)
class Ontology:
    """Entity database and requestable-slot inventory backing the evaluator.

    A permissive ontology covers every domain with an empty entity set, so
    evaluation falls back to placeholder matching only; that is the right
    mode for delexicalized system output.
    """

    domains: dict[str, DomainOntology] = field(default_factory=dict)
    placeholders: dict[str, str] = field(default_factory=dict)
    permissive: bool = False

    @classmethod
    def permissive_default(cls) -> "Ontology":
        return cls(permissive=True)

    def covers(self, domain: str) -> bool:
        return self.permissive or domain in self.domains

    def entities(self, domain: str) -> tuple[dict, ...]:
        dom = self.domains.get(domain)
        return dom.entities if dom else ()

    def placeholder(self, slot: str) -> str:
        if slot in self.placeholders:
            return self.placeholders[slot]
        if slot in DEFAULT_PLACEHOLDERS:
            return DEFAULT_PLACEHOLDERS[slot]
        return f"[value_{slot.lower()}]"

    def slot_values(self, domain: str, slot: str) -> set[str]:
        values = set()
        for entity in self.entities(domain):
            if slot in entity:
                values.add(str(entity[slot]))
        return values

    @classmethod
    def from_mapping(cls, obj: dict) -> "Ontology":
        domains = {}
        for name, body in obj.get("domains", obj).items():
            if name in ("placeholders", "permissive"):
                continue
            domains[name] = DomainOntology(
                entities=tuple(dict(e) for e in body.get("entities", ())),
                requestables=tuple(body.get("requestables", ())),
            )
        return cls(domains=domains,
                   placeholders=dict(obj.get("placeholders", {})),
                   permissive=bool(obj.get("permissive", False)))

    @classmethod
    def from_file(cls, path: str | Path) -> "Ontology":
        return cls.from_mapping(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class DialogueResult:
    inform: dict[str, bool]
    success: bool
    matched_entity: dict[str, dict | None] = field(default_factory=dict)
    provided_reqt: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def informed(self) -> bool:
        return all(self.inform.values())


def _turns_of(transcript_or_turns) -> Sequence[Turn]:
    return getattr(transcript_or_turns, "turns", transcript_or_turns)


def _word_in(needle: str, haystack_norm: str) -> bool:
    needle = normalize_utterance(needle)
    return bool(needle) and f" {needle} " in f" {haystack_norm} "


def _attribute_system_turns(turns: Sequence[Turn], goal: Goal) -> dict[int, str | None]:
    """Map system-turn index -> goal domain, by most recent domain-name mention."""
    domains = list(goal.domains)
    attribution: dict[int, str | None] = {}
    if len(domains) == 1:
        only = domains[0]
        for turn in turns:
            if turn.speaker is Speaker.SYSTEM:
                attribution[turn.index] = only
        return attribution
    active: str | None = None
    for turn in turns:
        norm = normalize_utterance(turn.text)
        best_pos = -1
        for domain in domains:
            pos = f" {norm} ".rfind(f" {domain} ")
            if pos > best_pos:
                best_pos = pos
                active = domain
        if turn.speaker is Speaker.SYSTEM:
            attribution[turn.index] = active
    return attribution


def _entity_consistent(entity: dict, info: dict[str, str]) -> bool:
    for slot, value in info.items():
        if slot in entity and normalize_utterance(str(entity[slot])) != normalize_utterance(value):
            return False
    return True


def evaluate_inform(transcript, goal: Goal, ontology: Ontology) -> dict[str, bool]:
    """Per-domain inform flags for a closed transcript."""
    turns = _turns_of(transcript)
    for domain in goal.domains:
        if not ontology.covers(domain):
            raise UnknownDomain(f"goal domain {domain!r} absent from ontology")
    attribution = _attribute_system_turns(turns, goal)
    flags: dict[str, bool] = {}
    for domain, dg in goal.domains.items():
        offered = False
        contradicted = False
        for turn in turns:
            if turn.speaker is not Speaker.SYSTEM or attribution.get(turn.index) != domain:
                continue
            norm = normalize_utterance(turn.text)
            if any(ph in turn.text for ph in OFFER_PLACEHOLDERS):
                offered = True
            for entity in ontology.entities(domain):
                name = entity.get("name") or entity.get("id")
                if name and _word_in(str(name), norm) and _entity_consistent(entity, dg.info):
                    offered = True
            for slot, value in dg.info.items():
                if _word_in(value, norm):
                    continue
                for other in ontology.slot_values(domain, slot):
                    if normalize_utterance(other) != normalize_utterance(value) \
                            and _word_in(other, norm):
                        contradicted = True
        flags[domain] = offered and not contradicted
    return flags


def _matched_entities(turns: Sequence[Turn], goal: Goal, ontology: Ontology,
                      attribution: dict[int, str | None]) -> dict[str, dict | None]:
    matched: dict[str, dict | None] = {}
    for domain, dg in goal.domains.items():
        matched[domain] = None
        for turn in turns:
            if turn.speaker is not Speaker.SYSTEM or attribution.get(turn.index) != domain:
                continue
            norm = normalize_utterance(turn.text)
            for entity in ontology.entities(domain):
                name = entity.get("name") or entity.get("id")
                if name and _word_in(str(name), norm) and _entity_consistent(entity, dg.info):
                    matched[domain] = entity
                    break
            if matched[domain]:
                break
    return matched


def evaluate_success(transcript, goal: Goal, ontology: Ontology) -> DialogueResult:
    """Dialogue-level success: informed everywhere plus every reqt slot surfaced."""
    turns = _turns_of(transcript)
    inform = evaluate_inform(turns, goal, ontology)
    attribution = _attribute_system_turns(turns, goal)
    matched = _matched_entities(turns, goal, ontology, attribution)
    system_texts = [t.text for t in turns if t.speaker is Speaker.SYSTEM]
    system_norms = [normalize_utterance(t) for t in system_texts]

    provided: dict[str, tuple[str, ...]] = {}
    all_reqt_met = True
    for domain, dg in goal.domains.items():
        got = []
        for slot in dg.reqt:
            placeholder = ontology.placeholder(slot)
            if any(placeholder in text for text in system_texts):
                got.append(slot)
                continue
            entity = matched.get(domain)
            if entity and slot in entity and \
                    any(_word_in(str(entity[slot]), norm) for norm in system_norms):
                got.append(slot)
        provided[domain] = tuple(got)
        if len(got) < len(dg.reqt):
            all_reqt_met = False

    success = all(inform.values()) and all_reqt_met
    return DialogueResult(inform=inform, success=success,
                          matched_entity=matched, provided_reqt=provided)


def gsr(results: Sequence[DialogueResult]) -> float:
    """Goal success rate: mean of the per-dialogue success flags."""
    if not results:
        raise EmptyCorpus("GSR over zero dialogues is undefined")
    return sum(1.0 for r in results if r.success) / len(results)


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(candidates: Sequence[str], references: Sequence[str]) -> float:
    """Corpus-level BLEU-4 in [0, 100]: uniform weights, standard brevity
    penalty, add-one smoothing applied when an n-gram order has zero clipped
    matches. Texts are whitespace-tokenized."""
    if len(candidates) != len(references):
        raise LengthMismatch(
            f"{len(candidates)} candidates vs {len(references)} references")
    if not candidates:
        raise EmptyCorpus("BLEU over an empty corpus is undefined")
    clipped = [0] * 4
    totals = [0] * 4
    candidate_len = 0
    reference_len = 0
    for candidate, reference in zip(candidates, references):
        cand = candidate.split()
        ref = reference.split()
        candidate_len += len(cand)
        reference_len += len(ref)
        for n in range(1, 5):
            cand_counts = _ngram_counts(cand, n)
            ref_counts = _ngram_counts(ref, n)
            totals[n - 1] += sum(cand_counts.values())
            clipped[n - 1] += sum(min(count, ref_counts[gram])
                                  for gram, count in cand_counts.items())
    if candidate_len == 0:
        return 0.0
    log_sum = 0.0
    for n in range(4):
        num, den = clipped[n], totals[n]
        if num == 0:
            num, den = num + 1, den + 1
        log_sum += 0.25 * math.log(num / den)
    brevity = 1.0 if candidate_len > reference_len \
        else math.exp(1.0 - reference_len / candidate_len)
    return 100.0 * brevity * math.exp(log_sum)


def combined_score(inform_pct: float, success_pct: float, bleu: float) -> float:
    """MultiWOZ-style aggregate: (Inform% + Success%) / 2 + BLEU."""
    return (inform_pct + success_pct) / 2.0 + bleu


@dataclass(frozen=True)
class IntentRow:
    label: str
    num_dialogs: int
    num_turns: int | None
    inform_pct: float
    success_pct: float
    bleu: float | None
    combo: float | None
    mtld: float | None
    mean_dep: float | None
    std_dep: float | None

    def as_record(self) -> dict:
        return {
            "num_intents": self.label,
            "num_dialogs": self.num_dialogs,
            "num_turns": self.num_turns,
            "inform": self.inform_pct,
            "success": self.success_pct,
            "bleu": self.bleu,
            "combo": self.combo,
            "mtld": self.mtld,
            "mean_dep": self.mean_dep,
            "std_dep": self.std_dep,
        }


def _bleu_pairs(transcripts, references, indices) -> tuple[list[str], list[str]]:
    cands, refs = [], []
    for i in indices:
        if references is None or references[i] is None:
            continue
        user_texts = [t.text for t in transcripts[i].turns if t.speaker is Speaker.USER]
        for cand, ref in zip(user_texts, references[i]):
            cands.append(cand)
            refs.append(ref)
    return cands, refs


def _group_row(label, indices, results, goals, transcripts, references, trees) -> IntentRow:
    informed = sum(1 for i in indices if results[i].informed())
    succeeded = sum(1 for i in indices if results[i].success)
    n = len(indices)
    inform_pct = 100.0 * informed / n
    success_pct = 100.0 * succeeded / n

    num_turns = None
    group_mtld = mean_dep = std_dep = None
    bleu = combo = None
    if transcripts is not None:
        num_turns = sum(len(transcripts[i].turns) for i in indices)
        tokens: list[str] = []
        for i in indices:
            for turn in transcripts[i].turns:
                if turn.speaker is Speaker.USER:
                    tokens.extend(tokenize(turn.text))
        try:
            group_mtld = mtld(tokens)
        except DiversityError:
            group_mtld = None
        cands, refs = _bleu_pairs(transcripts, references, indices)
        if cands:
            bleu = corpus_bleu(cands, refs)
            combo = combined_score(inform_pct, success_pct, bleu)
    if trees is not None:
        pooled: list[DependencyTree] = []
        for i in indices:
            pooled.extend(trees[i])
        try:
            mean_dep = mean_dep_distance(pooled)
            std_dep = std_dep_distance(pooled)
        except NoEdges:
            pass
    return IntentRow(label=label, num_dialogs=n, num_turns=num_turns,
                     inform_pct=inform_pct, success_pct=success_pct,
                     bleu=bleu, combo=combo, mtld=group_mtld,
                     mean_dep=mean_dep, std_dep=std_dep)


def aggregate_by_intent(results: Sequence[DialogueResult], goals: Sequence[Goal], *,
                        transcripts: Sequence[Transcript] | None = None,
                        references: Sequence[Sequence[str] | None] | None = None,
                        trees: Sequence[Sequence[DependencyTree]] | None = None
                        ) -> list[IntentRow]:
    """Per-intent-count report rows plus an "All" row; empty input -> no rows.

    BLEU references, when provided, are per-dialogue user-turn reference
    lists aligned by turn index; unmatched turns are dropped.
    """
    if len(results) != len(goals):
        raise LengthMismatch(f"{len(results)} results vs {len(goals)} goals")
    if not results:
        return []
    by_count: dict[int, list[int]] = {}
    for i, goal in enumerate(goals):
        by_count.setdefault(count_intents(goal), []).append(i)
    rows = [
        _group_row(str(intents), indices, results, goals, transcripts, references, trees)
        for intents, indices in sorted(by_count.items())
    ]
    rows.append(_group_row("All", list(range(len(results))), results, goals,
                           transcripts, references, trees))
    return rows


REPORT_COLUMNS = ("Num. Intents", "Num Dialogs", "Num Turns", "Inform", "Success",
                  "BLEU", "Combo Score", "MTLD", "Avg Dep Len", "Std Dep Len")


def render_report(rows: Sequence[IntentRow]) -> str:
    """Aligned-column text report in the shape of the per-intent results table."""
    def fmt(value, places=2):
        if value is None:
            return "-"
        if isinstance(value, float):
            return f"{value:.{places}f}"
        return str(value)

    table = [list(REPORT_COLUMNS)]
    for row in rows:
        table.append([
            row.label, str(row.num_dialogs), fmt(row.num_turns),
            fmt(row.inform_pct), fmt(row.success_pct), fmt(row.bleu),
            fmt(row.combo), fmt(row.mtld), fmt(row.mean_dep), fmt(row.std_dep),
        ])
    widths = [max(len(line[col]) for line in table) for col in range(len(REPORT_COLUMNS))]
    lines = ["  ".join(cell.ljust(width) for cell, width in zip(line, widths)).rstrip()
             for line in table]
    return "\n".join(lines)
