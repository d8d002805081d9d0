"""Lexical and syntactic diversity metrics.

MTLD (measure of textual lexical diversity) is the mean length of token
runs ("factors") whose running type-token ratio first falls to a threshold,
computed forward and in reverse and averaged; unlike raw TTR it is
normalized for text length. Syntactic diversity is quantified by the mean
and population standard deviation of dependency distances |dependent -
head| pooled over all non-root, non-punctuation edges.
"""

from __future__ import annotations

import re
import statistics
from dataclasses import dataclass
from typing import Iterable, Sequence

MTLD_THRESHOLD = 0.72


class DiversityError(ValueError):
    pass


class EmptyInput(DiversityError):
    pass


class MtldUndefined(DiversityError):
    """No factor completed in either scan direction (e.g. all-unique text)."""


class NoEdges(DiversityError):
    pass


class MalformedConllu(DiversityError):
    pass


_TOKEN = re.compile(r"\[value_[^\]\s]+\]|[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase, punctuation-stripped word tokens.

    Delexicalized placeholders like "[value_reference]" survive as single
    tokens so delexicalized system output stays comparable.
    """
    return _TOKEN.findall(text.lower())


def _mtld_pass(tokens: Sequence[str], threshold: float) -> float | None:
    """One directional MTLD scan; None when the factor count is zero."""
    factors = 0.0
    types: set[str] = set()
    run_len = 0
    ttr = 1.0
    for token in tokens:
        run_len += 1
        types.add(token)
        ttr = len(types) / run_len
        if ttr <= threshold:
            factors += 1.0
            types.clear()
            run_len = 0
            ttr = 1.0
    if run_len > 0:
        factors += (1.0 - ttr) / (1.0 - threshold)
    if factors == 0.0:
        return None
    return len(tokens) / factors


def mtld(tokens: Sequence[str], threshold: float = MTLD_THRESHOLD, *,
         bidirectional: bool = True) -> float:
    """Bidirectional MTLD: mean of the forward and reverse factor scores.

    Raises EmptyInput on an empty sequence and MtldUndefined when no scan
    direction completes even a partial factor (all tokens distinct).
    """
    if not tokens:
        raise EmptyInput("MTLD requires at least one token")
    forward = _mtld_pass(tokens, threshold)
    if not bidirectional:
        if forward is None:
            raise MtldUndefined("forward factor count is zero")
        return forward
    reverse = _mtld_pass(list(reversed(tokens)), threshold)
    defined = [score for score in (forward, reverse) if score is not None]
    if not defined:
        raise MtldUndefined("factor count is zero in both directions")
    return sum(defined) / len(defined)


@dataclass(frozen=True)
class DepNode:
    index: int   # 1-based position in the sentence
    head: int    # 0 for the root, else the head's position
    upos: str
    form: str


@dataclass(frozen=True)
class DependencyTree:
    nodes: tuple[DepNode, ...]

    def __post_init__(self):
        n = len(self.nodes)
        roots = 0
        for pos, node in enumerate(self.nodes, start=1):
            if node.index != pos:
                raise MalformedConllu(f"node indices not contiguous at position {pos}")
            if node.head == 0:
                roots += 1
            elif not 1 <= node.head <= n:
                raise MalformedConllu(f"head {node.head} of node {pos} out of range 1..{n}")
            if node.head == node.index:
                raise MalformedConllu(f"node {pos} is its own head")
        if roots != 1:
            raise MalformedConllu(f"tree has {roots} roots, expected exactly 1")


def _pooled_distances(trees: Iterable[DependencyTree]) -> list[int]:
    """Edge distances pooled across trees; root and punctuation edges excluded."""
    distances = []
    for tree in trees:
        for node in tree.nodes:
            if node.head == 0 or node.upos == "PUNCT":
                continue
            distances.append(abs(node.index - node.head))
    return distances


def mean_dep_distance(trees: Iterable[DependencyTree]) -> float:
    distances = _pooled_distances(trees)
    if not distances:
        raise NoEdges("no countable dependency edges")
    return sum(distances) / len(distances)


def std_dep_distance(trees: Iterable[DependencyTree]) -> float:
    distances = _pooled_distances(trees)
    if not distances:
        raise NoEdges("no countable dependency edges")
    return statistics.pstdev(distances)


def parse_conllu(text: str) -> list[DependencyTree]:
    """Parse CoNLL-U text into one DependencyTree per sentence.

    Follows the 10-column format: '#' comment lines ignored, blank lines
    separate sentences, multiword-token range lines (ID like "3-4") skipped.
    """
    trees: list[DependencyTree] = []
    nodes: list[DepNode] = []

    def flush():
        nonlocal nodes
        if nodes:
            trees.append(DependencyTree(tuple(nodes)))
            nodes = []

    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            flush()
            continue
        if line.startswith("#"):
            continue
        columns = line.split("\t")
        if len(columns) != 10:
            raise MalformedConllu(f"line {lineno}: expected 10 columns, got {len(columns)}")
        token_id = columns[0]
        if "-" in token_id:
            continue
        try:
            index = int(token_id)
            head = int(columns[6])
        except ValueError as exc:
            raise MalformedConllu(f"line {lineno}: non-numeric ID/HEAD") from exc
        nodes.append(DepNode(index=index, head=head, upos=columns[3], form=columns[1]))
    flush()
    return trees


@dataclass(frozen=True)
class DiversityReport:
    mtld: float | None
    mean_dep: float | None
    std_dep: float | None
    token_count: int
    edge_count: int

    def as_record(self) -> dict:
        return {
            "mtld": self.mtld,
            "mean_dep": self.mean_dep,
            "std_dep": self.std_dep,
            "token_count": self.token_count,
            "edge_count": self.edge_count,
        }

    def render(self) -> str:
        def fmt(value):
            return "-" if value is None else f"{value:.4f}"
        return (f"mtld {fmt(self.mtld)}  mean_dep {fmt(self.mean_dep)}  "
                f"std_dep {fmt(self.std_dep)}  token_count {self.token_count}  "
                f"edge_count {self.edge_count}")


def diversity_report(utterances: Sequence[str],
                     trees: Sequence[DependencyTree] | None = None) -> DiversityReport:
    """Pooled diversity metrics over a set of utterances (plus optional parses)."""
    tokens: list[str] = []
    for utterance in utterances:
        tokens.extend(tokenize(utterance))
    try:
        lexical = mtld(tokens)
    except DiversityError:
        lexical = None
    mean_dep = std_dep = None
    edge_count = 0
    if trees:
        edge_count = len(_pooled_distances(trees))
        try:
            mean_dep = mean_dep_distance(trees)
            std_dep = std_dep_distance(trees)
        except NoEdges:
            pass
    return DiversityReport(
        mtld=lexical, mean_dep=mean_dep, std_dep=std_dep,
        token_count=len(tokens), edge_count=edge_count)
