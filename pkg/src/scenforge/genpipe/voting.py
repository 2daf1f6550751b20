"""Self-consistency voting over candidate DSL texts.

Embedding mode picks the candidate whose canonical text has the highest
mean cosine similarity to the other parseable candidates (ties go to the
smallest index). Structured mode clusters candidates by Jaccard
similarity of their field-path sets, keeps the largest cluster, and
rebuilds the winner on the embedding-central member's skeleton with
per-field majority values.

Candidates that fail to parse never vote; they are reported with their
diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from ..dsl import DslDocument, field_paths, parse_dsl, print_dsl, set_field
from ..errors import DslError, GenerationError
from ..retrieval import cosine, embed_text

JACCARD_THETA = 0.8


@dataclass
class VoteResult:
    winner_index: int  # position in the original candidate list
    doc: DslDocument
    mode: str
    mean_similarity: float  # winner's mean cosine to the other voters
    cluster: list[int] = field(default_factory=list)
    discarded: list[tuple[int, str]] = field(default_factory=list)


def _parse_candidates(candidates: Sequence[str]):
    docs: dict[int, DslDocument] = {}
    discarded: list[tuple[int, str]] = []
    for i, text in enumerate(candidates):
        try:
            docs[i] = parse_dsl(text)
        except DslError as exc:
            discarded.append((i, str(exc)))
    if not docs:
        raise GenerationError(
            "no candidate parsed; first error: "
            + (discarded[0][1] if discarded else "no candidates")
        )
    return docs, discarded


def _mean_similarities(docs: dict[int, DslDocument]) -> dict[int, float]:
    """Mean cosine of each candidate's canonical text to the others.

    A lone candidate scores 1.0 (perfect consensus with itself).
    """
    indices = sorted(docs)
    vectors = {i: embed_text(print_dsl(docs[i])) for i in indices}
    means: dict[int, float] = {}
    for i in indices:
        others = [cosine(vectors[i], vectors[j]) for j in indices if j != i]
        means[i] = sum(others) / len(others) if others else 1.0
    return means


def vote_embedding(candidates: Sequence[str]) -> VoteResult:
    docs, discarded = _parse_candidates(candidates)
    means = _mean_similarities(docs)
    winner = max(sorted(means), key=lambda i: means[i])  # ties -> smallest index
    return VoteResult(
        winner_index=winner,
        doc=docs[winner].clone(),
        mode="embedding",
        mean_similarity=means[winner],
        cluster=sorted(docs),
        discarded=discarded,
    )


def _jaccard(a: set, b: set) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def _components(indices: list[int], edges: set[tuple[int, int]]) -> list[list[int]]:
    parent = {i: i for i in indices}

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for i in indices:
        groups.setdefault(find(i), []).append(i)
    return [sorted(g) for g in groups.values()]


def vote_structured(candidates: Sequence[str], theta: float = JACCARD_THETA) -> VoteResult:
    docs, discarded = _parse_candidates(candidates)
    indices = sorted(docs)
    paths = {i: field_paths(docs[i]) for i in indices}
    keysets = {i: set(paths[i]) for i in indices}
    edges = {
        (a, b)
        for ai, a in enumerate(indices)
        for b in indices[ai + 1 :]
        if _jaccard(keysets[a], keysets[b]) >= theta
    }
    clusters = _components(indices, edges)
    # largest cluster; ties -> the one containing the smallest index
    cluster = max(clusters, key=lambda c: (len(c), -min(c)))

    cluster_means = _mean_similarities({i: docs[i] for i in cluster})
    central = max(sorted(cluster_means), key=lambda i: cluster_means[i])

    merged = docs[central].clone()
    for path, central_value in paths[central].items():
        votes = [paths[i][path] for i in cluster if path in paths[i]]
        distinct: list = []
        for value in votes:
            if not any(value == seen for seen in distinct):
                distinct.append(value)
        counts = [(value, sum(1 for v in votes if v == value)) for value in distinct]
        best = max(count for _, count in counts)
        winners = [value for value, count in counts if count == best]
        if any(central_value == w for w in winners):
            majority = central_value
        else:
            majority = winners[0]  # first encountered in candidate order
        if majority != central_value:
            set_field(merged, path, majority)
    return VoteResult(
        winner_index=central,
        doc=merged,
        mode="structured",
        mean_similarity=cluster_means[central],
        cluster=cluster,
        discarded=discarded,
    )


def vote(candidates: Sequence[str], mode: str) -> VoteResult:
    if mode == "embedding":
        return vote_embedding(candidates)
    if mode == "structured":
        return vote_structured(candidates)
    raise GenerationError(f"unknown voting mode {mode!r}")
