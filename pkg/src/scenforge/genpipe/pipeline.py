"""Retrieval-augmented generation of scenario documents.

generate_scenario: retrieve context, render the prompt, sample m
candidates, vote (embedding or structured), then run the semantic
alignment check with minimal revision.

repair_compile: sample one candidate per attempt, parse and compile it;
on failure, feed the diagnostic back as a fix hint (with retrieved
context) and retry, up to `attempts` times before raising RepairError
with every diagnostic collected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from ..dsl import DslDocument, StructureReport, parse_dsl, validate_structure
from ..errors import DslError, CompileError, RepairError
from ..retrieval import RetrievalIndex
from .alignment import AlignmentReport, revise_doc
from .backends import LlmBackend
from .prompting import FewShot, build_prompt, render_prompt
from .voting import VoteResult, vote


@dataclass
class GenerationReport:
    query: str
    mode: str
    n_candidates: int
    winner_index: int
    mean_similarity: float
    cluster: list[int]
    discarded: list[tuple[int, str]]
    alignment: AlignmentReport
    structure: StructureReport
    context_indices: list[int] = field(default_factory=list)


def retrieve_context(
    index: RetrievalIndex | None, query: str, k: int
) -> tuple[list[str], list[int]]:
    if index is None or k <= 0 or len(index) == 0:
        return [], []
    hits = index.query(query, k=k)
    return [index.texts[i] for i, _ in hits], [i for i, _ in hits]


def generate_scenario(
    query: str,
    backend: LlmBackend,
    index: RetrievalIndex | None = None,
    *,
    k: int = 4,
    m: int = 5,
    voting_mode: str = "structured",
    few_shots: Sequence[FewShot] = (),
    template: str | None = None,
) -> tuple[DslDocument, GenerationReport]:
    blocks, context_indices = retrieve_context(index, query, k)
    prompt = render_prompt(build_prompt(query, blocks, few_shots), template)
    candidates = backend.complete(prompt, m)
    result: VoteResult = vote(candidates, voting_mode)
    doc, alignment = revise_doc(query, result.doc)
    report = GenerationReport(
        query=query,
        mode=voting_mode,
        n_candidates=len(candidates),
        winner_index=result.winner_index,
        mean_similarity=result.mean_similarity,
        cluster=result.cluster,
        discarded=result.discarded,
        alignment=alignment,
        structure=validate_structure(doc),
        context_indices=context_indices,
    )
    return doc, report


@dataclass
class RepairResult:
    program: object  # sim.ScenarioProgram
    doc: DslDocument
    attempts_used: int
    diagnostics: list[str]


def repair_compile(
    query: str,
    backend: LlmBackend,
    lane_maps: dict,
    *,
    index: RetrievalIndex | None = None,
    attempts: int = 3,
    k: int = 4,
    few_shots: Sequence[FewShot] = (),
    template: str | None = None,
    initial_doc: DslDocument | None = None,
):
    """Generate-compile loop with error feedback. Returns a RepairResult.

    When initial_doc is given, attempt 1 compiles it directly; later
    attempts regenerate from the query with the latest diagnostic as a
    fix hint.
    """
    from ..sim import compile_program  # local import keeps module load light

    blocks, _ = retrieve_context(index, query, k)
    diagnostics: list[str] = []
    doc = initial_doc
    for attempt in range(1, attempts + 1):
        if doc is None:
            hint = None
            if diagnostics:
                hint = (
                    f"The previous attempt failed to compile: {diagnostics[-1]} "
                    "Emit a corrected scenario document."
                )
            prompt = render_prompt(build_prompt(query, blocks, few_shots, hint), template)
            text = backend.complete(prompt, 1)[0]
            try:
                doc = parse_dsl(text)
            except DslError as exc:
                diagnostics.append(f"attempt {attempt}: parse error: {exc}")
                doc = None
                continue
        try:
            program = compile_program(doc, lane_maps)
        except CompileError as exc:
            diagnostics.append(f"attempt {attempt}: compile error: {exc}")
            doc = None
            continue
        return RepairResult(
            program=program, doc=doc, attempts_used=attempt, diagnostics=diagnostics
        )
    raise RepairError(
        f"compilation failed after {attempts} attempts", diagnostics
    )
