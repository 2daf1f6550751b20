"""Prompt assembly for DSL generation.

Templates are plain text files with {{query}}, {{context}}, {{few_shots}}
and {{fix_hint}} slots. The packaged default orders the sections as:
repository guidance, few-shot examples, the main conversion task with the
query, chain-of-thought plus syntax-alignment instructions, and finally
the retrieved context as numbered [Scene i] blocks. A fix hint, when
present, is prepended ahead of everything.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

_TEMPLATE_PACKAGE = "scenforge.genpipe"


@dataclass(frozen=True)
class FewShot:
    query: str
    answer: str


@dataclass
class PromptBundle:
    query: str
    context_blocks: list[str] = field(default_factory=list)
    few_shots: list[FewShot] = field(default_factory=list)
    fix_hint: str | None = None


def load_template(name: str = "dsl_prompt.txt") -> str:
    return (
        resources.files(_TEMPLATE_PACKAGE)
        .joinpath("templates")
        .joinpath(name)
        .read_text()
    )


def build_prompt(
    query: str,
    context_blocks=(),
    few_shots=(),
    fix_hint: str | None = None,
) -> PromptBundle:
    return PromptBundle(
        query=query,
        context_blocks=list(context_blocks),
        few_shots=list(few_shots),
        fix_hint=fix_hint,
    )


def render_context(blocks: list[str]) -> str:
    if not blocks:
        return "(no retrieved scenes)"
    parts = [f"[Scene {i}]\n{block.rstrip()}" for i, block in enumerate(blocks, start=1)]
    return "\n\n".join(parts)


def render_few_shots(few_shots: list[FewShot]) -> str:
    if not few_shots:
        return "(none)"
    parts = [f"Input:\n{fs.query}\nOutput:\n{fs.answer.rstrip()}" for fs in few_shots]
    return "\n\n".join(parts)


def render_prompt(bundle: PromptBundle, template: str | None = None) -> str:
    template = template if template is not None else load_template()
    fix = f"[Fix Hint]\n{bundle.fix_hint}\n\n" if bundle.fix_hint else ""
    return (
        template.replace("{{fix_hint}}", fix)
        .replace("{{few_shots}}", render_few_shots(bundle.few_shots))
        .replace("{{query}}", bundle.query)
        .replace("{{context}}", render_context(bundle.context_blocks))
    )
