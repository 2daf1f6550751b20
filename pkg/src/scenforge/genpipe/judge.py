"""Backend-based grading of generated documents (two rubric sub-scores)."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..dsl import DslDocument, print_dsl
from ..errors import ProtocolError
from .backends import LlmBackend
from .prompting import load_template

_SCORE_RE = {
    "semantic_fidelity": re.compile(r"semantic_fidelity\s*:\s*([0-5](?:\.\d+)?)", re.I),
    "behavioral_richness": re.compile(r"behavioral_richness\s*:\s*([0-5](?:\.\d+)?)", re.I),
}


@dataclass(frozen=True)
class JudgeScores:
    semantic_fidelity: float
    behavioral_richness: float


class LlmJudge:
    """Scores a document against its source description via a backend."""

    def __init__(self, backend: LlmBackend, template: str | None = None):
        self.backend = backend
        self.template = template or load_template("judge_prompt.txt")

    def score(self, query: str, doc: DslDocument) -> JudgeScores:
        prompt = self.template.replace("{{query}}", query).replace(
            "{{document}}", print_dsl(doc)
        )
        reply = self.backend.complete(prompt, 1)[0]
        values = {}
        for name, pattern in _SCORE_RE.items():
            m = pattern.search(reply)
            if m is None:
                raise ProtocolError(f"judge reply missing {name}: {reply[:120]!r}")
            values[name] = min(max(float(m.group(1)), 0.0), 5.0)
        return JudgeScores(**values)
