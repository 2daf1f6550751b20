"""Retrieval-augmented DSL generation: backends, prompts, voting, alignment."""

from .alignment import (
    DEFAULT_ARGS,
    SYNONYMS,
    AlignmentReport,
    check_alignment,
    detect_tags,
    revise_doc,
)
from .backends import (
    API_KEY_ENV,
    BackendConfig,
    HttpChatBackend,
    LlmBackend,
    ReplayBackend,
    make_backend,
)
from .judge import JudgeScores, LlmJudge
from .pipeline import (
    GenerationReport,
    RepairResult,
    generate_scenario,
    repair_compile,
    retrieve_context,
)
from .prompting import FewShot, PromptBundle, build_prompt, load_template, render_prompt
from .voting import VoteResult, vote, vote_embedding, vote_structured

__all__ = [
    "DEFAULT_ARGS",
    "SYNONYMS",
    "AlignmentReport",
    "check_alignment",
    "detect_tags",
    "revise_doc",
    "API_KEY_ENV",
    "BackendConfig",
    "HttpChatBackend",
    "LlmBackend",
    "ReplayBackend",
    "make_backend",
    "JudgeScores",
    "LlmJudge",
    "GenerationReport",
    "RepairResult",
    "generate_scenario",
    "repair_compile",
    "retrieve_context",
    "FewShot",
    "PromptBundle",
    "build_prompt",
    "load_template",
    "render_prompt",
    "VoteResult",
    "vote",
    "vote_embedding",
    "vote_structured",
]
