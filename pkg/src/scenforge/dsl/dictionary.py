"""Semantic dictionary: the closed verb vocabulary and required arguments.

Two levels share one namespace: ego maneuvers and adversarial behaviors.
Custom verbs outside the dictionary are legal in documents; they are
flagged by check_dictionary, not rejected. `duration` is declared like a
required argument but is satisfied by an action's duration slot.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass, field

EGO_VERBS: dict[str, tuple[str, ...]] = {
    "go_straight": (),
    "turn_left": (),
    "turn_right": (),
    "u_turn": (),
    "follow": (),
    "brake": ("decel",),
    "lane_change": ("direction",),
    "idle": (),
    "policy": (),
}

ADVERSARIAL_VERBS: dict[str, tuple[str, ...]] = {
    "sudden_brake": ("decel", "duration"),
    "tailgate": ("gap",),
    "cut_in": ("side", "lateral"),
    "speeding": ("factor",),
}


@dataclass(frozen=True)
class SemanticDictionary:
    ego_verbs: dict[str, tuple[str, ...]] = field(default_factory=lambda: dict(EGO_VERBS))
    adversarial_verbs: dict[str, tuple[str, ...]] = field(
        default_factory=lambda: dict(ADVERSARIAL_VERBS)
    )

    def __post_init__(self) -> None:
        overlap = set(self.ego_verbs) & set(self.adversarial_verbs)
        if overlap:
            raise ValueError(f"verbs appear at both levels: {sorted(overlap)}")

    def known(self, verb: str) -> bool:
        return verb in self.ego_verbs or verb in self.adversarial_verbs

    def level(self, verb: str) -> str | None:
        if verb in self.ego_verbs:
            return "ego"
        if verb in self.adversarial_verbs:
            return "adversarial"
        return None

    def required_args(self, verb: str) -> tuple[str, ...]:
        if verb in self.ego_verbs:
            return self.ego_verbs[verb]
        if verb in self.adversarial_verbs:
            return self.adversarial_verbs[verb]
        return ()

    def all_verbs(self) -> list[str]:
        return sorted(list(self.ego_verbs) + list(self.adversarial_verbs))

    def suggest(self, verb: str) -> str | None:
        """Nearest known verb for flagging custom ones, if any is close."""
        matches = difflib.get_close_matches(verb, self.all_verbs(), n=1, cutoff=0.6)
        return matches[0] if matches else None


DEFAULT_DICTIONARY = SemanticDictionary()
