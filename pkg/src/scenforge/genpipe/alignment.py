"""Semantic alignment between a query and a generated document.

Canonical behavior tags are detected in the query through a synonym
table, longest phrase first; matched spans are masked so that e.g.
"suddenly brakes" is one sudden_brake tag, not an extra brake tag, and
"unsafe lane change" maps to cut_in rather than lane_change. Every
detected tag must appear among the document's schedule verbs. Relation
words and "<number> m" distances surviving the masking must match a
relative spawn placement (distances may also match a numeric action
argument such as a tailgating gap).

revise_doc applies the minimal fix for each miss: swap the verb on the
matching role's schedule (with default arguments) or repoint the
adversarial placement.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..dsl import (
    DEFAULT_DICTIONARY,
    Action,
    DslDocument,
    RelativePlacement,
    Schedule,
    Symbol,
)
from ..dsl.model import RELATIONS

# canonical verb -> query phrases (all lowercase); longest phrases win
SYNONYMS: dict[str, tuple[str, ...]] = {
    "sudden_brake": (
        "sudden_brake",
        "sudden brake",
        "sudden braking",
        "suddenly brake",
        "suddenly brakes",
        "suddenly braking",
        "brakes hard",
        "hard brake",
        "hard braking",
        "abrupt brake",
        "abrupt braking",
        "slams the brakes",
        "emergency brake",
        "emergency braking",
        "brake check",
    ),
    "tailgate": ("tailgat",),
    "cut_in": (
        "unsafe lane change",
        "cut-in",
        "cut in",
        "cuts in",
        "cutting in",
        "cut_in",
    ),
    "speeding": ("speeding", "excessive speed", "over the speed limit"),
    "lane_change": (
        "lane_change",
        "lane change",
        "lane-change",
        "changes lane",
        "change lane",
        "changing lane",
        "merges into",
        "merge into",
    ),
    "brake": ("brake", "brakes", "braking", "slows down", "slow down", "decelerat"),
    "follow": ("follow",),
    "turn_left": ("turn_left", "turn left", "turns left", "left turn", "left-turn"),
    "turn_right": ("turn_right", "turn right", "turns right", "right turn", "right-turn"),
    "u_turn": ("u_turn", "u-turn", "u turn", "turns around", "turn around"),
    "go_straight": ("go_straight", "go straight", "goes straight", "straight ahead"),
    "idle": ("idle", "stationary", "parked", "stands still"),
}

# default arguments used when a revision introduces a verb
DEFAULT_ARGS: dict[str, dict] = {
    "sudden_brake": {"decel": 6.0, "duration": 2.0},
    "tailgate": {"gap": 0.5},
    "cut_in": {"side": Symbol("left"), "lateral": 1.2},
    "speeding": {"factor": 1.5},
    "brake": {"decel": 3.0},
    "lane_change": {"direction": Symbol("left")},
}

_DISTANCE_RE = re.compile(r"(\d+(?:\.\d+)?)\s*m(?![a-z0-9/])")


def _mask_tags(query: str) -> tuple[list[str], str]:
    """Detected canonical tags (in order of first occurrence) and the query
    with matched spans masked out."""
    text = query.lower()
    patterns = sorted(
        ((phrase, verb) for verb, phrases in SYNONYMS.items() for phrase in phrases),
        key=lambda pv: len(pv[0]),
        reverse=True,
    )
    found: list[tuple[int, str]] = []
    for phrase, verb in patterns:
        start = 0
        while True:
            i = text.find(phrase, start)
            if i < 0:
                break
            found.append((i, verb))
            text = text[:i] + "\x00" * len(phrase) + text[i + len(phrase) :]
            start = i + len(phrase)
    tags: list[str] = []
    for _, verb in sorted(found):
        if verb not in tags:
            tags.append(verb)
    return tags, text


def detect_tags(query: str) -> list[str]:
    return _mask_tags(query)[0]


@dataclass
class AlignmentReport:
    tags: list[str] = field(default_factory=list)
    missing_tags: list[str] = field(default_factory=list)
    relation_issues: list[str] = field(default_factory=list)
    distance_issues: list[str] = field(default_factory=list)
    revised: bool = False
    revisions: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.missing_tags or self.relation_issues or self.distance_issues)


def _doc_verbs(doc: DslDocument) -> set[str]:
    return {a.verb for s in doc.behavior for a in s.actions}


def _doc_relations(doc: DslDocument) -> set[str]:
    return {
        v.placement.relation
        for v in doc.spawn
        if isinstance(v.placement, RelativePlacement)
    }


def _doc_distances(doc: DslDocument) -> set[float]:
    values = {
        float(v.placement.offset)
        for v in doc.spawn
        if isinstance(v.placement, RelativePlacement)
    }
    for s in doc.behavior:
        for a in s.actions:
            for arg in a.args.values():
                if isinstance(arg, (int, float)):
                    values.add(float(arg))
    return values


def check_alignment(query: str, doc: DslDocument) -> AlignmentReport:
    tags, masked = _mask_tags(query)
    verbs = _doc_verbs(doc)
    report = AlignmentReport(tags=tags)
    report.missing_tags = [t for t in tags if t not in verbs]

    words = set(re.findall(r"[a-z_]+", masked))
    relations = [r for r in RELATIONS if r in words]
    doc_relations = _doc_relations(doc)
    report.relation_issues = [
        f"query names relation {r!r} but no spawn placement uses it"
        for r in relations
        if r not in doc_relations
    ]
    if relations:  # distances only constrain placement when a relation is phrased
        doc_distances = _doc_distances(doc)
        for raw in _DISTANCE_RE.findall(masked):
            d = float(raw)
            if not any(abs(d - have) < 1e-6 for have in doc_distances):
                report.distance_issues.append(
                    f"query names distance {raw} m but no placement or argument matches"
                )
    return report


def _schedule_for_role(doc: DslDocument, role: str) -> Schedule | None:
    for vehicle in doc.spawn:
        if vehicle.role == role:
            schedule = doc.schedule_for(vehicle.vehicle_id)
            if schedule is not None:
                return schedule
    return None


def _ensure_schedule(doc: DslDocument, role: str) -> Schedule | None:
    schedule = _schedule_for_role(doc, role)
    if schedule is not None:
        return schedule
    vehicle = next((v for v in doc.spawn if v.role == role), None)
    if vehicle is None:
        return None
    schedule = Schedule(vehicle.vehicle_id, [Action("idle")])
    doc.behavior.append(schedule)
    return schedule


def revise_doc(query: str, doc: DslDocument) -> tuple[DslDocument, AlignmentReport]:
    """Minimal revision pass: returns (possibly new doc, updated report)."""
    report = check_alignment(query, doc)
    if report.ok:
        return doc, report
    revised = doc.clone()
    revisions: list[str] = []

    for tag in report.missing_tags:
        level = DEFAULT_DICTIONARY.level(tag) or "ego"
        schedule = _ensure_schedule(revised, "adversarial" if level == "adversarial" else "ego")
        if schedule is None and level == "adversarial":
            schedule = _ensure_schedule(revised, "ego")
        if schedule is None:
            continue
        old = schedule.actions[0].verb
        defaults = DEFAULT_ARGS.get(tag, {})
        duration = None
        if "duration" in DEFAULT_DICTIONARY.required_args(tag):
            duration = defaults.get("duration", 2.0)
        args = {k: v for k, v in defaults.items() if k != "duration"}
        schedule.actions[0] = Action(tag, args, duration)
        revisions.append(f"replaced {schedule.target} verb {old!r} with {tag!r}")

    _, masked = _mask_tags(query)
    words = set(re.findall(r"[a-z_]+", masked))
    wanted_relations = [r for r in RELATIONS if r in words]
    distances = [float(raw) for raw in _DISTANCE_RE.findall(masked)]
    have = _doc_relations(revised)
    missing_relations = [r for r in wanted_relations if r not in have]
    if missing_relations:
        ego = revised.ego()
        adv = next((v for v in revised.spawn if v.role == "adversarial"), None)
        if ego is not None and adv is not None and adv.vehicle_id != ego.vehicle_id:
            relation = missing_relations[0]
            if distances:
                offset = distances[0]
            elif isinstance(adv.placement, RelativePlacement):
                offset = adv.placement.offset
            else:
                offset = 10.0
            adv.placement = RelativePlacement(ego.vehicle_id, relation, offset)
            revisions.append(
                f"placed {adv.vehicle_id} {relation} of {ego.vehicle_id} at {offset:g} m"
            )

    final = check_alignment(query, revised)
    final.revised = bool(revisions)
    final.revisions = revisions
    return revised, final
