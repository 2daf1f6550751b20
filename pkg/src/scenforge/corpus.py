"""Scenario corpus: descriptive records with executable DSL snippets.

Each record carries five descriptive elements (scene type, behavior
summary, road description, adversarial condition, assembled description)
plus the three DSL section snippets, provenance, and risk metrics. On
disk the corpus is JSON Lines with the keys "description",
"geometry.snippet", "spawn.snippet", "behavior.snippet", "meta".
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from filelock import FileLock

from .dsl import (
    AbsolutePlacement,
    Action,
    DslDocument,
    RelativePlacement,
    Schedule,
    Symbol,
    VehicleDecl,
    parse_section,
    print_section,
)
from .errors import DataError
from .extract import ScenarioSegment
from .ingest import LaneMap
from .safety import RiskMetrics

ADVERSARIAL_BEHAVIORS = ("sudden_brake", "tailgate", "unsafe_lane_change", "speeding")

# corpus behavior name -> DSL verb (the DSL names the lane intrusion cut_in)
BEHAVIOR_VERBS = {
    "sudden_brake": "sudden_brake",
    "tailgate": "tailgate",
    "unsafe_lane_change": "cut_in",
    "speeding": "speeding",
}


@dataclass(frozen=True)
class AdversarialCondition:
    behavior: str
    relation: str  # rear | front | left | right
    distance: float  # meters from the ego
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.behavior not in ADVERSARIAL_BEHAVIORS:
            raise DataError(f"unknown adversarial behavior {self.behavior!r}")

    def to_json(self) -> dict:
        return {
            "behavior": self.behavior,
            "relation": self.relation,
            "distance": self.distance,
            "params": dict(self.params),
        }

    @classmethod
    def from_json(cls, payload: dict) -> "AdversarialCondition":
        return cls(
            behavior=payload["behavior"],
            relation=payload["relation"],
            distance=float(payload["distance"]),
            params=dict(payload.get("params", {})),
        )


@dataclass(frozen=True)
class Provenance:
    source: str
    frame_range: tuple[int, int]
    dataset: str

    def to_json(self) -> dict:
        return {
            "source": self.source,
            "frame_range": list(self.frame_range),
            "dataset": self.dataset,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "Provenance":
        return cls(
            source=payload["source"],
            frame_range=tuple(payload["frame_range"]),
            dataset=payload["dataset"],
        )


@dataclass
class ScenarioRecord:
    scene_type: str
    behavior_summary: str
    road_description: str
    adversarial: AdversarialCondition
    description: str
    geometry_snippet: str
    spawn_snippet: str
    behavior_snippet: str
    provenance: Provenance
    risk: RiskMetrics

    def validate(self) -> None:
        """Five non-empty descriptive elements and parseable snippets."""
        elements = {
            "scene_type": self.scene_type,
            "behavior_summary": self.behavior_summary,
            "road_description": self.road_description,
            "adversarial": render_adversarial(self.adversarial),
            "description": self.description,
        }
        for name, text in elements.items():
            if not text or not text.strip():
                raise DataError(f"corpus record: empty element {name!r}")
        parse_section(self.geometry_snippet, "geometry")
        parse_section(self.spawn_snippet, "spawn")
        parse_section(self.behavior_snippet, "behavior")

    @property
    def content_hash(self) -> str:
        payload = "\x1f".join(
            [
                self.description,
                self.geometry_snippet,
                self.spawn_snippet,
                self.behavior_snippet,
            ]
        )
        return hashlib.sha256(payload.encode()).hexdigest()

    def prompt_block(self) -> str:
        """The retrieval/prompt representation of this record."""
        return (
            f"{self.description}\n"
            f"[Scenic Geometry]\n{self.geometry_snippet}"
            f"[Scenic Spawn]\n{self.spawn_snippet}"
            f"[Scenic Behavior]\n{self.behavior_snippet}"
        )

    def to_json(self) -> dict:
        return {
            "description": self.description,
            "geometry.snippet": self.geometry_snippet,
            "spawn.snippet": self.spawn_snippet,
            "behavior.snippet": self.behavior_snippet,
            "meta": {
                "scene_type": self.scene_type,
                "behavior_summary": self.behavior_summary,
                "road_description": self.road_description,
                "adversarial": self.adversarial.to_json(),
                "provenance": self.provenance.to_json(),
                "risk": self.risk.to_json(),
            },
        }

    @classmethod
    def from_json(cls, payload: dict) -> "ScenarioRecord":
        meta = payload["meta"]
        return cls(
            scene_type=meta["scene_type"],
            behavior_summary=meta["behavior_summary"],
            road_description=meta["road_description"],
            adversarial=AdversarialCondition.from_json(meta["adversarial"]),
            description=payload["description"],
            geometry_snippet=payload["geometry.snippet"],
            spawn_snippet=payload["spawn.snippet"],
            behavior_snippet=payload["behavior.snippet"],
            provenance=Provenance.from_json(meta["provenance"]),
            risk=RiskMetrics.from_json(meta["risk"]),
        )


# --- descriptive element builders -------------------------------------------


def summarize_behavior(segment: ScenarioSegment, dt: float = 0.1) -> str:
    """One-sentence behavior summary. Durations count frames times dt."""
    start, end = segment.frame_range
    duration = (end - start + 1) * dt
    kind = segment.scene_type
    if kind == "follow":
        base = f"The ego vehicle follows a leading vehicle for {duration:.1f} s"
        if segment.metrics.min_ttc is not None:
            return base + f" with a minimum TTC of {segment.metrics.min_ttc:.1f} s."
        return base + "."
    if kind == "braking":
        decel = abs(segment.details.get("min_accel", 0.0))
        return f"The ego vehicle brakes at {decel:.1f} m/s^2 for {duration:.1f} s."
    if kind == "lane_change":
        src = segment.details.get("from", "one lane")
        dst = segment.details.get("to", "another")
        return f"The ego vehicle changes lane from {src} to {dst}."
    if kind == "go_straight":
        return f"The ego vehicle goes straight for {duration:.1f} s."
    if kind == "turn_left":
        return "The ego vehicle turns left at the intersection."
    if kind == "turn_right":
        return "The ego vehicle turns right at the intersection."
    if kind == "u_turn":
        return "The ego vehicle makes a u-turn at the intersection."
    raise DataError(f"no summary template for scene type {kind!r}")


def describe_road(lane_map: LaneMap) -> str:
    """Road description from lane count, markings, speed class and control."""
    n = len(lane_map.lanes)
    sentences = ["A single-lane road." if n == 1 else f"A road with {n} parallel lanes."]
    for lane_id in lane_map.sorted_ids():
        lane = lane_map.lanes[lane_id]
        if lane.speed_class == "slow" and lane.line_type == "dashed":
            sentences.append(f"Lane {lane_id} is a slow-speed lane with dashed markings.")
        elif lane.line_type == "dashed":
            sentences.append(f"Lane {lane_id} has dashed markings.")
        elif lane.speed_class == "slow":
            sentences.append(f"Lane {lane_id} is a slow-speed lane.")
        if lane.control == "closure":
            sentences.append(f"Lane {lane_id} is under a temporary road closure.")
        elif lane.control == "signal":
            sentences.append(f"Lane {lane_id} is controlled by a traffic signal.")
    return " ".join(sentences)


# sampling palette: relations and parameter draws per adversarial behavior
_BEHAVIOR_RELATIONS = {
    "sudden_brake": ("front",),
    "tailgate": ("rear",),
    "unsafe_lane_change": ("left", "right"),
    "speeding": ("rear", "front"),
}
_DISTANCES = {
    "sudden_brake": (8.0, 10.0, 12.0, 15.0),
    "tailgate": (0.5, 1.0, 1.5, 2.0),
    "unsafe_lane_change": (1.2, 2.0, 3.5),
    "speeding": (10.0, 15.0, 20.0),
}


def sample_adversarial(
    scene_type: str, rng: np.random.Generator
) -> AdversarialCondition:
    """Draw an adversarial condition; identical seeds give identical draws."""
    behavior = ADVERSARIAL_BEHAVIORS[int(rng.integers(0, len(ADVERSARIAL_BEHAVIORS)))]
    relations = _BEHAVIOR_RELATIONS[behavior]
    relation = relations[int(rng.integers(0, len(relations)))]
    distances = _DISTANCES[behavior]
    distance = float(distances[int(rng.integers(0, len(distances)))])
    params: dict = {}
    if behavior == "sudden_brake":
        params = {
            "decel": round(float(rng.uniform(3.0, 8.0)), 1),
            "duration": round(float(rng.uniform(1.0, 3.0)), 1),
        }
    elif behavior == "tailgate":
        params = {"gap": distance}
    elif behavior == "unsafe_lane_change":
        params = {"side": relation, "lateral": distance}
    elif behavior == "speeding":
        params = {"factor": round(float(rng.uniform(1.2, 2.0)), 1)}
    return AdversarialCondition(behavior, relation, distance, params)


def render_adversarial(cond: AdversarialCondition) -> str:
    d = f"{cond.distance:g}"
    if cond.behavior == "sudden_brake":
        decel = cond.params.get("decel", 6.0)
        return (
            f"The adversarial vehicle suddenly brakes at {decel:g} m/s^2, "
            f"{d}m from the {cond.relation}."
        )
    if cond.behavior == "tailgate":
        return f"The adversarial vehicle is tailgating at {d}m distance from the {cond.relation}."
    if cond.behavior == "unsafe_lane_change":
        return f"The adversarial vehicle performs a lateral cut-in at {d}m from the {cond.relation}."
    if cond.behavior == "speeding":
        factor = cond.params.get("factor", 1.5)
        return (
            f"The adversarial vehicle is speeding at {factor:g}x the ego speed, "
            f"approaching from the {cond.relation}."
        )
    raise DataError(f"no template for behavior {cond.behavior!r}")


def assemble_description(
    behavior_summary: str,
    road_description: str,
    adversarial_text: str,
    provenance: Provenance,
) -> str:
    """Single paragraph: behavior, road, adversarial, provenance with a
    trailing dataset tag in brackets."""
    start, end = provenance.frame_range
    closing = (
        f"Scene extracted from {provenance.source}, frames {start}-{end}."
        f" [{provenance.dataset}]"
    )
    return " ".join([behavior_summary, road_description, adversarial_text, closing])


# --- record construction ------------------------------------------------------

_EGO_ACTIONS = {
    "follow": lambda seg: Action("follow"),
    "braking": lambda seg: Action(
        "brake", {"decel": round(abs(seg.details.get("min_accel", 2.0)), 1)}
    ),
    "lane_change": lambda seg: Action(
        "lane_change", {"direction": Symbol(seg.details.get("direction", "left"))}
    ),
    "go_straight": lambda seg: Action("go_straight"),
    "turn_left": lambda seg: Action("turn_left"),
    "turn_right": lambda seg: Action("turn_right"),
    "u_turn": lambda seg: Action("u_turn"),
}


def _adversarial_action(cond: AdversarialCondition) -> Action:
    verb = BEHAVIOR_VERBS[cond.behavior]
    if cond.behavior == "sudden_brake":
        return Action(
            verb,
            {"decel": cond.params["decel"]},
            duration=cond.params["duration"],
        )
    if cond.behavior == "tailgate":
        return Action(verb, {"gap": cond.params["gap"]})
    if cond.behavior == "unsafe_lane_change":
        return Action(verb, {"side": Symbol(cond.params["side"]), "lateral": cond.params["lateral"]})
    return Action(verb, {"factor": cond.params["factor"]})


def segment_to_document(
    segment: ScenarioSegment,
    cond: AdversarialCondition,
    map_name: str,
    ego_lane: str,
    ego_speed: float = 8.0,
    ego_arc: float = 20.0,
) -> DslDocument:
    """Lower a mined segment plus an adversarial condition to a DSL document."""
    geometry = {"map": map_name, "ego_route": (ego_lane,), "source": map_name.upper()}
    ego = VehicleDecl(
        "ego1",
        "ego",
        AbsolutePlacement(ego_lane, float(ego_arc)),
        speed=float(ego_speed),
    )
    adv = VehicleDecl(
        "adv1",
        "adversarial",
        RelativePlacement("ego1", cond.relation, float(cond.distance)),
        speed=float(ego_speed),
    )
    builder = _EGO_ACTIONS.get(segment.scene_type)
    if builder is None:
        raise DataError(f"no ego action for scene type {segment.scene_type!r}")
    behavior = [
        Schedule("ego1", [builder(segment)]),
        Schedule("adv1", [_adversarial_action(cond)]),
    ]
    return DslDocument(segment.scene_type, geometry, [ego, adv], behavior)


def build_record(
    segment: ScenarioSegment,
    lane_map: LaneMap,
    map_name: str,
    rng: np.random.Generator,
    source: str = "tracks.csv",
    dataset: str = "SYNTH",
    dt: float = 0.1,
    ego_lane: str | None = None,
) -> ScenarioRecord:
    """Assemble the five descriptive elements and DSL snippets for a segment."""
    if ego_lane is None:
        ego_lane = lane_map.sorted_ids()[0]
    cond = sample_adversarial(segment.scene_type, rng)
    doc = segment_to_document(segment, cond, map_name, ego_lane)
    behavior_summary = summarize_behavior(segment, dt)
    road_description = describe_road(lane_map)
    provenance = Provenance(source, segment.frame_range, dataset)
    description = assemble_description(
        behavior_summary, road_description, render_adversarial(cond), provenance
    )
    record = ScenarioRecord(
        scene_type=segment.scene_type,
        behavior_summary=behavior_summary,
        road_description=road_description,
        adversarial=cond,
        description=description,
        geometry_snippet=print_section(doc, "geometry"),
        spawn_snippet=print_section(doc, "spawn"),
        behavior_snippet=print_section(doc, "behavior"),
        provenance=provenance,
        risk=segment.metrics,
    )
    record.validate()
    return record


# --- persistence --------------------------------------------------------------


def save_corpus(records: Iterable[ScenarioRecord], path: str | Path) -> None:
    path = Path(path)
    with path.open("w") as fh:
        for record in records:
            fh.write(json.dumps(record.to_json()) + "\n")


def load_corpus(path: str | Path) -> list[ScenarioRecord]:
    path = Path(path)
    records: list[ScenarioRecord] = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(ScenarioRecord.from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError, DataError) as exc:
                raise DataError(f"{path}:{lineno}: bad corpus record ({exc})") from exc
    return records


class CorpusStore:
    """Append-oriented JSONL corpus with dedup, a size cap, and a file lock.

    Appends are serialized through a sibling .lock file so concurrent
    augmentation runs cannot interleave writes. Deduplication is by the
    content hash of description + snippets. When the cap is exceeded the
    oldest records are evicted first.
    """

    def __init__(self, path: str | Path, max_records: int = 10000):
        self.path = Path(path)
        self.max_records = max_records
        self._lock = FileLock(str(self.path) + ".lock")

    def load(self) -> list[ScenarioRecord]:
        if not self.path.exists():
            return []
        return load_corpus(self.path)

    def append(self, records: Sequence[ScenarioRecord]) -> int:
        """Validate, dedupe and append; returns how many records were added."""
        for record in records:
            record.validate()
        with self._lock:
            existing = self.load()
            seen = {r.content_hash for r in existing}
            added = 0
            for record in records:
                h = record.content_hash
                if h in seen:
                    continue
                existing.append(record)
                seen.add(h)
                added += 1
            if len(existing) > self.max_records:
                existing = existing[len(existing) - self.max_records :]
            save_corpus(existing, self.path)
        return added
