"""Scenario DSL document model.

A document has three ordered sections:

    scenario "name" {
      geometry { ... }    key/value pairs: map, ego_route, source, ...
      spawn    { ... }    one or more vehicle declarations
      behavior { ... }    per-vehicle action schedules
    }

Values are numbers, quoted strings, bare symbols, or bracketed lists
(stored as tuples so they hash). Vehicle placement is either absolute
(lane + arc_s) or relative to an earlier vehicle (anchor + relation +
offset, offset strictly positive).
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Union

ROLES = ("ego", "adversarial", "background")
RELATIONS = ("rear", "front", "left", "right")


@dataclass(frozen=True)
class Symbol:
    """A bare identifier used as a value (e.g. role: ego)."""

    name: str

    def __str__(self) -> str:
        return self.name


Value = Union[int, float, str, Symbol, tuple]


@dataclass(frozen=True)
class AbsolutePlacement:
    lane: str
    arc_s: float


@dataclass(frozen=True)
class RelativePlacement:
    anchor: str
    relation: str  # rear | front | left | right
    offset: float  # meters, > 0


Placement = Union[AbsolutePlacement, RelativePlacement]


@dataclass
class VehicleDecl:
    vehicle_id: str
    role: str  # ego | adversarial | background
    placement: Placement
    speed: float = 0.0
    length: float = 4.5
    width: float = 2.0


@dataclass
class Action:
    verb: str
    args: dict[str, Value] = field(default_factory=dict)
    duration: float | None = None


@dataclass
class Schedule:
    target: str
    actions: list[Action]


@dataclass
class DslDocument:
    name: str
    geometry: dict[str, Value]
    spawn: list[VehicleDecl]
    behavior: list[Schedule]

    def vehicle_ids(self) -> list[str]:
        return [v.vehicle_id for v in self.spawn]

    def vehicle(self, vehicle_id: str) -> VehicleDecl | None:
        return next((v for v in self.spawn if v.vehicle_id == vehicle_id), None)

    def ego(self) -> VehicleDecl | None:
        return next((v for v in self.spawn if v.role == "ego"), None)

    def schedule_for(self, vehicle_id: str) -> Schedule | None:
        return next((s for s in self.behavior if s.target == vehicle_id), None)

    def clone(self) -> "DslDocument":
        return copy.deepcopy(self)


PathKey = tuple


def field_paths(doc: DslDocument) -> dict[PathKey, Value]:
    """Flatten a document into (path, value) entries.

    Paths identify a scalar slot: geometry keys, per-vehicle declaration
    fields, and per-action verb / duration / named args. Used for
    structural similarity and per-field majority voting.
    """
    paths: dict[PathKey, Value] = {("name",): doc.name}
    for key, value in doc.geometry.items():
        paths[("geometry", key)] = value
    for v in doc.spawn:
        base = ("spawn", v.vehicle_id)
        paths[base + ("role",)] = v.role
        if isinstance(v.placement, AbsolutePlacement):
            paths[base + ("lane",)] = v.placement.lane
            paths[base + ("arc_s",)] = v.placement.arc_s
        else:
            paths[base + ("anchor",)] = v.placement.anchor
            paths[base + ("relation",)] = v.placement.relation
            paths[base + ("offset",)] = v.placement.offset
        paths[base + ("speed",)] = v.speed
        paths[base + ("length",)] = v.length
        paths[base + ("width",)] = v.width
    for s in doc.behavior:
        for i, action in enumerate(s.actions):
            base = ("behavior", s.target, i)
            paths[base + ("verb",)] = action.verb
            if action.duration is not None:
                paths[base + ("duration",)] = action.duration
            for name, value in action.args.items():
                paths[base + ("arg", name)] = value
    return paths


def set_field(doc: DslDocument, path: PathKey, value: Value) -> bool:
    """Write a flattened path back into a document.

    Returns False when the path's container does not exist in this document
    (voting never creates structure, it only overrides shared fields).
    """
    if path == ("name",):
        doc.name = str(value)
        return True
    if path[0] == "geometry":
        doc.geometry[path[1]] = value
        return True
    if path[0] == "spawn":
        vehicle = doc.vehicle(path[1])
        if vehicle is None:
            return False
        slot = path[2]
        if slot == "role":
            vehicle.role = str(value)
        elif slot in ("lane", "arc_s"):
            if not isinstance(vehicle.placement, AbsolutePlacement):
                return False
            kwargs = {
                "lane": vehicle.placement.lane,
                "arc_s": vehicle.placement.arc_s,
            }
            kwargs[slot] = str(value) if slot == "lane" else float(value)
            vehicle.placement = AbsolutePlacement(**kwargs)
        elif slot in ("anchor", "relation", "offset"):
            if not isinstance(vehicle.placement, RelativePlacement):
                return False
            kwargs = {
                "anchor": vehicle.placement.anchor,
                "relation": vehicle.placement.relation,
                "offset": vehicle.placement.offset,
            }
            kwargs[slot] = float(value) if slot == "offset" else str(value)
            vehicle.placement = RelativePlacement(**kwargs)
        elif slot in ("speed", "length", "width"):
            setattr(vehicle, slot, float(value))
        else:
            return False
        return True
    if path[0] == "behavior":
        schedule = doc.schedule_for(path[1])
        if schedule is None or path[2] >= len(schedule.actions):
            return False
        action = schedule.actions[path[2]]
        if path[3] == "verb":
            action.verb = str(value)
        elif path[3] == "duration":
            action.duration = float(value)
        elif path[3] == "arg":
            action.args[path[4]] = value
        else:
            return False
        return True
    return False
