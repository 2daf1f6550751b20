"""Lowering of scenario documents to executable programs.

compile_program resolves every declarative element against a concrete lane
map: placements become world poses, schedules become controller specs, and
the ego route is checked lane by lane. Anything that cannot be executed
(unknown map, off-road placement, verbs with no runtime semantics,
overlapping spawns) raises CompileError with a message precise enough to
feed back into a repair loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..dsl import (
    AbsolutePlacement,
    DslDocument,
    RelativePlacement,
    Schedule,
    DEFAULT_DICTIONARY,
)
from ..errors import CompileError
from ..ingest import LaneMap, match_lane
from .dynamics import rect_corners, rects_collide

DEFAULT_DT = 0.1
DEFAULT_HORIZON = 300
GOAL_ARC_SLACK = 0.25  # m before the route end that already counts as arrival
GOAL_LATERAL_MAX = 2.5  # m

# Scripted verbs with runtime semantics. "policy" is handled separately.
EXECUTABLE_VERBS = frozenset(
    {
        "go_straight",
        "turn_left",
        "turn_right",
        "u_turn",
        "follow",
        "brake",
        "lane_change",
        "idle",
        "sudden_brake",
        "tailgate",
        "cut_in",
        "speeding",
    }
)


@dataclass(frozen=True)
class ScriptedSpec:
    schedule: Schedule
    anchor_id: str | None


@dataclass(frozen=True)
class IdmSpec:
    desired_speed: float


@dataclass(frozen=True)
class PolicySpec:
    slot: str


ControllerSpec = ScriptedSpec | IdmSpec | PolicySpec


@dataclass
class CompiledVehicle:
    vehicle_id: str
    role: str
    x: float
    y: float
    heading: float
    speed: float
    lane_id: str
    length: float
    width: float
    controller: ControllerSpec
    anchor_id: str | None = None


@dataclass
class ScenarioProgram:
    name: str
    map_key: str
    lane_map: LaneMap
    vehicles: list[CompiledVehicle]
    ego_id: str
    ego_route: tuple[str, ...]
    dt: float = DEFAULT_DT
    horizon: int = DEFAULT_HORIZON
    label: str = "unknown"
    doc: DslDocument | None = field(default=None, repr=False)

    def vehicle(self, vehicle_id: str) -> CompiledVehicle:
        for veh in self.vehicles:
            if veh.vehicle_id == vehicle_id:
                return veh
        raise KeyError(vehicle_id)

    def policy_slots(self) -> list[str]:
        return [v.vehicle_id for v in self.vehicles if isinstance(v.controller, PolicySpec)]


def behavior_label(doc: DslDocument) -> str:
    """Group label for evaluation: first adversarial verb, else first ego verb."""
    for schedule in doc.behavior:
        for action in schedule.actions:
            if DEFAULT_DICTIONARY.level(action.verb) == "adversarial":
                return action.verb
    for schedule in doc.behavior:
        for action in schedule.actions:
            if action.verb != "policy":
                return action.verb
    return "unknown"


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise CompileError(message)


def _as_float(value: object, what: str) -> float:
    _require(isinstance(value, (int, float)) and not isinstance(value, bool), f"{what} must be numeric")
    return float(value)


def _controller_for(doc: DslDocument, vehicle_id: str, anchor_id: str | None, speed: float) -> ControllerSpec:
    schedule = doc.schedule_for(vehicle_id)
    if schedule is None:
        return IdmSpec(desired_speed=speed if speed > 0 else 8.0)
    verbs = [action.verb for action in schedule.actions]
    if "policy" in verbs:
        _require(verbs == ["policy"], f"schedule for '{vehicle_id}' mixes policy with scripted actions")
        return PolicySpec(slot=vehicle_id)
    for verb in verbs:
        _require(verb in EXECUTABLE_VERBS, f"verb '{verb}' in schedule for '{vehicle_id}' has no executable semantics")
    return ScriptedSpec(schedule=schedule, anchor_id=anchor_id)


def compile_program(doc: DslDocument, lane_maps: dict[str, LaneMap]) -> ScenarioProgram:
    geometry = doc.geometry
    _require("map" in geometry, "geometry lacks a map key")
    map_key = geometry["map"]
    _require(isinstance(map_key, str), "geometry map must be a string")
    _require(map_key in lane_maps, f"unknown map '{map_key}'")
    lane_map = lane_maps[map_key]

    route_value = geometry.get("ego_route", ())
    _require(isinstance(route_value, tuple), "ego_route must be a list of lane ids")
    route: list[str] = []
    for lane_id in route_value:
        _require(isinstance(lane_id, str), "ego_route entries must be lane id strings")
        _require(lane_id in lane_map.lanes, f"ego_route references unknown lane '{lane_id}'")
        route.append(lane_id)

    dt = _as_float(geometry.get("dt", DEFAULT_DT), "dt")
    _require(dt > 0, "dt must be positive")
    horizon_value = geometry.get("horizon", DEFAULT_HORIZON)
    _require(isinstance(horizon_value, int) and not isinstance(horizon_value, bool), "horizon must be an integer")
    _require(horizon_value > 0, "horizon must be positive")

    egos = [v.vehicle_id for v in doc.spawn if v.role == "ego"]
    _require(len(egos) == 1, f"expected exactly one ego vehicle, found {len(egos)}")
    ego_id = egos[0]

    compiled: dict[str, CompiledVehicle] = {}
    order: list[CompiledVehicle] = []
    for decl in doc.spawn:
        placement = decl.placement
        anchor_id: str | None = None
        if isinstance(placement, AbsolutePlacement):
            _require(placement.lane in lane_map.lanes, f"placement of '{decl.vehicle_id}' references unknown lane '{placement.lane}'")
            lane = lane_map.lane(placement.lane)
            _require(placement.arc_s <= lane.length, f"arc_s {placement.arc_s} exceeds lane '{placement.lane}' length {lane.length}")
            x, y = lane.point_at(placement.arc_s)
            heading = lane.heading_at(placement.arc_s)
            lane_id = placement.lane
        else:
            assert isinstance(placement, RelativePlacement)
            anchor_id = placement.anchor
            anchor = compiled.get(placement.anchor)
            _require(anchor is not None, f"placement of '{decl.vehicle_id}' references undeclared anchor '{placement.anchor}'")
            lane = lane_map.lane(anchor.lane_id)
            arc, _, _ = lane.project(anchor.x, anchor.y)
            if placement.relation in ("front", "rear"):
                gap = placement.offset + (anchor.length + decl.length) / 2.0
                target = arc + gap if placement.relation == "front" else arc - gap
                _require(
                    0.0 <= target <= lane.length,
                    f"relative placement of '{decl.vehicle_id}' falls off lane '{anchor.lane_id}' (arc {target:.2f})",
                )
                x, y = lane.point_at(target)
                heading = lane.heading_at(target)
                lane_id = anchor.lane_id
            else:
                nx, ny = lane.left_normal_at(arc)
                sign = 1.0 if placement.relation == "left" else -1.0
                x = anchor.x + sign * placement.offset * nx
                y = anchor.y + sign * placement.offset * ny
                matched = match_lane(x, y, lane_map)
                _require(matched is not None, f"relative placement of '{decl.vehicle_id}' lands off-road")
                lane_id = matched
                heading = lane_map.lane(lane_id).heading_at(lane_map.lane(lane_id).project(x, y)[0])

        vehicle = CompiledVehicle(
            vehicle_id=decl.vehicle_id,
            role=decl.role,
            x=x,
            y=y,
            heading=heading,
            speed=decl.speed,
            lane_id=lane_id,
            length=decl.length,
            width=decl.width,
            controller=IdmSpec(desired_speed=8.0),  # placeholder, assigned below
            anchor_id=anchor_id,
        )
        compiled[decl.vehicle_id] = vehicle
        order.append(vehicle)

    for veh in order:
        veh.controller = _controller_for(doc, veh.vehicle_id, veh.anchor_id, veh.speed)

    corners = {v.vehicle_id: rect_corners(v.x, v.y, v.heading, v.length, v.width) for v in order}
    for i, a in enumerate(order):
        for b in order[i + 1 :]:
            _require(
                not rects_collide(corners[a.vehicle_id], corners[b.vehicle_id]),
                f"initial placements of '{a.vehicle_id}' and '{b.vehicle_id}' overlap",
            )

    if route:
        ego = compiled[ego_id]
        start_lane = route[0]
        if ego.lane_id != start_lane:
            lane = lane_map.lane(start_lane)
            _, lateral, _ = lane.project(ego.x, ego.y)
            _require(
                abs(lateral) <= GOAL_LATERAL_MAX + 2.0,
                f"ego spawns on lane '{ego.lane_id}' far from route start '{start_lane}'",
            )

    return ScenarioProgram(
        name=doc.name,
        map_key=map_key,
        lane_map=lane_map,
        vehicles=order,
        ego_id=ego_id,
        ego_route=tuple(route),
        dt=dt,
        horizon=horizon_value,
        label=behavior_label(doc),
        doc=doc,
    )


def goal_reached(program: ScenarioProgram, x: float, y: float) -> bool:
    """Ego arrival test: near the end of the last route lane and inside it."""
    if not program.ego_route:
        return False
    lane = program.lane_map.lane(program.ego_route[-1])
    arc, lateral, _ = lane.project(x, y)
    return arc >= lane.length - GOAL_ARC_SLACK and abs(lateral) <= GOAL_LATERAL_MAX
