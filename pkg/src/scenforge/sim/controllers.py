"""Runtime controllers: scripted action chains, IDM followers, policy slots.

Scripted schedules execute as a cursor over the action chain. An action with
a duration yields control after that many seconds; lane-change style actions
without one complete when the maneuver does. Controllers emit Commands
(longitudinal acceleration plus optional lane-change request); steering is
always derived by the lane tracking law, never commanded directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..dsl import Action, Schedule
from ..ingest import LaneMap
from .dynamics import ACCEL_MAX, BRAKE_MAX, LANE_CHANGE_DURATION, VehicleState

IDM_V0 = 8.0  # m/s
IDM_T = 1.5  # s
IDM_S0 = 2.0  # m
IDM_A = 3.0  # m/s^2
IDM_B = 5.0  # m/s^2

K_SPEED = 1.0  # 1/s, speed error -> acceleration
LEADER_MAX_GAP = 100.0  # m

# Discrete policy actions, in index order.
ACTIONS = ("LANE_LEFT", "IDLE", "LANE_RIGHT", "FASTER", "SLOWER", "EMERGENCY_BRAKE")
ACTION_LANE_LEFT = 0
ACTION_IDLE = 1
ACTION_LANE_RIGHT = 2
ACTION_FASTER = 3
ACTION_SLOWER = 4
ACTION_EMERGENCY_BRAKE = 5
POLICY_ACCEL_STEP = 1.5  # m/s^2 for FASTER / SLOWER
_EPS = 1e-9


@dataclass
class Command:
    accel: float = 0.0
    lane_request: str | None = None
    emergency: bool = False


def idm_accel(
    speed: float,
    gap: float | None = None,
    lead_speed: float = 0.0,
    *,
    v0: float = IDM_V0,
    headway: float = IDM_T,
    s0: float = IDM_S0,
    a: float = IDM_A,
    b: float = IDM_B,
) -> float:
    """Intelligent Driver Model acceleration. gap is the bumper gap to the
    leader, None on a free road."""
    free = 1.0 - (speed / v0) ** 4 if v0 > 0 else -((speed + 1.0) ** 2)
    if gap is None:
        return a * free
    if gap <= 0.1:
        return -BRAKE_MAX
    dv = speed - lead_speed
    s_star = s0 + max(0.0, speed * headway + speed * dv / (2.0 * math.sqrt(a * b)))
    return a * (free - (s_star / gap) ** 2)


def lane_arc(lane_map: LaneMap, state: VehicleState) -> float:
    lane = lane_map.lane(state.lane_id)
    arc, _, _ = lane.project(state.x, state.y)
    return arc


def find_leader(
    states: dict[str, VehicleState],
    me: VehicleState,
    lane_map: LaneMap,
    max_gap: float = LEADER_MAX_GAP,
) -> tuple[VehicleState, float] | None:
    """Nearest vehicle ahead on the same lane; returns (leader, bumper gap)."""
    my_arc = lane_arc(lane_map, me)
    best: tuple[VehicleState, float] | None = None
    for other in states.values():
        if other.vehicle_id == me.vehicle_id or other.lane_id != me.lane_id:
            continue
        gap = lane_arc(lane_map, other) - my_arc - (me.length + other.length) / 2.0
        if gap < -0.5 or gap > max_gap:
            continue
        if best is None or gap < best[1]:
            best = (other, gap)
    return best


def adjacent_on_side(lane_map: LaneMap, state: VehicleState, side: str) -> str | None:
    """Adjacent lane id on the requested side of the vehicle, nearest first."""
    lane = lane_map.lane(state.lane_id)
    arc, _, _ = lane.project(state.x, state.y)
    nx, ny = lane.left_normal_at(arc)
    best: tuple[float, str] | None = None
    for cand_id in lane.adjacent:
        cand = lane_map.lane(cand_id)
        cand_arc, _, _ = cand.project(state.x, state.y)
        cx, cy = cand.point_at(cand_arc)
        offset = (cx - state.x) * nx + (cy - state.y) * ny
        if side == "left" and offset > 0.1:
            key = offset
        elif side == "right" and offset < -0.1:
            key = -offset
        else:
            continue
        if best is None or key < best[0]:
            best = (key, cand_id)
    return best[1] if best else None


def _speed_hold(target: float, speed: float) -> float:
    accel = K_SPEED * (target - speed)
    return max(-BRAKE_MAX, min(ACCEL_MAX, accel))


class ScriptedRuntime:
    """Executes one vehicle's action chain."""

    def __init__(self, vehicle_id: str, schedule: Schedule, anchor_id: str | None) -> None:
        self.vehicle_id = vehicle_id
        self.actions = list(schedule.actions)
        self.anchor_id = anchor_id
        self.index = 0
        self.start_time = 0.0
        self.entered = False

    def _advance(self, now: float) -> None:
        self.index += 1
        self.start_time = now
        self.entered = False

    def _current(self, now: float) -> Action | None:
        # Retire any actions whose duration has elapsed by `now`.
        while self.index < len(self.actions):
            action = self.actions[self.index]
            duration = action.duration
            if duration is None and action.verb in ("lane_change", "cut_in"):
                duration = LANE_CHANGE_DURATION
            if self.entered and duration is not None and now - self.start_time >= duration - _EPS:
                self._advance(now)
                continue
            return action
        return None

    def act(self, states: dict[str, VehicleState], me: VehicleState, lane_map: LaneMap, now: float) -> Command:
        action = self._current(now)
        if action is None:
            return Command()
        activating = not self.entered
        if activating:
            self.entered = True
            self.start_time = now

        verb = action.verb
        args = action.args
        cruise = me.cruise_speed if me.cruise_speed > 0 else IDM_V0

        if verb in ("go_straight", "turn_left", "turn_right", "u_turn"):
            target = float(args.get("speed", me.cruise_speed))
            return Command(accel=_speed_hold(target, me.speed))
        if verb == "idle":
            return Command()
        if verb == "brake":
            return Command(accel=-float(args["decel"]))
        if verb == "sudden_brake":
            return Command(accel=-float(args["decel"]), emergency=activating)
        if verb == "speeding":
            target = float(args["factor"]) * me.cruise_speed
            return Command(accel=_speed_hold(target, me.speed))
        if verb == "follow":
            found = find_leader(states, me, lane_map)
            if found is None:
                return Command(accel=idm_accel(me.speed, v0=cruise))
            leader, gap = found
            return Command(accel=idm_accel(me.speed, gap, leader.speed, v0=cruise))
        if verb == "tailgate":
            target_gap = float(args["gap"])
            found = find_leader(states, me, lane_map)
            if found is None:
                return Command(accel=idm_accel(me.speed, v0=cruise))
            leader, gap = found
            accel = idm_accel(me.speed, gap, leader.speed, v0=max(cruise, leader.speed + 2.0), headway=0.5, s0=target_gap)
            return Command(accel=accel)
        if verb == "lane_change":
            request = None
            if activating and me.lane_change is None:
                request = adjacent_on_side(lane_map, me, str(args["direction"]))
            return Command(accel=_speed_hold(me.cruise_speed, me.speed), lane_request=request)
        if verb == "cut_in":
            request = None
            if activating and me.lane_change is None:
                request = self._cut_in_target(states, me, lane_map, str(args["side"]))
            return Command(lane_request=request)
        raise AssertionError(f"unreachable verb {verb!r}")  # compile rejects unknown verbs

    def _cut_in_target(
        self, states: dict[str, VehicleState], me: VehicleState, lane_map: LaneMap, side: str
    ) -> str | None:
        # Prefer the anchor's lane: cutting in means entering its path.
        if self.anchor_id is not None and self.anchor_id in states:
            anchor_lane = states[self.anchor_id].lane_id
            if anchor_lane != me.lane_id:
                return anchor_lane
        opposite = "right" if side == "left" else "left"
        return adjacent_on_side(lane_map, me, opposite)


class IdmRuntime:
    """Default background traffic: IDM car following on the current lane."""

    def __init__(self, vehicle_id: str, desired_speed: float) -> None:
        self.vehicle_id = vehicle_id
        self.desired_speed = desired_speed

    def act(self, states: dict[str, VehicleState], me: VehicleState, lane_map: LaneMap, now: float) -> Command:
        found = find_leader(states, me, lane_map)
        if found is None:
            return Command(accel=idm_accel(me.speed, v0=self.desired_speed))
        leader, gap = found
        return Command(accel=idm_accel(me.speed, gap, leader.speed, v0=self.desired_speed))


def policy_command(lane_map: LaneMap, me: VehicleState, action: int) -> Command:
    """Translate a discrete policy action into a Command. Emergency braking
    is flagged only on the transition into the action."""
    if action == ACTION_LANE_LEFT or action == ACTION_LANE_RIGHT:
        side = "left" if action == ACTION_LANE_LEFT else "right"
        request = None
        if me.lane_change is None:
            request = adjacent_on_side(lane_map, me, side)
        return Command(lane_request=request)
    if action == ACTION_IDLE:
        return Command()
    if action == ACTION_FASTER:
        return Command(accel=POLICY_ACCEL_STEP)
    if action == ACTION_SLOWER:
        return Command(accel=-POLICY_ACCEL_STEP)
    if action == ACTION_EMERGENCY_BRAKE:
        return Command(accel=-BRAKE_MAX, emergency=me.prev_action != ACTION_EMERGENCY_BRAKE)
    raise ValueError(f"invalid policy action {action}")
