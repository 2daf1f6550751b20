"""Vehicle state, kinematic bicycle integration, lane tracking, collision.

All vehicles share one motion model: a kinematic bicycle with bounded
steering and bounded acceleration, integrated at a fixed dt. Steering is
never commanded directly by behaviors; a two-stage tracking law (lateral
offset -> desired heading -> steering angle) keeps the vehicle on a
reference lane, which also realizes lane changes by moving the lateral
reference. Collision checks are exact separating-axis tests on oriented
rectangles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..ingest import Lane

WHEELBASE = 2.7  # m
STEER_MAX = 0.6  # rad
ACCEL_MAX = 3.0  # m/s^2, strongest commanded acceleration
BRAKE_MAX = 6.0  # m/s^2, emergency deceleration bound
SPEED_MAX = 40.0  # m/s
LANE_CHANGE_DURATION = 2.0  # s
K_LATERAL = 1.5  # 1/s, lateral error -> desired lateral speed
K_HEADING = 4.0  # 1/s, heading error -> desired yaw rate
MAX_LATERAL_RATIO = 0.7  # cap on lateral/forward speed ratio


def clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


def wrap_angle(a: float) -> float:
    """Map to (-pi, pi]."""
    a = (a + math.pi) % (2 * math.pi) - math.pi
    return math.pi if a == -math.pi else a


@dataclass
class LaneChangeState:
    from_lane: str
    to_lane: str
    start_time: float
    start_lateral: float  # lateral offset in the target lane frame at start


@dataclass
class VehicleState:
    vehicle_id: str
    role: str
    x: float
    y: float
    heading: float
    speed: float
    lane_id: str
    length: float
    width: float
    cruise_speed: float  # spawn speed, used as the default hold target
    lane_change: LaneChangeState | None = None
    prev_action: int | None = None  # last discrete policy action
    route_pos: int = 0  # index into the ego route

    def velocity(self) -> tuple[float, float]:
        return self.speed * math.cos(self.heading), self.speed * math.sin(self.heading)


def smoothstep(u: float) -> float:
    u = clamp(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def lane_change_reference(change: LaneChangeState, now: float) -> float:
    """Lateral reference in the target lane frame during a lane change."""
    u = (now - change.start_time) / LANE_CHANGE_DURATION
    return change.start_lateral * (1.0 - smoothstep(u))


def tracking_steer(state: VehicleState, lane: Lane, ref_lateral: float) -> float:
    """Steering angle that regains the reference lateral offset on a lane."""
    arc, lateral, _ = lane.project(state.x, state.y)
    lane_heading = lane.heading_at(arc)
    v_lat_desired = K_LATERAL * (ref_lateral - lateral)
    ratio = clamp(v_lat_desired / max(state.speed, 1.0), -MAX_LATERAL_RATIO, MAX_LATERAL_RATIO)
    heading_ref = lane_heading + math.asin(ratio)
    heading_err = wrap_angle(heading_ref - state.heading)
    yaw_rate_desired = K_HEADING * heading_err
    steer = math.atan(yaw_rate_desired * WHEELBASE / max(state.speed, 0.5))
    return clamp(steer, -STEER_MAX, STEER_MAX)


def integrate(state: VehicleState, accel: float, steer: float, dt: float) -> None:
    """One bicycle step in place. Acceleration and steering are clamped, so
    per-step speed change is at most BRAKE_MAX*dt and heading change at most
    speed/WHEELBASE * tan(STEER_MAX) * dt."""
    accel = clamp(accel, -BRAKE_MAX, ACCEL_MAX)
    steer = clamp(steer, -STEER_MAX, STEER_MAX)
    state.x += state.speed * math.cos(state.heading) * dt
    state.y += state.speed * math.sin(state.heading) * dt
    state.heading = wrap_angle(state.heading + state.speed / WHEELBASE * math.tan(steer) * dt)
    state.speed = clamp(state.speed + accel * dt, 0.0, SPEED_MAX)


def rect_corners(x: float, y: float, heading: float, length: float, width: float) -> np.ndarray:
    c, s = math.cos(heading), math.sin(heading)
    hl, hw = length / 2.0, width / 2.0
    local = np.array([[hl, hw], [hl, -hw], [-hl, -hw], [-hl, hw]])
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([x, y])


def rects_collide(a: np.ndarray, b: np.ndarray) -> bool:
    """Separating-axis test for two convex quadrilaterals (corner arrays)."""
    for rect in (a, b):
        for i in range(4):
            edge = rect[(i + 1) % 4] - rect[i]
            axis = np.array([-edge[1], edge[0]])
            pa = a @ axis
            pb = b @ axis
            if pa.max() < pb.min() or pb.max() < pa.min():
                return False
    return True


def vehicles_collide(a: VehicleState, b: VehicleState) -> bool:
    return rects_collide(
        rect_corners(a.x, a.y, a.heading, a.length, a.width),
        rect_corners(b.x, b.y, b.heading, b.length, b.width),
    )
