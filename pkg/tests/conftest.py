"""Shared fixtures: small lane maps, track builders, canned documents."""

from __future__ import annotations

import math
from pathlib import Path

import pytest

from scenforge.dsl import parse_dsl
from scenforge.ingest import Lane, LaneMap, TrackFrame, Trajectory

FIXTURES = Path(__file__).parent / "fixtures"


def straight_lane(
    lane_id: str,
    y: float,
    length: float = 300.0,
    adjacent: tuple[str, ...] = (),
    line_type: str = "solid",
    speed_class: str = "normal",
    control: str | None = None,
) -> Lane:
    return Lane(
        lane_id=lane_id,
        centerline=((0.0, y), (length, y)),
        line_type=line_type,
        speed_class=speed_class,
        adjacent=adjacent,
        control=control,
    )


@pytest.fixture
def two_lane_map() -> LaneMap:
    """Two parallel 300 m lanes 3.5 m apart, mutually adjacent."""
    return LaneMap(
        {
            "L1": straight_lane("L1", 0.0, adjacent=("L2",)),
            "L2": straight_lane("L2", 3.5, adjacent=("L1",), line_type="dashed"),
        }
    )


def make_trajectory(
    track_id: str,
    xs,
    ys=None,
    vxs=None,
    vys=None,
    psis=None,
    dt: float = 0.1,
    length: float = 4.5,
    width: float = 2.0,
    agent_type: str = "car",
    first_frame: int = 0,
) -> Trajectory:
    """Build a trajectory from coordinate lists; velocity defaults to the
    forward difference of positions and heading to the velocity angle."""
    n = len(xs)
    ys = list(ys) if ys is not None else [0.0] * n
    if vxs is None:
        vxs = [(xs[min(i + 1, n - 1)] - xs[max(i - 1, 0)]) / (dt * (2 if 0 < i < n - 1 else 1)) for i in range(n)]
    if vys is None:
        vys = [(ys[min(i + 1, n - 1)] - ys[max(i - 1, 0)]) / (dt * (2 if 0 < i < n - 1 else 1)) for i in range(n)]
    if psis is None:
        psis = [math.atan2(vys[i], vxs[i]) if (vxs[i] or vys[i]) else 0.0 for i in range(n)]
    frames = [
        TrackFrame(first_frame + i, (first_frame + i) * dt, xs[i], ys[i], vxs[i], vys[i], psis[i])
        for i in range(n)
    ]
    return Trajectory(track_id, agent_type, length, width, frames)


GOLDEN_DSL = """\
scenario "brake_trap" {
  geometry {
    map: "straight_two_lane";
    ego_route: ["L1"];
    source: "SYNTH";
  }
  spawn {
    vehicle ego1 {
      role: ego;
      lane: "L1";
      arc_s: 20.0;
      speed: 8.0;
      length: 4.5;
      width: 2.0;
    }
    vehicle adv1 {
      role: adversarial;
      anchor: ego1;
      relation: front;
      offset: 12.0;
      speed: 8.0;
      length: 4.5;
      width: 2.0;
    }
  }
  behavior {
    ego1: policy;
    adv1: go_straight(duration=1.0) -> sudden_brake(decel=6.0, duration=2.0) -> go_straight;
  }
}
"""


@pytest.fixture
def golden_doc():
    return parse_dsl(GOLDEN_DSL)
