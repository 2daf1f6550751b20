"""Detector rules: braking runs, following pairs, lane changes, maneuvers."""

from __future__ import annotations

import math

import pytest

from scenforge.extract import (
    ExtractionConfig,
    ScenarioSegment,
    accel_series,
    classify_maneuver,
    classify_yaw_total,
    detect_braking,
    detect_following,
    detect_lane_change,
    detect_maneuvers,
    extract_segments,
    load_segments,
    save_segments,
)
from scenforge.ingest import TrackParseResult
from .conftest import make_trajectory


def trajectory_with_accels(accels, v0=15.0, dt=0.1):
    """Integrate an acceleration sample list into positions/velocities."""
    speeds = [v0]
    for a in accels:
        speeds.append(speeds[-1] + a * dt)
    xs = [0.0]
    for v in speeds[:-1]:
        xs.append(xs[-1] + v * dt)
    return make_trajectory("t", xs, vxs=speeds, dt=dt)


def test_accel_series_recovers_input():
    accels = [0.0, -2.0, -2.0, 1.0]
    traj = trajectory_with_accels(accels)
    assert accel_series(traj) == pytest.approx(accels, abs=1e-9)


def test_braking_five_samples_is_an_event_four_is_not():
    five = trajectory_with_accels([0.0] * 3 + [-2.0] * 5 + [0.0] * 3)
    events = detect_braking(five)
    assert len(events) == 1
    assert events[0].scene_type == "braking"
    # samples 3..7 are braking; the event spans frames 3..8 inclusive
    assert events[0].frame_range == (3, 8)
    four = trajectory_with_accels([0.0] * 3 + [-2.0] * 4 + [0.0] * 4)
    assert detect_braking(four) == []


def test_braking_threshold_is_strict():
    at_threshold = trajectory_with_accels([-1.0] * 8)
    assert detect_braking(at_threshold) == []
    below = trajectory_with_accels([-1.0001] * 8)
    assert len(detect_braking(below)) == 1


def test_braking_event_at_end_of_trajectory_is_closed():
    traj = trajectory_with_accels([0.0] * 3 + [-3.0] * 6)
    events = detect_braking(traj)
    assert len(events) == 1
    assert events[0].frame_range == (3, 9)


def test_following_needs_ten_frames(two_lane_map):
    def pair(n):
        ego = make_trajectory("ego", [float(i) for i in range(n)], vxs=[10.0] * n)
        leader = make_trajectory("lead", [15.0 + i for i in range(n)], vxs=[10.0] * n)
        return [ego, leader]

    segs = detect_following(pair(12), two_lane_map)
    assert len(segs) == 1
    seg = segs[0]
    assert seg.scene_type == "follow"
    assert seg.ego_id == "ego"
    assert seg.other_ids == ("lead",)
    assert seg.frame_range == (0, 11)
    assert seg.details["leader"] == "lead"
    assert detect_following(pair(9), two_lane_map) == []


def test_following_requires_motion(two_lane_map):
    n = 12
    ego = make_trajectory("ego", [0.0] * n, vxs=[0.0] * n)  # parked
    leader = make_trajectory("lead", [15.0] * n, vxs=[0.0] * n)
    assert detect_following([ego, leader], two_lane_map) == []


def test_following_requires_same_lane(two_lane_map):
    n = 12
    ego = make_trajectory("ego", [float(i) for i in range(n)], vxs=[10.0] * n)
    leader = make_trajectory("lead", [15.0 + i for i in range(n)], ys=[3.5] * n, vxs=[10.0] * n)
    assert detect_following([ego, leader], two_lane_map) == []


def test_lane_change_between_adjacent_lanes(two_lane_map):
    n = 12
    # drift from L1 (y=0) to L2 (y=3.5); crossing the midline between frames 5 and 6
    ys = [0.0] * 4 + [0.5, 1.5, 2.5, 3.2] + [3.5] * 4
    traj = make_trajectory("t", [float(i) * 2 for i in range(n)], ys=ys, vxs=[10.0] * n)
    events = detect_lane_change(traj, two_lane_map)
    assert len(events) == 1
    assert events[0].frame_range == (5, 6)
    assert events[0].details == {"from": "L1", "to": "L2"}


def test_lane_jump_to_non_adjacent_is_ignored(two_lane_map):
    far = two_lane_map.lanes["L2"]
    lanes = {
        "L1": two_lane_map.lanes["L1"],
        "L3": type(far)(
            lane_id="L3",
            centerline=((0.0, 3.5), (300.0, 3.5)),
            line_type="dashed",
            speed_class="normal",
            adjacent=(),  # not adjacent to L1
        ),
    }
    from scenforge.ingest import LaneMap

    n = 12
    ys = [0.0] * 4 + [0.5, 1.5, 2.5, 3.2] + [3.5] * 4
    traj = make_trajectory("t", [float(i) * 2 for i in range(n)], ys=ys, vxs=[10.0] * n)
    assert detect_lane_change(traj, LaneMap(lanes)) == []


def arc_trajectory(total_turn, n=40, radius=20.0):
    """Constant-speed circular arc sweeping total_turn radians."""
    sign = 1 if total_turn >= 0 else -1
    angles = [sign * abs(total_turn) * i / (n - 1) for i in range(n)]
    xs = [radius * math.sin(a) for a in angles]
    ys = [sign * radius * (1 - math.cos(abs(total_turn) * i / (n - 1))) for i in range(n)]
    psis = angles
    speed = radius * abs(total_turn) / ((n - 1) * 0.1)
    vxs = [speed * math.cos(a) for a in angles]
    vys = [speed * math.sin(a) for a in angles]
    return make_trajectory("arc", xs, ys=ys, vxs=vxs, vys=vys, psis=psis)


def test_maneuver_classification_from_trajectories():
    assert classify_maneuver(arc_trajectory(0.0)) == "go_straight"
    assert classify_maneuver(arc_trajectory(math.pi / 2)) == "turn_left"
    assert classify_maneuver(arc_trajectory(-math.pi / 2)) == "turn_right"
    assert classify_maneuver(arc_trajectory(math.pi)) == "u_turn"


def test_maneuver_thresholds_inclusive_toward_sharper():
    assert classify_yaw_total(math.pi / 6) == "turn_left"
    assert classify_yaw_total(math.pi / 6 - 1e-9) == "go_straight"
    assert classify_yaw_total(-(math.pi / 6)) == "turn_right"
    assert classify_yaw_total(3 * math.pi / 4) == "u_turn"
    assert classify_yaw_total(3 * math.pi / 4 - 1e-9) == "turn_left"
    assert classify_yaw_total(-3 * math.pi / 4) == "u_turn"


def test_maneuver_segments_skip_parked_agents():
    parked = make_trajectory("p", [0.0] * 10, vxs=[0.0] * 10)
    assert detect_maneuvers([parked]) == []


def test_extract_segments_round_trip(tmp_path, two_lane_map):
    n = 14
    ego = make_trajectory("ego", [float(i) for i in range(n)], vxs=[10.0] * n)
    leader = make_trajectory("lead", [15.0 + i for i in range(n)], vxs=[10.0] * n)
    parsed = TrackParseResult([ego, leader])
    segments = extract_segments(parsed, two_lane_map)
    types = sorted(s.scene_type for s in segments)
    assert types == ["follow", "go_straight", "go_straight"]
    save_segments(segments, tmp_path / "segs.jsonl")
    assert load_segments(tmp_path / "segs.jsonl") == segments
