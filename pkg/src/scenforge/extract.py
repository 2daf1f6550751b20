"""Rule-based extraction of risky or characteristic scenes from track logs.

Detectors:
  * following: a moving ego with the same moving leader, on the same matched
    lane and ahead of it, for a minimum run of consecutive frames.
  * braking: longitudinal deceleration below a threshold sustained for a
    minimum number of consecutive acceleration samples.
  * lane change: the matched lane differs from the previous frame's and the
    two lanes are adjacent in the map.
  * maneuver classification: cumulative yaw change against straight / turn /
    u-turn thresholds.

Frame ranges are inclusive (first_frame_index, last_frame_index) spans of
the observed frames involved in the event. An acceleration sample is the
forward difference between two frames, so a k-sample braking event spans
k + 1 frames.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataError
from .ingest import LaneMap, TrackParseResult, Trajectory, match_lane
from .safety import RiskMetrics, assess_risk, yaw_change

SCENE_TYPES = (
    "follow",
    "braking",
    "lane_change",
    "go_straight",
    "turn_left",
    "turn_right",
    "u_turn",
)


@dataclass(frozen=True)
class ExtractionConfig:
    brake_decel_threshold: float = -1.0
    brake_min_frames: int = 5
    follow_min_frames: int = 10
    follow_max_gap: float = 50.0
    motion_speed_min: float = 0.5
    straight_yaw_max: float = math.pi / 6
    uturn_yaw_min: float = 3 * math.pi / 4
    lane_max_lateral: float = 2.0


@dataclass
class ScenarioSegment:
    segment_id: str
    scene_type: str
    ego_id: str
    other_ids: tuple[str, ...]
    frame_range: tuple[int, int]
    metrics: RiskMetrics
    details: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.scene_type not in SCENE_TYPES:
            raise DataError(f"unknown scene type {self.scene_type!r}")
        if self.frame_range[0] > self.frame_range[1]:
            raise DataError(f"segment {self.segment_id}: inverted frame range")

    def to_json(self) -> dict:
        return {
            "segment_id": self.segment_id,
            "scene_type": self.scene_type,
            "ego_id": self.ego_id,
            "other_ids": list(self.other_ids),
            "frame_range": list(self.frame_range),
            "metrics": self.metrics.to_json(),
            "details": self.details,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "ScenarioSegment":
        return cls(
            segment_id=payload["segment_id"],
            scene_type=payload["scene_type"],
            ego_id=payload["ego_id"],
            other_ids=tuple(payload.get("other_ids", [])),
            frame_range=tuple(payload["frame_range"]),
            metrics=RiskMetrics.from_json(payload.get("metrics", {})),
            details=payload.get("details", {}),
        )


def _segment_id(scene_type: str, ego_id: str, frame_range: tuple[int, int]) -> str:
    return f"{scene_type}:{ego_id}:{frame_range[0]}-{frame_range[1]}"


def crop(traj: Trajectory, first_frame: int, last_frame: int) -> Trajectory | None:
    """Restrict a trajectory to an inclusive frame-index window."""
    frames = [f for f in traj.frames if first_frame <= f.frame_index <= last_frame]
    if len(frames) < 2:
        return None
    return Trajectory(traj.track_id, traj.agent_type, traj.length, traj.width, frames)


def _window_metrics(
    trajs: Sequence[Trajectory], frame_range: tuple[int, int]
) -> RiskMetrics:
    cropped = [c for t in trajs if (c := crop(t, *frame_range)) is not None]
    if len(cropped) < 1:
        return RiskMetrics(None, None, 0.0, False)
    return assess_risk(cropped)


# --- braking ----------------------------------------------------------------


def accel_series(traj: Trajectory) -> list[float]:
    """Forward-difference longitudinal acceleration, one sample per frame pair."""
    dt = traj.dt
    speeds = traj.speeds()
    return [float((speeds[i + 1] - speeds[i]) / dt) for i in range(len(speeds) - 1)]


def detect_braking(
    traj: Trajectory, cfg: ExtractionConfig = ExtractionConfig()
) -> list[ScenarioSegment]:
    """Runs of >= brake_min_frames consecutive samples strictly below threshold."""
    accel = accel_series(traj)
    events: list[ScenarioSegment] = []
    run_start: int | None = None
    for i, a in enumerate(accel + [0.0]):  # sentinel closes a trailing run
        if a < cfg.brake_decel_threshold:
            if run_start is None:
                run_start = i
            continue
        if run_start is not None:
            run_len = i - run_start
            if run_len >= cfg.brake_min_frames:
                frame_range = (
                    traj.frames[run_start].frame_index,
                    traj.frames[run_start + run_len].frame_index,
                )
                events.append(
                    ScenarioSegment(
                        segment_id=_segment_id("braking", traj.track_id, frame_range),
                        scene_type="braking",
                        ego_id=traj.track_id,
                        other_ids=(),
                        frame_range=frame_range,
                        metrics=_window_metrics([traj], frame_range),
                        details={"min_accel": min(accel[run_start : run_start + run_len])},
                    )
                )
            run_start = None
    return events


# --- following --------------------------------------------------------------


def _leader_at(
    ego: Trajectory,
    i: int,
    others: Sequence[Trajectory],
    lane_map: LaneMap,
    cfg: ExtractionConfig,
) -> tuple[str, float] | None:
    """(leader id, bumper gap) for ego frame i, or None."""
    f = ego.frames[i]
    if f.speed < cfg.motion_speed_min:
        return None
    lane_id = match_lane(f.x, f.y, lane_map, cfg.lane_max_lateral)
    if lane_id is None:
        return None
    lane = lane_map.lane(lane_id)
    ego_arc, _, _ = lane.project(f.x, f.y)
    best: tuple[str, float] | None = None
    for other in others:
        of = next((g for g in other.frames if g.frame_index == f.frame_index), None)
        if of is None or of.speed < cfg.motion_speed_min:
            continue
        if match_lane(of.x, of.y, lane_map, cfg.lane_max_lateral) != lane_id:
            continue
        arc, _, _ = lane.project(of.x, of.y)
        gap = arc - ego_arc - (ego.length + other.length) / 2.0
        if arc <= ego_arc or gap > cfg.follow_max_gap:
            continue
        if best is None or gap < best[1]:
            best = (other.track_id, gap)
    return best


def detect_following(
    trajectories: Sequence[Trajectory],
    lane_map: LaneMap,
    cfg: ExtractionConfig = ExtractionConfig(),
) -> list[ScenarioSegment]:
    """Same-leader runs of at least follow_min_frames consecutive frames."""
    segments: list[ScenarioSegment] = []
    for ego in trajectories:
        others = [t for t in trajectories if t.track_id != ego.track_id]
        leaders = [_leader_at(ego, i, others, lane_map, cfg) for i in range(len(ego))]
        i = 0
        while i < len(leaders):
            if leaders[i] is None:
                i += 1
                continue
            leader_id = leaders[i][0]
            j = i
            gaps = []
            while j < len(leaders) and leaders[j] is not None and leaders[j][0] == leader_id:
                gaps.append(leaders[j][1])
                j += 1
            if j - i >= cfg.follow_min_frames:
                frame_range = (
                    ego.frames[i].frame_index,
                    ego.frames[j - 1].frame_index,
                )
                segments.append(
                    ScenarioSegment(
                        segment_id=_segment_id("follow", ego.track_id, frame_range),
                        scene_type="follow",
                        ego_id=ego.track_id,
                        other_ids=(leader_id,),
                        frame_range=frame_range,
                        metrics=_window_metrics(
                            [ego] + [t for t in others if t.track_id == leader_id],
                            frame_range,
                        ),
                        details={"leader": leader_id, "min_gap": min(gaps)},
                    )
                )
            i = j
    return segments


# --- lane changes -----------------------------------------------------------


def detect_lane_change(
    traj: Trajectory, lane_map: LaneMap, cfg: ExtractionConfig = ExtractionConfig()
) -> list[ScenarioSegment]:
    """Frames whose matched lane differs from the previous frame's and is
    adjacent to it. The event spans the straddling frame pair."""
    matched = [
        match_lane(f.x, f.y, lane_map, cfg.lane_max_lateral) for f in traj.frames
    ]
    events: list[ScenarioSegment] = []
    for i in range(1, len(matched)):
        prev, cur = matched[i - 1], matched[i]
        if prev is None or cur is None or prev == cur:
            continue
        if cur not in lane_map.lane(prev).adjacent:
            continue
        frame_range = (traj.frames[i - 1].frame_index, traj.frames[i].frame_index)
        events.append(
            ScenarioSegment(
                segment_id=_segment_id("lane_change", traj.track_id, frame_range),
                scene_type="lane_change",
                ego_id=traj.track_id,
                other_ids=(),
                frame_range=frame_range,
                metrics=RiskMetrics(None, None, 0.0, False),
                details={"from": prev, "to": cur},
            )
        )
    return events


# --- maneuver classification -------------------------------------------------


def classify_yaw_total(total: float, cfg: ExtractionConfig = ExtractionConfig()) -> str:
    """Maneuver class for a cumulative yaw change.

    Boundaries are inclusive toward the sharper maneuver: exactly pi/6 is a
    turn, exactly 3*pi/4 is a u-turn.
    """
    mag = abs(total)
    if mag < cfg.straight_yaw_max:
        return "go_straight"
    if mag < cfg.uturn_yaw_min:
        return "turn_left" if total > 0 else "turn_right"
    return "u_turn"


def classify_maneuver(
    traj: Trajectory, cfg: ExtractionConfig = ExtractionConfig()
) -> str:
    """go_straight / turn_left / turn_right / u_turn from cumulative yaw change."""
    return classify_yaw_total(yaw_change(traj.headings()), cfg)


def detect_maneuvers(
    trajectories: Sequence[Trajectory], cfg: ExtractionConfig = ExtractionConfig()
) -> list[ScenarioSegment]:
    """One whole-trajectory maneuver segment per moving agent."""
    segments: list[ScenarioSegment] = []
    for traj in trajectories:
        if float(traj.speeds().mean()) < cfg.motion_speed_min:
            continue
        scene_type = classify_maneuver(traj, cfg)
        frame_range = (traj.frames[0].frame_index, traj.frames[-1].frame_index)
        segments.append(
            ScenarioSegment(
                segment_id=_segment_id(scene_type, traj.track_id, frame_range),
                scene_type=scene_type,
                ego_id=traj.track_id,
                other_ids=(),
                frame_range=frame_range,
                metrics=_window_metrics([traj], frame_range),
                details={"yaw_change": yaw_change(traj.headings())},
            )
        )
    return segments


# --- top level ----------------------------------------------------------------


def extract_segments(
    parsed: TrackParseResult,
    lane_map: LaneMap,
    cfg: ExtractionConfig = ExtractionConfig(),
) -> list[ScenarioSegment]:
    """All detectors over all agents, in a deterministic order."""
    trajs = parsed.trajectories
    segments: list[ScenarioSegment] = []
    segments.extend(detect_following(trajs, lane_map, cfg))
    for traj in trajs:
        segments.extend(detect_braking(traj, cfg))
        segments.extend(detect_lane_change(traj, lane_map, cfg))
    segments.extend(detect_maneuvers(trajs, cfg))
    return segments


def save_segments(segments: Iterable[ScenarioSegment], path: str | Path) -> None:
    with Path(path).open("w") as fh:
        for seg in segments:
            fh.write(json.dumps(seg.to_json()) + "\n")


def load_segments(path: str | Path) -> list[ScenarioSegment]:
    segments = []
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                segments.append(ScenarioSegment.from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError) as exc:
                raise DataError(f"{path}:{lineno}: bad segment record ({exc})") from exc
    return segments
