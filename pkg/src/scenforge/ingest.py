"""Trajectory-log and lane-map ingestion.

Tracks arrive as CSV with one row per agent per frame:

    track_id, frame_id, timestamp_ms, agent_type, x, y, vx, vy, psi_rad,
    length, width

positions in meters (map frame), velocities in m/s, heading in radians.
Lane maps arrive as JSON: {"lanes": [{"id", "centerline", "line_type",
"speed_class", "adjacent", "control"}, ...]} with centerlines as [x, y]
point lists in meters.

Rows with missing or non-finite numeric fields are dropped and counted,
never interpolated. Agents left with fewer than two valid frames are
dropped entirely.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import DataError

TRACK_COLUMNS = (
    "track_id",
    "frame_id",
    "timestamp_ms",
    "agent_type",
    "x",
    "y",
    "vx",
    "vy",
    "psi_rad",
    "length",
    "width",
)

LINE_TYPES = ("solid", "dashed")
SPEED_CLASSES = ("normal", "slow")
CONTROLS = ("closure", "signal")


@dataclass(frozen=True)
class TrackFrame:
    """One observed agent state. Timestamp is in seconds."""

    frame_index: int
    timestamp: float
    x: float
    y: float
    vx: float
    vy: float
    psi: float

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)


@dataclass
class Trajectory:
    """All valid frames for one agent, sorted by frame index."""

    track_id: str
    agent_type: str
    length: float
    width: float
    frames: list[TrackFrame]

    def __post_init__(self) -> None:
        if len(self.frames) < 2:
            raise DataError(f"trajectory {self.track_id}: needs >= 2 frames")
        if self.length <= 0 or self.width <= 0:
            raise DataError(f"trajectory {self.track_id}: non-positive extent")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def dt(self) -> float:
        """Frame spacing in seconds. Spacing must be uniform."""
        steps = [
            self.frames[i + 1].timestamp - self.frames[i].timestamp
            for i in range(len(self.frames) - 1)
        ]
        first = steps[0]
        if first <= 0 or any(abs(s - first) > 1e-6 for s in steps):
            raise DataError(f"trajectory {self.track_id}: non-uniform timestamps")
        return first

    @property
    def duration(self) -> float:
        return self.frames[-1].timestamp - self.frames[0].timestamp

    def speeds(self) -> np.ndarray:
        return np.asarray([f.speed for f in self.frames])

    def positions(self) -> np.ndarray:
        return np.asarray([(f.x, f.y) for f in self.frames])

    def headings(self) -> np.ndarray:
        return np.asarray([f.psi for f in self.frames])


@dataclass
class TrackParseResult:
    trajectories: list[Trajectory]
    dropped_rows: int = 0
    dropped_agents: int = 0

    def by_id(self) -> dict[str, Trajectory]:
        return {t.track_id: t for t in self.trajectories}


def _finite(*values: float) -> bool:
    return all(math.isfinite(v) for v in values)


def parse_tracks(path: str | Path) -> TrackParseResult:
    """Parse a track CSV, grouping rows into per-agent trajectories.

    Returns the trajectories in order of first appearance plus counts of
    dropped rows (non-finite fields) and dropped agents (< 2 valid frames).
    """
    path = Path(path)
    rows: dict[str, list[TrackFrame]] = {}
    meta: dict[str, tuple[str, float, float]] = {}
    dropped_rows = 0
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in TRACK_COLUMNS if c not in header]
        if missing:
            raise DataError(f"{path}: missing columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            try:
                track_id = row["track_id"].strip()
                frame_index = int(row["frame_id"])
                timestamp = int(row["timestamp_ms"]) / 1000.0
                x, y = float(row["x"]), float(row["y"])
                vx, vy = float(row["vx"]), float(row["vy"])
                psi = float(row["psi_rad"])
                length, width = float(row["length"]), float(row["width"])
            except (KeyError, TypeError, ValueError):
                dropped_rows += 1
                continue
            if not track_id or not _finite(x, y, vx, vy, psi, length, width):
                dropped_rows += 1
                continue
            if length <= 0 or width <= 0:
                dropped_rows += 1
                continue
            frame = TrackFrame(frame_index, timestamp, x, y, vx, vy, psi)
            rows.setdefault(track_id, []).append(frame)
            meta.setdefault(track_id, (row["agent_type"].strip(), length, width))

    trajectories: list[Trajectory] = []
    dropped_agents = 0
    for track_id, frames in rows.items():
        if len(frames) < 2:
            dropped_agents += 1
            continue
        frames.sort(key=lambda f: f.frame_index)
        agent_type, length, width = meta[track_id]
        trajectories.append(Trajectory(track_id, agent_type, length, width, frames))
    return TrackParseResult(trajectories, dropped_rows, dropped_agents)


def serialize_tracks(trajectories: Iterable[Trajectory], path: str | Path) -> None:
    """Write trajectories back to the track CSV format.

    Floats are written with repr so a parse -> serialize -> parse cycle is
    bit-exact for every retained field.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACK_COLUMNS)
        for traj in trajectories:
            for f in traj.frames:
                writer.writerow(
                    [
                        traj.track_id,
                        f.frame_index,
                        round(f.timestamp * 1000),
                        traj.agent_type,
                        repr(f.x),
                        repr(f.y),
                        repr(f.vx),
                        repr(f.vy),
                        repr(f.psi),
                        repr(traj.length),
                        repr(traj.width),
                    ]
                )


# --- lane maps -------------------------------------------------------------


@dataclass(frozen=True)
class Lane:
    """A lane centerline with marking, speed class and topology attributes."""

    lane_id: str
    centerline: tuple[tuple[float, float], ...]
    line_type: str = "solid"
    speed_class: str = "normal"
    adjacent: tuple[str, ...] = ()
    control: str | None = None

    def __post_init__(self) -> None:
        if len(self.centerline) < 2:
            raise DataError(f"lane {self.lane_id}: centerline needs >= 2 points")
        if self.line_type not in LINE_TYPES:
            raise DataError(f"lane {self.lane_id}: bad line_type {self.line_type!r}")
        if self.speed_class not in SPEED_CLASSES:
            raise DataError(f"lane {self.lane_id}: bad speed_class {self.speed_class!r}")
        if self.control is not None and self.control not in CONTROLS:
            raise DataError(f"lane {self.lane_id}: bad control {self.control!r}")

    @cached_property
    def _points(self) -> np.ndarray:
        return np.asarray(self.centerline, dtype=float)

    @cached_property
    def _cumlen(self) -> np.ndarray:
        deltas = np.diff(self._points, axis=0)
        seg = np.hypot(deltas[:, 0], deltas[:, 1])
        if np.any(seg <= 0):
            raise DataError(f"lane {self.lane_id}: repeated centerline point")
        return np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def length(self) -> float:
        return float(self._cumlen[-1])

    def _segment_at(self, s: float) -> tuple[int, float]:
        """Segment index and interpolation fraction for clamped arc s."""
        cum = self._cumlen
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(cum, s, side="right") - 1)
        i = min(max(i, 0), len(cum) - 2)
        seg_len = cum[i + 1] - cum[i]
        return i, (s - cum[i]) / seg_len

    def point_at(self, s: float) -> tuple[float, float]:
        i, t = self._segment_at(s)
        p = self._points[i] * (1 - t) + self._points[i + 1] * t
        return float(p[0]), float(p[1])

    def heading_at(self, s: float) -> float:
        i, _ = self._segment_at(s)
        d = self._points[i + 1] - self._points[i]
        return float(math.atan2(d[1], d[0]))

    def left_normal_at(self, s: float) -> tuple[float, float]:
        h = self.heading_at(s)
        return -math.sin(h), math.cos(h)

    def project(self, x: float, y: float) -> tuple[float, float, float]:
        """Project a point onto the centerline.

        Returns (arc length, signed lateral offset, distance). Lateral is
        positive on the left of the direction of travel. Ties between
        segments resolve to the earlier one.
        """
        q = np.array([x, y], dtype=float)
        pts = self._points
        d = pts[1:] - pts[:-1]
        seg_sq = np.einsum("ij,ij->i", d, d)
        t = np.clip(np.einsum("ij,ij->i", q - pts[:-1], d) / seg_sq, 0.0, 1.0)
        closest = pts[:-1] + t[:, None] * d
        dist = np.hypot(*(q - closest).T)
        i = int(np.argmin(dist))
        seg_len = math.sqrt(seg_sq[i])
        arc = float(self._cumlen[i] + t[i] * seg_len)
        offset = q - closest[i]
        lateral = float((-d[i, 1] * offset[0] + d[i, 0] * offset[1]) / seg_len)
        return arc, lateral, float(dist[i])


@dataclass(frozen=True)
class LaneMap:
    lanes: dict[str, Lane] = field(default_factory=dict)

    def lane(self, lane_id: str) -> Lane:
        try:
            return self.lanes[lane_id]
        except KeyError:
            raise DataError(f"unknown lane id {lane_id!r}") from None

    def sorted_ids(self) -> list[str]:
        return sorted(self.lanes)

    def __contains__(self, lane_id: str) -> bool:
        return lane_id in self.lanes


def parse_lane_map(path: str | Path) -> LaneMap:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(payload, dict) or not isinstance(payload.get("lanes"), list):
        raise DataError(f"{path}: expected an object with a 'lanes' list")
    lanes: dict[str, Lane] = {}
    for entry in payload["lanes"]:
        if not isinstance(entry, dict) or "id" not in entry:
            raise DataError(f"{path}: lane entry without an id")
        lane_id = str(entry["id"])
        if lane_id in lanes:
            raise DataError(f"{path}: duplicate lane id {lane_id!r}")
        centerline = entry.get("centerline", [])
        try:
            points = tuple((float(p[0]), float(p[1])) for p in centerline)
        except (TypeError, ValueError, IndexError):
            raise DataError(f"{path}: lane {lane_id}: bad centerline") from None
        lanes[lane_id] = Lane(
            lane_id=lane_id,
            centerline=points,
            line_type=entry.get("line_type", "solid"),
            speed_class=entry.get("speed_class", "normal"),
            adjacent=tuple(str(a) for a in entry.get("adjacent", [])),
            control=entry.get("control"),
        )
    for lane in lanes.values():
        for other in lane.adjacent:
            if other not in lanes:
                raise DataError(
                    f"{path}: lane {lane.lane_id} adjacent to unknown lane {other!r}"
                )
    return LaneMap(lanes)


def serialize_lane_map(lane_map: LaneMap, path: str | Path) -> None:
    payload = {
        "lanes": [
            {
                "id": lane.lane_id,
                "centerline": [[x, y] for x, y in lane.centerline],
                "line_type": lane.line_type,
                "speed_class": lane.speed_class,
                "adjacent": list(lane.adjacent),
                "control": lane.control,
            }
            for lane in lane_map.lanes.values()
        ]
    }
    Path(path).write_text(json.dumps(payload, indent=2))


def match_lane(
    x: float, y: float, lane_map: LaneMap, max_lateral: float = 2.0
) -> str | None:
    """Closest lane by perpendicular distance, or None beyond max_lateral.

    Lanes are scanned in sorted-id order and only a strictly smaller
    distance replaces the current best, so exact ties resolve to the
    lexicographically smallest id regardless of declaration order.
    """
    best_id: str | None = None
    best_dist = math.inf
    for lane_id in lane_map.sorted_ids():
        _, _, dist = lane_map.lanes[lane_id].project(x, y)
        if dist < best_dist:
            best_id, best_dist = lane_id, dist
    if best_id is None or best_dist > max_lateral:
        return None
    return best_id
