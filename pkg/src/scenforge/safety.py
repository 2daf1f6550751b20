"""Surrogate safety metrics over observed trajectory pairs.

Time-to-collision treats the pair as a follower closing on a leader:
bumper gap divided by closing speed, zero once the gap is closed, and
undefined (None) when the pair is not closing faster than EPS_CLOSE.

Post-encroachment time is measured at the conflict point, the location
of closest approach between the two paths irrespective of time. Each
vehicle occupies a disk of radius half its length around its center;
PET is the gap between the first vehicle leaving the disk and the second
entering it. Entry and exit times are found by a per-frame scan with
sub-frame linear refinement at the boundary crossings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ingest import Trajectory

EPS_CLOSE = 0.1


def ttc(gap: float, closing_speed: float, eps_close: float = EPS_CLOSE) -> float | None:
    """Time to collision for one observation.

    gap <= 0 means contact already: TTC 0. A pair closing slower than
    eps_close has no meaningful TTC and yields None.
    """
    if gap <= 0.0:
        return 0.0
    if closing_speed < eps_close:
        return None
    return gap / closing_speed


def ttc_series(follower: Trajectory, leader: Trajectory) -> list[float | None]:
    """Per-frame TTC over the common frame range of the two agents."""
    common = _common_frames(follower, leader)
    half_lengths = (follower.length + leader.length) / 2.0
    out: list[float | None] = []
    for fa, fb in common:
        dx, dy = fb.x - fa.x, fb.y - fa.y
        dist = math.hypot(dx, dy)
        gap = dist - half_lengths
        if dist > 0.0:
            dvx, dvy = fb.vx - fa.vx, fb.vy - fa.vy
            closing = -(dx * dvx + dy * dvy) / dist
        else:
            closing = 0.0
        out.append(ttc(gap, closing))
    return out


def min_ttc(values: Sequence[float | None]) -> float | None:
    defined = [v for v in values if v is not None]
    return min(defined) if defined else None


def _common_frames(a: Trajectory, b: Trajectory):
    by_index = {f.frame_index: f for f in b.frames}
    return [(f, by_index[f.frame_index]) for f in a.frames if f.frame_index in by_index]


def conflict_point(a: Trajectory, b: Trajectory) -> tuple[float, float]:
    """Location of closest approach between the two paths, any time pair.

    Midpoint of the closest position pair; for crossing paths this is the
    crossing itself.
    """
    pa = a.positions()
    pb = b.positions()
    diff = pa[:, None, :] - pb[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    i, j = np.unravel_index(int(np.argmin(dist)), dist.shape)
    mid = (pa[i] + pb[j]) / 2.0
    return float(mid[0]), float(mid[1])


def occupancy_interval(
    traj: Trajectory, point: tuple[float, float], radius: float | None = None
) -> tuple[float, float] | None:
    """First contiguous [enter, exit] interval inside the conflict disk.

    radius defaults to half the vehicle length. Boundary times are refined
    by solving the linear-motion crossing inside the straddling frame pair.
    """
    if radius is None:
        radius = traj.length / 2.0
    cx, cy = point
    inside = [math.hypot(f.x - cx, f.y - cy) <= radius for f in traj.frames]
    if not any(inside):
        return None
    first = inside.index(True)
    last = first
    while last + 1 < len(inside) and inside[last + 1]:
        last += 1
    if first == 0:
        enter = traj.frames[0].timestamp
    else:
        enter = _crossing_time(traj.frames[first - 1], traj.frames[first], point, radius)
    if last == len(inside) - 1:
        exit_ = traj.frames[-1].timestamp
    else:
        exit_ = _crossing_time(traj.frames[last + 1], traj.frames[last], point, radius)
    return enter, exit_


def _crossing_time(outside, inside, point, radius) -> float:
    """Time where the disk boundary is crossed between two frames.

    Position is interpolated linearly from the outside frame to the inside
    frame; the boundary condition is a quadratic in the interpolation
    fraction with exactly one root in [0, 1].
    """
    p0 = np.array([outside.x - point[0], outside.y - point[1]])
    p1 = np.array([inside.x - point[0], inside.y - point[1]])
    d = p1 - p0
    a = float(d @ d)
    if a == 0.0:
        return inside.timestamp
    b = 2.0 * float(p0 @ d)
    c = float(p0 @ p0) - radius * radius
    disc = max(b * b - 4 * a * c, 0.0)
    root = (-b - math.sqrt(disc)) / (2 * a)
    if not 0.0 <= root <= 1.0:
        root = (-b + math.sqrt(disc)) / (2 * a)
    root = min(max(root, 0.0), 1.0)
    return outside.timestamp + root * (inside.timestamp - outside.timestamp)


def pet(a: Trajectory, b: Trajectory) -> float | None:
    """Post-encroachment time at the conflict point of the two paths.

    None when either vehicle never reaches the conflict disk or when the
    occupancy intervals overlap (simultaneous presence is a conflict, not
    an encroachment gap).
    """
    point = conflict_point(a, b)
    ia = occupancy_interval(a, point)
    ib = occupancy_interval(b, point)
    if ia is None or ib is None:
        return None
    if ia[1] < ib[0]:
        return ib[0] - ia[1]
    if ib[1] < ia[0]:
        return ia[0] - ib[1]
    return None


def occupancy_overlaps(a: Trajectory, b: Trajectory) -> bool:
    """True when both vehicles sit in the conflict disk at the same time."""
    point = conflict_point(a, b)
    ia = occupancy_interval(a, point)
    ib = occupancy_interval(b, point)
    if ia is None or ib is None:
        return False
    return ia[0] <= ib[1] and ib[0] <= ia[1]


def yaw_change(headings: Sequence[float]) -> float:
    """Cumulative signed heading change, unwrapped per step.

    Each increment is mapped to the shortest signed angle, so crossing the
    +/-pi seam does not produce a 2*pi jump.
    """
    seq = list(headings)
    total = 0.0
    for prev, cur in zip(seq, seq[1:]):
        total += (cur - prev + math.pi) % (2 * math.pi) - math.pi
    return total


@dataclass(frozen=True)
class RiskMetrics:
    """Risk summary for a scene, as stored in corpus record metadata."""

    min_ttc: float | None
    min_pet: float | None
    max_yaw_change: float
    collision: bool

    def to_json(self) -> dict:
        return {
            "min_ttc": self.min_ttc,
            "min_pet": self.min_pet,
            "max_yaw_change": self.max_yaw_change,
            "collision": self.collision,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "RiskMetrics":
        return cls(
            min_ttc=payload.get("min_ttc"),
            min_pet=payload.get("min_pet"),
            max_yaw_change=float(payload.get("max_yaw_change", 0.0)),
            collision=bool(payload.get("collision", False)),
        )


def assess_risk(trajectories: Sequence[Trajectory]) -> RiskMetrics:
    """Pairwise risk summary over a scene's agents."""
    ttcs: list[float] = []
    pets: list[float] = []
    overlap = False
    for i, a in enumerate(trajectories):
        for b in trajectories[i + 1 :]:
            forward = min_ttc(ttc_series(a, b))
            if forward is not None:
                ttcs.append(forward)
            gap = pet(a, b)
            if gap is not None:
                pets.append(gap)
            overlap = overlap or occupancy_overlaps(a, b)
    yaw = max((abs(yaw_change(t.headings())) for t in trajectories), default=0.0)
    return RiskMetrics(
        min_ttc=min(ttcs) if ttcs else None,
        min_pet=min(pets) if pets else None,
        max_yaw_change=yaw,
        collision=overlap,
    )
