"""Bezier trajectory fitting and smoothing.

A degree-n Bezier curve is fit to trajectory samples by minimizing the sum
of squared position errors over the flattened control vector with a bounded
quasi-Newton method. The objective is linear in the control points, so the
unbounded solution is also available in closed form; the iterative path is
kept because box bounds on control coordinates are supported.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

from .ingest import TRACK_COLUMNS, TrackFrame, Trajectory

DEFAULT_DEGREE = 5
MAX_ITER = 200
GRAD_TOL = 1e-8


@dataclass
class BezierCurve:
    """Control points (n+1, 2) and the sample parameters the fit used."""

    control_points: np.ndarray
    t_samples: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.control_points = np.asarray(self.control_points, dtype=float)
        if self.control_points.ndim != 2 or self.control_points.shape[1] != 2:
            raise ValueError(f"control points must be (n+1, 2), got {self.control_points.shape}")
        if self.control_points.shape[0] < 2:
            raise ValueError("a Bezier curve needs degree >= 1, i.e. at least 2 control points")
        if self.t_samples is not None:
            ts = np.asarray(self.t_samples, dtype=float)
            if ts.ndim != 1 or np.any(ts < 0.0) or np.any(ts > 1.0) or np.any(np.diff(ts) <= 0.0):
                raise ValueError("t_samples must be strictly increasing within [0, 1]")
            self.t_samples = ts

    @property
    def degree(self) -> int:
        return self.control_points.shape[0] - 1


@dataclass
class FitResult:
    curve: BezierCurve
    sse: float
    converged: bool
    iterations: int


def bernstein_basis(degree: int, ts: np.ndarray) -> np.ndarray:
    """Rows of Bernstein weights C(n,i) (1-t)^(n-i) t^i, shape (m, n+1)."""
    ts = np.asarray(ts, dtype=float)
    i = np.arange(degree + 1)
    coeff = np.array([math.comb(degree, k) for k in i], dtype=float)
    t = ts[:, None]
    return coeff * np.power(t, i) * np.power(1.0 - t, degree - i)


def bezier_eval(curve: BezierCurve, t: float) -> tuple[float, float]:
    """Point on the curve; t must lie in [0, 1]."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"curve parameter must be in [0, 1], got {t}")
    point = bernstein_basis(curve.degree, np.array([t]))[0] @ curve.control_points
    return float(point[0]), float(point[1])


def bezier_eval_many(curve: BezierCurve, ts: Sequence[float]) -> np.ndarray:
    ts = np.asarray(ts, dtype=float)
    if np.any(ts < 0.0) or np.any(ts > 1.0):
        raise ValueError("curve parameters must be in [0, 1]")
    return bernstein_basis(curve.degree, ts) @ curve.control_points


def normalize_times(timestamps: Sequence[float]) -> np.ndarray:
    """Map raw timestamps onto [0, 1]: t = (tau - tau0) / (tau_end - tau0)."""
    ts = np.asarray(timestamps, dtype=float)
    span = ts[-1] - ts[0]
    if span <= 0.0:
        raise ValueError("timestamps must span a positive interval")
    return (ts - ts[0]) / span


def sse_and_grad(control_flat: np.ndarray, basis: np.ndarray, points: np.ndarray) -> tuple[float, np.ndarray]:
    """SSE over both coordinates and its gradient in the flattened controls."""
    control = control_flat.reshape(-1, 2)
    residual = basis @ control - points
    sse = float((residual**2).sum())
    grad = 2.0 * basis.T @ residual
    return sse, grad.ravel()


def _initial_controls(points: np.ndarray, degree: int) -> np.ndarray:
    # uniform subsample of the input across the temporal sequence
    idx = np.round(np.linspace(0, len(points) - 1, degree + 1)).astype(int)
    return points[idx].astype(float)


def fit_bezier(
    points: Sequence[Sequence[float]],
    degree: int = DEFAULT_DEGREE,
    t_map: Sequence[float] | None = None,
    bounds: Sequence[tuple[float | None, float | None]] | None = None,
    maxiter: int = MAX_ITER,
    gtol: float = GRAD_TOL,
) -> FitResult:
    """Least-squares Bezier fit.

    t_map supplies the curve parameter per sample; raw timestamps are
    accepted and normalized onto [0, 1]. Without it the samples are spread
    uniformly. Box bounds, when given, are one (lo, hi) pair per flattened
    control coordinate.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"points must be (m, 2), got {pts.shape}")
    if degree < 1:
        raise ValueError(f"degree must be >= 1, got {degree}")
    if len(pts) < degree + 1:
        raise ValueError(f"need at least {degree + 1} points for degree {degree}, got {len(pts)}")
    if t_map is not None:
        ts = normalize_times(t_map)
        if len(ts) != len(pts):
            raise ValueError(f"t_map length {len(ts)} does not match {len(pts)} points")
    else:
        ts = np.linspace(0.0, 1.0, len(pts))

    basis = bernstein_basis(degree, ts)
    x0 = _initial_controls(pts, degree).ravel()
    if bounds is not None and len(bounds) != x0.size:
        raise ValueError(f"bounds must give one (lo, hi) per control coordinate ({x0.size})")
    result = minimize(
        sse_and_grad,
        x0,
        args=(basis, pts),
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        # ftol=0: the relative-decrease stop would floor the parameter
        # precision at sqrt(eps * SSE), which breaks least-squares-oracle
        # agreement whenever the residual floor is large
        options={"maxiter": maxiter, "gtol": gtol, "ftol": 0.0},
    )
    curve = BezierCurve(result.x.reshape(-1, 2), t_samples=None)
    converged = bool(result.success) and result.nit < maxiter
    return FitResult(curve=curve, sse=float(result.fun), converged=converged, iterations=int(result.nit))


def heading_stats(points: Sequence[Sequence[float]]) -> dict:
    """Heading and curvature summary of a polyline.

    Headings are segment angles, unwrapped; curvature uses the three-point
    circumscribed-circle estimate. Consecutive duplicate points carry no
    direction and are skipped (counted in duplicates_skipped).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"points must be (m, 2), got {pts.shape}")
    if len(pts) < 3:
        raise ValueError(f"heading stats need >= 3 points, got {len(pts)}")

    keep = [pts[0]]
    duplicates = 0
    for row in pts[1:]:
        if np.hypot(*(row - keep[-1])) < 1e-12:
            duplicates += 1
        else:
            keep.append(row)
    clean = np.asarray(keep)
    if len(clean) < 3:
        raise ValueError("fewer than 3 distinct points after duplicate removal")

    diffs = np.diff(clean, axis=0)
    headings = np.unwrap(np.arctan2(diffs[:, 1], diffs[:, 0]))
    steps = np.abs(np.diff(headings))
    max_step = float(steps.max()) if steps.size else 0.0

    max_curv = 0.0
    for a, b, c in zip(clean[:-2], clean[1:-1], clean[2:]):
        area2 = abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
        denom = np.hypot(*(b - a)) * np.hypot(*(c - b)) * np.hypot(*(c - a))
        if denom > 0.0:
            max_curv = max(max_curv, 2.0 * area2 / denom)

    return {
        "max_abs_heading_change_per_step": max_step,
        "total_heading": float(abs(headings[-1] - headings[0])),
        "max_curvature": max_curv,
        "duplicates_skipped": duplicates,
    }


def smooth_trajectory(traj: Trajectory, degree: int = DEFAULT_DEGREE) -> tuple[Trajectory, FitResult]:
    """Replace positions with the Bezier fit evaluated at the original
    sample times; velocities and headings are rebuilt by central
    differences so the frames stay self-consistent."""
    timestamps = [frame.timestamp for frame in traj.frames]
    fit = fit_bezier(traj.positions(), degree=degree, t_map=timestamps)
    smoothed = bezier_eval_many(fit.curve, normalize_times(timestamps))

    dt = traj.dt
    n = len(smoothed)
    frames = []
    for i, frame in enumerate(traj.frames):
        lo, hi = max(i - 1, 0), min(i + 1, n - 1)
        vx = (smoothed[hi, 0] - smoothed[lo, 0]) / (dt * (hi - lo))
        vy = (smoothed[hi, 1] - smoothed[lo, 1]) / (dt * (hi - lo))
        psi = math.atan2(vy, vx) if (vx or vy) else frame.psi
        frames.append(
            TrackFrame(
                frame_index=frame.frame_index,
                timestamp=frame.timestamp,
                x=float(smoothed[i, 0]),
                y=float(smoothed[i, 1]),
                vx=float(vx),
                vy=float(vy),
                psi=float(psi),
            )
        )
    out = Trajectory(traj.track_id, traj.agent_type, traj.length, traj.width, frames)
    return out, fit


def export_smoothed(trajectories: Iterable[Trajectory], path: str | Path) -> None:
    """Trajectory CSV in the ingest schema plus a smoothed provenance column."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(TRACK_COLUMNS + ("smoothed",))
        for traj in trajectories:
            for frame in traj.frames:
                writer.writerow(
                    [
                        traj.track_id,
                        frame.frame_index,
                        round(frame.timestamp * 1000),
                        traj.agent_type,
                        repr(frame.x),
                        repr(frame.y),
                        repr(frame.vx),
                        repr(frame.vy),
                        repr(frame.psi),
                        repr(traj.length),
                        repr(traj.width),
                        1,
                    ]
                )
