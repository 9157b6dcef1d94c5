"""Closed-loop track geometry: generation, arc-length queries, projection, file I/O.

A track is a closed 2D centerline stored as a polyline resampled uniformly by
arc length. All geometry queries (projection, point-at-arc) operate on that
polyline; arc-length arithmetic wraps modulo the loop length.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

TRACK_FILE_VERSION = 1

# Dense oversampling factor used before the uniform arc-length resample.
_DENSE_FACTOR = 16


class TrackGenerationError(RuntimeError):
    """Raised when no acceptable closed loop is found within the retry budget."""


@dataclass(frozen=True)
class TrackParams:
    """Knobs for procedural track generation."""

    control_points: int = 10
    radius_range: tuple[float, float] = (45.0, 65.0)
    width: float = 8.0
    checkpoint_spacing: float = 50.0
    samples: int = 512


@dataclass
class Track:
    """Closed centerline polyline with per-point cumulative arc length.

    ``centerline`` has ``samples + 1`` rows; the last row repeats the first to
    close the loop. ``cumulative_arc_length`` is the polyline's own chord-length
    accumulation, so its final entry is ``total_length``.
    """

    centerline: np.ndarray
    cumulative_arc_length: np.ndarray
    half_width: float
    checkpoints: np.ndarray
    total_length: float
    seed: int | None = None
    checkpoint_spacing: float = field(default=50.0)

    def wrap_arc(self, s: float) -> float:
        """Map an arc-length coordinate into [0, total_length)."""
        return float(np.mod(s, self.total_length))

    def arc_delta(self, s_from: float, s_to: float) -> float:
        """Signed shortest arc-length displacement from s_from to s_to."""
        d = (s_to - s_from) % self.total_length
        if d > self.total_length / 2.0:
            d -= self.total_length
        return float(d)

    def point_at_arc(self, s: float) -> np.ndarray:
        """Interpolate the centerline position at arc length s (wrapping)."""
        s = self.wrap_arc(s)
        x = np.interp(s, self.cumulative_arc_length, self.centerline[:, 0])
        y = np.interp(s, self.cumulative_arc_length, self.centerline[:, 1])
        return np.array([x, y])

    def tangent_at_arc(self, s: float) -> np.ndarray:
        """Unit tangent of the polyline segment containing arc length s."""
        s = self.wrap_arc(s)
        i = int(np.searchsorted(self.cumulative_arc_length, s, side="right") - 1)
        i = min(max(i, 0), len(self.centerline) - 2)
        d = self.centerline[i + 1] - self.centerline[i]
        return d / np.linalg.norm(d)


def _spline_loop(angles: np.ndarray, radii: np.ndarray, samples: int) -> tuple[np.ndarray, np.ndarray]:
    """Periodic radial spline through (angle, radius) control points, resampled
    uniformly by arc length. Returns (closed polyline, cumulative arc length)."""
    ang = np.append(angles, angles[0] + 2.0 * np.pi)
    rad = np.append(radii, radii[0])
    spline = CubicSpline(ang, rad, bc_type="periodic")

    phi = np.linspace(0.0, 2.0 * np.pi, samples * _DENSE_FACTOR, endpoint=False)
    r = spline(phi)
    dense = np.column_stack([r * np.cos(phi), r * np.sin(phi)])
    dense = np.vstack([dense, dense[:1]])
    seg = np.linalg.norm(np.diff(dense, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])

    s_uniform = np.linspace(0.0, cum[-1], samples, endpoint=False)
    xs = np.interp(s_uniform, cum, dense[:, 0])
    ys = np.interp(s_uniform, cum, dense[:, 1])
    polyline = np.column_stack([xs, ys])
    polyline = np.vstack([polyline, polyline[:1]])
    seg = np.linalg.norm(np.diff(polyline, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    return polyline, cum


def _self_intersects(polyline: np.ndarray) -> bool:
    """Segment-pair intersection test over the closed polyline (non-adjacent pairs)."""
    p = polyline[:-1]
    q = polyline[1:]
    n = len(p)
    d = q - p
    for i in range(n - 2):
        # candidate opposing segments, skipping neighbours (and the closing
        # adjacency between the first and last segment)
        j0 = i + 2
        j1 = n if i > 0 else n - 1
        if j0 >= j1:
            continue
        r = d[i]
        rel = p[j0:j1] - p[i]
        denom = d[j0:j1, 1] * r[0] - d[j0:j1, 0] * r[1]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (rel[:, 1] * d[j0:j1, 0] - rel[:, 0] * d[j0:j1, 1]) / -denom
            u = (rel[:, 0] * r[1] - rel[:, 1] * r[0]) / -denom
        hit = (np.abs(denom) > 1e-12) & (t > 0) & (t < 1) & (u > 0) & (u < 1)
        if np.any(hit):
            return True
    return False


def generate_track(seed: int, params: TrackParams | None = None) -> Track:
    """Generate a smooth closed loop, deterministic for a given seed.

    Control points sit at evenly spaced angles with radii drawn uniformly from
    ``radius_range``; a periodic cubic spline through them is resampled
    uniformly by arc length. Draws fresh radii on a (vanishingly rare)
    self-intersecting result, up to 100 attempts.
    """
    params = params or TrackParams()
    if params.control_points < 4:
        raise ValueError("control_points must be >= 4")
    if params.samples < 32:
        raise ValueError("samples must be >= 32")
    lo, hi = params.radius_range
    if lo <= 0 or hi < lo:
        raise ValueError("radius_range must be positive with low <= high")

    rng = np.random.default_rng(seed)
    angles = np.linspace(0.0, 2.0 * np.pi, params.control_points, endpoint=False)
    for _ in range(100):
        radii = rng.uniform(lo, hi, params.control_points)
        polyline, cum = _spline_loop(angles, radii, params.samples)
        if not _self_intersects(polyline):
            total = float(cum[-1])
            n_cp = int(np.floor(total / params.checkpoint_spacing))
            checkpoints = np.arange(n_cp) * params.checkpoint_spacing
            return Track(
                centerline=polyline,
                cumulative_arc_length=cum,
                half_width=params.width / 2.0,
                checkpoints=checkpoints,
                total_length=total,
                seed=seed,
                checkpoint_spacing=params.checkpoint_spacing,
            )
    raise TrackGenerationError(
        f"no non-self-intersecting loop after 100 attempts (seed={seed}, params={params})"
    )


def project_to_centerline(track: Track, position: np.ndarray) -> tuple[float, float, np.ndarray]:
    """Project a point onto the centerline polyline.

    Returns (s, e, tangent): arc length of the nearest point, signed lateral
    offset (positive left of the travel direction), and the unit tangent of
    the owning segment. Distance ties resolve to the smaller s.
    """
    pts = track.centerline
    a = pts[:-1]
    d = pts[1:] - a
    seg_len2 = np.einsum("ij,ij->i", d, d)
    rel = position[None, :] - a
    t = np.clip(np.einsum("ij,ij->i", rel, d) / seg_len2, 0.0, 1.0)
    foot = a + t[:, None] * d
    diff = position[None, :] - foot
    dist2 = np.einsum("ij,ij->i", diff, diff)
    i = int(np.argmin(dist2))

    seg_len = np.sqrt(seg_len2[i])
    tangent = d[i] / seg_len
    s = track.cumulative_arc_length[i] + t[i] * seg_len
    e = tangent[0] * diff[i, 1] - tangent[1] * diff[i, 0]
    return track.wrap_arc(s), float(e), tangent


def save_track(track: Track, path: str | Path, meta: dict | None = None) -> None:
    """Write a track to a JSON document (one track per file)."""
    doc = {
        "version": TRACK_FILE_VERSION,
        "seed": track.seed,
        "half_width": track.half_width,
        "checkpoint_spacing": track.checkpoint_spacing,
        "centerline": track.centerline.tolist(),
    }
    if meta:
        doc["meta"] = meta
    Path(path).write_text(json.dumps(doc) + "\n")


def load_track(path: str | Path) -> Track:
    """Read a track file written by save_track and rebuild derived fields."""
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != TRACK_FILE_VERSION:
        raise ValueError(f"unsupported track file version in {path}")
    polyline = np.asarray(doc["centerline"], dtype=float)
    seg = np.linalg.norm(np.diff(polyline, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = float(cum[-1])
    spacing = float(doc["checkpoint_spacing"])
    n_cp = int(np.floor(total / spacing))
    return Track(
        centerline=polyline,
        cumulative_arc_length=cum,
        half_width=float(doc["half_width"]),
        checkpoints=np.arange(n_cp) * spacing,
        total_length=total,
        seed=doc.get("seed"),
        checkpoint_spacing=spacing,
    )
