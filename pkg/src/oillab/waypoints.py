"""Look-ahead waypoint encoding in the vehicle frame.

Stands in for a perception front end: k centerline points ahead of the
vehicle, each expressed as (vertical, horizontal) offsets where vertical is
the distance along the viewing axis and horizontal the distance along its
left normal.
"""

from __future__ import annotations

import math

import numpy as np

from .track import Track, project_to_centerline

DEFAULT_K = 5
DEFAULT_SPACING = 5.0


def encode_waypoints(
    track: Track,
    position: np.ndarray,
    heading: float,
    k: int = DEFAULT_K,
    spacing: float = DEFAULT_SPACING,
    arc_s: float | None = None,
) -> np.ndarray:
    """Encode k look-ahead centerline points relative to the vehicle pose.

    Points are taken at arc lengths s + spacing, ..., s + k*spacing (wrapping
    around the loop) where s is the vehicle's projected arc length; pass
    ``arc_s`` to reuse an already-computed projection. Returns a flat array
    [v1, h1, v2, h2, ...] of length 2k.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    if arc_s is None:
        arc_s, _, _ = project_to_centerline(track, np.asarray(position, dtype=float))

    forward = np.array([math.cos(heading), math.sin(heading)])
    left = np.array([-math.sin(heading), math.cos(heading)])

    out = np.empty(2 * k)
    for i in range(k):
        p = track.point_at_arc(arc_s + (i + 1) * spacing)
        rel = p - position
        out[2 * i] = rel @ forward
        out[2 * i + 1] = rel @ left
    return out


def add_waypoint_noise(wp: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Perturb each waypoint component with i.i.d. Gaussian noise.

    Monotonicity of the vertical offsets is re-enforced by reordering the
    (vertical, horizontal) pairs by noisy vertical offset. sigma = 0 returns
    the input unchanged.
    """
    if sigma == 0.0:
        return wp
    noisy = wp + rng.normal(0.0, sigma, size=wp.shape)
    pairs = noisy.reshape(-1, 2)
    order = np.argsort(pairs[:, 0], kind="stable")
    return pairs[order].reshape(-1)
