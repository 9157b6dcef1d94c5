"""Simulation environment: binds a track to vehicle dynamics and produces the
observations (waypoints + measurements) every policy consumes.

All methods are pure with respect to the vehicle state; the Env object itself
holds only immutable configuration, so one Env may serve any number of
rollouts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    CAR_ACTION_DIM,
    UAV_ACTION_DIM,
    CarParams,
    UavParams,
    VehicleState,
    initial_state,
    normalize_angle,
    step_car,
    step_uav,
)
from .track import Track, project_to_centerline
from .waypoints import DEFAULT_K, DEFAULT_SPACING, add_waypoint_noise, encode_waypoints

DEFAULT_DT = 0.05


@dataclass(frozen=True)
class StepOutcome:
    """Per-step simulator output used for rewards and terminal detection."""

    next_state: VehicleState
    lateral_error: float
    arc_progress: float
    forward_speed: float
    terminal: bool


@dataclass(frozen=True)
class Observation:
    """What a policy sees at one step: waypoints plus vehicle measurements."""

    waypoints: np.ndarray
    features: np.ndarray
    state: VehicleState
    arc_s: float
    lateral_error: float
    tangent_angle: float


@dataclass(frozen=True)
class Env:
    track: Track
    vehicle: str = "car"
    dt: float = DEFAULT_DT
    k: int = DEFAULT_K
    spacing: float = DEFAULT_SPACING
    car_params: CarParams = field(default_factory=CarParams)
    uav_params: UavParams = field(default_factory=UavParams)
    noise_sigma: float = 0.0

    @property
    def action_dim(self) -> int:
        return CAR_ACTION_DIM if self.vehicle == "car" else UAV_ACTION_DIM

    @property
    def feature_dim(self) -> int:
        return 2 * self.k + 3

    def start_state(self, arc_s: float = 0.0) -> VehicleState:
        """Vehicle at rest on the centerline at arc length arc_s, heading
        along the tangent."""
        pos = self.track.point_at_arc(arc_s)
        tangent = self.track.tangent_at_arc(arc_s)
        return initial_state(pos, math.atan2(tangent[1], tangent[0]), self.vehicle)

    def observe(self, state: VehicleState, noise_rng: np.random.Generator | None = None) -> Observation:
        """Waypoint vector and feature vector for the given state.

        Features are the 2k waypoint offsets followed by [speed, sin(a),
        cos(a)] where a is the centerline tangent angle relative to the
        vehicle heading.
        """
        s, e, tangent = project_to_centerline(self.track, state.position)
        wp = encode_waypoints(
            self.track, state.position, state.heading, self.k, self.spacing, arc_s=s
        )
        if self.noise_sigma > 0.0 and noise_rng is not None:
            wp = add_waypoint_noise(wp, self.noise_sigma, noise_rng)
        tangent_angle = math.atan2(tangent[1], tangent[0])
        rel = normalize_angle(tangent_angle - state.heading)
        features = np.concatenate([wp, [state.speed, math.sin(rel), math.cos(rel)]])
        return Observation(
            waypoints=wp,
            features=features,
            state=state,
            arc_s=s,
            lateral_error=e,
            tangent_angle=tangent_angle,
        )

    def step(self, state: VehicleState, action: np.ndarray) -> StepOutcome:
        """Advance one dt and measure the new state against the centerline.

        Terminal exactly when |lateral error| exceeds the lane half width.
        """
        if self.vehicle == "car":
            nxt = step_car(state, action, self.dt, self.car_params)
        else:
            nxt = step_uav(state, action, self.dt, self.uav_params)
        s, e, tangent = project_to_centerline(self.track, nxt.position)
        v_f = float(nxt.velocity_vector() @ tangent)
        return StepOutcome(
            next_state=nxt,
            lateral_error=e,
            arc_progress=s,
            forward_speed=v_f,
            terminal=abs(e) > self.track.half_width,
        )
