"""Vehicle dynamics: kinematic bicycle car and a planar point-mass UAV.

Both models integrate with explicit Euler and are pure functions of
(state, action, dt, params). Action channels are clamped to [-1, 1]
before integration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

CAR_ACTION_DIM = 2  # (gas, steer)
UAV_ACTION_DIM = 3  # (forward thrust, lateral thrust, yaw rate)


def normalize_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a > math.pi:
        a -= 2.0 * math.pi
    elif a <= -math.pi:
        a += 2.0 * math.pi
    return a


def clamp_action(action: np.ndarray, dim: int) -> np.ndarray:
    """Clip every control channel to [-1, 1]."""
    a = np.asarray(action, dtype=float).reshape(-1)
    if a.shape[0] != dim:
        raise ValueError(f"expected {dim} action channels, got {a.shape[0]}")
    return np.clip(a, -1.0, 1.0)


@dataclass(frozen=True)
class VehicleState:
    """Pose and velocity of the simulated vehicle.

    The car uses scalar ``speed`` along the heading and carries the current
    steering angle; the UAV uses the planar ``velocity`` vector and ignores
    ``steering``.
    """

    position: np.ndarray
    heading: float
    speed: float = 0.0
    steering: float = 0.0
    velocity: np.ndarray | None = None  # UAV only

    def velocity_vector(self) -> np.ndarray:
        if self.velocity is not None:
            return self.velocity
        return self.speed * np.array([math.cos(self.heading), math.sin(self.heading)])


@dataclass(frozen=True)
class CarParams:
    wheelbase: float = 2.5
    max_steer: float = 0.45
    max_accel: float = 4.0
    drag: float = 0.25
    steer_rate: float = 1.5


@dataclass(frozen=True)
class UavParams:
    max_accel: float = 6.0
    max_yaw_rate: float = 2.0
    drag: float = 0.5


def step_car(state: VehicleState, action: np.ndarray, dt: float, params: CarParams) -> VehicleState:
    """One Euler step of the kinematic bicycle model.

    xdot = v cos(h), ydot = v sin(h), hdot = (v / L) tan(delta),
    vdot = gas * max_accel - drag * v; the steering angle slews toward
    steer * max_steer at steer_rate; speed is clamped nonnegative.
    """
    if not 0.0 < dt <= 0.1:
        raise ValueError("dt must be in (0, 0.1]")
    gas, steer = clamp_action(action, CAR_ACTION_DIM)

    x, y = state.position
    h, v, delta = state.heading, state.speed, state.steering

    x += v * math.cos(h) * dt
    y += v * math.sin(h) * dt
    h = normalize_angle(h + (v / params.wheelbase) * math.tan(delta) * dt)
    v = max(v + (gas * params.max_accel - params.drag * v) * dt, 0.0)

    target = steer * params.max_steer
    max_slew = params.steer_rate * dt
    delta += min(max(target - delta, -max_slew), max_slew)

    return VehicleState(position=np.array([x, y]), heading=h, speed=v, steering=delta)


def step_uav(state: VehicleState, action: np.ndarray, dt: float, params: UavParams) -> VehicleState:
    """One Euler step of the planar UAV: body-frame thrust, yaw-rate heading,
    linear drag on the velocity vector."""
    if not 0.0 < dt <= 0.1:
        raise ValueError("dt must be in (0, 0.1]")
    fwd, lat, yaw = clamp_action(action, UAV_ACTION_DIM)

    h = state.heading
    vel = state.velocity if state.velocity is not None else np.zeros(2)
    forward = np.array([math.cos(h), math.sin(h)])
    left = np.array([-math.sin(h), math.cos(h)])

    accel = params.max_accel * (fwd * forward + lat * left) - params.drag * vel
    new_pos = state.position + vel * dt
    new_vel = vel + accel * dt
    new_h = normalize_angle(h + yaw * params.max_yaw_rate * dt)

    return VehicleState(
        position=new_pos,
        heading=new_h,
        speed=float(np.linalg.norm(new_vel)),
        velocity=new_vel,
    )


def initial_state(position: np.ndarray, heading: float, kind: str) -> VehicleState:
    """A vehicle at rest at the given pose."""
    if kind == "car":
        return VehicleState(position=np.asarray(position, dtype=float), heading=heading)
    if kind == "uav":
        return VehicleState(
            position=np.asarray(position, dtype=float),
            heading=heading,
            velocity=np.zeros(2),
        )
    raise ValueError(f"unknown vehicle kind {kind!r}")
