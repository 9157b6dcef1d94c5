"""PID path-tracking teachers.

Each teacher steers on the bearing error of one look-ahead waypoint and
throttles on a target-speed error. The shipped ensembles span a quality
spectrum on purpose: the conservative member is slow and never leaves the
lane, the aggressive member is fast on straights and prone to crash in tight
turns. Gains were tuned on the default training-track suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import VehicleState
from .env import Env, Observation


@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float = 0.0
    kd: float = 0.0
    integral_limit: float = 1.0


@dataclass
class PidState:
    integral: float = 0.0
    prev_error: float | None = None


@dataclass(frozen=True)
class TeacherSpec:
    """One parameterized PID teacher."""

    steer_pid: PidGains
    speed_pid: PidGains
    target_speed: float
    lookahead_index: int  # 1-based waypoint index driving the steering error
    label: str


def pid_step(state: PidState, error: float, dt: float, gains: PidGains) -> tuple[float, PidState]:
    """Standard discrete PID with clamped integral.

    output = kp*e + ki*clamp(integral + e*dt) + kd*(e - prev_e)/dt; the first
    call uses a zero derivative.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    integral = state.integral + error * dt
    integral = min(max(integral, -gains.integral_limit), gains.integral_limit)
    if state.prev_error is None:
        derivative = 0.0
    else:
        derivative = (error - state.prev_error) / dt
    output = gains.kp * error + gains.ki * integral + gains.kd * derivative
    return output, PidState(integral=integral, prev_error=error)


def _clip(x: float) -> float:
    return min(max(x, -1.0), 1.0)


class TeacherController:
    """Stateful wrapper around a TeacherSpec for one rollout.

    Owns the PID accumulators; reset() zeroes them at episode start. The same
    observation interface as the learner keeps teachers and learner
    interchangeable as policies.
    """

    def __init__(self, spec: TeacherSpec, env: Env):
        self.spec = spec
        self.env = env
        self.reset()

    def reset(self) -> None:
        self._steer = PidState()
        self._speed = PidState()
        self._lateral = PidState()

    def act(self, obs: Observation) -> np.ndarray:
        spec, dt = self.spec, self.env.dt
        wp = obs.waypoints
        if len(wp) < 2 * spec.lookahead_index:
            raise ValueError("waypoint vector shorter than lookahead_index")
        v_look = wp[2 * (spec.lookahead_index - 1)]
        h_look = wp[2 * (spec.lookahead_index - 1) + 1]
        bearing = math.atan2(h_look, v_look)

        steer_out, self._steer = pid_step(self._steer, bearing, dt, spec.steer_pid)
        speed_err = spec.target_speed - obs.state.speed
        speed_out, self._speed = pid_step(self._speed, speed_err, dt, spec.speed_pid)

        if self.env.vehicle == "car":
            return np.array([_clip(speed_out), _clip(steer_out)])

        # UAV: strafe on the nearest waypoint's bearing, yaw on the look-ahead one.
        near_bearing = math.atan2(wp[1], wp[0])
        lat_out, self._lateral = pid_step(self._lateral, near_bearing, dt, spec.steer_pid)
        return np.array([_clip(speed_out), _clip(lat_out), _clip(steer_out)])


def make_default_ensemble(vehicle_kind: str) -> list[TeacherSpec]:
    """Five teachers spanning precise-but-slow to fast-but-crash-prone."""
    if vehicle_kind == "car":
        return [
            TeacherSpec(  # precise, conservative: near lookahead, low speed
                steer_pid=PidGains(kp=2.2, ki=0.0, kd=0.25),
                speed_pid=PidGains(kp=1.0),
                target_speed=7.0,
                lookahead_index=2,
                label="car-1",
            ),
            TeacherSpec(  # sloppy mid-speed: weak gains, drifts wide
                steer_pid=PidGains(kp=0.8, ki=0.0, kd=0.0),
                speed_pid=PidGains(kp=1.0),
                target_speed=9.5,
                lookahead_index=4,
                label="car-2",
            ),
            TeacherSpec(  # balanced: best all-round compromise
                steer_pid=PidGains(kp=2.0, ki=0.0, kd=0.3),
                speed_pid=PidGains(kp=1.0),
                target_speed=10.0,
                lookahead_index=3,
                label="car-3",
            ),
            TeacherSpec(  # quick: still mostly survives, cuts corners
                steer_pid=PidGains(kp=2.0, ki=0.0, kd=0.35),
                speed_pid=PidGains(kp=1.2),
                target_speed=12.0,
                lookahead_index=4,
                label="car-4",
            ),
            TeacherSpec(  # aggressive: straightaway speed, crashes tight turns
                steer_pid=PidGains(kp=1.6, ki=0.0, kd=0.2),
                speed_pid=PidGains(kp=1.5),
                target_speed=15.0,
                lookahead_index=5,
                label="car-5",
            ),
        ]
    if vehicle_kind == "uav":
        return [
            TeacherSpec(
                steer_pid=PidGains(kp=1.8, ki=0.0, kd=0.3),
                speed_pid=PidGains(kp=1.0),
                target_speed=5.0,
                lookahead_index=2,
                label="uav-1",
            ),
            TeacherSpec(
                steer_pid=PidGains(kp=0.9, ki=0.0, kd=0.1),
                speed_pid=PidGains(kp=1.0),
                target_speed=7.0,
                lookahead_index=3,
                label="uav-2",
            ),
            TeacherSpec(
                steer_pid=PidGains(kp=1.6, ki=0.0, kd=0.3),
                speed_pid=PidGains(kp=1.2),
                target_speed=8.0,
                lookahead_index=3,
                label="uav-3",
            ),
            TeacherSpec(
                steer_pid=PidGains(kp=1.5, ki=0.0, kd=0.25),
                speed_pid=PidGains(kp=1.3),
                target_speed=9.5,
                lookahead_index=4,
                label="uav-4",
            ),
            TeacherSpec(
                steer_pid=PidGains(kp=1.2, ki=0.0, kd=0.15),
                speed_pid=PidGains(kp=1.5),
                target_speed=11.0,
                lookahead_index=5,
                label="uav-5",
            ),
        ]
    raise ValueError(f"unknown vehicle kind {vehicle_kind!r}")


def select_teachers(ensemble: list[TeacherSpec], subset: list[int] | None) -> list[TeacherSpec]:
    """Pick teachers by 1-based index, e.g. [1, 3, 4]; None keeps all."""
    if subset is None:
        return list(ensemble)
    chosen = []
    for idx in subset:
        if not 1 <= idx <= len(ensemble):
            raise ValueError(f"teacher index {idx} out of range 1..{len(ensemble)}")
        chosen.append(ensemble[idx - 1])
    return chosen
