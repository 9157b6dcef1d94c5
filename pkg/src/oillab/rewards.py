"""Trajectory-level reward functions for value estimation.

Driving rewards centerline progress discounted by accumulated lateral error;
the UAV variant sums forward speed. Leaving the lane corridor adds a large
negative penalty in both cases.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class RewardConfig:
    mode: str = "driving"  # "driving" or "uav"
    alpha: float = 0.5
    r_penalty: float = -15000.0
    gamma: float = 1.0  # kept for configurability; trajectory scores use 1


def reward_driving(zeta: float, sum_abs_error: float, terminal: bool, cfg: RewardConfig) -> float:
    """R = zeta / (alpha * sum|e| + 1), plus r_penalty when terminal."""
    r = zeta / (cfg.alpha * sum_abs_error + 1.0)
    if terminal:
        r += cfg.r_penalty
    return r


def reward_uav(sum_forward_speed: float, terminal: bool, cfg: RewardConfig) -> float:
    """R = sum of per-step forward speeds, plus r_penalty when terminal."""
    r = sum_forward_speed
    if terminal:
        r += cfg.r_penalty
    return r
