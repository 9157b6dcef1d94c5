"""Lap-based evaluation protocol: checkpoint crossings, timeout resets,
per-track and aggregate scoring, trajectory export.

A policy drives the configured number of laps per track. Checkpoints must be
crossed in order; when the next one is not reached within the timeout the
vehicle teleports onto it (a reset: the checkpoint counts as missed and the
clock keeps running). Leaving the lane corridor does not abort evaluation;
the timeout mechanism is what punishes it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import Env
from .oil import Trajectory


class EvaluationAbortError(RuntimeError):
    """A policy emitted a non-finite action during evaluation."""


@dataclass(frozen=True)
class EvalConfig:
    vehicle: str = "car"
    laps: int = 1  # car: 1, uav: 2
    checkpoint_timeout: float = 15.0  # seconds; car: 15, uav: 10
    dt: float = 0.05

    @staticmethod
    def for_vehicle(vehicle: str) -> "EvalConfig":
        if vehicle == "car":
            return EvalConfig(vehicle="car", laps=1, checkpoint_timeout=15.0)
        if vehicle == "uav":
            return EvalConfig(vehicle="uav", laps=2, checkpoint_timeout=10.0)
        raise ValueError(f"unknown vehicle kind {vehicle!r}")


@dataclass
class TrackResult:
    track: str
    mean_abs_error: float
    completion_time: float
    checkpoints_total: int
    checkpoints_passed: int
    resets: int

    @property
    def pass_pct(self) -> float:
        return 100.0 * self.checkpoints_passed / self.checkpoints_total

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["pass_pct"] = self.pass_pct
        return d


@dataclass
class EvalResult:
    per_track: list[TrackResult] = field(default_factory=list)

    @property
    def mean_abs_error(self) -> float:
        return float(np.mean([t.mean_abs_error for t in self.per_track]))

    @property
    def mean_completion_time(self) -> float:
        return float(np.mean([t.completion_time for t in self.per_track]))

    @property
    def mean_pass_pct(self) -> float:
        return float(np.mean([t.pass_pct for t in self.per_track]))

    @property
    def total_resets(self) -> int:
        return int(sum(t.resets for t in self.per_track))

    def to_dict(self) -> dict:
        return {
            "per_track": [t.to_dict() for t in self.per_track],
            "aggregate": {
                "mean_abs_error": self.mean_abs_error,
                "mean_completion_time": self.mean_completion_time,
                "mean_pass_pct": self.mean_pass_pct,
                "total_resets": self.total_resets,
            },
        }


def _eval_track(env: Env, policy, cfg: EvalConfig, track_name: str) -> TrackResult:
    track = env.track
    cps = track.checkpoints
    n_cp = len(cps)
    if n_cp == 0:
        raise ValueError(f"track {track_name} has no checkpoints to score against")
    gaps = np.array([(cps[(i + 1) % n_cp] - cps[i]) % track.total_length for i in range(n_cp)])
    gaps[gaps == 0.0] = track.total_length  # single-checkpoint track: full lap per target
    targets_total = cfg.laps * n_cp

    timeout_steps = int(round(cfg.checkpoint_timeout / cfg.dt))
    policy.reset()
    state = env.start_state(0.0)
    prev_arc = 0.0
    u = 0.0  # unwrapped centerline progress
    target_idx = 0  # 0-based count of resolved targets
    next_target_u = gaps[0]
    step = 0
    last_event_step = 0
    err_sum = 0.0
    passed = 0
    resets = 0
    completion_step = 0

    while target_idx < targets_total:
        obs = env.observe(state)
        action = np.asarray(policy.act(obs), dtype=float)
        if not np.all(np.isfinite(action)):
            raise EvaluationAbortError(
                f"non-finite action at step {step} on track {track_name}"
            )
        outcome = env.step(state, action)
        step += 1
        err_sum += abs(outcome.lateral_error)
        u += track.arc_delta(prev_arc, outcome.arc_progress)
        prev_arc = outcome.arc_progress
        state = outcome.next_state

        while target_idx < targets_total and u >= next_target_u:
            passed += 1
            target_idx += 1
            last_event_step = step
            next_target_u += gaps[target_idx % n_cp]

        if target_idx < targets_total and step - last_event_step >= timeout_steps:
            # teleport to the unreached checkpoint; clock keeps running
            cp_arc = float(cps[(target_idx + 1) % n_cp])
            state = env.start_state(cp_arc)
            u = next_target_u
            prev_arc = cp_arc
            resets += 1
            target_idx += 1
            last_event_step = step
            next_target_u += gaps[target_idx % n_cp]

        if target_idx == targets_total:
            completion_step = step

    return TrackResult(
        track=track_name,
        mean_abs_error=err_sum / step,
        completion_time=completion_step * cfg.dt,
        checkpoints_total=targets_total,
        checkpoints_passed=passed,
        resets=resets,
    )


def run_evaluation(policy, envs: list[Env], cfg: EvalConfig, names: list[str] | None = None) -> EvalResult:
    """Evaluate one policy over a list of track environments."""
    names = names or [f"track{i}" for i in range(len(envs))]
    result = EvalResult()
    for env, name in zip(envs, names):
        result.per_track.append(_eval_track(env, policy, cfg, name))
    return result


def compare(named_results: list[tuple[str, EvalResult]]) -> str:
    """Tab-separated comparison table, one row per policy, in the given order."""
    lines = ["policy\tmean_error\tpass_pct\ttime\tresets"]
    for name, res in named_results:
        lines.append(
            f"{name}\t{res.mean_abs_error:.4f}\t{res.mean_pass_pct:.2f}"
            f"\t{res.mean_completion_time:.2f}\t{res.total_resets}"
        )
    return "\n".join(lines) + "\n"


def save_result(result: EvalResult, path: str | Path, meta: dict | None = None) -> None:
    doc = result.to_dict()
    if meta:
        doc["meta"] = meta
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def load_result(path: str | Path) -> EvalResult:
    doc = json.loads(Path(path).read_text())
    res = EvalResult()
    for t in doc["per_track"]:
        res.per_track.append(
            TrackResult(
                track=t["track"],
                mean_abs_error=t["mean_abs_error"],
                completion_time=t["completion_time"],
                checkpoints_total=t["checkpoints_total"],
                checkpoints_passed=t["checkpoints_passed"],
                resets=t["resets"],
            )
        )
    return res


def export_trajectory(traj: Trajectory, path: str | Path, dt: float) -> None:
    """Write one delimited-text row per step: t, x, y, heading, speed, e, arc_s."""
    lines = ["t,x,y,heading,speed,e,arc_s"]
    for i, o in enumerate(traj.outcomes):
        st = o.next_state
        lines.append(
            f"{(i + 1) * dt:.17g},{st.position[0]:.17g},{st.position[1]:.17g},"
            f"{st.heading:.17g},{st.speed:.17g},{o.lateral_error:.17g},{o.arc_progress:.17g}"
        )
    Path(path).write_text("\n".join(lines) + "\n")
