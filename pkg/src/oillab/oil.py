"""Observational imitation learning: observe, rehearse, act.

Each observation round estimates the value of the learner and of every
teacher from the current start state by Monte-Carlo rollout, picks the best
teacher as critic, and, when the learner is behind, rehearses: the learner
drives while the critic labels the visited states, and the policy trains on
the aggregated dataset until its advantage clears the threshold or the
episode cap is hit. The start state then advances under the improved policy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import Env, Observation, StepOutcome
from .dynamics import VehicleState
from .mlp import (
    DEFAULT_BATCH,
    DEFAULT_DROPOUT,
    AdamState,
    Dataset,
    Mlp,
    MlpPolicy,
    train_minibatch,
)
from .rewards import RewardConfig, reward_driving, reward_uav
from .teachers import TeacherController, TeacherSpec


class DegenerateEnsembleError(RuntimeError):
    """Every teacher crashed on its first step; the ensemble teaches nothing."""


@dataclass(frozen=True)
class OilParams:
    n_steps: int = 300  # rollout horizon (300 car / 200 uav)
    max_episodes: int = 50  # rehearse episode cap per round
    act_steps: int = 60
    rounds: int = 400
    epsilon_mode: str = "multi"  # "multi" or "single"
    mc_rollouts: int = 1
    batch_size: int = DEFAULT_BATCH
    dropout: float = DEFAULT_DROPOUT
    step_budget: int | None = None  # optional cap on total simulator steps


@dataclass
class Trajectory:
    """An N-step rollout record: states, actions, and per-step outcomes."""

    start_state: VehicleState
    start_arc: float
    states: list[VehicleState] = field(default_factory=list)
    actions: list[np.ndarray] = field(default_factory=list)
    outcomes: list[StepOutcome] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def terminal(self) -> bool:
        return bool(self.outcomes) and self.outcomes[-1].terminal

    def sum_abs_error(self) -> float:
        return float(sum(abs(o.lateral_error) for o in self.outcomes))

    def sum_forward_speed(self) -> float:
        return float(sum(o.forward_speed for o in self.outcomes))

    def arc_progress(self, track) -> float:
        """Net centerline progress, wraparound-aware."""
        zeta = 0.0
        prev = self.start_arc
        for o in self.outcomes:
            zeta += track.arc_delta(prev, o.arc_progress)
            prev = o.arc_progress
        return zeta


@dataclass(frozen=True)
class ValueEstimate:
    policy_id: str
    value: float
    trajectory: Trajectory


def trajectory_reward(traj: Trajectory, env: Env, cfg: RewardConfig) -> float:
    if cfg.mode == "driving":
        return reward_driving(traj.arc_progress(env.track), traj.sum_abs_error(), traj.terminal, cfg)
    return reward_uav(traj.sum_forward_speed(), traj.terminal, cfg)


def rollout(
    env: Env,
    policy,
    start: VehicleState,
    n_steps: int,
    noise_seed: int | None = None,
) -> Trajectory:
    """Roll a policy from ``start`` for up to n_steps, stopping at a terminal
    state. The policy's internal state is reset first."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    policy.reset()
    noise_rng = np.random.default_rng(noise_seed) if env.noise_sigma > 0.0 else None
    s0, _, _ = _project(env, start)
    traj = Trajectory(start_state=start, start_arc=s0)
    state = start
    for _ in range(n_steps):
        obs = env.observe(state, noise_rng)
        action = policy.act(obs)
        outcome = env.step(state, action)
        traj.states.append(state)
        traj.actions.append(np.asarray(action, dtype=float))
        traj.outcomes.append(outcome)
        if outcome.terminal:
            break
        state = outcome.next_state
    return traj


def _project(env: Env, state: VehicleState):
    from .track import project_to_centerline

    return project_to_centerline(env.track, state.position)


def estimate_value(
    env: Env,
    policy,
    policy_id: str,
    start: VehicleState,
    params: OilParams,
    cfg: RewardConfig,
    seed: int | None = None,
) -> ValueEstimate:
    """Mean trajectory reward over mc_rollouts rollouts from ``start``."""
    seq = np.random.SeedSequence(seed if seed is not None else 0)
    children = seq.spawn(params.mc_rollouts)
    rewards = []
    traj = None
    for child in children:
        noise_seed = int(child.generate_state(1)[0]) if env.noise_sigma > 0.0 else None
        traj = rollout(env, policy, start, params.n_steps, noise_seed)
        rewards.append(trajectory_reward(traj, env, cfg))
    return ValueEstimate(policy_id=policy_id, value=float(np.mean(rewards)), trajectory=traj)


def select_critical_teacher(values: list[ValueEstimate]) -> int:
    """Index of the maximal value; ties break toward the lowest index."""
    best = 0
    for i, v in enumerate(values):
        if v.value > values[best].value:
            best = i
    return best


def advantage(v_learner: float, v_critical: float) -> float:
    return v_learner - v_critical


def epsilon_threshold(mode: str, v_critical: float) -> float:
    """Rehearse stop threshold: -0.1 * critic value in multi-teacher mode,
    zero in single-teacher mode."""
    if mode == "multi":
        return -0.1 * v_critical
    if mode == "single":
        return 0.0
    raise ValueError(f"unknown epsilon mode {mode!r}")


def rehearse(
    env: Env,
    net: Mlp,
    adam: AdamState,
    critic: TeacherController,
    critic_index: int,
    critic_value: float,
    start: VehicleState,
    params: OilParams,
    cfg: RewardConfig,
    dataset: Dataset,
    rng: np.random.Generator,
) -> tuple[int, float]:
    """Rehearse episodes until the learner's advantage at ``start`` exceeds
    epsilon or the episode cap is reached.

    Each episode is exactly n_steps of the learner driving (respawning at
    ``start`` on terminal), with every visited state labeled by the critic
    and one minibatch update per simulator step. Returns (episodes_used,
    final_advantage).
    """
    eps = epsilon_threshold(params.epsilon_mode, critic_value)
    learner = MlpPolicy(net)
    adv = -np.inf
    episodes = 0
    for episodes in range(1, params.max_episodes + 1):
        state = start
        critic.reset()
        for _ in range(params.n_steps):
            obs = env.observe(state)
            action = learner.act(obs)
            label = critic.act(obs)
            dataset.add(obs.features, label, source=critic_index)
            outcome = env.step(state, action)
            batch_x, batch_y = dataset.sample(params.batch_size, rng)
            train_minibatch(net, adam, batch_x, batch_y, params.dropout, rng)
            if outcome.terminal:
                # respawn at the round's start state; stale PID memory would
                # be garbage across the teleport
                state = start
                critic.reset()
            else:
                state = outcome.next_state
        est = estimate_value(env, learner, "learner", start, params, cfg)
        adv = advantage(est.value, critic_value)
        if adv > eps:
            break
    return episodes, float(adv)


def act(env: Env, net: Mlp, start: VehicleState, n_steps: int) -> VehicleState:
    """Advance the start state by rolling the learner n_steps.

    On a terminal state the vehicle respawns on the centerline at the nearest
    checkpoint behind the exit point and that state is returned immediately.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    policy = MlpPolicy(net)
    traj = rollout(env, policy, start, n_steps)
    if traj.terminal:
        return respawn_state(env, traj.outcomes[-1].arc_progress)
    return traj.outcomes[-1].next_state


def respawn_state(env: Env, arc_s: float) -> VehicleState:
    """Rest state at the nearest checkpoint at or behind the given arc length."""
    cps = env.track.checkpoints
    s = env.track.wrap_arc(arc_s)
    behind = cps[cps <= s]
    cp = float(behind[-1]) if len(behind) else float(cps[-1])
    return env.start_state(cp)


@dataclass
class RoundRecord:
    """One observation round of the training log."""

    round: int
    track_index: int
    start_arc: float
    v_learner: float
    v_teachers: list[float]
    critic: int
    advantage: float
    epsilon: float
    rehearsed: bool
    episodes_used: int
    final_advantage: float
    labels_begin: int
    labels_end: int
    dataset_size: int
    sim_steps: int

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)


@dataclass
class OilResult:
    net: Mlp
    adam: AdamState
    dataset: Dataset
    log: list[RoundRecord]


def train_oil(
    envs: list[Env],
    teacher_specs: list[TeacherSpec],
    net: Mlp,
    adam: AdamState,
    params: OilParams,
    cfg: RewardConfig,
    seed: int,
    log_path: str | Path | None = None,
) -> OilResult:
    """Run observation rounds of observe / rehearse / act over a track suite.

    The start state advances along the current track via the act phase;
    tracks rotate round-robin whenever the accumulated act progress completes
    a lap. Emits one log record per round.
    """
    if not envs:
        raise ValueError("need at least one training environment")
    rng = np.random.default_rng(seed)
    dataset = Dataset()
    log: list[RoundRecord] = []
    log_file = Path(log_path).open("w") if log_path is not None else None

    track_idx = 0
    env = envs[track_idx]
    s1 = env.start_state(0.0)
    lap_progress = 0.0
    sim_steps = 0
    learner = MlpPolicy(net)

    try:
        for round_no in range(1, params.rounds + 1):
            if params.step_budget is not None and sim_steps >= params.step_budget:
                break
            controllers = [TeacherController(spec, env) for spec in teacher_specs]

            learner_est = estimate_value(env, learner, "learner", s1, params, cfg, seed=round_no)
            teacher_ests = [
                estimate_value(env, c, spec.label, s1, params, cfg, seed=round_no)
                for spec, c in zip(teacher_specs, controllers)
            ]
            sim_steps += len(learner_est.trajectory) + sum(len(e.trajectory) for e in teacher_ests)

            if round_no == 1 and all(
                len(e.trajectory) == 1 and e.trajectory.terminal for e in teacher_ests
            ):
                raise DegenerateEnsembleError(
                    "every teacher reached a terminal state on its first step"
                )

            critic_idx = select_critical_teacher(teacher_ests)
            v_critic = teacher_ests[critic_idx].value
            adv = advantage(learner_est.value, v_critic)
            eps = epsilon_threshold(params.epsilon_mode, v_critic)

            labels_begin = len(dataset)
            episodes_used = 0
            final_adv = adv
            rehearsed = adv < 0.0
            if rehearsed:
                episodes_used, final_adv = rehearse(
                    env,
                    net,
                    adam,
                    controllers[critic_idx],
                    critic_idx,
                    v_critic,
                    s1,
                    params,
                    cfg,
                    dataset,
                    rng,
                )
                sim_steps += episodes_used * params.n_steps

            s1_arc, _, _ = _project(env, s1)
            record = RoundRecord(
                round=round_no,
                track_index=track_idx,
                start_arc=float(s1_arc),
                v_learner=learner_est.value,
                v_teachers=[e.value for e in teacher_ests],
                critic=critic_idx,
                advantage=float(adv),
                epsilon=float(eps),
                rehearsed=rehearsed,
                episodes_used=episodes_used,
                final_advantage=float(final_adv),
                labels_begin=labels_begin,
                labels_end=len(dataset),
                dataset_size=len(dataset),
                sim_steps=sim_steps,
            )
            log.append(record)
            if log_file is not None:
                log_file.write(record.to_json() + "\n")

            act_traj = rollout(env, learner, s1, params.act_steps)
            sim_steps += len(act_traj)
            if act_traj.terminal:
                new_s1 = respawn_state(env, act_traj.outcomes[-1].arc_progress)
            else:
                new_s1 = act_traj.outcomes[-1].next_state
            new_arc, _, _ = _project(env, new_s1)
            lap_progress += env.track.arc_delta(act_traj.start_arc, new_arc)
            if lap_progress >= env.track.total_length:
                track_idx = (track_idx + 1) % len(envs)
                env = envs[track_idx]
                s1 = env.start_state(0.0)
                lap_progress = 0.0
            else:
                s1 = new_s1
    finally:
        if log_file is not None:
            log_file.close()

    return OilResult(net=net, adam=adam, dataset=dataset, log=log)
