"""Deterministic-policy-gradient baseline with replay buffer and target nets.

The actor reuses the learner architecture (tanh-squashed output); the critic
is the same stack over state features concatenated with the action, ending in
a single Q value. Training is driven by a dense per-step reward built from
centerline error shaping, unlike the trajectory-level scores used elsewhere.
In car mode the throttle is pinned and the actor learns steering only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .env import Env
from .mlp import (
    AdamState,
    Mlp,
    TrainingDivergenceError,
    adam_update,
    forward,
    init_weights,
    input_gradient,
    l2_loss,
    loss_gradients,
    make_adam,
    output_gradients,
)

HIDDEN = [64, 32, 16]


@dataclass(frozen=True)
class DdpgConfig:
    e_norm: float = 15.0
    v_norm: float = 800.0
    beta: float = 0.0  # 0 for the car, 1 for the uav
    r_penalty: float = -0.2
    fixed_throttle: float = 0.5  # car gas channel while learning steering only
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    tau: float = 0.005
    discount: float = 0.99
    buffer_capacity: int = 100_000
    noise_sigma: float = 0.1
    noise_sigma_final: float = 0.01
    warmup_steps: int = 1000
    batch_size: int = 64
    n_steps: int = 300  # episode length


def ddpg_dense_reward(e_n: float, e_next: float, v_f: float, terminal: bool, cfg: DdpgConfig) -> float:
    """Per-step shaped reward; the terminal case short-circuits to r_penalty."""
    if terminal:
        return cfg.r_penalty
    return (e_n - e_next) / cfg.e_norm + 1.0 / (e_next + 1.0) + cfg.beta * v_f / cfg.v_norm


class ReplayBuffer:
    """Fixed-capacity ring buffer of transitions with uniform sampling."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.terminals = np.zeros(capacity)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def add(self, s, a, r, s2, terminal) -> None:
        i = self._next
        self.states[i] = s
        self.actions[i] = a
        self.rewards[i] = r
        self.next_states[i] = s2
        self.terminals[i] = float(terminal)
        self._next = (self._next + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = rng.integers(0, self._size, size=batch_size)
        return (
            self.states[idx],
            self.actions[idx],
            self.rewards[idx],
            self.next_states[idx],
            self.terminals[idx],
        )


def soft_update(target: Mlp, online: Mlp, tau: float) -> None:
    """target <- tau * online + (1 - tau) * target, elementwise."""
    for tw, ow in zip(target.weights, online.weights):
        tw *= 1.0 - tau
        tw += tau * ow
    for tb, ob in zip(target.biases, online.biases):
        tb *= 1.0 - tau
        tb += tau * ob


@dataclass
class DdpgAgent:
    actor: Mlp
    critic: Mlp
    actor_target: Mlp
    critic_target: Mlp
    actor_adam: AdamState
    critic_adam: AdamState


def make_agent(state_dim: int, learned_action_dim: int, cfg: DdpgConfig, seed: int) -> DdpgAgent:
    actor = init_weights([state_dim] + HIDDEN + [learned_action_dim], seed, output_activation="tanh")
    critic = init_weights([state_dim + learned_action_dim] + HIDDEN + [1], seed + 1)
    return DdpgAgent(
        actor=actor,
        critic=critic,
        actor_target=actor.copy(),
        critic_target=critic.copy(),
        actor_adam=make_adam(actor, lr=cfg.actor_lr),
        critic_adam=make_adam(critic, lr=cfg.critic_lr),
    )


def _update(agent: DdpgAgent, buffer: ReplayBuffer, cfg: DdpgConfig, rng: np.random.Generator) -> float:
    """One critic + actor + target update; returns the critic loss."""
    s, a, r, s2, done = buffer.sample(cfg.batch_size, rng)

    a2 = forward(agent.actor_target, s2)
    q2 = forward(agent.critic_target, np.concatenate([s2, a2], axis=1))[:, 0]
    y = r + cfg.discount * (1.0 - done) * q2

    sa = np.concatenate([s, a], axis=1)
    loss, gw, gb = loss_gradients(agent.critic, sa, y[:, None])
    if not np.isfinite(loss):
        raise TrainingDivergenceError(f"critic loss diverged: {loss}")
    adam_update(agent.critic, agent.critic_adam, gw, gb)

    # actor ascends mean Q(s, actor(s)): upstream is -dQ/da through the critic
    a_pi = forward(agent.actor, s)
    sa_pi = np.concatenate([s, a_pi], axis=1)
    batch = s.shape[0]
    dq_din = input_gradient(agent.critic, sa_pi, np.full((batch, 1), 1.0 / batch))
    dq_da = dq_din[:, s.shape[1] :]
    gw, gb = output_gradients(agent.actor, s, -dq_da)
    adam_update(agent.actor, agent.actor_adam, gw, gb)

    soft_update(agent.actor_target, agent.actor, cfg.tau)
    soft_update(agent.critic_target, agent.critic, cfg.tau)
    return loss


def full_action(learned: np.ndarray, env: Env, cfg: DdpgConfig) -> np.ndarray:
    """Map the actor's output to the simulator's action vector."""
    if env.vehicle == "car":
        return np.array([cfg.fixed_throttle, float(learned[0])])
    return np.asarray(learned, dtype=float)


class DdpgPolicy:
    """Greedy policy view of a trained agent for evaluation."""

    def __init__(self, agent_or_actor, env: Env, cfg: DdpgConfig):
        self.actor = agent_or_actor.actor if isinstance(agent_or_actor, DdpgAgent) else agent_or_actor
        self.env = env
        self.cfg = cfg

    def reset(self) -> None:
        pass

    def act(self, obs) -> np.ndarray:
        learned = np.clip(forward(self.actor, obs.features), -1.0, 1.0)
        return full_action(learned, self.env, self.cfg)


def train_ddpg(
    envs: list[Env],
    cfg: DdpgConfig,
    total_steps: int,
    seed: int,
) -> DdpgAgent:
    """Off-policy training over rotating (track, checkpoint) episode starts.

    Uniform random actions fill the buffer during warmup; afterwards the
    behavior policy is the actor plus decaying Gaussian noise, with one
    gradient update per simulator step.
    """
    from .baselines import _episode_start, respawn_ahead

    rng = np.random.default_rng(seed)
    state_dim = envs[0].feature_dim
    act_dim = 1 if envs[0].vehicle == "car" else envs[0].action_dim
    agent = make_agent(state_dim, act_dim, cfg, seed)
    buffer = ReplayBuffer(cfg.buffer_capacity, state_dim, act_dim)

    episode = 0
    env, state = _episode_start(envs, episode)
    steps_in_episode = 0

    for step in range(total_steps):
        obs = env.observe(state)
        if step < cfg.warmup_steps:
            learned = rng.uniform(-1.0, 1.0, act_dim)
        else:
            frac = step / max(total_steps - 1, 1)
            sigma = cfg.noise_sigma + (cfg.noise_sigma_final - cfg.noise_sigma) * frac
            learned = forward(agent.actor, obs.features) + rng.normal(0.0, sigma, act_dim)
            learned = np.clip(learned, -1.0, 1.0)

        outcome = env.step(state, full_action(learned, env, cfg))
        r = ddpg_dense_reward(
            abs(obs.lateral_error),
            abs(outcome.lateral_error),
            outcome.forward_speed,
            outcome.terminal,
            cfg,
        )
        next_obs = env.observe(outcome.next_state)
        buffer.add(obs.features, learned, r, next_obs.features, outcome.terminal)

        if len(buffer) >= max(cfg.warmup_steps, cfg.batch_size):
            _update(agent, buffer, cfg, rng)

        steps_in_episode += 1
        if outcome.terminal or steps_in_episode >= cfg.n_steps:
            episode += 1
            env, state = _episode_start(envs, episode)
            steps_in_episode = 0
        else:
            state = outcome.next_state

    return agent
