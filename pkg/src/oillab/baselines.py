"""Imitation baselines: behavior cloning and dataset aggregation.

Both share the learner's architecture, feature encoding and optimizer.
Behavior cloning trains on states visited by the experts themselves;
dataset aggregation rolls out the learner from iteration two onward and
labels its visited states with the expert. With several teachers the data is
pooled indiscriminately (BC) or labeled by a per-episode round-robin expert
(DAGGER); neither filters out bad demonstrations, which is exactly what they
are here to show.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import Env
from .mlp import AdamState, Dataset, Mlp, MlpPolicy, make_adam, train_minibatch
from .teachers import TeacherController, TeacherSpec


@dataclass(frozen=True)
class ImitationParams:
    n_steps: int = 300  # episode length in simulator steps
    episodes_per_iter: int = 20
    iterations: int = 4
    train_steps_per_iter: int = 4000
    batch_size: int = 64
    dropout: float = 0.5

    @property
    def steps_per_iter(self) -> int:
        return self.n_steps * self.episodes_per_iter


def respawn_ahead(env: Env, arc_s: float):
    """Rest state at the next checkpoint ahead of the given arc length."""
    cps = env.track.checkpoints
    s = env.track.wrap_arc(arc_s)
    ahead = cps[cps > s]
    cp = float(ahead[0]) if len(ahead) else float(cps[0])
    return env.start_state(cp)


def _episode_start(envs: list[Env], episode: int):
    """Rotate episodes over (track, checkpoint) pairs for coverage."""
    env = envs[episode % len(envs)]
    cps = env.track.checkpoints
    cp = cps[(episode // len(envs)) % len(cps)]
    return env, env.start_state(float(cp))


def _collect_episode(
    env: Env,
    actor,
    labeler: TeacherController,
    start,
    n_steps: int,
    dataset: Dataset,
    source: int,
) -> None:
    """Exactly n_steps of the actor driving, every visited state labeled by
    the expert; the vehicle respawns at the next checkpoint on terminal."""
    actor.reset()
    labeler.reset()
    state = start
    for _ in range(n_steps):
        obs = env.observe(state)
        label = labeler.act(obs)
        action = label if actor is labeler else actor.act(obs)
        dataset.add(obs.features, label, source=source)
        outcome = env.step(state, action)
        if outcome.terminal:
            state = respawn_ahead(env, outcome.arc_progress)
            labeler.reset()
        else:
            state = outcome.next_state


def train_dagger(
    envs: list[Env],
    teacher_specs: list[TeacherSpec],
    params: ImitationParams,
    seed: int,
    net: Mlp | None = None,
) -> tuple[Mlp, AdamState, Dataset]:
    """Iterative imitation: expert rollouts first, learner rollouts with
    expert labels afterwards, training on the aggregate after each iteration.

    Multiple teachers are consumed round-robin, one expert per episode.
    """
    from .mlp import init_weights

    rng = np.random.default_rng(seed)
    if net is None:
        net = init_weights([envs[0].feature_dim] + [64, 32, 16] + [envs[0].action_dim], seed)
    adam = make_adam(net)
    dataset = Dataset()
    learner = MlpPolicy(net)

    episode_counter = 0
    for iteration in range(params.iterations):
        for _ in range(params.episodes_per_iter):
            env, start = _episode_start(envs, episode_counter)
            expert_idx = episode_counter % len(teacher_specs)
            labeler = TeacherController(teacher_specs[expert_idx], env)
            actor = labeler if iteration == 0 else learner
            _collect_episode(env, actor, labeler, start, params.n_steps, dataset, expert_idx)
            episode_counter += 1
        for _ in range(params.train_steps_per_iter):
            batch_x, batch_y = dataset.sample(params.batch_size, rng)
            train_minibatch(net, adam, batch_x, batch_y, params.dropout, rng)
    return net, adam, dataset


def train_bc(
    envs: list[Env],
    teacher_specs: list[TeacherSpec],
    params: ImitationParams,
    seed: int,
    net: Mlp | None = None,
) -> tuple[Mlp, AdamState, Dataset]:
    """Behavior cloning: a single expert-rollout iteration of train_dagger."""
    bc_params = ImitationParams(
        n_steps=params.n_steps,
        episodes_per_iter=params.episodes_per_iter,
        iterations=1,
        train_steps_per_iter=params.train_steps_per_iter,
        batch_size=params.batch_size,
        dropout=params.dropout,
    )
    return train_dagger(envs, teacher_specs, bc_params, seed, net)
