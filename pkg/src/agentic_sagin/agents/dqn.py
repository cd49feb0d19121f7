"""Deep Q-learning over the discrete placement catalogue."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..config import AgentConfig
from ..env import EnvState, PlacementDecision, decode_discrete
from ..scenario import World, enumerate_discrete_actions
from .mlp import Adam, Mlp
from .replay import Batch, ReplayBuffer


def dqn_select(q_net: Mlp, obs: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy; the greedy branch breaks ties toward the lowest index."""
    n_actions = q_net.sizes[-1]
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(n_actions))
    return int(np.argmax(q_net.forward(obs)))


def td_targets(batch: Batch, target_net: Mlp, gamma: float) -> np.ndarray:
    q_next = target_net.forward(batch.next_obs).max(axis=1)
    return batch.reward + gamma * (1.0 - batch.done) * q_next


def dqn_train_step(
    buffer: ReplayBuffer,
    q_net: Mlp,
    target_net: Mlp,
    config: AgentConfig,
    optimizer: Adam,
    reward_scale: float = 1.0,
) -> float | None:
    """One TD(0) regression step plus a soft target update; returns the loss."""
    if len(buffer) == 0:
        return None
    batch = buffer.sample(min(config.batch_size, len(buffer)))
    batch.reward = batch.reward * reward_scale
    y = td_targets(batch, target_net, config.gamma)
    q, cache = q_net.forward_cache(batch.obs)
    rows = np.arange(len(y))
    err = q[rows, batch.action] - y
    upstream = np.zeros_like(q)
    upstream[rows, batch.action] = err / len(y)
    grads, _ = q_net.backward(cache, upstream, input_grad=False)
    optimizer.step(grads)
    target_net.soft_update_from(q_net, config.tau)
    return float(0.5 * np.mean(err * err))


class DqnAgent:
    discrete = True
    needs_obs = True

    def __init__(self, world: World, config: AgentConfig | None = None, seed: int = 0):
        self.config = config = config or AgentConfig()
        self.catalogue = enumerate_discrete_actions(world)
        rng = np.random.default_rng([seed, 3])
        h = config.hidden
        self.q = Mlp([world.obs_dim, h, h, len(self.catalogue)], rng=rng)
        self.q_target = self.q.copy()
        self.optimizer = Adam(self.q.flat, config.critic_lr)
        self.buffer = ReplayBuffer(world.obs_dim, 0, config.buffer_capacity, seed=seed)
        self.rng = np.random.default_rng([seed, 4])
        self.epsilon = config.eps_start

    def begin_episode(self, episode: int) -> None:
        c = self.config
        frac = min(1.0, episode / max(c.eps_decay_episodes, 1))
        self.epsilon = c.eps_start + frac * (c.eps_end - c.eps_start)

    def decide(self, env: EnvState, obs: np.ndarray, explore: bool = True) -> tuple[PlacementDecision, int]:
        index = dqn_select(self.q, obs, self.epsilon if explore else 0.0, self.rng)
        return decode_discrete(index, env, self.catalogue), index

    def remember(self, obs, action, reward, next_obs, done) -> None:
        self.buffer.add(obs, action, reward, next_obs, done)

    def train_step(self) -> float | None:
        if len(self.buffer) < max(self.config.batch_size, self.config.warmup_steps):
            return None
        return dqn_train_step(
            self.buffer, self.q, self.q_target, self.config, self.optimizer, self.config.reward_scale
        )

    def save(self, directory: Path) -> None:
        directory.mkdir(parents=True, exist_ok=True)
        self.q.save(directory / "q.mlp")
        self.q_target.save(directory / "q_target.mlp")

    def load(self, directory: Path) -> None:
        path = directory / "q.mlp"
        if not path.exists():
            raise FileNotFoundError(f"missing agent artifact: {path}")
        self.q = Mlp.load(path, self.q.sizes)
        self.q_target = self.q.copy()
        self.optimizer = Adam(self.q.flat, self.config.critic_lr)
