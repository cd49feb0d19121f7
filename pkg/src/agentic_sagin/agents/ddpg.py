"""Deterministic policy gradient with a tanh actor and a state-action critic."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..config import AgentConfig
from ..env import EnvState, PlacementDecision, decode_continuous
from ..scenario import World
from .mlp import Adam, Mlp
from .replay import Batch, ReplayBuffer

NOISE_CLIP = 0.5


def ddpg_select(actor: Mlp, obs: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    action = actor.forward(obs)
    if sigma > 0.0:
        noise = np.clip(sigma * rng.standard_normal(action.shape), -NOISE_CLIP, NOISE_CLIP)
        action = action + noise
    return np.clip(action, -1.0, 1.0)


def soft_update(target: Mlp, online: Mlp, tau: float) -> None:
    target.soft_update_from(online, tau)


def critic_step(
    critic: Mlp, optimizer: Adam, batch: Batch, y: np.ndarray
) -> float:
    """Squared TD error step on Q(obs, action) toward fixed targets ``y``."""
    q, cache = critic.forward_cache(np.hstack([batch.obs, batch.action]))
    err = q[:, 0] - y
    grads, _ = critic.backward(cache, (err / len(y))[:, None], input_grad=False)
    optimizer.step(grads)
    return float(0.5 * np.mean(err * err))


def action_gradient(critic: Mlp, obs: np.ndarray, action: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (Q(obs, action), dQ/daction) for a batch."""
    q, cache = critic.forward_cache(np.hstack([obs, action]))
    _, dx = critic.backward(cache, np.ones_like(q), param_grads=False)
    return q[:, 0], dx[:, obs.shape[1]:]


class ContinuousAgent:
    """Shared plumbing for agents that emit an action vector in [-1, 1]^d."""

    discrete = False
    needs_obs = True
    net_names: tuple[str, ...] = ()

    def __init__(self, world: World, config: AgentConfig | None, seed: int):
        self.config = config or AgentConfig()
        self.obs_dim = world.obs_dim
        self.action_dim = world.action_dim
        self.buffer = ReplayBuffer(world.obs_dim, world.action_dim, self.config.buffer_capacity, seed=seed)
        self.rng = np.random.default_rng([seed, 2])

    def begin_episode(self, episode: int) -> None:
        pass

    def remember(self, obs, action, reward, next_obs, done) -> None:
        self.buffer.add(obs, action, reward, next_obs, done)

    def ready(self) -> bool:
        return len(self.buffer) >= max(self.config.batch_size, self.config.warmup_steps)

    def save(self, directory: Path) -> None:
        directory.mkdir(parents=True, exist_ok=True)
        for name in self.net_names:
            getattr(self, name).save(directory / f"{name}.mlp")

    def load(self, directory: Path) -> None:
        for name in self.net_names:
            path = directory / f"{name}.mlp"
            if not path.exists():
                raise FileNotFoundError(f"missing agent artifact: {path}")
            setattr(self, name, Mlp.load(path, getattr(self, name).sizes))
        self._rebuild_optimizers()

    def _rebuild_optimizers(self) -> None:
        raise NotImplementedError


class DdpgAgent(ContinuousAgent):
    net_names = ("actor", "critic", "actor_target", "critic_target")

    def __init__(self, world: World, config: AgentConfig | None = None, seed: int = 0):
        super().__init__(world, config, seed)
        rng = np.random.default_rng([seed, 1])
        h = self.config.hidden
        self.actor = Mlp([self.obs_dim, h, h, self.action_dim], "tanh", rng, final_scale=3e-3)
        self.critic = Mlp([self.obs_dim + self.action_dim, h, h, 1], rng=rng, final_scale=3e-3)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self._rebuild_optimizers()

    def _rebuild_optimizers(self) -> None:
        self.actor_opt = Adam(self.actor.flat, self.config.actor_lr)
        self.critic_opt = Adam(self.critic.flat, self.config.critic_lr)

    def act(self, obs: np.ndarray, explore: bool = True) -> np.ndarray:
        sigma = self.config.explore_sigma if explore else 0.0
        return ddpg_select(self.actor, obs, sigma, self.rng)

    def decide(self, env: EnvState, obs: np.ndarray, explore: bool = True) -> tuple[PlacementDecision, np.ndarray]:
        action = self.act(obs, explore)
        return decode_continuous(action, env), action

    def train_step(self) -> float | None:
        if not self.ready():
            return None
        return ddpg_train_step(
            self.buffer, self.actor, self.critic, self.actor_target, self.critic_target,
            self.config, self.actor_opt, self.critic_opt,
        )


def ddpg_train_step(
    buffer: ReplayBuffer,
    actor: Mlp,
    critic: Mlp,
    actor_target: Mlp,
    critic_target: Mlp,
    config: AgentConfig,
    actor_opt: Adam,
    critic_opt: Adam,
) -> float | None:
    if len(buffer) == 0:
        return None
    batch = buffer.sample(min(config.batch_size, len(buffer)))
    reward = batch.reward * config.reward_scale
    next_action = actor_target.forward(batch.next_obs)
    q_next = critic_target.forward(np.hstack([batch.next_obs, next_action]))[:, 0]
    y = reward + config.gamma * (1.0 - batch.done) * q_next
    loss = critic_step(critic, critic_opt, batch, y)

    action, cache = actor.forward_cache(batch.obs)
    _, dq_da = action_gradient(critic, batch.obs, action)
    grads, _ = actor.backward(cache, -dq_da / len(action), input_grad=False)
    actor_opt.step(grads)

    soft_update(critic_target, critic, config.tau)
    soft_update(actor_target, actor, config.tau)
    return loss
