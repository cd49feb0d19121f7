"""Diffusion actor trained by deterministic policy gradient.

The actor is a conditional denoiser. An action is produced by a short chain
``a <- clamp(a - beta_k * eps(obs, a, k/K), -1, 1)`` for ``k = K..1``. The
evaluation chain starts from zero; the exploration chain starts from a
standard Gaussian and adds clipped noise after every step. Gradients flow
through all clamped steps, with the clamp passing gradient only strictly
inside the interval.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from ..config import AgentConfig
from ..env import EnvState, PlacementDecision, decode_continuous
from ..scenario import World
from .ddpg import NOISE_CLIP, ContinuousAgent, action_gradient, critic_step, soft_update
from .mlp import Adam, Mlp
from .replay import ReplayBuffer

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DiffusionSchedule:
    steps: int = 5
    beta_start: float = 1e-4
    beta_end: float = 0.1

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise ValueError("need at least one denoising step")
        if not (0.0 < self.beta_start < 1.0 and 0.0 < self.beta_end < 1.0):
            raise ValueError("betas must lie in (0, 1)")
        if self.steps > 1 and not self.beta_start < self.beta_end:
            raise ValueError("betas must increase strictly")

    @cached_property
    def betas(self) -> np.ndarray:
        """``betas[k - 1]`` is the step size at chain index ``k``."""
        if self.steps == 1:
            return np.array([self.beta_end])
        return np.linspace(self.beta_start, self.beta_end, self.steps)

    @cached_property
    def noise_scales(self) -> np.ndarray:
        """Training noise level per chain index: sqrt of the cumulative betas."""
        return np.sqrt(np.cumsum(self.betas))

    @classmethod
    def from_config(cls, config: AgentConfig) -> DiffusionSchedule:
        return cls(config.diffusion_steps, config.beta_start, config.beta_end)


def _input_buffer(obs: np.ndarray, action_dim: int) -> np.ndarray:
    """Denoiser input ``obs | action | level`` with the observation part filled in."""
    buf = np.empty(obs.shape[:-1] + (obs.shape[-1] + action_dim + 1,))
    buf[..., : obs.shape[-1]] = obs
    return buf


def _fill(buf: np.ndarray, obs_dim: int, action: np.ndarray, level: float) -> np.ndarray:
    buf[..., obs_dim:-1] = action
    buf[..., -1] = level
    return buf


def _clamp(x: np.ndarray, bound: float) -> np.ndarray:
    """In-place clamp to [-bound, bound]; np.clip has noticeable per-call overhead."""
    np.minimum(x, bound, out=x)
    np.maximum(x, -bound, out=x)
    return x


def d3pg_sample(
    denoiser: Mlp,
    obs: np.ndarray,
    schedule: DiffusionSchedule,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
    sigma: float = 0.1,
) -> np.ndarray:
    """Run the denoising chain; the result always lies in [-1, 1]^d."""
    obs = np.asarray(obs, dtype=float)
    shape = obs.shape[:-1] + (denoiser.sizes[-1],)
    if mode == "eval":
        a = np.zeros(shape)
    elif mode == "explore":
        if rng is None:
            raise ValueError("explore mode needs a random generator")
        a = rng.standard_normal(shape)
    else:
        raise ValueError(f"unknown sampling mode {mode!r}")
    betas = schedule.betas
    K = schedule.steps
    obs_dim = obs.shape[-1]
    buf = _input_buffer(obs, shape[-1])
    for k in range(K, 0, -1):
        eps = denoiser.forward(_fill(buf, obs_dim, a, k / K))
        eps *= -betas[k - 1]
        a = _clamp(eps + a, 1.0)
        if mode == "explore" and sigma > 0.0:
            noise = _clamp(sigma * rng.standard_normal(shape), NOISE_CLIP)
            a = _clamp(a + noise, 1.0)
    return a


def chain_forward(denoiser: Mlp, obs: np.ndarray, schedule: DiffusionSchedule):
    """Evaluation chain that records what :func:`chain_backward` needs."""
    obs = np.asarray(obs, dtype=float)
    a = np.zeros(obs.shape[:-1] + (denoiser.sizes[-1],))
    betas = schedule.betas
    K = schedule.steps
    obs_dim = obs.shape[-1]
    template = _input_buffer(obs, a.shape[-1])
    tape = []
    for k in range(K, 0, -1):
        # each step keeps its own input array alive in the cache
        eps, cache = denoiser.forward_cache(_fill(template.copy(), obs_dim, a, k / K))
        pre = a - betas[k - 1] * eps
        interior = (pre > -1.0) & (pre < 1.0)
        tape.append((betas[k - 1], cache, interior))
        a = np.clip(pre, -1.0, 1.0)
    return a, tape


def chain_backward(denoiser: Mlp, tape, upstream: np.ndarray, obs_dim: int) -> np.ndarray:
    """Flat parameter gradient of ``sum(upstream * a_0)`` through the whole chain."""
    action_dim = denoiser.sizes[-1]
    g = np.asarray(upstream, dtype=float)
    total = np.zeros_like(denoiser.flat)
    for i in range(len(tape) - 1, -1, -1):
        beta, cache, interior = tape[i]
        g_pre = g * interior
        # the first chain step starts from a constant, so its input gradient is unused
        grads, dx = denoiser.backward(cache, -beta * g_pre, input_grad=i > 0)
        total += grads
        if i > 0:
            g = g_pre + dx[..., obs_dim : obs_dim + action_dim]
    return total


def d3pg_train_step(
    buffer: ReplayBuffer,
    denoiser: Mlp,
    critic: Mlp,
    denoiser_target: Mlp,
    critic_target: Mlp,
    schedule: DiffusionSchedule,
    config: AgentConfig,
    actor_opt: Adam,
    critic_opt: Adam,
) -> float | None:
    if len(buffer) == 0:
        return None
    batch = buffer.sample(min(config.batch_size, len(buffer)))
    reward = batch.reward * config.reward_scale
    next_action = d3pg_sample(denoiser_target, batch.next_obs, schedule, "eval")
    q_next = critic_target.forward(np.hstack([batch.next_obs, next_action]))[:, 0]
    y = reward + config.gamma * (1.0 - batch.done) * q_next
    loss = critic_step(critic, critic_opt, batch, y)

    a0, tape = chain_forward(denoiser, batch.obs, schedule)
    _, dq_da = action_gradient(critic, batch.obs, a0)
    grads = chain_backward(denoiser, tape, -dq_da / len(a0), batch.obs.shape[1])
    actor_opt.step(grads)

    soft_update(critic_target, critic, config.tau)
    soft_update(denoiser_target, denoiser, config.tau)
    return loss


def pretrain_denoiser(
    trajectories: Sequence,
    denoiser: Mlp,
    epochs: int,
    schedule: DiffusionSchedule,
    *,
    rng: np.random.Generator | None = None,
    lr: float = 1e-3,
    batch_size: int = 64,
    optimizer: Adam | None = None,
) -> Mlp:
    """Denoising score matching on stored (observation, action) pairs.

    Each pair is perturbed as ``a + s_k * n`` at a random chain index ``k`` and
    the denoiser regresses ``n``. Updates ``denoiser`` in place and returns it.
    """
    pairs_obs, pairs_act = [], []
    for traj in trajectories:
        for obs, action in traj.pairs:
            pairs_obs.append(obs)
            pairs_act.append(action)
    if not pairs_obs:
        log.warning("no stored trajectories; denoiser pretraining skipped")
        return denoiser
    if epochs <= 0:
        return denoiser
    rng = rng if rng is not None else np.random.default_rng(0)
    optimizer = optimizer or Adam(denoiser.flat, lr)
    obs = np.asarray(pairs_obs, dtype=float)
    act = np.asarray(pairs_act, dtype=float)
    scales = schedule.noise_scales
    K = schedule.steps
    n = len(obs)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            k = rng.integers(1, K + 1, size=len(idx))
            noise = rng.standard_normal((len(idx), act.shape[1]))
            noisy = act[idx] + scales[k - 1][:, None] * noise
            inp = np.hstack([obs[idx], noisy, (k / K)[:, None]])
            pred, cache = denoiser.forward_cache(inp)
            grads, _ = denoiser.backward(cache, (pred - noise) / len(idx), input_grad=False)
            optimizer.step(grads)
    return denoiser


class D3pgAgent(ContinuousAgent):
    net_names = ("denoiser", "critic", "denoiser_target", "critic_target")

    def __init__(self, world: World, config: AgentConfig | None = None, seed: int = 0):
        super().__init__(world, config, seed)
        rng = np.random.default_rng([seed, 1])
        h = self.config.hidden
        self.schedule = DiffusionSchedule.from_config(self.config)
        self.denoiser = Mlp([self.obs_dim + self.action_dim + 1, h, h, self.action_dim], rng=rng)
        self.critic = Mlp([self.obs_dim + self.action_dim, h, h, 1], rng=rng, final_scale=3e-3)
        self.denoiser_target = self.denoiser.copy()
        self.critic_target = self.critic.copy()
        self.pretrain_rng = np.random.default_rng([seed, 5])
        self._rebuild_optimizers()

    def _rebuild_optimizers(self) -> None:
        self.actor_opt = Adam(self.denoiser.flat, self.config.actor_lr)
        self.critic_opt = Adam(self.critic.flat, self.config.critic_lr)
        self.pretrain_opt = Adam(self.denoiser.flat, self.config.critic_lr)

    def act(self, obs: np.ndarray, explore: bool = True) -> np.ndarray:
        mode = "explore" if explore else "eval"
        return d3pg_sample(self.denoiser, obs, self.schedule, mode, self.rng, self.config.explore_sigma)

    def decide(self, env: EnvState, obs: np.ndarray, explore: bool = True) -> tuple[PlacementDecision, np.ndarray]:
        action = self.act(obs, explore)
        return decode_continuous(action, env), action

    def train_step(self) -> float | None:
        if not self.ready():
            return None
        return d3pg_train_step(
            self.buffer, self.denoiser, self.critic, self.denoiser_target, self.critic_target,
            self.schedule, self.config, self.actor_opt, self.critic_opt,
        )

    def pretrain(self, trajectories: Sequence, epochs: int | None = None) -> None:
        epochs = self.config.pretrain_epochs if epochs is None else epochs
        pretrain_denoiser(
            trajectories, self.denoiser, epochs, self.schedule,
            rng=self.pretrain_rng, batch_size=self.config.batch_size, optimizer=self.pretrain_opt,
        )
        self.denoiser_target.soft_update_from(self.denoiser, 1.0)
