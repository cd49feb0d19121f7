from __future__ import annotations

from ..config import AgentConfig
from ..orchestrator import PlannerChoice
from ..scenario import World
from .d3pg import D3pgAgent, DiffusionSchedule, d3pg_sample, d3pg_train_step, pretrain_denoiser
from .ddpg import DdpgAgent, ddpg_select, ddpg_train_step
from .dqn import DqnAgent, dqn_select, dqn_train_step
from .greedy import GreedyAgent, greedy_select
from .mlp import Adam, Mlp, mlp_forward, mlp_gradients
from .replay import ReplayBuffer

__all__ = [
    "Adam", "D3pgAgent", "DdpgAgent", "DiffusionSchedule", "DqnAgent", "GreedyAgent", "Mlp",
    "ReplayBuffer", "d3pg_sample", "d3pg_train_step", "ddpg_select", "ddpg_train_step",
    "dqn_select", "dqn_train_step", "greedy_select", "make_agent", "mlp_forward",
    "mlp_gradients", "pretrain_denoiser",
]


def make_agent(choice: PlannerChoice, world: World, config: AgentConfig | None = None, seed: int = 0):
    if choice in (PlannerChoice.LLM_SHAPED_D3PG, PlannerChoice.FIXED_D3PG):
        return D3pgAgent(world, config, seed)
    if choice is PlannerChoice.LLM_SHAPED_DDPG:
        return DdpgAgent(world, config, seed)
    if choice is PlannerChoice.LLM_SHAPED_DQN:
        return DqnAgent(world, config, seed)
    return GreedyAgent(world)
