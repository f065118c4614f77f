"""Learning methods: behavior cloning, PPO, SAC, IQL, GAE, and hindsight relabeling."""

from .bc import bc_update
from .gae import compute_gae
from .her import HERConfig, her_relabel
from .iql import IQLConfig, TwinQ, ValueFn, expectile_loss, iql_init, iql_update
from .ppo import PPOConfig, PPOLearner, ppo_init, ppo_update
from .replay import ReplayBuffer
from .sac import AlphaState, SACConfig, sac_init, sac_update

__all__ = [
    "AlphaState",
    "HERConfig",
    "IQLConfig",
    "PPOConfig",
    "PPOLearner",
    "ReplayBuffer",
    "SACConfig",
    "TwinQ",
    "ValueFn",
    "bc_update",
    "compute_gae",
    "expectile_loss",
    "her_relabel",
    "iql_init",
    "iql_update",
    "ppo_init",
    "ppo_update",
    "sac_init",
    "sac_update",
]
